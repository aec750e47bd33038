#pragma once

#include <functional>
#include <string>

#include "chordvae/param_store.hpp"
#include "chordvae/tape.hpp"

namespace chordvae {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = true;
};

// Builds a scalar on the given tape from parameters bound with tape.param().
// Must be deterministic: any noise has to be drawn once, outside.
using ScalarGraph = std::function<Var(Tape&, const ParamStore&)>;

// Central differences against the reverse-mode gradient, per scalar entry.
// Relative error is |a - n| / max(|a|, |n|, 1e-8). `stride` > 1 checks every
// stride-th entry of each parameter.
GradCheckReport finite_difference_check(ParamStore& params, const ScalarGraph& f, double h,
                                        double tol, std::size_t stride = 1);

// Value and gradient of f in one sweep.
double value_and_grad(const ParamStore& params, const ScalarGraph& f, Gradients& grads);

}  // namespace chordvae
