#include "chordvae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace chordvae {

double value_and_grad(const ParamStore& params, const ScalarGraph& f, Gradients& grads) {
  Tape tape;
  Var out = f(tape, params);
  tape.backward(out);
  tape.accumulate_param_grads(grads);
  return out.item();
}

GradCheckReport finite_difference_check(ParamStore& params, const ScalarGraph& f, double h,
                                        double tol, std::size_t stride) {
  Gradients analytic = params.zero_gradients();
  value_and_grad(params, f, analytic);

  auto eval = [&] {
    Tape tape;
    return f(tape, params).item();
  };

  GradCheckReport report;
  stride = std::max<std::size_t>(stride, 1);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = params.value(p);
    for (std::size_t i = 0; i < w.size(); i += stride) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = eval();
      w[i] = saved - h;
      const double down = eval();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[p][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        if (rel >= report.max_rel_error) {
          report.worst_param = params.name(p);
          report.worst_index = i;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace chordvae
