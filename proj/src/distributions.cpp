#include "chordvae/distributions.hpp"

#include <cmath>
#include <sstream>

#include "chordvae/error.hpp"

namespace chordvae {

Var bernoulli_log_likelihood(Var observed, Var omega) {
  if (!observed.value().same_shape(omega.value())) {
    throw ValidationError("bernoulli_log_likelihood: shape mismatch " +
                          observed.value().shape_string() + " vs " +
                          omega.value().shape_string());
  }
  Var w = clamp(omega, kClampEps, 1.0 - kClampEps);
  Var miss = affine(observed, -1.0, 1.0);
  return sum(add(mul(observed, log(w)), mul(miss, log(affine(w, -1.0, 1.0)))));
}

Var kl_gaussian_standard(Var mean, Var log_var) {
  if (!mean.value().same_shape(log_var.value())) {
    throw ValidationError("kl_gaussian_standard: shape mismatch " +
                          mean.value().shape_string() + " vs " +
                          log_var.value().shape_string());
  }
  // (sigma^2 + mu^2 - 1) / 2 - log sigma, with log sigma = log_var / 2.
  Var inner = sub(add(exp(log_var), mul(mean, mean)), log_var);
  return affine(sum(affine(inner, 1.0, -1.0)), 0.5, 0.0);
}

void validate_simplex_rows(const Tensor& pi, double tol, const char* what) {
  for (std::size_t n = 0; n < pi.rows(); ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < pi.cols(); ++k) {
      if (pi(n, k) < 0.0) {
        throw ValidationError(std::string(what) + ": negative probability at row " +
                              std::to_string(n));
      }
      s += pi(n, k);
    }
    if (std::abs(s - 1.0) > tol) {
      std::ostringstream msg;
      msg << what << ": row " << n << " sums to " << s;
      throw ValidationError(msg.str());
    }
  }
}

Var categorical_entropy(Var pi) {
  validate_simplex_rows(pi.value(), 1e-6, "categorical_entropy");
  // log() floors at eps, so zero entries contribute 0 * log(eps) = 0.
  return affine(sum(mul(pi, log(pi))), -1.0, 0.0);
}

Var uniform_prior_expectation(Var pi) {
  const double log_k = std::log(static_cast<double>(pi.cols()));
  return affine(sum(pi), -log_k, 0.0);
}

Tensor draw_gumbel(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor g(rows, cols);
  for (double& v : g.data()) v = -std::log(-std::log(rng.uniform_open()));
  return g;
}

Tensor draw_standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor e(rows, cols);
  for (double& v : e.data()) v = rng.normal();
  return e;
}

Var gumbel_softmax_sample(Var pi, double tau, const Tensor& gumbel) {
  if (!(tau > 0.0)) throw ValidationError("gumbel_softmax_sample: temperature must be positive");
  if (!gumbel.same_shape(pi.value())) {
    throw ValidationError("gumbel_softmax_sample: noise shape " + gumbel.shape_string() +
                          " vs " + pi.value().shape_string());
  }
  Var logits = add(log(pi), pi.tape().constant(gumbel));
  return softmax_rows(affine(logits, 1.0 / tau, 0.0));
}

Var gaussian_reparam_sample(Var mean, Var log_var, const Tensor& eps) {
  if (!eps.same_shape(mean.value()) || !mean.value().same_shape(log_var.value())) {
    throw ValidationError("gaussian_reparam_sample: shape mismatch");
  }
  Var sigma = exp(affine(log_var, 0.5, 0.0));
  return add(mean, mul(mean.tape().constant(eps), sigma));
}

}  // namespace chordvae
