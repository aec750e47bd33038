#pragma once

#include "chordvae/ops.hpp"
#include "chordvae/rng.hpp"

namespace chordvae {

inline constexpr double kDefaultTemperature = 0.1;

// Sum over n,d of x log w + (1 - x) log(1 - w), with w clamped to
// [eps, 1 - eps]. `observed` is a constant; gradients flow into `omega`.
Var bernoulli_log_likelihood(Var observed, Var omega);

// KL(N(mean, exp(log_var)) || N(0, I)) summed over frames and latent dims.
Var kl_gaussian_standard(Var mean, Var log_var);

// -sum pi log pi, with 0 log 0 = 0. Rows must sum to 1 within 1e-6.
Var categorical_entropy(Var pi);

// E_q[log p(S)] for the uniform label prior, kept as the literal double sum
// -sum_{n,k} pi_nk log K so that the gradient with respect to pi is exact.
Var uniform_prior_expectation(Var pi);

// Standard Gumbel draws -log(-log u), u uniform on (0,1).
Tensor draw_gumbel(std::size_t rows, std::size_t cols, Rng& rng);
Tensor draw_standard_normal(std::size_t rows, std::size_t cols, Rng& rng);

// softmax((log pi + g) / tau) with pi floored at eps before the log.
Var gumbel_softmax_sample(Var pi, double tau, const Tensor& gumbel);

// mean + eps * exp(log_var / 2).
Var gaussian_reparam_sample(Var mean, Var log_var, const Tensor& eps);

// Throws ValidationError when any row of `pi` is off the simplex by more
// than `tol`.
void validate_simplex_rows(const Tensor& pi, double tol, const char* what);

}  // namespace chordvae
