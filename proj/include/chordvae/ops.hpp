#pragma once

#include <vector>

#include "chordvae/tape.hpp"

namespace chordvae {

inline constexpr double kClampEps = 1e-7;   // floor applied before every log
inline constexpr double kVarianceEps = 1e-5;  // layer_norm variance floor

// Differentiable operations. All operands are rank-2; errors name the op and
// the offending shapes.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var add_row(Var a, Var row);        // a[n,:] + row[0,:]
Var add_scalar(Var a, Var scalar);  // a + s broadcast, s is 1x1
Var affine(Var a, double scale, double shift);  // scale * a + shift
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a, double floor = kClampEps);  // log(max(a, floor))
Var clamp(Var a, double lo, double hi);
Var softmax_rows(Var a);
Var layer_norm(Var x, Var gain, Var bias, double var_eps = kVarianceEps);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var sum(Var a);
Var mean(Var a);

// Gated recurrent unit over a precomputed input projection.
// `inputs` is N x 3H holding [reset | update | candidate] pre-activations from
// the frame features; `recurrent` is H x 3H. With h_0 = 0:
//   r = sig(a_r + h U_r), u = sig(a_u + h U_u), c = tanh(a_c + r * (h U_c)),
//   h' = (1 - u) * c + u * h.
// `reverse` runs from the last frame to the first. Returns N x H.
Var gru_recurrence(Var inputs, Var recurrent, bool reverse);

// Plain-tensor matrix kernels shared with non-differentiable callers.
// c += a * b, c += a * b^T, c += a^T * b.
void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c);
void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c);

}  // namespace chordvae
