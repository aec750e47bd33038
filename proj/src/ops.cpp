#include "chordvae/ops.hpp"

#include <cmath>
#include <memory>

#include <Eigen/Core>

#include "chordvae/error.hpp"

namespace chordvae {
namespace {

void require_matrix(const char* op, Var a) {
  if (a.value().rank() != 2) {
    throw ValidationError(std::string(op) + ": expected a matrix, got shape " +
                          a.value().shape_string());
  }
}

void require_same_shape(const char* op, Var a, Var b) {
  if (!a.value().same_shape(b.value())) {
    throw ValidationError(std::string(op) + ": shape mismatch " + a.value().shape_string() +
                          " vs " + b.value().shape_string());
  }
}

Tape& tape_of(const char* op, Var a) {
  if (!a.valid()) throw ValidationError(std::string(op) + ": invalid operand");
  return a.tape();
}

double sigmoid_scalar(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Elementwise op whose derivative is expressed through input and output.
template <typename F, typename D>
Var unary(const char* op, Var a, F f, D dfdx) {
  Tape& t = tape_of(op, a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, dfdx](Tape& tp, std::size_t self) {
    const Tensor& x = tp.value(ia);
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * dfdx(x[i], y[i]);
  });
}

}  // namespace

namespace {
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap view(const Tensor& t) { return ConstMap(t.data().data(), t.rows(), t.cols()); }
MutMap view(Tensor& t) { return MutMap(t.data().data(), t.rows(), t.cols()); }
}  // namespace

void gemm_nn(const Tensor& a, const Tensor& b, Tensor& c) {
  view(c).noalias() += view(a) * view(b);
}

void gemm_nt(const Tensor& a, const Tensor& b, Tensor& c) {
  view(c).noalias() += view(a) * view(b).transpose();
}

void gemm_tn(const Tensor& a, const Tensor& b, Tensor& c) {
  view(c).noalias() += view(a).transpose() * view(b);
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of("matmul", a);
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.cols() != b.rows()) {
    throw ValidationError("matmul: shape mismatch " + a.value().shape_string() + " x " +
                          b.value().shape_string());
  }
  Tensor c(a.rows(), b.cols());
  gemm_nn(a.value(), b.value(), c);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) gemm_nt(g, tp.value(ib), tp.grad(ia));
    if (tp.requires_grad(ib)) gemm_tn(tp.value(ia), g, tp.grad(ib));
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of("add", a);
  require_same_shape("add", a, b);
  Tensor c = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t id : {ia, ib}) {
      if (!tp.requires_grad(id)) continue;
      Tensor& gi = tp.grad(id);
      for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of("sub", a);
  require_same_shape("sub", a, b);
  Tensor c = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] -= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of("mul", a);
  require_same_shape("mul", a, b);
  Tensor c = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < c.size(); ++i) c[i] *= bv[i];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(c), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      const Tensor& bv = tp.value(ib);
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tp.requires_grad(ib)) {
      const Tensor& av = tp.value(ia);
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of("add_row", a);
  require_matrix("add_row", a);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ValidationError("add_row: shape mismatch " + a.value().shape_string() + " + " +
                          row.value().shape_string());
  }
  Tensor c = a.value();
  const Tensor& r = row.value();
  const std::size_t n = c.rows(), m = c.cols();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) c(i, j) += r[j];
  const std::size_t ia = a.id(), ir = row.id();
  return t.record(std::move(c), {a, row}, [ia, ir](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ir)) {
      Tensor& gr = tp.grad(ir);
      const std::size_t n = g.rows(), m = g.cols();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gr[j] += g(i, j);
    }
  });
}

Var add_scalar(Var a, Var scalar) {
  Tape& t = tape_of("add_scalar", a);
  if (scalar.value().size() != 1) {
    throw ValidationError("add_scalar: expected 1x1 scalar, got " +
                          scalar.value().shape_string());
  }
  Tensor c = a.value();
  const double s = scalar.value()[0];
  for (std::size_t i = 0; i < c.size(); ++i) c[i] += s;
  const std::size_t ia = a.id(), is = scalar.id();
  return t.record(std::move(c), {a, scalar}, [ia, is](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(is)) {
      double s = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
      tp.grad(is)[0] += s;
    }
  });
}

Var affine(Var a, double scale, double shift) {
  return unary(
      "affine", a, [scale, shift](double x) { return scale * x + shift; },
      [scale](double, double) { return scale; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a, double floor) {
  return unary(
      "log", a, [floor](double x) { return std::log(x < floor ? floor : x); },
      [floor](double x, double) { return x < floor ? 0.0 : 1.0 / x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      "clamp", a, [lo, hi](double x) { return x < lo ? lo : (x > hi ? hi : x); },
      [lo, hi](double x, double) { return (x < lo || x > hi) ? 0.0 : 1.0; });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of("softmax_rows", a);
  require_matrix("softmax_rows", a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  const std::size_t n = x.rows(), m = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = x(i, 0);
    for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, x(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      y(i, j) = std::exp(x(i, j) - mx);
      z += y(i, j);
    }
    for (std::size_t j = 0; j < m; ++j) y(i, j) /= z;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia](Tape& tp, std::size_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    const std::size_t n = y.rows(), m = y.cols();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < m; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < m; ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var layer_norm(Var x, Var gain, Var bias, double var_eps) {
  Tape& t = tape_of("layer_norm", x);
  require_matrix("layer_norm", x);
  const std::size_t n = x.rows(), m = x.cols();
  if (gain.rows() != 1 || gain.cols() != m || bias.rows() != 1 || bias.cols() != m) {
    throw ValidationError("layer_norm: shape mismatch " + x.value().shape_string() +
                          " with gain " + gain.value().shape_string() + " and bias " +
                          bias.value().shape_string());
  }
  struct Cache {
    Tensor xhat;
    std::vector<double> inv_std;
  };
  auto cache = std::make_shared<Cache>();
  cache->xhat = Tensor(n, m);
  cache->inv_std.resize(n);
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < m; ++j) mu += xv(i, j);
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t j = 0; j < m; ++j) var += (xv(i, j) - mu) * (xv(i, j) - mu);
    var /= static_cast<double>(m);
    const double inv = 1.0 / std::sqrt(var + var_eps);
    cache->inv_std[i] = inv;
    for (std::size_t j = 0; j < m; ++j) {
      const double xh = (xv(i, j) - mu) * inv;
      cache->xhat(i, j) = xh;
      y(i, j) = xh * gv[j] + bv[j];
    }
  }
  const std::size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return t.record(std::move(y), {x, gain, bias}, [ix, ig, ib, cache](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& xh = cache->xhat;
    const std::size_t n = g.rows(), m = g.cols();
    if (tp.requires_grad(ig)) {
      Tensor& gg = tp.grad(ig);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gg[j] += g(i, j) * xh(i, j);
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad(ib);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gb[j] += g(i, j);
    }
    if (tp.requires_grad(ix)) {
      const Tensor& gv = tp.value(ig);
      Tensor& gx = tp.grad(ix);
      const double inv_m = 1.0 / static_cast<double>(m);
      for (std::size_t i = 0; i < n; ++i) {
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          const double dxh = g(i, j) * gv[j];
          s1 += dxh;
          s2 += dxh * xh(i, j);
        }
        for (std::size_t j = 0; j < m; ++j) {
          const double dxh = g(i, j) * gv[j];
          gx(i, j) += cache->inv_std[i] * (dxh - inv_m * s1 - xh(i, j) * inv_m * s2);
        }
      }
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_cols: no operands");
  Tape& t = tape_of("concat_cols", parts[0]);
  const std::size_t n = parts[0].rows();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != n) {
      throw ValidationError("concat_cols: row mismatch " + parts[0].value().shape_string() +
                            " vs " + p.value().shape_string());
    }
    total += p.cols();
  }
  Tensor y(n, total);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) y(i, off + j) = v(i, j);
    ids.push_back(p.id());
    offsets.push_back(off);
    off += v.cols();
  }
  return t.record(std::move(y), parts, [ids, offsets](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& gp = tp.grad(ids[k]);
      const std::size_t n = gp.rows(), m = gp.cols();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) gp(i, j) += g(i, offsets[k] + j);
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ValidationError("concat_rows: no operands");
  Tape& t = tape_of("concat_rows", parts[0]);
  const std::size_t m = parts[0].cols();
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != m) {
      throw ValidationError("concat_rows: column mismatch " +
                            parts[0].value().shape_string() + " vs " +
                            p.value().shape_string());
    }
    total += p.rows();
  }
  Tensor y(total, m);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const auto src = p.value().data();
    std::copy(src.begin(), src.end(), y.data().begin() + static_cast<std::ptrdiff_t>(off * m));
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.rows();
  }
  return t.record(std::move(y), parts, [ids, offsets, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor& gp = tp.grad(ids[k]);
      const std::size_t base = offsets[k] * m;
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[base + i];
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of("slice_cols", a);
  require_matrix("slice_cols", a);
  if (count == 0 || start + count > a.cols()) {
    throw ValidationError("slice_cols: range [" + std::to_string(start) + "," +
                          std::to_string(start + count) + ") outside " +
                          a.value().shape_string());
  }
  const Tensor& x = a.value();
  const std::size_t n = x.rows();
  Tensor y(n, count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = x(i, start + j);
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, start](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, start + j) += g(i, j);
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  Tape& t = tape_of("slice_rows", a);
  require_matrix("slice_rows", a);
  if (count == 0 || start + count > a.rows()) {
    throw ValidationError("slice_rows: range [" + std::to_string(start) + "," +
                          std::to_string(start + count) + ") outside " +
                          a.value().shape_string());
  }
  const Tensor& x = a.value();
  const std::size_t m = x.cols();
  std::vector<double> vals(x.data().begin() + static_cast<std::ptrdiff_t>(start * m),
                           x.data().begin() + static_cast<std::ptrdiff_t>((start + count) * m));
  Tensor y = Tensor::from_values(count, m, std::move(vals));
  const std::size_t ia = a.id();
  return t.record(std::move(y), {a}, [ia, start, m](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    Tensor& ga = tp.grad(ia);
    const std::size_t base = start * m;
    for (std::size_t i = 0; i < g.size(); ++i) ga[base + i] += g[i];
  });
}

Var sum(Var a) {
  Tape& t = tape_of("sum", a);
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return t.record(Tensor::scalar(s), {a}, [ia](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)[0];
    Tensor& ga = tp.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return affine(sum(a), 1.0 / n, 0.0);
}

Var gru_recurrence(Var inputs, Var recurrent, bool reverse) {
  Tape& t = tape_of("gru_recurrence", inputs);
  require_matrix("gru_recurrence", inputs);
  require_matrix("gru_recurrence", recurrent);
  const std::size_t n = inputs.rows();
  const std::size_t h = recurrent.rows();
  if (recurrent.cols() != 3 * h || inputs.cols() != 3 * h) {
    throw ValidationError("gru_recurrence: shape mismatch inputs " +
                          inputs.value().shape_string() + " recurrent " +
                          recurrent.value().shape_string());
  }
  struct Cache {
    Tensor r, u, c, hc;  // N x H each; hc = (h_prev U_c)
  };
  auto cache = std::make_shared<Cache>();
  cache->r = Tensor(n, h);
  cache->u = Tensor(n, h);
  cache->c = Tensor(n, h);
  cache->hc = Tensor(n, h);
  Tensor out(n, h);
  const Tensor& a = inputs.value();
  const Tensor& uw = recurrent.value();
  Tensor hprev(1, h, 0.0);
  Tensor hu(1, 3 * h);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t fr = reverse ? n - 1 - step : step;
    hu.fill(0.0);
    gemm_nn(hprev, uw, hu);
    for (std::size_t j = 0; j < h; ++j) {
      const double r = sigmoid_scalar(a(fr, j) + hu[j]);
      const double u = sigmoid_scalar(a(fr, h + j) + hu[h + j]);
      const double c = std::tanh(a(fr, 2 * h + j) + r * hu[2 * h + j]);
      cache->r(fr, j) = r;
      cache->u(fr, j) = u;
      cache->c(fr, j) = c;
      cache->hc(fr, j) = hu[2 * h + j];
      out(fr, j) = (1.0 - u) * c + u * hprev[j];
    }
    for (std::size_t j = 0; j < h; ++j) hprev[j] = out(fr, j);
  }
  const std::size_t ia = inputs.id(), iu = recurrent.id();
  return t.record(std::move(out), {inputs, recurrent},
                  [ia, iu, reverse, cache](Tape& tp, std::size_t self) {
    const Tensor& g = tp.grad(self);
    const Tensor& hs = tp.value(self);
    const Tensor& uw = tp.value(iu);
    const std::size_t n = hs.rows(), h = hs.cols();
    const bool want_a = tp.requires_grad(ia);
    const bool want_u = tp.requires_grad(iu);
    Tensor* ga = want_a ? &tp.grad(ia) : nullptr;
    Tensor* gu = want_u ? &tp.grad(iu) : nullptr;
    Tensor carry(1, h, 0.0);
    Tensor dhu(1, 3 * h);
    Tensor hprev(1, h);
    // Rows of previous states and recurrent pre-activation gradients, reduced
    // into the recurrent weight gradient with one product after the sweep.
    Tensor hprev_all(n, h, 0.0);
    Tensor dhu_all(n, 3 * h, 0.0);
    for (std::size_t step = n; step-- > 0;) {
      const std::size_t fr = reverse ? n - 1 - step : step;
      const bool first = step == 0;
      const std::size_t prev = reverse ? fr + 1 : fr - 1;
      for (std::size_t j = 0; j < h; ++j) hprev[j] = first ? 0.0 : hs(prev, j);
      Tensor dhp(1, h);
      for (std::size_t j = 0; j < h; ++j) {
        const double dh = g(fr, j) + carry[j];
        const double r = cache->r(fr, j), u = cache->u(fr, j), c = cache->c(fr, j);
        const double du = dh * (hprev[j] - c);
        const double dc = dh * (1.0 - u);
        dhp[j] = dh * u;
        const double dac = dc * (1.0 - c * c);
        const double dr = dac * cache->hc(fr, j);
        const double dar = dr * r * (1.0 - r);
        const double dau = du * u * (1.0 - u);
        dhu[j] = dar;
        dhu[h + j] = dau;
        dhu[2 * h + j] = dac * r;
        if (ga) {
          (*ga)(fr, j) += dar;
          (*ga)(fr, h + j) += dau;
          (*ga)(fr, 2 * h + j) += dac;
        }
      }
      if (gu && !first) {
        for (std::size_t j = 0; j < h; ++j) hprev_all(step, j) = hprev[j];
        for (std::size_t j = 0; j < 3 * h; ++j) dhu_all(step, j) = dhu[j];
      }
      gemm_nt(dhu, uw, dhp);
      carry = std::move(dhp);
    }
    if (gu) gemm_tn(hprev_all, dhu_all, *gu);
  });
}

}  // namespace chordvae
