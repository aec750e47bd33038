#include "chordvae/markov_chain.hpp"

#include <cmath>
#include <sstream>

#include "chordvae/error.hpp"

namespace chordvae {
namespace {

Tensor log_of(const Tensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = std::log(t[i]);
  return out;
}

void require_grid(const Tensor& pi, const TransitionModel& m, const char* what) {
  if (pi.rank() != 2 || pi.rows() == 0 || pi.cols() != m.size()) {
    throw ValidationError(std::string(what) + ": posterior grid " + pi.shape_string() +
                          " does not match " + std::to_string(m.size()) + " states");
  }
}

}  // namespace

void TransitionModel::validate() const {
  const std::size_t k = initial.cols();
  if (initial.rows() != 1 || trans.rows() != k || trans.cols() != k) {
    throw ValidationError("transition model shapes " + initial.shape_string() + " and " +
                          trans.shape_string());
  }
  double s = 0.0;
  for (double v : initial.data()) {
    if (!(v > 0.0)) throw ValidationError("transition model: non-positive initial probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("transition model: initial row sum != 1");
  for (std::size_t r = 0; r < k; ++r) {
    double rs = 0.0;
    for (double v : trans.row(r)) {
      if (!(v > 0.0)) throw ValidationError("transition model: non-positive transition probability");
      rs += v;
    }
    if (std::abs(rs - 1.0) > 1e-12) {
      throw ValidationError("transition model: row " + std::to_string(r) + " sum != 1");
    }
  }
}

Tensor TransitionModel::log_initial() const { return log_of(initial); }
Tensor TransitionModel::log_trans() const { return log_of(trans); }

std::string TransitionModel::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "from,to,probability\n";
  for (std::size_t k = 0; k < size(); ++k) out << "initial," << k << ',' << initial[k] << '\n';
  for (std::size_t a = 0; a < size(); ++a)
    for (std::size_t b = 0; b < size(); ++b) out << a << ',' << b << ',' << trans(a, b) << '\n';
  return out.str();
}

TransitionModel make_self_transition_model(int k, double p_self) {
  if (k < 2) throw ValidationError("transition model needs at least 2 states");
  if (!(p_self > 0.0 && p_self < 1.0)) {
    throw ValidationError("self-transition probability must lie in (0,1)");
  }
  const auto n = static_cast<std::size_t>(k);
  TransitionModel m;
  m.initial = Tensor(1, n, 1.0 / static_cast<double>(k));
  m.trans = Tensor(n, n, (1.0 - p_self) / static_cast<double>(k - 1));
  for (std::size_t i = 0; i < n; ++i) m.trans(i, i) = p_self;
  return m;
}

double markov_log_prob(const ChordSequence& labels, const TransitionModel& m) {
  if (labels.empty()) throw ValidationError("markov_log_prob: empty sequence");
  for (int s : labels) {
    if (s < 0 || static_cast<std::size_t>(s) >= m.size()) {
      throw ValidationError("markov_log_prob: label " + std::to_string(s) + " out of range");
    }
  }
  double lp = std::log(m.initial[static_cast<std::size_t>(labels[0])]);
  for (std::size_t n = 1; n < labels.size(); ++n) {
    lp += std::log(m.trans(static_cast<std::size_t>(labels[n - 1]),
                           static_cast<std::size_t>(labels[n])));
  }
  return lp;
}

Var expected_markov_log_prob(Var pi, const TransitionModel& m) {
  require_grid(pi.value(), m, "expected_markov_log_prob");
  Tape& tape = pi.tape();
  Var log_a = tape.constant(m.log_trans());
  Var gamma = tape.constant(m.log_initial());
  const std::size_t n = pi.rows();
  for (std::size_t t = 1; t < n; ++t) {
    Var prev = slice_rows(pi, t - 1, 1);
    Var carried = sum(mul(prev, gamma));
    gamma = add_scalar(matmul(prev, log_a), carried);
  }
  return sum(mul(slice_rows(pi, n - 1, 1), gamma));
}

double expected_markov_log_prob(const Tensor& pi, const TransitionModel& m) {
  Tape tape;
  return expected_markov_log_prob(tape.constant(pi), m).item();
}

double brute_force_expected_log_prob(const Tensor& pi, const TransitionModel& m) {
  require_grid(pi, m, "brute_force_expected_log_prob");
  const std::size_t k = m.size(), n = pi.rows();
  double count = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    count *= static_cast<double>(k);
    if (count > 1e6) throw ValidationError("brute_force_expected_log_prob: K^N exceeds 1e6");
  }
  ChordSequence s(n, 0);
  double total = 0.0;
  while (true) {
    double weight = 1.0;
    for (std::size_t t = 0; t < n; ++t) weight *= pi(t, static_cast<std::size_t>(s[t]));
    total += weight * markov_log_prob(s, m);
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (static_cast<std::size_t>(++s[pos]) < k) break;
      s[pos] = 0;
      if (pos == 0) return total;
    }
  }
}

ChordSequence viterbi_decode(const Tensor& pi, const TransitionModel& m) {
  require_grid(pi, m, "viterbi_decode");
  const std::size_t k = m.size(), n = pi.rows();
  const Tensor log_a = m.log_trans();
  auto log_obs = [&](std::size_t t, std::size_t s) {
    return std::log(std::max(pi(t, s), kClampEps));
  };
  std::vector<double> delta(k), next(k);
  std::vector<int> back(n * k, 0);
  for (std::size_t s = 0; s < k; ++s) delta[s] = std::log(m.initial[s]) + log_obs(0, s);
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t s = 0; s < k; ++s) {
      std::size_t best = 0;
      double best_score = delta[0] + log_a(0, s);
      for (std::size_t p = 1; p < k; ++p) {
        const double score = delta[p] + log_a(p, s);
        if (score > best_score) {
          best_score = score;
          best = p;
        }
      }
      back[t * k + s] = static_cast<int>(best);
      next[s] = best_score + log_obs(t, s);
    }
    std::swap(delta, next);
  }
  std::size_t last = 0;
  for (std::size_t s = 1; s < k; ++s) {
    if (delta[s] > delta[last]) last = s;
  }
  ChordSequence path(n);
  path[n - 1] = static_cast<int>(last);
  for (std::size_t t = n - 1; t > 0; --t) {
    path[t - 1] = back[t * k + static_cast<std::size_t>(path[t])];
  }
  return path;
}

double path_log_score(const ChordSequence& path, const Tensor& pi, const TransitionModel& m) {
  require_grid(pi, m, "path_log_score");
  double score = markov_log_prob(path, m);
  for (std::size_t t = 0; t < path.size(); ++t) {
    score += std::log(std::max(pi(t, static_cast<std::size_t>(path[t])), kClampEps));
  }
  return score;
}

std::size_t count_transitions(const ChordSequence& path) {
  std::size_t c = 0;
  for (std::size_t t = 1; t < path.size(); ++t) c += path[t] != path[t - 1];
  return c;
}

ChordSequence argmax_path(const Tensor& pi) {
  ChordSequence path(pi.rows());
  for (std::size_t t = 0; t < pi.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t s = 1; s < pi.cols(); ++s) {
      if (pi(t, s) > pi(t, best)) best = s;
    }
    path[t] = static_cast<int>(best);
  }
  return path;
}

}  // namespace chordvae
