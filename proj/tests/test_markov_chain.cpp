#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "chordvae/error.hpp"
#include "chordvae/gradcheck.hpp"
#include "chordvae/markov_chain.hpp"
#include "chordvae/rng.hpp"

using namespace chordvae;

namespace {

Tensor random_simplex(std::size_t r, std::size_t c, Rng& rng, double spread = 1.5) {
  Tensor t(r, c);
  for (std::size_t n = 0; n < r; ++n) {
    double s = 0.0;
    for (std::size_t k = 0; k < c; ++k) s += (t(n, k) = std::exp(spread * rng.normal()));
    for (std::size_t k = 0; k < c; ++k) t(n, k) /= s;
  }
  return t;
}

TransitionModel random_model(std::size_t k, Rng& rng) {
  return {random_simplex(1, k, rng), random_simplex(k, k, rng)};
}

Tensor one_hot(const ChordSequence& s, std::size_t k) {
  Tensor t(s.size(), k, 0.0);
  for (std::size_t n = 0; n < s.size(); ++n) t(n, static_cast<std::size_t>(s[n])) = 1.0;
  return t;
}

// Visits every label sequence of length n over k labels in lexicographic order.
void for_each_path(std::size_t n, std::size_t k, const std::function<void(const ChordSequence&)>& f) {
  ChordSequence s(n, 0);
  while (true) {
    f(s);
    std::size_t i = n;
    while (i > 0 && static_cast<std::size_t>(s[i - 1]) == k - 1) s[--i] = 0;
    if (i == 0) return;
    ++s[i - 1];
  }
}

// Independent closed form of E_q[log p(S)] for factorized q.
double pairwise_expectation(const Tensor& pi, const TransitionModel& m) {
  double e = 0.0;
  for (std::size_t k = 0; k < pi.cols(); ++k) e += pi(0, k) * std::log(m.initial[k]);
  for (std::size_t n = 1; n < pi.rows(); ++n)
    for (std::size_t a = 0; a < pi.cols(); ++a)
      for (std::size_t b = 0; b < pi.cols(); ++b)
        e += pi(n - 1, a) * pi(n, b) * std::log(m.trans(a, b));
  return e;
}

// Exhaustive MAP path, keeping the lexicographically first maximizer.
ChordSequence exhaustive_map(const Tensor& pi, const TransitionModel& m) {
  ChordSequence best;
  double best_score = -INFINITY;
  for_each_path(pi.rows(), pi.cols(), [&](const ChordSequence& s) {
    const double v = path_log_score(s, pi, m);
    if (v > best_score) best_score = v, best = s;
  });
  return best;
}

}  // namespace

TEST(TransitionModel, SelfTransitionConstruction) {
  const TransitionModel m = make_self_transition_model(97, 0.9);
  EXPECT_NO_THROW(m.validate());
  EXPECT_DOUBLE_EQ(m.trans(5, 5), 0.9);
  EXPECT_NEAR(m.trans(5, 6), 1.0416666666666667e-3, 1e-15);
  EXPECT_NEAR(m.initial[40], 1.0 / 97.0, 1e-15);
  for (std::size_t r = 0; r < 97; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 97; ++c) s += m.trans(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const TransitionModel u = make_self_transition_model(97, 1.0 / 97.0);
  for (double v : u.trans.data()) EXPECT_NEAR(v, 1.0 / 97.0, 1e-15);
}

TEST(TransitionModel, RejectsBadArguments) {
  EXPECT_THROW(make_self_transition_model(97, 0.0), ValidationError);
  EXPECT_THROW(make_self_transition_model(97, 1.0), ValidationError);
  EXPECT_THROW(make_self_transition_model(1, 0.5), ValidationError);
  TransitionModel m = make_self_transition_model(3, 0.5);
  m.trans(1, 1) += 1e-9;
  EXPECT_THROW(m.validate(), ValidationError);
}

TEST(TransitionModel, CsvDump) {
  const std::string csv = make_self_transition_model(2, 0.75).to_csv();
  EXPECT_EQ(csv, "from,to,probability\ninitial,0,0.5\ninitial,1,0.5\n0,0,0.75\n0,1,0.25\n"
                 "1,0,0.25\n1,1,0.75\n");
}

TEST(MarkovLogProb, KnownValuesAndLoopOracle) {
  const TransitionModel m = make_self_transition_model(97, 0.9);
  EXPECT_NEAR(markov_log_prob({12}, m), std::log(1.0 / 97.0), 1e-15);
  EXPECT_NEAR(markov_log_prob({12, 12}, m), std::log(1.0 / 97.0) + std::log(0.9), 1e-15);
  Rng rng(1);
  const TransitionModel r = random_model(5, rng);
  ChordSequence s(30);
  for (int& v : s) v = rng.uniform_int(0, 4);
  double prod = r.initial[static_cast<std::size_t>(s[0])];
  for (std::size_t n = 1; n < s.size(); ++n)
    prod *= r.trans(static_cast<std::size_t>(s[n - 1]), static_cast<std::size_t>(s[n]));
  EXPECT_NEAR(markov_log_prob(s, r), std::log(prod), 1e-12);
  EXPECT_THROW(markov_log_prob({5}, r), ValidationError);
}

TEST(ExpectedLogProb, OneHotCollapsesToSequenceLogProb) {
  Rng rng(2);
  const TransitionModel m = random_model(6, rng);
  const ChordSequence s = {0, 3, 3, 5, 1, 1, 1};
  EXPECT_NEAR(expected_markov_log_prob(one_hot(s, 6), m), markov_log_prob(s, m), 1e-12);
  EXPECT_NEAR(brute_force_expected_log_prob(one_hot(s, 6), m), markov_log_prob(s, m), 1e-12);
}

TEST(ExpectedLogProb, UniformModelGivesMinusNLogK) {
  Rng rng(3);
  const TransitionModel u = make_self_transition_model(97, 1.0 / 97.0);
  const Tensor pi = random_simplex(8, 97, rng);
  EXPECT_NEAR(expected_markov_log_prob(pi, u), -8.0 * std::log(97.0), 1e-10);
}

TEST(ExpectedLogProb, MatchesEnumerationOn81Sequences) {
  Rng rng(4);
  const Tensor pi = random_simplex(4, 3, rng);
  const TransitionModel m = random_model(3, rng);
  double oracle = 0.0;
  int visited = 0;
  for_each_path(4, 3, [&](const ChordSequence& s) {
    double q = 1.0;
    for (std::size_t n = 0; n < 4; ++n) q *= pi(n, static_cast<std::size_t>(s[n]));
    oracle += q * markov_log_prob(s, m);
    ++visited;
  });
  EXPECT_EQ(visited, 81);
  EXPECT_NEAR(expected_markov_log_prob(pi, m), oracle, 1e-10);
  EXPECT_NEAR(brute_force_expected_log_prob(pi, m), oracle, 1e-10);
}

TEST(ExpectedLogProb, RecursionBruteForceAndClosedFormAgree) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(2, 4));
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const Tensor pi = random_simplex(n, k, rng);
    const TransitionModel m = random_model(k, rng);
    const double rec = expected_markov_log_prob(pi, m);
    EXPECT_NEAR(rec, brute_force_expected_log_prob(pi, m), 1e-10) << "k=" << k << " n=" << n;
    EXPECT_NEAR(rec, pairwise_expectation(pi, m), 1e-10);
  }
}

TEST(ExpectedLogProb, SingleFrame) {
  Rng rng(6);
  const Tensor pi = random_simplex(1, 4, rng);
  const TransitionModel m = random_model(4, rng);
  double e = 0.0;
  for (std::size_t k = 0; k < 4; ++k) e += pi(0, k) * std::log(m.initial[k]);
  EXPECT_NEAR(brute_force_expected_log_prob(pi, m), e, 1e-14);
  EXPECT_NEAR(expected_markov_log_prob(pi, m), e, 1e-14);
}

TEST(ExpectedLogProb, BruteForceRefusesLargeInstances) {
  const Tensor pi(4, 97, 1.0 / 97.0);
  EXPECT_THROW(brute_force_expected_log_prob(pi, make_self_transition_model(97, 0.9)),
               ValidationError);
}

TEST(ExpectedLogProb, TapeValueAndGradient) {
  Rng rng(7);
  const TransitionModel m = random_model(4, rng);
  ParamStore ps;
  ps.add("logits", random_simplex(5, 4, rng));
  const ScalarGraph f = [&](Tape& t, const ParamStore& p) {
    return expected_markov_log_prob(softmax_rows(t.param(p, "logits")), m);
  };
  const GradCheckReport r = finite_difference_check(ps, f, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_rel_error;

  // Linear in each row with the others fixed: the gradient with respect to a
  // row does not depend on that row.
  const Tensor pi = random_simplex(5, 4, rng);
  auto row_grad = [&](const Tensor& p) {
    Tape t;
    Var v = t.variable(p);
    Var e = expected_markov_log_prob(v, m);
    EXPECT_NEAR(e.item(), expected_markov_log_prob(p, m), 1e-12);
    t.backward(e);
    return std::vector<double>(t.grad(v).row(2).begin(), t.grad(v).row(2).end());
  };
  Tensor moved = pi;
  const Tensor other = random_simplex(1, 4, rng);
  for (std::size_t k = 0; k < 4; ++k) moved(2, k) = other(0, k);
  const auto g0 = row_grad(pi), g1 = row_grad(moved);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(g0[k], g1[k], 1e-12);
}

TEST(Viterbi, UniformTransitionsGiveFramewiseArgmax) {
  Rng rng(8);
  const Tensor pi = random_simplex(40, 97, rng);
  const TransitionModel u = make_self_transition_model(97, 1.0 / 97.0);
  EXPECT_EQ(viterbi_decode(pi, u), argmax_path(pi));
  Tensor ties(3, 4, 0.25);
  ties(1, 3) = 0.4, ties(1, 0) = 0.2, ties(1, 1) = 0.2, ties(1, 2) = 0.2;
  EXPECT_EQ(viterbi_decode(ties, make_self_transition_model(4, 0.25)),
            (ChordSequence{0, 3, 0}));
}

TEST(Viterbi, MatchesExhaustiveSearch) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const Tensor pi = random_simplex(7, 4, rng);
    const TransitionModel m = trial % 2 ? random_model(4, rng)
                                        : make_self_transition_model(4, rng.uniform(0.1, 0.95));
    const ChordSequence v = viterbi_decode(pi, m);
    EXPECT_EQ(v, exhaustive_map(pi, m)) << "trial " << trial;
    EXPECT_GE(path_log_score(v, pi, m), path_log_score(argmax_path(pi), pi, m));
  }
}

TEST(Viterbi, TiesResolveToSmallerIndexLikeExhaustiveSearch) {
  // Fully symmetric instance: every path scores the same.
  const Tensor pi(5, 3, 1.0 / 3.0);
  const TransitionModel m = make_self_transition_model(3, 1.0 / 3.0);
  EXPECT_EQ(viterbi_decode(pi, m), (ChordSequence{0, 0, 0, 0, 0}));
  // Summation order perturbs exact ties in the last bits, so only scores compare.
  EXPECT_NEAR(path_log_score(exhaustive_map(pi, m), pi, m),
              path_log_score(viterbi_decode(pi, m), pi, m), 1e-12);
  // Two-way tie between staying on 1 and 2 throughout.
  Tensor two(4, 3, 0.0);
  for (std::size_t n = 0; n < 4; ++n) two(n, 1) = two(n, 2) = 0.5;
  const TransitionModel sticky = make_self_transition_model(3, 0.8);
  EXPECT_EQ(viterbi_decode(two, sticky), (ChordSequence{1, 1, 1, 1}));
  EXPECT_EQ(exhaustive_map(two, sticky), viterbi_decode(two, sticky));
}

TEST(Viterbi, AbsorbsSingleFrameBlip) {
  // A run of label 0 at posterior 0.45 with one frame preferring label 1 at 0.55.
  auto grid = [](std::size_t k) {
    Tensor pi(7, k, 0.0);
    for (std::size_t n = 0; n < 7; ++n) {
      pi(n, 0) = 0.45;
      for (std::size_t j = 1; j < k; ++j) pi(n, j) = 0.55 / static_cast<double>(k - 1);
    }
    pi(3, 0) = 0.45, pi(3, 1) = 0.55;
    for (std::size_t j = 2; j < k; ++j) pi(3, j) = 0.0;
    return pi;
  };
  const ChordSequence flat(7, 0);
  const Tensor small = grid(3);
  const TransitionModel m3 = make_self_transition_model(3, 0.9);
  EXPECT_EQ(exhaustive_map(small, m3), flat);
  EXPECT_EQ(viterbi_decode(small, m3), flat);
  const Tensor full = grid(97);
  const TransitionModel m97 = make_self_transition_model(97, 0.9);
  EXPECT_EQ(viterbi_decode(full, m97), flat);
  ChordSequence blip = flat;
  blip[3] = 1;
  EXPECT_GT(path_log_score(flat, full, m97), path_log_score(blip, full, m97));
  // Frame-wise decoding keeps the blip.
  EXPECT_EQ(argmax_path(full)[3], 1);
}

TEST(Viterbi, TransitionsNonIncreasingInSelfProbability) {
  Rng rng(10);
  const std::vector<double> p_self = {1.0 / 97.0, 0.3, 0.5, 0.7, 0.9};
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor pi = random_simplex(50, 97, rng, 1.0 + trial % 3);
    std::size_t prev = SIZE_MAX;
    for (double p : p_self) {
      const std::size_t c = count_transitions(viterbi_decode(pi, make_self_transition_model(97, p)));
      EXPECT_LE(c, prev) << "trial " << trial << " p_self " << p;
      prev = c;
    }
  }
}

TEST(Viterbi, Helpers) {
  EXPECT_EQ(count_transitions({}), 0u);
  EXPECT_EQ(count_transitions({4}), 0u);
  EXPECT_EQ(count_transitions({1, 1, 2, 2, 1, 96}), 3u);
  const Tensor pi = Tensor::from_values(2, 3, {0.2, 0.4, 0.4, 0.5, 0.1, 0.4});
  EXPECT_EQ(argmax_path(pi), (ChordSequence{1, 0}));
  const TransitionModel m = make_self_transition_model(3, 0.5);
  EXPECT_NEAR(path_log_score({1, 0}, pi, m),
              std::log(0.4) + std::log(0.5) + std::log(1.0 / 3.0) + std::log(0.25), 1e-14);
}
