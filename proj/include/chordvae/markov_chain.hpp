#pragma once

#include <string>

#include "chordvae/corpus.hpp"
#include "chordvae/ops.hpp"

namespace chordvae {

// First-order Markov prior over label sequences. `initial` is 1 x K and
// `trans(k', k)` is the probability of moving from k' to k.
struct TransitionModel {
  Tensor initial;
  Tensor trans;

  std::size_t size() const { return initial.cols(); }
  void validate() const;
  Tensor log_initial() const;
  Tensor log_trans() const;
  // `from,to,probability` rows plus an `initial` block.
  std::string to_csv() const;
};

// Diagonal p_self, off-diagonal (1 - p_self) / (K - 1), uniform initial.
TransitionModel make_self_transition_model(int k, double p_self);

double markov_log_prob(const ChordSequence& labels, const TransitionModel& m);

// E_q[log p(S)] for a factorized posterior q with rows `pi`, by the forward
// recursion
//   g_1(k) = log init_k,
//   g_n(k) = sum_k' pi_{n-1,k'} (g_{n-1}(k') + log trans_{k'k}),
//   result = sum_k pi_{N,k} g_N(k).
// Recorded on the tape so the prior term is differentiable in pi.
Var expected_markov_log_prob(Var pi, const TransitionModel& m);
double expected_markov_log_prob(const Tensor& pi, const TransitionModel& m);

// Exact enumeration over all K^N sequences. Refuses K^N > 1e6.
double brute_force_expected_log_prob(const Tensor& pi, const TransitionModel& m);

// MAP path of sum_n log pi_{n,s_n} + log p(S). Ties resolve to the smaller
// label index at every backpointer and at the final frame.
ChordSequence viterbi_decode(const Tensor& pi, const TransitionModel& m);

// Score maximized by viterbi_decode.
double path_log_score(const ChordSequence& path, const Tensor& pi, const TransitionModel& m);

// Number of n with s_n != s_{n-1}.
std::size_t count_transitions(const ChordSequence& path);

// Frame-wise argmax, first index on ties.
ChordSequence argmax_path(const Tensor& pi);

}  // namespace chordvae
