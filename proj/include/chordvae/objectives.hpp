#pragma once

#include <optional>
#include <string>

#include "chordvae/corpus.hpp"
#include "chordvae/distributions.hpp"
#include "chordvae/markov_chain.hpp"
#include "chordvae/networks.hpp"

namespace chordvae {

enum class PriorKind { kUniform, kMarkov };

// p_phi(S): uniform over sequences, or a self-transition Markov chain.
class LabelPrior {
 public:
  static LabelPrior uniform(int k);
  static LabelPrior markov(int k, double p_self);

  PriorKind kind() const { return kind_; }
  double p_self() const { return p_self_; }  // 1/K for the uniform prior
  const TransitionModel& model() const { return model_; }
  // E_q[log p(S)] for factorized posteriors `pi`.
  Var expectation(Var pi) const;

 private:
  PriorKind kind_ = PriorKind::kUniform;
  double p_self_ = 0.0;
  TransitionModel model_;
};

// Noise for one song, drawn outside the objective so that gradients can be
// checked against a fixed draw. The two Gaussian draws feed the unsupervised
// and supervised bounds respectively.
struct NoiseDraws {
  Tensor gumbel;        // N x K
  Tensor latent_unsup;  // N x L
  Tensor latent_sup;    // N x L

  static NoiseDraws draw(std::size_t frames, std::size_t k, std::size_t l, Rng& rng);
};

// Posterior network outputs for one song, shared between objective terms.
struct Encodings {
  Var pi;       // N x K
  Var mean;     // N x L
  Var log_var;  // N x L
};

Encodings encode(Tape& tape, const ChordVae& vae, Var chroma);

struct ElboTerms {
  Var value;           // reconstruction - kl_z + entropy_s + prior_s
  Var reconstruction;  // log p(X | S~, Z)
  Var kl_z;
  Var entropy_s;
  Var prior_s;
};

ElboTerms unsupervised_elbo(Tape& tape, const ChordVae& vae, Var chroma, const Encodings& enc,
                            const LabelPrior& prior, const NoiseDraws& noise,
                            double tau = kDefaultTemperature);

struct BoundTerms {
  Var value;  // reconstruction - kl_z
  Var reconstruction;
  Var kl_z;
};

// Lower bound on log p(X|S) with one-hot labels and Z ~ q(Z|X).
BoundTerms supervised_lower_bound(Tape& tape, const ChordVae& vae, Var chroma,
                                  const Encodings& enc, const ChordSequence& labels,
                                  const Tensor& latent_noise);

// sum_n log pi_{n, s_n}, each factor floored at the clamp epsilon.
Var classification_log_likelihood(Var pi, const ChordSequence& labels);

Tensor one_hot(const ChordSequence& labels, std::size_t k);

// Per-song objective together with its parts. Unused parts stay at 0.
struct ObjectiveTerms {
  Var value;
  double reconstruction = 0.0;
  double kl_z = 0.0;
  double entropy_s = 0.0;
  double prior_s = 0.0;
  double xent = 0.0;  // log q(S|X)
};

// L_X + L_{X,S} + log q(S|X).
ObjectiveTerms supervised_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                    const ChordSequence& labels, const LabelPrior& prior,
                                    const NoiseDraws& noise, double tau = kDefaultTemperature);

// L_X alone.
ObjectiveTerms unsupervised_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                      const LabelPrior& prior, const NoiseDraws& noise,
                                      double tau = kDefaultTemperature);

// log q(S|X) alone.
ObjectiveTerms classification_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                        const ChordSequence& labels);

// One song of a mixed batch: supervised_objective when labels are present,
// unsupervised_objective otherwise.
struct BatchItem {
  const Tensor* chroma = nullptr;
  const ChordSequence* labels = nullptr;
  const NoiseDraws* noise = nullptr;
};

// Sum over all songs of L_X plus, over annotated songs, L_{X,S} + log q(S|X).
Var semi_supervised_objective(Tape& tape, const ChordVae& vae, const std::vector<BatchItem>& batch,
                              const LabelPrior& prior, double tau = kDefaultTemperature);

}  // namespace chordvae
