#include "chordvae/objectives.hpp"

#include "chordvae/error.hpp"

namespace chordvae {

LabelPrior LabelPrior::uniform(int k) {
  LabelPrior p;
  p.kind_ = PriorKind::kUniform;
  p.p_self_ = 1.0 / static_cast<double>(k);
  p.model_ = make_self_transition_model(k, p.p_self_);
  return p;
}

LabelPrior LabelPrior::markov(int k, double p_self) {
  LabelPrior p;
  p.kind_ = PriorKind::kMarkov;
  p.p_self_ = p_self;
  p.model_ = make_self_transition_model(k, p_self);
  return p;
}

Var LabelPrior::expectation(Var pi) const {
  if (kind_ == PriorKind::kUniform) return uniform_prior_expectation(pi);
  return expected_markov_log_prob(pi, model_);
}

NoiseDraws NoiseDraws::draw(std::size_t frames, std::size_t k, std::size_t l, Rng& rng) {
  NoiseDraws d;
  d.gumbel = draw_gumbel(frames, k, rng);
  d.latent_unsup = draw_standard_normal(frames, l, rng);
  d.latent_sup = draw_standard_normal(frames, l, rng);
  return d;
}

Encodings encode(Tape& tape, const ChordVae& vae, Var chroma) {
  const ParamStore& params = vae.params();
  Encodings enc;
  enc.pi = vae.classifier().classify(tape, params, chroma);
  auto q = vae.recognizer().recognize(tape, params, chroma);
  enc.mean = q.mean;
  enc.log_var = q.log_var;
  return enc;
}

ElboTerms unsupervised_elbo(Tape& tape, const ChordVae& vae, Var chroma, const Encodings& enc,
                            const LabelPrior& prior, const NoiseDraws& noise, double tau) {
  ElboTerms t;
  Var s = gumbel_softmax_sample(enc.pi, tau, noise.gumbel);
  Var z = gaussian_reparam_sample(enc.mean, enc.log_var, noise.latent_unsup);
  Var omega = vae.generator().generate(tape, vae.params(), s, z);
  t.reconstruction = bernoulli_log_likelihood(chroma, omega);
  t.kl_z = kl_gaussian_standard(enc.mean, enc.log_var);
  t.entropy_s = categorical_entropy(enc.pi);
  t.prior_s = prior.expectation(enc.pi);
  t.value = add(sub(t.reconstruction, t.kl_z), add(t.entropy_s, t.prior_s));
  return t;
}

Tensor one_hot(const ChordSequence& labels, std::size_t k) {
  Tensor out(labels.size(), k, 0.0);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const int s = labels[n];
    if (s < 0 || static_cast<std::size_t>(s) >= k) {
      throw ValidationError("label " + std::to_string(s) + " at frame " + std::to_string(n) +
                            " is outside the vocabulary");
    }
    out(n, static_cast<std::size_t>(s)) = 1.0;
  }
  return out;
}

BoundTerms supervised_lower_bound(Tape& tape, const ChordVae& vae, Var chroma,
                                  const Encodings& enc, const ChordSequence& labels,
                                  const Tensor& latent_noise) {
  if (labels.size() != chroma.rows()) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match frame count " + std::to_string(chroma.rows()));
  }
  BoundTerms t;
  Var s = tape.constant(one_hot(labels, static_cast<std::size_t>(vae.config().vocab)));
  Var z = gaussian_reparam_sample(enc.mean, enc.log_var, latent_noise);
  Var omega = vae.generator().generate(tape, vae.params(), s, z);
  t.reconstruction = bernoulli_log_likelihood(chroma, omega);
  t.kl_z = kl_gaussian_standard(enc.mean, enc.log_var);
  t.value = sub(t.reconstruction, t.kl_z);
  return t;
}

Var classification_log_likelihood(Var pi, const ChordSequence& labels) {
  if (labels.size() != pi.rows()) {
    throw ValidationError("label count " + std::to_string(labels.size()) +
                          " does not match posterior rows " + std::to_string(pi.rows()));
  }
  Var mask = pi.tape().constant(one_hot(labels, pi.cols()));
  return sum(mul(log(pi), mask));
}

ObjectiveTerms supervised_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                    const ChordSequence& labels, const LabelPrior& prior,
                                    const NoiseDraws& noise, double tau) {
  const Encodings enc = encode(tape, vae, chroma);
  const ElboTerms lx = unsupervised_elbo(tape, vae, chroma, enc, prior, noise, tau);
  const BoundTerms lxs = supervised_lower_bound(tape, vae, chroma, enc, labels, noise.latent_sup);
  Var xent = classification_log_likelihood(enc.pi, labels);
  ObjectiveTerms out;
  out.value = add(add(lx.value, lxs.value), xent);
  out.reconstruction = lx.reconstruction.item() + lxs.reconstruction.item();
  out.kl_z = lx.kl_z.item() + lxs.kl_z.item();
  out.entropy_s = lx.entropy_s.item();
  out.prior_s = lx.prior_s.item();
  out.xent = xent.item();
  return out;
}

ObjectiveTerms unsupervised_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                      const LabelPrior& prior, const NoiseDraws& noise,
                                      double tau) {
  const Encodings enc = encode(tape, vae, chroma);
  const ElboTerms lx = unsupervised_elbo(tape, vae, chroma, enc, prior, noise, tau);
  ObjectiveTerms out;
  out.value = lx.value;
  out.reconstruction = lx.reconstruction.item();
  out.kl_z = lx.kl_z.item();
  out.entropy_s = lx.entropy_s.item();
  out.prior_s = lx.prior_s.item();
  return out;
}

ObjectiveTerms classification_objective(Tape& tape, const ChordVae& vae, Var chroma,
                                        const ChordSequence& labels) {
  Var pi = vae.classifier().classify(tape, vae.params(), chroma);
  ObjectiveTerms out;
  out.value = classification_log_likelihood(pi, labels);
  out.xent = out.value.item();
  return out;
}

Var semi_supervised_objective(Tape& tape, const ChordVae& vae, const std::vector<BatchItem>& batch,
                              const LabelPrior& prior, double tau) {
  if (batch.empty()) throw ValidationError("semi_supervised_objective: empty batch");
  Var total;
  for (const BatchItem& item : batch) {
    Var x = tape.constant(*item.chroma);
    Var v = item.labels
                ? supervised_objective(tape, vae, x, *item.labels, prior, *item.noise, tau).value
                : unsupervised_objective(tape, vae, x, prior, *item.noise, tau).value;
    total = total.valid() ? add(total, v) : v;
  }
  return total;
}

}  // namespace chordvae
