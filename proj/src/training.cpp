#include "chordvae/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

#include "chordvae/error.hpp"

namespace chordvae {

std::string mode_name(TrainingMode mode) {
  switch (mode) {
    case TrainingMode::kSupervisedBaseline: return "ace-sl";
    case TrainingMode::kVaeSupervised: return "vae-sl";
    case TrainingMode::kVaeSemiSupervised: return "vae-ssl";
    case TrainingMode::kVaeUnsupervised: return "vae-un";
  }
  return "?";
}

TrainingMode parse_mode(const std::string& name) {
  if (name == "ace-sl") return TrainingMode::kSupervisedBaseline;
  if (name == "vae-sl") return TrainingMode::kVaeSupervised;
  if (name == "vae-ssl") return TrainingMode::kVaeSemiSupervised;
  if (name == "vae-un") return TrainingMode::kVaeUnsupervised;
  throw ValidationError("unknown training mode '" + name + "'");
}

std::string prior_name(PriorKind kind) {
  return kind == PriorKind::kUniform ? "uniform" : "markov";
}

PriorKind parse_prior(const std::string& name) {
  if (name == "uniform") return PriorKind::kUniform;
  if (name == "markov") return PriorKind::kMarkov;
  throw ValidationError("unknown prior '" + name + "'");
}

void TrainingConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("training config: " + m); };
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_songs < 1) fail("batch_songs must be >= 1");
  if (frames_per_clip < 1) fail("frames_per_clip must be >= 1");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) fail("lr_decay must lie in (0,1]");
  if (!(grad_clip_norm > 0.0)) fail("grad_clip_norm must be > 0");
  if (!(tau > 0.0)) fail("tau must be > 0");
  if (!(annotated_batch_fraction >= 0.0 && annotated_batch_fraction <= 1.0)) {
    fail("annotated_batch_fraction must lie in [0,1]");
  }
  if (prior == PriorKind::kMarkov && !(p_self > 0.0 && p_self < 1.0)) {
    fail("p_self must lie in (0,1)");
  }
  if (threads < 1) fail("threads must be >= 1");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"mode", mode_name(mode)},
          {"prior", prior_name(prior)},
          {"p_self", p_self},
          {"epochs", epochs},
          {"batch_songs", batch_songs},
          {"frames_per_clip", frames_per_clip},
          {"learning_rate", learning_rate},
          {"lr_decay", lr_decay},
          {"grad_clip_norm", grad_clip_norm},
          {"tau", tau},
          {"seed", seed},
          {"annotated_batch_fraction", annotated_batch_fraction}};
}

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  try {
    c.mode = parse_mode(j.at("mode").get<std::string>());
    c.prior = parse_prior(j.at("prior").get<std::string>());
    c.p_self = j.at("p_self").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_songs = j.at("batch_songs").get<int>();
    c.frames_per_clip = j.at("frames_per_clip").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.lr_decay = j.at("lr_decay").get<double>();
    c.grad_clip_norm = j.at("grad_clip_norm").get<double>();
    c.tau = j.at("tau").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.annotated_batch_fraction = j.at("annotated_batch_fraction").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

LabelPrior TrainingConfig::make_prior(int k) const {
  return prior == PriorKind::kUniform ? LabelPrior::uniform(k) : LabelPrior::markov(k, p_self);
}

AdamOptimizer::AdamOptimizer(const ParamStore& params, double learning_rate)
    : lr_(learning_rate), m_(params.zero_gradients()), v_(params.zero_gradients()) {}

void AdamOptimizer::step(ParamStore& params, const Gradients& grads) {
  if (grads.size() != params.size()) throw ValidationError("adam: gradient count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params.value(i).data();
    auto g = grads[i].data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
      w[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + kEpsilon);
    }
  }
}

double global_norm(const Gradients& grads) {
  double s = 0.0;
  for (const Tensor& g : grads)
    for (double v : g.data()) s += v * v;
  return std::sqrt(s);
}

double clip_by_global_norm(Gradients& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads)
      for (double& v : g.data()) v *= scale;
  }
  return norm;
}

double learning_rate_at(const TrainingConfig& cfg, int epoch) {
  return cfg.learning_rate * std::pow(cfg.lr_decay, epoch);
}

std::string epoch_log_header() {
  return "epoch,mode,objective,reconstruction,kl_z,entropy_s,prior_s,xent,lr,grad_norm";
}

std::string epoch_log_row(const EpochLog& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", r.epoch,
                r.mode.c_str(), r.objective, r.reconstruction, r.kl_z, r.entropy_s, r.prior_s,
                r.xent, r.lr, r.grad_norm);
  return buf;
}

namespace {

ObjectiveTerms song_objective(Tape& tape, const ChordVae& vae, const BatchSong& song,
                              TrainingMode mode, const LabelPrior& prior, double tau) {
  Var x = tape.constant(song.chroma);
  switch (mode) {
    case TrainingMode::kSupervisedBaseline:
      return classification_objective(tape, vae, x, *song.labels);
    case TrainingMode::kVaeUnsupervised:
      return unsupervised_objective(tape, vae, x, prior, song.noise, tau);
    case TrainingMode::kVaeSupervised:
    case TrainingMode::kVaeSemiSupervised:
      if (song.labels) return supervised_objective(tape, vae, x, *song.labels, prior, song.noise, tau);
      return unsupervised_objective(tape, vae, x, prior, song.noise, tau);
  }
  throw ValidationError("unhandled training mode");
}

struct SongPass {
  Gradients grads;
  ObjectiveTerms terms;
  double value = 0.0;
};

SongPass run_song(const ChordVae& vae, const BatchSong& song, TrainingMode mode,
                  const LabelPrior& prior, double tau, double scale) {
  if (mode != TrainingMode::kVaeUnsupervised && mode != TrainingMode::kVaeSemiSupervised &&
      !song.labels) {
    throw ValidationError(mode_name(mode) + " requires annotated songs");
  }
  Tape tape;
  SongPass out;
  out.terms = song_objective(tape, vae, song, mode, prior, tau);
  out.value = out.terms.value.item();
  tape.backward(affine(out.terms.value, -scale, 0.0));
  out.grads = vae.params().zero_gradients();
  tape.accumulate_param_grads(out.grads);
  return out;
}

}  // namespace

BatchResult batch_gradients(const ChordVae& vae, const std::vector<BatchSong>& batch,
                            TrainingMode mode, const LabelPrior& prior, double tau, int threads) {
  if (batch.empty()) throw ValidationError("empty batch");
  BatchResult res;
  for (const BatchSong& s : batch) res.frames += s.chroma.rows();
  const double scale = 1.0 / static_cast<double>(res.frames);

  std::vector<SongPass> passes(batch.size());
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      passes[i] = run_song(vae, batch[i], mode, prior, tau, scale);
    }
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            passes[i] = run_song(vae, batch[i], mode, prior, tau, scale);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  res.grads = vae.params().zero_gradients();
  for (const SongPass& p : passes) {
    for (std::size_t i = 0; i < res.grads.size(); ++i) {
      auto dst = res.grads[i].data();
      auto src = p.grads[i].data();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    res.objective += p.value;
    res.totals.reconstruction += p.terms.reconstruction;
    res.totals.kl_z += p.terms.kl_z;
    res.totals.entropy_s += p.terms.entropy_s;
    res.totals.prior_s += p.terms.prior_s;
    res.totals.xent += p.terms.xent;
  }
  return res;
}

namespace {

// Cycles through a pool in freshly shuffled order.
class PoolSampler {
 public:
  PoolSampler(std::size_t size, Rng rng) : order_(size), rng_(std::move(rng)) { reshuffle(); }
  std::size_t next() {
    if (pos_ == order_.size()) reshuffle();
    return order_[pos_++];
  }
  bool empty() const { return order_.empty(); }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    for (std::size_t i = order_.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(i) - 1));
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

BatchSong make_clip(const Song& song, bool keep_labels, const TrainingConfig& cfg,
                    const EncoderConfig& enc, Rng rng) {
  const std::size_t frames = song.chroma.frames();
  const auto clip = static_cast<std::size_t>(cfg.frames_per_clip);
  std::size_t start = 0, count = frames;
  if (frames > clip) {
    start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(frames - clip)));
    count = clip;
  }
  const int shift = rng.uniform_int(0, kPitchClasses - 1);
  std::optional<ChordSequence> labels;
  if (keep_labels && song.labels) {
    labels = ChordSequence(song.labels->begin() + static_cast<std::ptrdiff_t>(start),
                           song.labels->begin() + static_cast<std::ptrdiff_t>(start + count));
  }
  RotatedPair rotated = pitch_rotate(song.chroma.crop(start, count), labels, shift);
  BatchSong out;
  out.chroma = rotated.chroma.to_tensor();
  out.labels = std::move(rotated.labels);
  out.noise = NoiseDraws::draw(count, static_cast<std::size_t>(enc.vocab),
                               static_cast<std::size_t>(enc.latent), rng);
  return out;
}

}  // namespace

TrainResult train(const TrainingData& data, const EncoderConfig& encoder,
                  const TrainingConfig& cfg_in, const EpochCallback& on_epoch) {
  encoder.validate();
  cfg_in.validate();
  TrainingConfig cfg = cfg_in;
  std::vector<std::string> warnings;

  // Pools of (song, keep labels).
  std::vector<std::pair<const Song*, bool>> labelled, unlabelled;
  switch (cfg.mode) {
    case TrainingMode::kSupervisedBaseline:
    case TrainingMode::kVaeSupervised:
      for (const Song& s : data.annotated) labelled.emplace_back(&s, true);
      break;
    case TrainingMode::kVaeSemiSupervised:
      for (const Song& s : data.annotated) labelled.emplace_back(&s, true);
      for (const Song& s : data.unannotated) unlabelled.emplace_back(&s, false);
      if (unlabelled.empty()) {
        warnings.emplace_back("no unannotated songs; vae-ssl degrades to vae-sl");
        cfg.mode = TrainingMode::kVaeSupervised;
      }
      break;
    case TrainingMode::kVaeUnsupervised:
      for (const Song& s : data.annotated) unlabelled.emplace_back(&s, false);
      for (const Song& s : data.unannotated) unlabelled.emplace_back(&s, false);
      if (unlabelled.empty()) throw ValidationError("vae-un needs at least one song");
      break;
  }
  if (cfg.mode != TrainingMode::kVaeUnsupervised && labelled.empty()) {
    throw ValidationError(mode_name(cfg.mode) + " needs at least one annotated song");
  }
  for (const auto& [song, keep] : labelled) {
    if (!song->labels) throw ValidationError("annotated song " + song->id + " has no labels");
  }

  // Annotated slots per batch.
  int n_labelled = cfg.batch_songs, n_unlabelled = 0;
  if (cfg.mode == TrainingMode::kVaeUnsupervised) {
    n_labelled = 0;
    n_unlabelled = cfg.batch_songs;
  } else if (cfg.mode == TrainingMode::kVaeSemiSupervised) {
    n_labelled = static_cast<int>(std::lround(cfg.annotated_batch_fraction * cfg.batch_songs));
    if (cfg.batch_songs >= 2) n_labelled = std::clamp(n_labelled, 1, cfg.batch_songs - 1);
    n_unlabelled = cfg.batch_songs - n_labelled;
  }

  const std::size_t pool_size = labelled.size() + unlabelled.size();
  const std::size_t iterations =
      (pool_size + static_cast<std::size_t>(cfg.batch_songs) - 1) /
      static_cast<std::size_t>(cfg.batch_songs);

  const LabelPrior prior = cfg.make_prior(encoder.vocab);
  ChordVae model(encoder, cfg.seed);
  AdamOptimizer adam(model.params(), cfg.learning_rate);
  const Rng root(cfg.seed);
  PoolSampler pick_labelled(labelled.size(), root.substream(101));
  PoolSampler pick_unlabelled(unlabelled.size(), root.substream(102));
  const Rng batch_root = root.substream(103);

  std::vector<EpochLog> log;
  std::uint64_t global_iter = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    adam.set_learning_rate(learning_rate_at(cfg, epoch));
    EpochLog row;
    row.epoch = epoch + 1;
    row.mode = mode_name(cfg_in.mode);
    row.lr = adam.learning_rate();
    std::size_t frames = 0;
    for (std::size_t it = 0; it < iterations; ++it, ++global_iter) {
      const Rng it_rng = batch_root.substream(global_iter);
      std::vector<BatchSong> batch;
      std::uint64_t slot = 0;
      for (int b = 0; b < n_labelled; ++b, ++slot) {
        const auto& [song, keep] = labelled[pick_labelled.next()];
        batch.push_back(make_clip(*song, keep, cfg, encoder, it_rng.substream(slot)));
      }
      for (int b = 0; b < n_unlabelled && !pick_unlabelled.empty(); ++b, ++slot) {
        const auto& [song, keep] = unlabelled[pick_unlabelled.next()];
        batch.push_back(make_clip(*song, keep, cfg, encoder, it_rng.substream(slot)));
      }
      BatchResult res = batch_gradients(model, batch, cfg.mode, prior, cfg.tau, cfg.threads);
      const double norm = clip_by_global_norm(res.grads, cfg.grad_clip_norm);
      if (!std::isfinite(norm) || !std::isfinite(res.objective)) {
        throw ValidationError("non-finite objective or gradient at epoch " +
                              std::to_string(epoch + 1));
      }
      adam.step(model.params(), res.grads);
      frames += res.frames;
      row.objective += res.objective;
      row.reconstruction += res.totals.reconstruction;
      row.kl_z += res.totals.kl_z;
      row.entropy_s += res.totals.entropy_s;
      row.prior_s += res.totals.prior_s;
      row.xent += res.totals.xent;
      row.grad_norm += norm;
    }
    const double f = static_cast<double>(frames);
    row.objective /= f;
    row.reconstruction /= f;
    row.kl_z /= f;
    row.entropy_s /= f;
    row.prior_s /= f;
    row.xent /= f;
    row.grad_norm /= static_cast<double>(iterations);
    log.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return TrainResult{std::move(model), std::move(log), std::move(warnings)};
}

}  // namespace chordvae
