#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chordvae/corpus.hpp"
#include "chordvae/networks.hpp"
#include "chordvae/objectives.hpp"

namespace chordvae {

enum class TrainingMode {
  kSupervisedBaseline,  // ace-sl: log q(S|X) only
  kVaeSupervised,       // vae-sl: supervised objective on annotated songs
  kVaeSemiSupervised,   // vae-ssl: mixed batches
  kVaeUnsupervised,     // vae-un: L_X on every song, labels unused
};

std::string mode_name(TrainingMode mode);
TrainingMode parse_mode(const std::string& name);
std::string prior_name(PriorKind kind);
PriorKind parse_prior(const std::string& name);

struct TrainingConfig {
  TrainingMode mode = TrainingMode::kVaeSemiSupervised;
  PriorKind prior = PriorKind::kMarkov;
  double p_self = 0.9;
  int epochs = 60;
  int batch_songs = 16;
  int frames_per_clip = 645;
  double learning_rate = 1e-3;
  double lr_decay = 0.99;
  double grad_clip_norm = 5.0;
  double tau = kDefaultTemperature;
  std::uint64_t seed = 0;
  double annotated_batch_fraction = 0.5;
  int threads = 1;  // not part of the result; any value gives identical output

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
  LabelPrior make_prior(int k) const;
};

// Adam with bias-corrected moments, descending on the supplied gradients.
class AdamOptimizer {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  AdamOptimizer(const ParamStore& params, double learning_rate);

  void step(ParamStore& params, const Gradients& grads);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  long steps() const { return t_; }
  const Gradients& first_moment() const { return m_; }
  const Gradients& second_moment() const { return v_; }

 private:
  double lr_;
  long t_ = 0;
  Gradients m_, v_;
};

double global_norm(const Gradients& grads);
// Rescales so the global norm is at most `max_norm`. Returns the norm before
// clipping.
double clip_by_global_norm(Gradients& grads, double max_norm);

// learning_rate * decay^epoch.
double learning_rate_at(const TrainingConfig& cfg, int epoch);

struct EpochLog {
  int epoch = 0;
  std::string mode;
  // Means per training frame over the epoch.
  double objective = 0.0;
  double reconstruction = 0.0;
  double kl_z = 0.0;
  double entropy_s = 0.0;
  double prior_s = 0.0;
  double xent = 0.0;
  double lr = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm
};

std::string epoch_log_header();
std::string epoch_log_row(const EpochLog& row);

struct TrainResult {
  ChordVae model;
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Deterministic given cfg.seed and the data, independent of cfg.threads.
TrainResult train(const TrainingData& data, const EncoderConfig& encoder,
                  const TrainingConfig& cfg, const EpochCallback& on_epoch = {});

// Gradient of the negated, per-frame-normalized batch objective, the quantity
// the optimizer descends. Exposed for tests.
struct BatchSong {
  Tensor chroma;
  std::optional<ChordSequence> labels;
  NoiseDraws noise;
};

struct BatchResult {
  Gradients grads;
  ObjectiveTerms totals;  // summed over songs, `value` unset
  double objective = 0.0;
  std::size_t frames = 0;
};

BatchResult batch_gradients(const ChordVae& vae, const std::vector<BatchSong>& batch,
                            TrainingMode mode, const LabelPrior& prior, double tau, int threads);

}  // namespace chordvae
