#pragma once

#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "chordvae/ops.hpp"
#include "chordvae/param_store.hpp"
#include "chordvae/rng.hpp"

namespace chordvae {

struct EncoderConfig {
  int layers = 1;
  int hidden = 32;  // units per direction
  bool bidirectional = true;
  int latent = 64;  // L
  int vocab = 97;   // K
  int chroma = 36;  // D
  // Output heads start at this fraction of the Glorot range so that a fresh
  // classifier is close to uniform.
  double head_init_scale = 0.1;

  void validate() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
  std::string hash() const;
};

// Sequence encoder interface: N x in -> N x output_width().
class SequenceEncoder {
 public:
  virtual ~SequenceEncoder() = default;
  virtual Var encode(Tape& tape, const ParamStore& params, Var input) const = 0;
  virtual std::size_t output_width() const = 0;
};

// Stacked (bi)directional GRU layers followed by layer normalization.
class GruEncoder final : public SequenceEncoder {
 public:
  GruEncoder(ParamStore& params, const std::string& prefix, std::size_t input_width,
             const EncoderConfig& cfg, Rng& rng);

  Var encode(Tape& tape, const ParamStore& params, Var input) const override;
  std::size_t output_width() const override { return width_; }

 private:
  struct Direction {
    std::size_t input_weight, recurrent_weight, bias;
  };
  struct Layer {
    Direction forward;
    std::optional<Direction> backward;
  };
  std::vector<Layer> layers_;
  std::size_t norm_gain_ = 0, norm_bias_ = 0;
  std::size_t width_ = 0;
};

struct DenseHead {
  std::size_t weight = 0, bias = 0;
  Var apply(Tape& tape, const ParamStore& params, Var x) const;
};

// q_alpha(S|X): frame-wise categorical posteriors.
class Classifier {
 public:
  Classifier(ParamStore& params, const EncoderConfig& cfg, Rng& rng);
  Var classify(Tape& tape, const ParamStore& params, Var chroma) const;  // N x K simplex rows

 private:
  std::unique_ptr<SequenceEncoder> encoder_;
  DenseHead head_;
};

// q_beta(Z|X): diagonal Gaussian posteriors over the latent features.
class Recognizer {
 public:
  static constexpr double kLogVarBound = 10.0;

  struct Output {
    Var mean;     // N x L
    Var log_var;  // N x L, clamped to [-10, 10]
  };

  Recognizer(ParamStore& params, const EncoderConfig& cfg, Rng& rng);
  Output recognize(Tape& tape, const ParamStore& params, Var chroma) const;

 private:
  std::unique_ptr<SequenceEncoder> encoder_;
  DenseHead head_;
  std::size_t latent_;
};

// p_theta(X|S,Z): Bernoulli activations from labels (one-hot or relaxed) and
// latent features, concatenated per frame.
class Generator {
 public:
  Generator(ParamStore& params, const EncoderConfig& cfg, Rng& rng);
  Var generate(Tape& tape, const ParamStore& params, Var labels, Var latent) const;  // N x D

 private:
  std::unique_ptr<SequenceEncoder> encoder_;
  DenseHead head_;
  std::size_t vocab_, latent_;
};

// The three networks over one parameter store. Parameter names are prefixed
// with "classifier.", "recognizer." and "generator.".
class ChordVae {
 public:
  ChordVae(const EncoderConfig& cfg, std::uint64_t seed);
  // Adopts trained parameters; names and shapes must match the architecture.
  ChordVae(const EncoderConfig& cfg, const ParamStore& trained);

  const EncoderConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  const Classifier& classifier() const { return *classifier_; }
  const Recognizer& recognizer() const { return *recognizer_; }
  const Generator& generator() const { return *generator_; }

  // Inference without gradients.
  Tensor classify(const Tensor& chroma) const;
  std::pair<Tensor, Tensor> recognize(const Tensor& chroma) const;
  Tensor generate(const Tensor& labels, const Tensor& latent) const;

 private:
  void build(std::uint64_t seed);

  EncoderConfig cfg_;
  ParamStore params_;
  std::unique_ptr<Classifier> classifier_;
  std::unique_ptr<Recognizer> recognizer_;
  std::unique_ptr<Generator> generator_;
};

// Prefix of the parameter group each network owns.
inline constexpr std::string_view kClassifierPrefix = "classifier.";
inline constexpr std::string_view kRecognizerPrefix = "recognizer.";
inline constexpr std::string_view kGeneratorPrefix = "generator.";

// Glorot-uniform matrix in +-sqrt(6 / (fan_in + fan_out)) * scale.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double scale = 1.0);

}  // namespace chordvae
