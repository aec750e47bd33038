#include "chordvae/networks.hpp"

#include <cmath>

#include "chordvae/error.hpp"
#include "chordvae/hash.hpp"

namespace chordvae {

void EncoderConfig::validate() const {
  if (layers < 1) throw ValidationError("encoder: layers must be >= 1");
  if (hidden < 1) throw ValidationError("encoder: hidden must be >= 1");
  if (latent < 1 || vocab < 2 || chroma < 1) {
    throw ValidationError("encoder: latent, vocab and chroma widths must be positive");
  }
  if (!(head_init_scale > 0.0)) throw ValidationError("encoder: head_init_scale must be positive");
}

nlohmann::json EncoderConfig::to_json() const {
  return {{"cell", "gru"},          {"layers", layers}, {"hidden", hidden},
          {"bidirectional", bidirectional}, {"latent", latent}, {"vocab", vocab},
          {"chroma", chroma},       {"head_init_scale", head_init_scale}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    if (j.value("cell", std::string("gru")) != "gru") {
      throw CheckpointMismatch("unsupported encoder cell " + j.at("cell").get<std::string>());
    }
    c.layers = j.at("layers").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.bidirectional = j.at("bidirectional").get<bool>();
    c.latent = j.at("latent").get<int>();
    c.vocab = j.at("vocab").get<int>();
    c.chroma = j.at("chroma").get<int>();
    c.head_init_scale = j.at("head_init_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointMismatch(std::string("malformed encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string EncoderConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng, double scale) {
  const double limit = scale * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor w(fan_in, fan_out);
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
  return w;
}

GruEncoder::GruEncoder(ParamStore& params, const std::string& prefix, std::size_t input_width,
                       const EncoderConfig& cfg, Rng& rng) {
  const auto h = static_cast<std::size_t>(cfg.hidden);
  auto make_direction = [&](const std::string& name, std::size_t in) {
    Direction d;
    d.input_weight = params.add(name + ".input_weight", glorot_uniform(in, 3 * h, rng));
    d.recurrent_weight = params.add(name + ".recurrent_weight", glorot_uniform(h, 3 * h, rng));
    d.bias = params.add(name + ".bias", Tensor(1, 3 * h, 0.0));
    return d;
  };
  std::size_t in = input_width;
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string base = prefix + "layer" + std::to_string(l);
    Layer layer{make_direction(base + ".fwd", in), std::nullopt};
    if (cfg.bidirectional) layer.backward = make_direction(base + ".bwd", in);
    layers_.push_back(layer);
    in = cfg.bidirectional ? 2 * h : h;
  }
  width_ = in;
  norm_gain_ = params.add(prefix + "norm.gain", Tensor(1, width_, 1.0));
  norm_bias_ = params.add(prefix + "norm.bias", Tensor(1, width_, 0.0));
}

Var GruEncoder::encode(Tape& tape, const ParamStore& params, Var input) const {
  auto run = [&](const Direction& d, Var x, bool reverse) {
    Var a = add_row(matmul(x, tape.param(params, d.input_weight)), tape.param(params, d.bias));
    return gru_recurrence(a, tape.param(params, d.recurrent_weight), reverse);
  };
  Var x = input;
  for (const Layer& layer : layers_) {
    Var fwd = run(layer.forward, x, false);
    x = layer.backward ? concat_cols({fwd, run(*layer.backward, x, true)}) : fwd;
  }
  return layer_norm(x, tape.param(params, norm_gain_), tape.param(params, norm_bias_));
}

Var DenseHead::apply(Tape& tape, const ParamStore& params, Var x) const {
  return add_row(matmul(x, tape.param(params, weight)), tape.param(params, bias));
}

namespace {

DenseHead make_head(ParamStore& params, const std::string& prefix, std::size_t in,
                    std::size_t out, const EncoderConfig& cfg, Rng& rng) {
  DenseHead head;
  head.weight = params.add(prefix + "head.weight", glorot_uniform(in, out, rng, cfg.head_init_scale));
  head.bias = params.add(prefix + "head.bias", Tensor(1, out, 0.0));
  return head;
}

void require_width(const char* what, Var v, std::size_t cols) {
  if (v.value().rank() != 2 || v.cols() != cols) {
    throw ValidationError(std::string(what) + ": expected " + std::to_string(cols) +
                          " columns, got shape " + v.value().shape_string());
  }
}

}  // namespace

Classifier::Classifier(ParamStore& params, const EncoderConfig& cfg, Rng& rng) {
  const std::string p(kClassifierPrefix);
  encoder_ = std::make_unique<GruEncoder>(params, p + "enc.", cfg.chroma, cfg, rng);
  head_ = make_head(params, p, encoder_->output_width(), cfg.vocab, cfg, rng);
}

Var Classifier::classify(Tape& tape, const ParamStore& params, Var chroma) const {
  return softmax_rows(head_.apply(tape, params, encoder_->encode(tape, params, chroma)));
}

Recognizer::Recognizer(ParamStore& params, const EncoderConfig& cfg, Rng& rng)
    : latent_(static_cast<std::size_t>(cfg.latent)) {
  const std::string p(kRecognizerPrefix);
  encoder_ = std::make_unique<GruEncoder>(params, p + "enc.", cfg.chroma, cfg, rng);
  head_ = make_head(params, p, encoder_->output_width(), 2 * latent_, cfg, rng);
}

Recognizer::Output Recognizer::recognize(Tape& tape, const ParamStore& params, Var chroma) const {
  Var out = head_.apply(tape, params, encoder_->encode(tape, params, chroma));
  return {slice_cols(out, 0, latent_),
          clamp(slice_cols(out, latent_, latent_), -kLogVarBound, kLogVarBound)};
}

Generator::Generator(ParamStore& params, const EncoderConfig& cfg, Rng& rng)
    : vocab_(static_cast<std::size_t>(cfg.vocab)), latent_(static_cast<std::size_t>(cfg.latent)) {
  const std::string p(kGeneratorPrefix);
  encoder_ = std::make_unique<GruEncoder>(params, p + "enc.", vocab_ + latent_, cfg, rng);
  head_ = make_head(params, p, encoder_->output_width(), static_cast<std::size_t>(cfg.chroma),
                    cfg, rng);
}

Var Generator::generate(Tape& tape, const ParamStore& params, Var labels, Var latent) const {
  require_width("generate labels", labels, vocab_);
  require_width("generate latent", latent, latent_);
  if (labels.rows() != latent.rows()) {
    throw ValidationError("generate: " + std::to_string(labels.rows()) + " label frames vs " +
                          std::to_string(latent.rows()) + " latent frames");
  }
  Var h = encoder_->encode(tape, params, concat_cols({labels, latent}));
  return clamp(sigmoid(head_.apply(tape, params, h)), kClampEps, 1.0 - kClampEps);
}

ChordVae::ChordVae(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  build(seed);
}

ChordVae::ChordVae(const EncoderConfig& cfg, const ParamStore& trained) : cfg_(cfg) {
  cfg_.validate();
  build(0);
  if (trained.size() != params_.size()) {
    throw CheckpointMismatch("checkpoint holds " + std::to_string(trained.size()) +
                             " tensors, architecture expects " + std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!trained.contains(params_.name(i))) {
      throw CheckpointMismatch("checkpoint lacks " + params_.name(i));
    }
    const std::size_t j = trained.index(params_.name(i));
    if (!trained.value(j).same_shape(params_.value(i))) {
      throw CheckpointMismatch("shape mismatch for " + params_.name(i) + ": " +
                               trained.value(j).shape_string() + " vs " +
                               params_.value(i).shape_string());
    }
    params_.value(i) = trained.value(j);
  }
}

void ChordVae::build(std::uint64_t seed) {
  Rng root(seed);
  Rng rc = root.substream(1), rr = root.substream(2), rg = root.substream(3);
  classifier_ = std::make_unique<Classifier>(params_, cfg_, rc);
  recognizer_ = std::make_unique<Recognizer>(params_, cfg_, rr);
  generator_ = std::make_unique<Generator>(params_, cfg_, rg);
}

Tensor ChordVae::classify(const Tensor& chroma) const {
  Tape tape;
  return classifier_->classify(tape, params_, tape.constant(chroma)).value();
}

std::pair<Tensor, Tensor> ChordVae::recognize(const Tensor& chroma) const {
  Tape tape;
  auto out = recognizer_->recognize(tape, params_, tape.constant(chroma));
  return {out.mean.value(), out.log_var.value()};
}

Tensor ChordVae::generate(const Tensor& labels, const Tensor& latent) const {
  Tape tape;
  return generator_->generate(tape, params_, tape.constant(labels), tape.constant(latent)).value();
}

}  // namespace chordvae
