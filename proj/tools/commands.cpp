#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "chordvae/checkpoint.hpp"
#include "chordvae/corpus.hpp"
#include "chordvae/error.hpp"
#include "chordvae/evaluation.hpp"
#include "chordvae/markov_chain.hpp"
#include "chordvae/training.hpp"
#include "run_dir.hpp"

namespace chordvae::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kCheckpointName = "checkpoint.cvck";
constexpr const char* kTrainLogName = "train_log.csv";
constexpr const char* kSplitName = "split.json";
constexpr const char* kTemplatesName = "templates.csv";

struct CommonFlags {
  bool force = false;
  bool timestamp = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
  sub->add_flag("--force", f.force, "Replace an existing output");
  sub->add_flag("--timestamp", f.timestamp, "Record wall-clock time in the run manifest");
}

void add_threads(CLI::App* sub, int& threads) {
  sub->add_option("--threads", threads, "Worker threads")
      ->envname(kThreadsEnv)
      ->check(CLI::PositiveNumber);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < count; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string condition_name(TrainingMode mode, PriorKind prior) {
  const std::string p = prior == PriorKind::kMarkov ? "MR" : "UN";
  switch (mode) {
    case TrainingMode::kSupervisedBaseline: return "ACE-SL";
    case TrainingMode::kVaeSupervised: return "VAE-" + p + "-SL";
    case TrainingMode::kVaeSemiSupervised: return "VAE-" + p + "-SSL";
    case TrainingMode::kVaeUnsupervised: return "VAE-" + p + "-UNSUP";
  }
  return "?";
}

struct LoadedModel {
  nlohmann::json manifest;
  EncoderConfig encoder;
  std::unique_ptr<ChordVae> vae;
};

LoadedModel load_model(const fs::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  LoadedModel m;
  m.manifest = ck.manifest;
  if (!m.manifest.contains("encoder")) {
    throw CheckpointMismatch(checkpoint.string() + " has no encoder configuration");
  }
  try {
    m.encoder = EncoderConfig::from_json(m.manifest.at("encoder"));
  } catch (const ValidationError& e) {
    throw CheckpointMismatch(std::string("checkpoint encoder configuration: ") + e.what());
  }
  require_config_hash(m.manifest, m.encoder.hash());
  m.vae = std::make_unique<ChordVae>(m.encoder, ck.params);
  return m;
}

bool is_corpus_dir(const fs::path& p) { return fs::is_directory(p) && fs::exists(p / "manifest.json"); }

// ---------------------------------------------------------------- synth

struct SynthOptions {
  SynthConfig cfg;
  std::string out;
  CommonFlags common;
};

void run_synth(const SynthOptions& o) {
  o.cfg.validate();
  const Corpus corpus = generate_synthetic_corpus(o.cfg);
  StagedDir dir(o.out, o.common.force);
  RunInfo info;
  info.command = "synth";
  info.config = o.cfg.to_json();
  info.seed = o.cfg.rng_seed;
  info.outputs = {o.out};
  info.timestamp = o.common.timestamp;
  save_corpus(corpus, dir.path(), run_manifest(info));
  dir.commit();
  std::cout << "wrote " << corpus.songs.size() << " songs to " << o.out << '\n';
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string corpus;
  std::string out;
  std::string mode = "vae-ssl";
  std::string prior = "markov";
  TrainingConfig training;
  EncoderConfig encoder;
  int folds = 5;
  int fold = 0;
  double annotated_fraction = 1.0;
  std::uint64_t split_seed = 0;
  CommonFlags common;
  CLI::Option* prior_opt = nullptr;
  CLI::Option* p_self_opt = nullptr;
};

nlohmann::json split_json(const Corpus& corpus, const FoldSplit& split) {
  auto ids = [&](const std::vector<std::size_t>& idx) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t i : idx) a.push_back(corpus.songs[i].id);
    return a;
  };
  return {{"annotated", ids(split.annotated)},
          {"unannotated", ids(split.unannotated)},
          {"test", ids(split.test)}};
}

void run_train(TrainOptions& o) {
  TrainingConfig tc = o.training;
  tc.mode = parse_mode(o.mode);
  const bool prior_given = o.prior_opt->count() > 0;
  const bool p_self_given = o.p_self_opt->count() > 0;
  if (tc.mode == TrainingMode::kSupervisedBaseline) {
    if (prior_given || p_self_given) warn("ace-sl trains the classifier alone; --prior and --p-self are ignored");
    tc.prior = PriorKind::kUniform;
  } else {
    tc.prior = parse_prior(o.prior);
    if (tc.prior == PriorKind::kUniform && p_self_given) {
      throw UsageError("--p-self applies only to --prior markov");
    }
  }
  // Record the effective self-transition probability of a uniform prior.
  if (tc.prior == PriorKind::kUniform) tc.p_self = 1.0 / kVocabSize;
  tc.validate();
  o.encoder.validate();

  const Corpus corpus = load_corpus(o.corpus);
  const FoldSplit split = split_folds(corpus, o.folds, o.fold, o.annotated_fraction, o.split_seed);
  const TrainingData data = make_training_data(corpus, split);

  StagedDir dir(o.out, o.common.force);
  std::string log_text = epoch_log_header() + "\n";
  TrainResult result = train(data, o.encoder, tc, [&](const EpochLog& row) {
    log_text += epoch_log_row(row) + "\n";
    std::cerr << "epoch " << row.epoch << " objective " << fmt(row.objective) << '\n';
  });
  for (const std::string& w : result.warnings) warn(w);

  const std::string condition = condition_name(tc.mode, tc.prior);
  nlohmann::json split_cfg = {{"folds", o.folds},
                              {"fold", o.fold},
                              {"annotated_fraction", o.annotated_fraction},
                              {"seed", o.split_seed}};
  nlohmann::json manifest = {{"format", "chordvae-checkpoint"},
                             {"config_hash", o.encoder.hash()},
                             {"encoder", o.encoder.to_json()},
                             {"training", tc.to_json()},
                             {"condition", condition},
                             {"split", split_cfg},
                             {"vocabulary_hash", vocabulary_hash()}};
  save_checkpoint(dir / kCheckpointName, result.model.params(), manifest);
  write_text(dir / kTrainLogName, log_text);
  write_json(dir / kSplitName, split_json(corpus, split));

  RunInfo info;
  info.command = "train";
  info.config = {{"condition", condition},
                 {"training", tc.to_json()},
                 {"encoder", o.encoder.to_json()},
                 {"split", split_cfg}};
  info.seed = tc.seed;
  info.inputs = {{"corpus", o.corpus}};
  info.outputs = {kCheckpointName, kTrainLogName, kSplitName};
  info.timestamp = o.common.timestamp;
  write_json(dir / kRunManifestName, run_manifest(info));
  dir.commit();
  std::cout << condition << " trained; outputs in " << o.out << '\n';
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  std::string checkpoint;
  std::string input;
  std::string out;
  std::string subset = "all";
  bool no_viterbi = false;
  bool posteriors = false;
  double p_self = 0.9;
  int threads = 1;
  CommonFlags common;
};

std::string label_file(const ChordSequence& s) {
  std::string out;
  for (int v : s) {
    out += format_label(index_to_label(v));
    out += '\n';
  }
  return out;
}

std::string posterior_csv(const Tensor& pi) {
  std::ostringstream out;
  for (int k = 0; k < kVocabSize; ++k) out << (k ? "," : "") << format_label(index_to_label(k));
  out << '\n';
  for (std::size_t n = 0; n < pi.rows(); ++n) {
    for (std::size_t k = 0; k < pi.cols(); ++k) out << (k ? "," : "") << fmt(pi(n, k));
    out << '\n';
  }
  return out.str();
}

std::vector<Song> estimation_inputs(const EstimateOptions& o, const nlohmann::json& manifest) {
  std::vector<Song> songs;
  if (is_corpus_dir(o.input)) {
    Corpus corpus = load_corpus(o.input);
    if (o.subset == "test") {
      const auto& sp = manifest.at("split");
      const FoldSplit split =
          split_folds(corpus, sp.at("folds").get<int>(), sp.at("fold").get<int>(),
                      sp.at("annotated_fraction").get<double>(), sp.at("seed").get<std::uint64_t>());
      for (std::size_t i : split.test) songs.push_back(corpus.songs[i]);
    } else {
      songs = std::move(corpus.songs);
    }
  } else {
    if (o.subset == "test") throw UsageError("--subset test needs a corpus directory as --input");
    const fs::path p(o.input);
    if (!fs::exists(p)) throw IoError("input " + o.input + " does not exist");
    songs.push_back(load_chroma_csv(p, p.stem().string()));
  }
  return songs;
}

void run_estimate(const EstimateOptions& o) {
  const LoadedModel model = load_model(o.checkpoint);
  const std::vector<Song> songs = estimation_inputs(o, model.manifest);
  const TransitionModel smoother = make_self_transition_model(kVocabSize, o.p_self);

  struct Result {
    ChordSequence argmax, viterbi;
    Tensor pi;
  };
  std::vector<Result> results(songs.size());
  parallel_for(songs.size(), o.threads, [&](std::size_t i) {
    Result& r = results[i];
    r.pi = model.vae->classify(songs[i].chroma.to_tensor());
    r.argmax = argmax_path(r.pi);
    if (!o.no_viterbi) r.viterbi = viterbi_decode(r.pi, smoother);
  });

  StagedDir dir(o.out, o.common.force);
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json outputs = nlohmann::json::array();
  for (std::size_t i = 0; i < songs.size(); ++i) {
    const std::string& id = songs[i].id;
    ids.push_back(id);
    write_text(dir / (id + ".argmax.lab"), label_file(results[i].argmax));
    outputs.push_back(id + ".argmax.lab");
    if (!o.no_viterbi) {
      write_text(dir / (id + ".viterbi.lab"), label_file(results[i].viterbi));
      outputs.push_back(id + ".viterbi.lab");
    }
    if (o.posteriors) {
      write_text(dir / (id + ".posteriors.csv"), posterior_csv(results[i].pi));
      outputs.push_back(id + ".posteriors.csv");
    }
  }
  nlohmann::json variants = nlohmann::json::array({"argmax"});
  if (!o.no_viterbi) variants.push_back("viterbi");
  RunInfo info;
  info.command = "estimate";
  info.config = {{"subset", o.subset},
                 {"viterbi", !o.no_viterbi},
                 {"viterbi_p_self", o.p_self},
                 {"posteriors", o.posteriors},
                 {"variants", variants},
                 {"songs", ids},
                 {"condition", model.manifest.value("condition", "")},
                 {"training", model.manifest.value("training", nlohmann::json::object())}};
  info.seed = model.manifest.value("training", nlohmann::json::object()).value("seed", 0ull);
  info.inputs = {{"checkpoint", o.checkpoint}, {"input", o.input}};
  info.outputs = outputs;
  info.timestamp = o.common.timestamp;
  write_json(dir / kRunManifestName, run_manifest(info));
  dir.commit();
  std::cout << "estimated " << songs.size() << " songs into " << o.out << '\n';
}

// ---------------------------------------------------------------- eval

struct EvalOptions {
  std::string estimates;
  std::string reference;
  std::string out;
  std::string criterion = "both";
  std::string variant;
  double fps = kDefaultFps;
  CommonFlags common;
};

ChordSequence read_label_file(const fs::path& file) {
  std::istringstream in(read_text(file));
  ChordSequence out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    try {
      out.push_back(parse_label(line).index());
    } catch (const ValidationError& e) {
      throw ValidationError(file.string() + " line " + std::to_string(row) + ": " + e.what());
    }
  }
  return out;
}

struct EstimateSet {
  nlohmann::json manifest;
  std::vector<std::string> ids;
  std::set<std::string> variants;
};

EstimateSet read_estimate_set(const fs::path& dir) {
  const fs::path m = dir / kRunManifestName;
  if (!fs::exists(m)) throw IoError(dir.string() + " has no " + kRunManifestName);
  EstimateSet s;
  s.manifest = read_json(m);
  if (s.manifest.value("command", "") != "estimate") {
    throw ValidationError(dir.string() + " is not an estimate directory");
  }
  const auto& cfg = s.manifest.at("config");
  for (const auto& id : cfg.at("songs")) s.ids.push_back(id.get<std::string>());
  for (const auto& v : cfg.at("variants")) s.variants.insert(v.get<std::string>());
  return s;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

void run_eval(const EvalOptions& o) {
  std::vector<Criterion> criteria;
  if (o.criterion == "majmin" || o.criterion == "both") criteria.push_back(Criterion::kMajmin);
  if (o.criterion == "triads" || o.criterion == "both") criteria.push_back(Criterion::kTriads);

  const EstimateSet est = read_estimate_set(o.estimates);
  std::string variant = o.variant;
  if (variant.empty()) variant = est.variants.count("viterbi") ? "viterbi" : "argmax";
  if (!est.variants.count(variant)) {
    throw ValidationError("estimates in " + o.estimates + " have no " + variant + " labels");
  }

  // Reference labels by song id.
  std::map<std::string, ChordSequence> reference;
  bool reference_is_estimates = false;
  if (is_corpus_dir(o.reference)) {
    const Corpus corpus = load_corpus(o.reference);
    for (const Song& s : corpus.songs) {
      if (s.labels) reference.emplace(s.id, *s.labels);
    }
  } else if (fs::exists(fs::path(o.reference) / kRunManifestName)) {
    reference_is_estimates = true;
    const EstimateSet ref = read_estimate_set(o.reference);
    const std::string ref_variant = ref.variants.count(variant) ? variant : "argmax";
    for (const std::string& id : ref.ids) {
      reference.emplace(id, read_label_file(fs::path(o.reference) / (id + "." + ref_variant + ".lab")));
    }
  } else {
    throw IoError("reference " + o.reference + " is neither a corpus nor an estimate directory");
  }

  std::vector<std::string> missing_in_reference, missing_in_estimates;
  const std::set<std::string> est_ids(est.ids.begin(), est.ids.end());
  for (const std::string& id : est.ids) {
    if (!reference.count(id)) missing_in_reference.push_back(id);
  }
  const bool full_set = reference_is_estimates ||
                        est.manifest.at("config").value("subset", "all") == "all";
  if (full_set) {
    for (const auto& [id, labels] : reference) {
      if (!est_ids.count(id)) missing_in_estimates.push_back(id);
    }
  }
  if (!missing_in_reference.empty() || !missing_in_estimates.empty()) {
    std::string msg = "song ids differ between estimates and reference";
    if (!missing_in_reference.empty()) msg += "; missing from reference: " + join(missing_in_reference);
    if (!missing_in_estimates.empty()) msg += "; missing from estimates: " + join(missing_in_estimates);
    throw ValidationError(msg);
  }

  std::vector<SongEstimate> songs;
  for (const std::string& id : est.ids) {
    SongEstimate s;
    s.id = id;
    s.reference = reference.at(id);
    s.estimate = read_label_file(fs::path(o.estimates) / (id + "." + variant + ".lab"));
    if (variant != "argmax") {
      s.pre_viterbi = read_label_file(fs::path(o.estimates) / (id + ".argmax.lab"));
    }
    if (s.estimate.size() != s.reference.size()) {
      throw ValidationError("song " + id + ": estimate has " + std::to_string(s.estimate.size()) +
                            " frames, reference has " + std::to_string(s.reference.size()));
    }
    songs.push_back(std::move(s));
  }

  const auto& ecfg = est.manifest.at("config");
  const nlohmann::json training = ecfg.value("training", nlohmann::json::object());
  const bool baseline = training.value("mode", "") == "ace-sl";
  nlohmann::json meta = nlohmann::json::object();
  meta["condition"] = ecfg.value("condition", "");
  meta["mode"] = training.value("mode", "");
  meta["prior"] = baseline ? "NA" : training.value("prior", "");
  meta["p_self"] = baseline ? nlohmann::json("NA") : training.value("p_self", nlohmann::json());
  meta["seed"] = training.value("seed", nlohmann::json());
  meta["variant"] = variant;
  meta["viterbi_p_self"] = ecfg.value("viterbi_p_self", nlohmann::json());

  const EvalReport report = evaluate(songs, o.fps, meta);
  StagedDir dir(o.out, o.common.force);
  emit_report(report, dir.path(), criteria);
  RunInfo info;
  info.command = "eval";
  info.config = {{"criterion", o.criterion}, {"variant", variant}, {"fps", o.fps}};
  info.seed = training.value("seed", 0ull);
  info.inputs = {{"estimates", o.estimates}, {"reference", o.reference}};
  info.outputs = {"per_song.csv", "confusion.csv", "durations.csv", "summary.txt"};
  info.timestamp = o.common.timestamp;
  write_json(dir / kRunManifestName, run_manifest(info));
  dir.commit();
  std::cout << summary_text(report, criteria);
}

// ---------------------------------------------------------------- inspect

struct InspectOptions {
  std::string checkpoint;
  std::string out;
  CommonFlags common;
};

void run_inspect(const InspectOptions& o) {
  const LoadedModel model = load_model(o.checkpoint);
  std::ostringstream csv;
  csv << "label";
  for (int d = 0; d < kChromaDims; ++d) csv << ",d" << d;
  csv << '\n';
  const auto latent = static_cast<std::size_t>(model.encoder.latent);
  for (int t = 0; t < kChordTypes; ++t) {
    const auto type = static_cast<ChordType>(t);
    const ChordLabel label = type == ChordType::kNoChord ? ChordLabel::no_chord() : ChordLabel(0, type);
    Tensor s(1, static_cast<std::size_t>(kVocabSize), 0.0);
    s(0, static_cast<std::size_t>(label.index())) = 1.0;
    const Tensor x = model.vae->generate(s, Tensor(1, latent, 0.0));
    csv << format_label(label);
    for (int d = 0; d < kChromaDims; ++d) csv << ',' << fmt(x(0, static_cast<std::size_t>(d)));
    csv << '\n';
  }
  StagedDir dir(o.out, o.common.force);
  write_text(dir / kTemplatesName, csv.str());
  RunInfo info;
  info.command = "inspect";
  info.config = {{"condition", model.manifest.value("condition", "")}};
  info.seed = model.manifest.value("training", nlohmann::json::object()).value("seed", 0ull);
  info.inputs = {{"checkpoint", o.checkpoint}};
  info.outputs = {kTemplatesName};
  info.timestamp = o.common.timestamp;
  write_json(dir / kRunManifestName, run_manifest(info));
  dir.commit();
  std::cout << csv.str();
}

}  // namespace

void register_synth(CLI::App& app, Action& action) {
  auto o = std::make_shared<SynthOptions>();
  CLI::App* sub = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  SynthConfig& c = o->cfg;
  sub->add_option("--out", o->out, "Output corpus directory")->required();
  sub->add_option("--songs", c.song_count, "Number of songs")->capture_default_str();
  sub->add_option("--frames", c.frames_per_song, "Frames per song")->capture_default_str();
  sub->add_option("--seed", c.rng_seed, "Random seed")->capture_default_str();
  sub->add_option("--self-prob", c.segment_self_prob, "Label self-transition probability")
      ->capture_default_str();
  sub->add_option("--noise-std", c.noise_std, "Gaussian noise standard deviation")
      ->capture_default_str();
  sub->add_option("--amplitude-min", c.amplitude_min, "Lowest chord-tone amplitude")
      ->capture_default_str();
  sub->add_option("--amplitude-max", c.amplitude_max, "Highest chord-tone amplitude")
      ->capture_default_str();
  sub->add_option("--deviation-scale", c.deviation_scale, "Scale of passing-note deviations")
      ->capture_default_str();
  add_common(sub, o->common);
  sub->callback([o, &action] { action = [o] { run_synth(*o); }; });
}

void register_train(CLI::App& app, Action& action) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* sub = app.add_subcommand("train", "Train a model under one experimental condition");
  TrainingConfig& t = o->training;
  EncoderConfig& e = o->encoder;
  sub->add_option("--corpus", o->corpus, "Corpus directory")->required();
  sub->add_option("--out", o->out, "Output run directory")->required();
  sub->add_option("--mode", o->mode, "Training mode")
      ->check(CLI::IsMember({"ace-sl", "vae-sl", "vae-ssl", "vae-un"}))
      ->capture_default_str();
  o->prior_opt = sub->add_option("--prior", o->prior, "Label prior")
                     ->check(CLI::IsMember({"uniform", "markov"}))
                     ->capture_default_str();
  o->p_self_opt =
      sub->add_option("--p-self", t.p_self, "Markov prior self-transition probability")
          ->capture_default_str();
  sub->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--batch-songs", t.batch_songs, "Songs per batch")->capture_default_str();
  sub->add_option("--frames-per-clip", t.frames_per_clip, "Frames per training clip")
      ->capture_default_str();
  sub->add_option("--lr", t.learning_rate, "Initial learning rate")->capture_default_str();
  sub->add_option("--lr-decay", t.lr_decay, "Learning-rate factor per epoch")->capture_default_str();
  sub->add_option("--clip", t.grad_clip_norm, "Global gradient-norm clip")->capture_default_str();
  sub->add_option("--tau", t.tau, "Gumbel-softmax temperature")->capture_default_str();
  sub->add_option("--annotated-batch-fraction", t.annotated_batch_fraction,
                  "Annotated share of each semi-supervised batch")
      ->capture_default_str();
  sub->add_option("--seed", t.seed, "Training seed")->capture_default_str();
  sub->add_option("--layers", e.layers, "Recurrent layers per network")->capture_default_str();
  sub->add_option("--hidden", e.hidden, "Hidden units per direction")->capture_default_str();
  sub->add_option("--latent", e.latent, "Latent feature dimension")->capture_default_str();
  sub->add_option("--folds", o->folds, "Number of cross-validation folds")->capture_default_str();
  sub->add_option("--fold", o->fold, "Held-out fold index")->capture_default_str();
  sub->add_option("--annotated-fraction", o->annotated_fraction,
                  "Share of training songs that keep their labels")
      ->capture_default_str();
  sub->add_option("--split-seed", o->split_seed, "Seed for the fold assignment")
      ->capture_default_str();
  add_threads(sub, t.threads);
  add_common(sub, o->common);
  sub->callback([o, &action] { action = [o] { run_train(*o); }; });
}

void register_estimate(CLI::App& app, Action& action) {
  auto o = std::make_shared<EstimateOptions>();
  CLI::App* sub = app.add_subcommand("estimate", "Estimate frame-wise chord labels");
  sub->add_option("--checkpoint", o->checkpoint, "Checkpoint file")->required();
  sub->add_option("--input", o->input, "Corpus directory or chroma CSV file")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_option("--subset", o->subset, "Songs to estimate")
      ->check(CLI::IsMember({"all", "test"}))
      ->capture_default_str();
  sub->add_option("--p-self", o->p_self, "Self-transition probability for Viterbi smoothing")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_flag("--no-viterbi", o->no_viterbi, "Write frame-wise argmax labels only");
  sub->add_flag("--posteriors", o->posteriors, "Also write per-frame posterior CSVs");
  add_threads(sub, o->threads);
  add_common(sub, o->common);
  sub->callback([o, &action] { action = [o] { run_estimate(*o); }; });
}

void register_eval(CLI::App& app, Action& action) {
  auto o = std::make_shared<EvalOptions>();
  CLI::App* sub = app.add_subcommand("eval", "Score estimates against reference labels");
  sub->add_option("--estimates", o->estimates, "Estimate directory")->required();
  sub->add_option("--reference", o->reference, "Corpus directory or estimate directory")
      ->required();
  sub->add_option("--out", o->out, "Report directory")->required();
  sub->add_option("--criterion", o->criterion, "Scoring criterion")
      ->check(CLI::IsMember({"majmin", "triads", "both"}))
      ->capture_default_str();
  sub->add_option("--variant", o->variant, "Estimate variant to score (default: viterbi if present)")
      ->check(CLI::IsMember({"argmax", "viterbi"}));
  sub->add_option("--fps", o->fps, "Frames per second for durations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  add_common(sub, o->common);
  sub->callback([o, &action] { action = [o] { run_eval(*o); }; });
}

void register_inspect(CLI::App& app, Action& action) {
  auto o = std::make_shared<InspectOptions>();
  CLI::App* sub = app.add_subcommand("inspect", "Dump generated chroma for each chord type at root C");
  sub->add_option("--checkpoint", o->checkpoint, "Checkpoint file")->required();
  sub->add_option("--out", o->out, "Output directory")->required();
  add_common(sub, o->common);
  sub->callback([o, &action] { action = [o] { run_inspect(*o); }; });
}

void register_vocab(CLI::App& app, Action& action) {
  auto out = std::make_shared<std::string>();
  CLI::App* sub = app.add_subcommand("vocab", "Print the chord vocabulary");
  sub->add_option("--out", *out, "Write to a file instead of stdout");
  sub->callback([out, &action] {
    action = [out] {
      if (out->empty()) {
        std::cout << vocabulary_csv();
      } else {
        write_text(*out, vocabulary_csv());
      }
    };
  });
}

}  // namespace chordvae::cli
