#include "chordvae/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "chordvae/binary_io.hpp"
#include "chordvae/error.hpp"
#include "chordvae/rng.hpp"

namespace chordvae {
namespace fs = std::filesystem;

namespace {

constexpr char kSongMagic[4] = {'C', 'V', 'A', 'E'};
constexpr int kCorpusVersion = 1;

void validate_song_id(const std::string& id) {
  if (id.empty()) throw ValidationError("empty song id");
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    if (!ok) throw ValidationError("song id '" + id + "' contains '" + std::string(1, c) + "'");
  }
}

// Draws a label index from type weights x uniform roots, never `exclude`.
int draw_label(const SynthConfig& cfg, Rng& rng, int exclude) {
  std::array<double, kVocabSize> w{};
  double total = 0.0;
  for (int i = 0; i < kVocabSize; ++i) {
    if (i == exclude) continue;
    const ChordLabel l = ChordLabel::from_index(i);
    const double tw = cfg.type_weights[static_cast<std::size_t>(l.type())];
    w[i] = l.is_no_chord() ? tw : tw / kPitchClasses;
    total += w[i];
  }
  double u = rng.uniform(0.0, total);
  for (int i = 0; i < kVocabSize; ++i) {
    if (w[i] <= 0.0) continue;
    if (u < w[i]) return i;
    u -= w[i];
  }
  for (int i = kVocabSize; i-- > 0;) {
    if (w[i] > 0.0) return i;
  }
  return kNoChordIndex;
}

}  // namespace

ChromaSequence::ChromaSequence(std::size_t frames) : values_(frames * kChromaDims, 0.0f) {
  if (frames == 0) throw ValidationError("chroma sequence needs at least one frame");
}

ChromaSequence ChromaSequence::from_values(std::size_t frames, std::vector<float> values) {
  if (frames == 0) throw ValidationError("chroma sequence needs at least one frame");
  if (values.size() != frames * kChromaDims) {
    throw ValidationError("chroma value count " + std::to_string(values.size()) +
                          " does not match " + std::to_string(frames) + " frames x 36");
  }
  ChromaSequence c;
  c.values_ = std::move(values);
  c.validate("chroma");
  return c;
}

void ChromaSequence::validate(const std::string& context) const {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const float v = values_[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      std::ostringstream msg;
      msg << context << ": chroma value " << v << " at frame " << i / kChromaDims << " dim "
          << i % kChromaDims << " outside [0,1]";
      throw ValidationError(msg.str());
    }
  }
}

ChromaSequence ChromaSequence::crop(std::size_t start, std::size_t count) const {
  if (count == 0 || start + count > frames()) throw ValidationError("chroma crop out of range");
  ChromaSequence c;
  c.values_.assign(values_.begin() + static_cast<std::ptrdiff_t>(start * kChromaDims),
                   values_.begin() + static_cast<std::ptrdiff_t>((start + count) * kChromaDims));
  return c;
}

Tensor ChromaSequence::to_tensor() const {
  Tensor t(frames(), kChromaDims);
  for (std::size_t i = 0; i < values_.size(); ++i) t[i] = values_[i];
  return t;
}

void validate_labels(const ChordSequence& labels, std::size_t frames, const std::string& song_id) {
  if (labels.size() != frames) {
    throw ValidationError("song " + song_id + ": " + std::to_string(labels.size()) +
                          " labels for " + std::to_string(frames) + " frames");
  }
  for (std::size_t n = 0; n < labels.size(); ++n) {
    if (labels[n] < 0 || labels[n] >= kVocabSize) {
      throw ValidationError("song " + song_id + ": label index " + std::to_string(labels[n]) +
                            " out of range at frame " + std::to_string(n));
    }
  }
}

void SynthConfig::validate() const {
  if (song_count <= 0) throw ValidationError("synth: song_count must be positive");
  if (frames_per_song <= 0) throw ValidationError("synth: frames_per_song must be positive");
  if (!(segment_self_prob > 0.0 && segment_self_prob < 1.0)) {
    throw ValidationError("synth: segment_self_prob must lie in (0,1)");
  }
  double total = 0.0;
  for (double w : type_weights) {
    if (!(w >= 0.0)) throw ValidationError("synth: type weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("synth: type weights are all zero");
  if (!(noise_std >= 0.0)) throw ValidationError("synth: noise_std must be nonnegative");
  if (!(deviation_scale >= 0.0)) throw ValidationError("synth: deviation_scale must be nonnegative");
  if (!(activation_floor >= 0.0 && activation_floor < activation_ceiling &&
        activation_ceiling <= 1.0)) {
    throw ValidationError("synth: need 0 <= activation_floor < activation_ceiling <= 1");
  }
  if (!(amplitude_min > 0.0 && amplitude_min <= amplitude_max && amplitude_max <= 1.0)) {
    throw ValidationError("synth: need 0 < amplitude_min <= amplitude_max <= 1");
  }
}

nlohmann::json SynthConfig::to_json() const {
  return {{"song_count", song_count},
          {"frames_per_song", frames_per_song},
          {"segment_self_prob", segment_self_prob},
          {"type_weights", type_weights},
          {"noise_std", noise_std},
          {"activation_floor", activation_floor},
          {"activation_ceiling", activation_ceiling},
          {"amplitude_min", amplitude_min},
          {"amplitude_max", amplitude_max},
          {"deviation_scale", deviation_scale},
          {"rng_seed", rng_seed}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  try {
    c.song_count = j.at("song_count").get<int>();
    c.frames_per_song = j.at("frames_per_song").get<int>();
    c.segment_self_prob = j.at("segment_self_prob").get<double>();
    c.type_weights = j.at("type_weights").get<std::array<double, kChordTypes>>();
    c.noise_std = j.at("noise_std").get<double>();
    c.activation_floor = j.at("activation_floor").get<double>();
    c.activation_ceiling = j.at("activation_ceiling").get<double>();
    c.amplitude_min = j.at("amplitude_min").get<double>();
    c.amplitude_max = j.at("amplitude_max").get<double>();
    c.deviation_scale = j.at("deviation_scale").get<double>();
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed synth config: ") + e.what());
  }
  return c;
}

const Song& Corpus::find(const std::string& id) const {
  for (const Song& s : songs) {
    if (s.id == id) return s;
  }
  throw ValidationError("song '" + id + "' not in corpus");
}

Song generate_synthetic_song(const SynthConfig& cfg, int song_index) {
  Rng rng = Rng(cfg.rng_seed).substream(static_cast<std::uint64_t>(song_index));
  const auto frames = static_cast<std::size_t>(cfg.frames_per_song);

  ChordSequence labels(frames);
  labels[0] = draw_label(cfg, rng, -1);
  for (std::size_t n = 1; n < frames; ++n) {
    labels[n] = rng.bernoulli(cfg.segment_self_prob) ? labels[n - 1]
                                                     : draw_label(cfg, rng, labels[n - 1]);
  }

  // Activation layer before noise: scaled template plus passing notes.
  std::vector<double> clean(frames * kChromaDims, 0.0);
  std::size_t start = 0;
  while (start < frames) {
    std::size_t end = start + 1;
    while (end < frames && labels[end] == labels[start]) ++end;
    const ChordLabel label = ChordLabel::from_index(labels[start]);
    const ChromaFrame tmpl = chord_template(label);
    std::array<double, kChromaChannels> amp{};
    for (double& a : amp) a = rng.uniform(cfg.amplitude_min, cfg.amplitude_max);
    for (std::size_t n = start; n < end; ++n) {
      for (int d = 0; d < kChromaDims; ++d) {
        clean[n * kChromaDims + d] = tmpl[d] * amp[d / kPitchClasses];
      }
    }
    // Up to two passing notes per segment on a non-chord pitch class in the
    // middle or high channel.
    const double rate = std::min(1.0, 0.5 * cfg.deviation_scale);
    const std::uint16_t mask =
        label.is_no_chord() ? 0 : chord_tone_mask(label.type());
    for (int k = 0; k < 2 && rate > 0.0; ++k) {
      if (!rng.bernoulli(rate)) continue;
      int pc = 0;
      do {
        pc = rng.uniform_int(0, kPitchClasses - 1);
      } while (!label.is_no_chord() &&
               ((mask >> positive_mod(pc - label.root(), kPitchClasses)) & 1u));
      const int channel = rng.uniform_int(1, 2);
      const auto len = end - start;
      const auto span = static_cast<std::size_t>(rng.uniform_int(1, static_cast<int>(len)));
      const auto offset =
          start + static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(len - span)));
      const double magnitude = std::min(1.0, cfg.deviation_scale * rng.uniform(0.3, 0.7));
      for (std::size_t n = offset; n < offset + span; ++n) {
        double& v = clean[n * kChromaDims + channel * kPitchClasses + pc];
        v = std::max(v, magnitude);
      }
    }
    start = end;
  }

  std::vector<float> values(frames * kChromaDims);
  for (std::size_t i = 0; i < values.size(); ++i) {
    double v = clean[i];
    if (cfg.noise_std > 0.0) v += cfg.noise_std * rng.normal();
    v = std::clamp(v, cfg.activation_floor, cfg.activation_ceiling);
    values[i] = static_cast<float>(v);
  }

  char id[32];
  std::snprintf(id, sizeof(id), "song_%04d", song_index);
  return Song{id, ChromaSequence::from_values(frames, std::move(values)), std::move(labels)};
}

Corpus generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Corpus corpus;
  corpus.synth = cfg;
  corpus.songs.reserve(static_cast<std::size_t>(cfg.song_count));
  for (int i = 0; i < cfg.song_count; ++i) corpus.songs.push_back(generate_synthetic_song(cfg, i));
  return corpus;
}

RotatedPair pitch_rotate(const ChromaSequence& chroma, const std::optional<ChordSequence>& labels,
                         int semitones) {
  RotatedPair out{ChromaSequence(chroma.frames()), std::nullopt};
  const int r = positive_mod(semitones, kPitchClasses);
  for (std::size_t n = 0; n < chroma.frames(); ++n) {
    for (int c = 0; c < kChromaChannels; ++c) {
      for (int pc = 0; pc < kPitchClasses; ++pc) {
        out.chroma(n, c * kPitchClasses + (pc + r) % kPitchClasses) =
            chroma(n, c * kPitchClasses + pc);
      }
    }
  }
  if (labels) {
    ChordSequence rotated(labels->size());
    for (std::size_t n = 0; n < labels->size(); ++n) {
      rotated[n] = rotate_label(ChordLabel::from_index((*labels)[n]), r).index();
    }
    out.labels = std::move(rotated);
  }
  return out;
}

void write_song_file(const Song& song, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out.write(kSongMagic, 4);
  binio::put<std::uint32_t>(out, static_cast<std::uint32_t>(song.chroma.frames()));
  binio::put<std::uint32_t>(out, kChromaDims);
  binio::put<std::uint8_t>(out, song.labels ? 1 : 0);
  for (float v : song.chroma.values()) binio::put<float>(out, v);
  if (song.labels) {
    for (int l : *song.labels) binio::put<std::uint16_t>(out, static_cast<std::uint16_t>(l));
  }
  if (!out) throw IoError("failed writing " + file.string());
}

Song read_song_file(const fs::path& file, const std::string& id) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kSongMagic, 4) != 0) {
    throw ValidationError("song " + id + ": bad magic in " + file.string());
  }
  const auto frames = binio::get<std::uint32_t>(in, "song " + id + " frame count");
  const auto dims = binio::get<std::uint32_t>(in, "song " + id + " dims");
  const auto has_labels = binio::get<std::uint8_t>(in, "song " + id + " label flag");
  if (frames == 0) throw ValidationError("song " + id + ": zero frames");
  if (dims != kChromaDims) {
    throw ValidationError("song " + id + ": expected 36 dims, got " + std::to_string(dims));
  }
  if (has_labels > 1) throw ValidationError("song " + id + ": bad label flag");
  std::vector<float> values(static_cast<std::size_t>(frames) * kChromaDims);
  for (float& v : values) v = binio::get<float>(in, "song " + id + " chroma");
  Song song;
  song.id = id;
  {
    ChromaSequence c(frames);
    for (std::size_t i = 0; i < values.size(); ++i) c(i / kChromaDims, i % kChromaDims) = values[i];
    c.validate("song " + id);
    song.chroma = std::move(c);
  }
  if (has_labels) {
    ChordSequence labels(frames);
    for (int& l : labels) l = binio::get<std::uint16_t>(in, "song " + id + " labels");
    validate_labels(labels, frames, id);
    song.labels = std::move(labels);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("song " + id + ": trailing bytes in " + file.string());
  }
  return song;
}

void save_corpus(const Corpus& corpus, const fs::path& dir, const nlohmann::json& extra) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json songs = nlohmann::json::array();
  std::set<std::string> seen;
  for (const Song& s : corpus.songs) {
    validate_song_id(s.id);
    if (!seen.insert(s.id).second) throw ValidationError("duplicate song id '" + s.id + "'");
    if (s.labels) validate_labels(*s.labels, s.chroma.frames(), s.id);
    const std::string file = s.id + ".cvae";
    write_song_file(s, dir / file);
    songs.push_back({{"id", s.id},
                     {"file", file},
                     {"frames", s.chroma.frames()},
                     {"has_labels", s.labels.has_value()}});
  }
  nlohmann::json manifest = {{"format", "chordvae-corpus"},
                             {"version", kCorpusVersion},
                             {"vocabulary_hash", vocabulary_hash()},
                             {"dims", kChromaDims},
                             {"songs", songs},
                             {"synth_config", corpus.synth ? corpus.synth->to_json() : nullptr}};
  if (!extra.is_null()) manifest["run"] = extra;
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest in " + dir.string());
}

Corpus load_corpus(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream in(mpath);
  if (!in) throw IoError("cannot open " + mpath.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed corpus manifest " + mpath.string() + ": " + e.what());
  }
  if (manifest.value("format", std::string{}) != "chordvae-corpus") {
    throw ValidationError(mpath.string() + " is not a corpus manifest");
  }
  if (manifest.value("version", 0) != kCorpusVersion) {
    throw ValidationError("unsupported corpus version in " + mpath.string());
  }
  if (manifest.value("vocabulary_hash", std::string{}) != vocabulary_hash()) {
    throw ValidationError("corpus vocabulary hash mismatch in " + mpath.string());
  }
  Corpus corpus;
  if (manifest.contains("synth_config") && !manifest["synth_config"].is_null()) {
    corpus.synth = SynthConfig::from_json(manifest["synth_config"]);
  }
  std::set<std::string> seen;
  try {
    for (const auto& entry : manifest.at("songs")) {
      const std::string id = entry.at("id").get<std::string>();
      validate_song_id(id);
      if (!seen.insert(id).second) throw ValidationError("duplicate song id '" + id + "'");
      Song s = read_song_file(dir / entry.at("file").get<std::string>(), id);
      if (s.chroma.frames() != entry.at("frames").get<std::size_t>() ||
          s.labels.has_value() != entry.at("has_labels").get<bool>()) {
        throw ValidationError("song " + id + ": manifest entry disagrees with song file");
      }
      corpus.songs.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed song table in " + mpath.string() + ": " + e.what());
  }
  return corpus;
}

Song load_chroma_csv(const fs::path& file, const std::string& id) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  validate_song_id(id);
  std::vector<float> values;
  ChordSequence labels;
  std::optional<bool> with_labels;
  std::string line;
  std::size_t line_no = 0, frame = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (frame == 0 && !cells.empty() && cells[0] == "frame") continue;
    const std::string where = file.string() + ":" + std::to_string(line_no);
    if (cells.size() != 1 + kChromaDims && cells.size() != 2 + kChromaDims) {
      throw ValidationError(where + ": expected 37 or 38 columns, got " +
                            std::to_string(cells.size()));
    }
    const bool has = cells.size() == 2 + kChromaDims;
    if (with_labels && *with_labels != has) {
      throw ValidationError(where + ": label column present on some rows only");
    }
    with_labels = has;
    try {
      if (std::stoul(cells[0]) != frame) {
        throw ValidationError(where + ": expected frame " + std::to_string(frame));
      }
      for (int d = 0; d < kChromaDims; ++d) values.push_back(std::stof(cells[1 + d]));
    } catch (const std::logic_error&) {
      throw ValidationError(where + ": non-numeric chroma value");
    }
    if (has) {
      const std::string& tok = cells.back();
      const bool numeric = !tok.empty() && std::all_of(tok.begin(), tok.end(), ::isdigit);
      labels.push_back(numeric ? std::stoi(tok) : parse_label(tok).index());
    }
    ++frame;
  }
  if (frame == 0) throw ValidationError(file.string() + ": no frames");
  Song s;
  s.id = id;
  s.chroma = ChromaSequence(frame);
  for (std::size_t i = 0; i < values.size(); ++i) s.chroma(i / kChromaDims, i % kChromaDims) = values[i];
  s.chroma.validate(file.string());
  if (with_labels.value_or(false)) {
    validate_labels(labels, frame, id);
    s.labels = std::move(labels);
  }
  return s;
}

FoldSplit split_folds(const Corpus& corpus, int folds, int fold_index, double annotated_fraction,
                      std::uint64_t seed) {
  if (corpus.songs.empty()) throw ValidationError("cannot split an empty corpus");
  if (folds < 2) throw ValidationError("need at least 2 folds");
  if (fold_index < 0 || fold_index >= folds) throw ValidationError("fold index out of range");
  if (!(annotated_fraction >= 0.0 && annotated_fraction <= 1.0)) {
    throw ValidationError("annotated fraction must lie in [0,1]");
  }
  const std::size_t n = corpus.songs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng.engine());

  const auto f = static_cast<std::size_t>(fold_index);
  const auto k = static_cast<std::size_t>(folds);
  const std::size_t lo = f * n / k, hi = (f + 1) * n / k;
  FoldSplit split;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < n; ++i) {
    (i >= lo && i < hi ? split.test : train).push_back(order[i]);
  }
  const auto n_ann = static_cast<std::size_t>(
      std::llround(annotated_fraction * static_cast<double>(train.size())));
  for (std::size_t i = 0; i < train.size(); ++i) {
    (i < n_ann ? split.annotated : split.unannotated).push_back(train[i]);
  }
  return split;
}

TrainingData make_training_data(const Corpus& corpus, const FoldSplit& split) {
  TrainingData data;
  for (std::size_t i : split.annotated) {
    const Song& s = corpus.songs.at(i);
    if (!s.labels) throw ValidationError("song " + s.id + " is in the annotated set but has no labels");
    data.annotated.push_back(s);
  }
  for (std::size_t i : split.unannotated) {
    Song s = corpus.songs.at(i);
    s.labels.reset();
    data.unannotated.push_back(std::move(s));
  }
  return data;
}

}  // namespace chordvae
