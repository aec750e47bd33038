#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "chordvae/chord_vocab.hpp"
#include "chordvae/tensor.hpp"

namespace chordvae {

// N x 36 pitch-class activations in [0,1]. Dims 0-11 bass, 12-23 middle,
// 24-35 high. Stored as 32-bit floats, which is also the on-disk precision.
class ChromaSequence {
 public:
  ChromaSequence() = default;
  explicit ChromaSequence(std::size_t frames);
  // Validates frames > 0 and the [0,1] range.
  static ChromaSequence from_values(std::size_t frames, std::vector<float> values);

  std::size_t frames() const { return values_.size() / kChromaDims; }
  float operator()(std::size_t n, std::size_t d) const { return values_[n * kChromaDims + d]; }
  float& operator()(std::size_t n, std::size_t d) { return values_[n * kChromaDims + d]; }
  std::span<const float> row(std::size_t n) const {
    return {values_.data() + n * kChromaDims, kChromaDims};
  }
  std::span<const float> values() const { return values_; }

  // Throws ValidationError naming `context` if any entry leaves [0,1].
  void validate(const std::string& context) const;

  // Frames [start, start + count) as a new sequence.
  ChromaSequence crop(std::size_t start, std::size_t count) const;
  Tensor to_tensor() const;

  friend bool operator==(const ChromaSequence&, const ChromaSequence&) = default;

 private:
  std::vector<float> values_;
};

using ChordSequence = std::vector<int>;

void validate_labels(const ChordSequence& labels, std::size_t frames, const std::string& song_id);

struct Song {
  std::string id;
  ChromaSequence chroma;
  std::optional<ChordSequence> labels;

  friend bool operator==(const Song&, const Song&) = default;
};

struct SynthConfig {
  int song_count = 100;
  int frames_per_song = 200;
  double segment_self_prob = 0.9;
  // maj, min, dim, aug, sus2, sus4, 1, 5, N
  std::array<double, kChordTypes> type_weights = {0.40, 0.25, 0.05, 0.04, 0.04,
                                                  0.06, 0.03, 0.05, 0.08};
  double noise_std = 0.05;
  double activation_floor = 0.0;
  double activation_ceiling = 1.0;
  double amplitude_min = 0.6;
  double amplitude_max = 1.0;
  double deviation_scale = 1.0;
  std::uint64_t rng_seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

struct Corpus {
  std::vector<Song> songs;
  std::optional<SynthConfig> synth;

  const Song& find(const std::string& id) const;
  friend bool operator==(const Corpus& a, const Corpus& b) { return a.songs == b.songs; }
};

// Each song draws from its own substream of the seed, so the result does not
// depend on generation order.
Corpus generate_synthetic_corpus(const SynthConfig& cfg);
Song generate_synthetic_song(const SynthConfig& cfg, int song_index);

struct RotatedPair {
  ChromaSequence chroma;
  std::optional<ChordSequence> labels;
};

RotatedPair pitch_rotate(const ChromaSequence& chroma, const std::optional<ChordSequence>& labels,
                         int semitones);

// Directory container: manifest.json plus one binary file per song.
// `extra` is merged into the manifest under "run" when not null.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                 const nlohmann::json& extra = nullptr);
Corpus load_corpus(const std::filesystem::path& dir);

void write_song_file(const Song& song, const std::filesystem::path& file);
Song read_song_file(const std::filesystem::path& file, const std::string& id);

// `frame,dim0..dim35[,label]` with an optional header row. Labels may be
// Harte strings or vocabulary indices.
Song load_chroma_csv(const std::filesystem::path& file, const std::string& id);

struct FoldSplit {
  std::vector<std::size_t> annotated;    // indices into the corpus
  std::vector<std::size_t> unannotated;
  std::vector<std::size_t> test;
};

FoldSplit split_folds(const Corpus& corpus, int folds, int fold_index, double annotated_fraction,
                      std::uint64_t seed);

// Training-side view of a split: unannotated songs carry no labels.
struct TrainingData {
  std::vector<Song> annotated;
  std::vector<Song> unannotated;
};

TrainingData make_training_data(const Corpus& corpus, const FoldSplit& split);

}  // namespace chordvae
