#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "chordvae/corpus.hpp"

namespace chordvae {

enum class Criterion { kMajmin, kTriads };

std::string criterion_name(Criterion c);

struct FrameScore {
  std::size_t matched = 0;
  std::size_t scored = 0;

  // Empty when no frame was scored.
  std::optional<double> accuracy() const;
  FrameScore& operator+=(const FrameScore& o);
};

// triads: exact index match on every frame. majmin: frames whose reference
// has no majmin reduction are dropped; other frames match when both reduce to
// the same class.
FrameScore frame_accuracy(const ChordSequence& est, const ChordSequence& ref, Criterion c);

// sum matched / sum scored. Empty when nothing was scored.
std::optional<double> weighted_corpus_accuracy(const std::vector<FrameScore>& songs);

// Frames by (reference type, estimated type) for frames whose roots agree,
// with no-chord agreeing only with no-chord. Other frames are counted as root
// errors under their reference type.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kChordTypes>, kChordTypes> counts{};
  std::array<std::size_t, kChordTypes> root_errors{};

  std::size_t total() const;
  std::size_t root_error_total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
};

ConfusionMatrix confusion_by_type(const ChordSequence& est, const ChordSequence& ref);

struct Segment {
  std::size_t start = 0;
  std::size_t frames = 0;
  int label = 0;
};

// Maximal runs of a constant label.
std::vector<Segment> segment_runs(const ChordSequence& s);

struct DurationStats {
  double fps = 0.0;
  std::vector<std::size_t> frames;  // one entry per segment
  double mean_frames = 0.0;
  double median_frames = 0.0;
  double mean_seconds() const { return mean_frames / fps; }
  double median_seconds() const { return median_frames / fps; }
};

DurationStats segment_durations(const ChordSequence& s, double fps);
// Segments pooled over several sequences.
DurationStats pooled_durations(const std::vector<const ChordSequence*>& seqs, double fps);

inline constexpr double kDefaultFps = 44100.0 / 4096.0;

struct SongEstimate {
  std::string id;
  ChordSequence reference;
  ChordSequence estimate;                  // the sequence that is scored
  std::optional<ChordSequence> pre_viterbi;  // frame-wise argmax when available
};

struct SongResult {
  std::string id;
  std::size_t frames = 0;
  FrameScore majmin;
  FrameScore triads;
};

struct EvalReport {
  std::vector<SongResult> songs;
  std::optional<double> majmin;
  std::optional<double> triads;
  ConfusionMatrix confusion;
  DurationStats estimate_durations;
  std::optional<DurationStats> pre_viterbi_durations;
  nlohmann::json metadata;  // condition: mode, prior, p_self, seed, ...
};

EvalReport evaluate(const std::vector<SongEstimate>& songs, double fps,
                    nlohmann::json metadata = nlohmann::json::object());

// Writes per_song.csv, confusion.csv, durations.csv and summary.txt into
// `dir`. Files are staged and moved into place only after all writes succeed.
void emit_report(const EvalReport& report, const std::filesystem::path& dir,
                 const std::vector<Criterion>& criteria = {Criterion::kMajmin,
                                                           Criterion::kTriads});

std::string per_song_csv(const EvalReport& report, const std::vector<Criterion>& criteria);
std::string confusion_csv(const ConfusionMatrix& m);
std::string durations_csv(const EvalReport& report);
std::string summary_text(const EvalReport& report, const std::vector<Criterion>& criteria);

}  // namespace chordvae
