#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "chordvae/error.hpp"
#include "chordvae/evaluation.hpp"
#include "chordvae/rng.hpp"
#include "temp_dir.hpp"

using namespace chordvae;

namespace {

int idx(const char* name) { return parse_label(name).index(); }

ChordSequence repeat(const char* name, std::size_t n) { return ChordSequence(n, idx(name)); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

ChordSequence random_sequence(std::size_t n, Rng& rng) {
  ChordSequence s(n);
  for (int& v : s) v = rng.uniform_int(0, kNoChordIndex);
  return s;
}

}  // namespace

TEST(FrameAccuracy, IdenticalSequencesScoreOne) {
  Rng rng(1);
  const ChordSequence s = random_sequence(200, rng);
  const FrameScore t = frame_accuracy(s, s, Criterion::kTriads);
  EXPECT_EQ(t.scored, 200u);
  EXPECT_EQ(*t.accuracy(), 1.0);
  const FrameScore m = frame_accuracy(s, s, Criterion::kMajmin);
  EXPECT_LE(m.scored, 200u);
  EXPECT_EQ(*m.accuracy(), 1.0);
}

TEST(FrameAccuracy, UnmappedReferenceFramesAreExcluded) {
  const ChordSequence ref = repeat("C:sus4", 10), est = repeat("C:maj", 10);
  const FrameScore t = frame_accuracy(est, ref, Criterion::kTriads);
  EXPECT_EQ(t.scored, 10u);
  EXPECT_EQ(t.matched, 0u);
  const FrameScore m = frame_accuracy(est, ref, Criterion::kMajmin);
  EXPECT_EQ(m.scored, 0u);
  EXPECT_FALSE(m.accuracy().has_value());
}

TEST(FrameAccuracy, WrongQualityScoresZero) {
  const ChordSequence ref = repeat("C:min", 12), est = repeat("C:maj", 12);
  EXPECT_EQ(*frame_accuracy(est, ref, Criterion::kTriads).accuracy(), 0.0);
  EXPECT_EQ(*frame_accuracy(est, ref, Criterion::kMajmin).accuracy(), 0.0);
}

TEST(FrameAccuracy, MajminReductionRules) {
  // Reference C:maj, estimate C:sus4 reduces to nothing and so misses.
  const ChordSequence ref = {idx("C:maj"), idx("N"), idx("A:min"), idx("D:aug"), idx("E:maj")};
  const ChordSequence est = {idx("C:sus4"), idx("N"), idx("A:min"), idx("D:maj"), idx("E:maj")};
  const FrameScore m = frame_accuracy(est, ref, Criterion::kMajmin);
  EXPECT_EQ(m.scored, 4u);  // D:aug reference dropped, N scored
  EXPECT_EQ(m.matched, 3u);
  const FrameScore t = frame_accuracy(est, ref, Criterion::kTriads);
  EXPECT_EQ(t.scored, 5u);
  EXPECT_EQ(t.matched, 3u);
  EXPECT_THROW(frame_accuracy({1, 2}, {1}, Criterion::kTriads), ValidationError);
}

TEST(CorpusAccuracy, WeightedBySongLength) {
  EXPECT_DOUBLE_EQ(*weighted_corpus_accuracy({{100, 100}, {0, 300}}), 0.25);
  EXPECT_DOUBLE_EQ(*weighted_corpus_accuracy({{0, 300}, {100, 100}}), 0.25);
  EXPECT_DOUBLE_EQ(*weighted_corpus_accuracy({{7, 9}}), 7.0 / 9.0);
  EXPECT_FALSE(weighted_corpus_accuracy({{0, 0}, {0, 0}}).has_value());
  EXPECT_FALSE(weighted_corpus_accuracy({}).has_value());
  FrameScore a{3, 4};
  a += FrameScore{1, 6};
  EXPECT_EQ(a.matched, 4u);
  EXPECT_EQ(a.scored, 10u);
}

TEST(Confusion, RulesAndTotals) {
  const ChordSequence s = {idx("C:maj"), idx("D:min"), idx("N"), idx("F#:sus2")};
  const ConfusionMatrix same = confusion_by_type(s, s);
  for (int r = 0; r < kChordTypes; ++r)
    for (int c = 0; c < kChordTypes; ++c)
      EXPECT_EQ(same.counts[r][c], r == c && (r == 0 || r == 1 || r == 8 || r == 4) ? 1u : 0u);

  const ConfusionMatrix wrong_root = confusion_by_type({idx("G:maj")}, {idx("C:maj")});
  EXPECT_EQ(wrong_root.total(), 0u);
  EXPECT_EQ(wrong_root.root_errors[0], 1u);

  const ConfusionMatrix quality = confusion_by_type({idx("C:maj")}, {idx("C:sus2")});
  EXPECT_EQ(quality.counts[static_cast<int>(ChordType::kSus2)][static_cast<int>(ChordType::kMaj)],
            1u);

  const ConfusionMatrix no_chord = confusion_by_type({idx("C:maj"), idx("N")}, {idx("N"), idx("C:maj")});
  EXPECT_EQ(no_chord.total(), 0u);
  EXPECT_EQ(no_chord.root_errors[8], 1u);
  EXPECT_EQ(no_chord.root_errors[0], 1u);

  Rng rng(2);
  const ChordSequence ref = random_sequence(500, rng), est = random_sequence(500, rng);
  const ConfusionMatrix m = confusion_by_type(est, ref);
  EXPECT_EQ(m.total() + m.root_error_total(), 500u);
  for (int r = 0; r < kChordTypes; ++r) {
    std::size_t row = m.root_errors[r];
    for (int c = 0; c < kChordTypes; ++c) row += m.counts[r][c];
    const auto expect = static_cast<std::size_t>(std::count_if(
        ref.begin(), ref.end(), [&](int v) { return static_cast<int>(index_to_label(v).type()) == r; }));
    EXPECT_EQ(row, expect);
  }
  EXPECT_THROW(confusion_by_type({1}, {1, 2}), ValidationError);
}

TEST(Durations, SegmentsPartitionTheSequence) {
  const DurationStats c = segment_durations(repeat("A:maj", 20), 10.0);
  ASSERT_EQ(c.frames.size(), 1u);
  EXPECT_DOUBLE_EQ(c.mean_seconds(), 2.0);
  EXPECT_DOUBLE_EQ(c.median_seconds(), 2.0);

  ChordSequence alt(9);
  for (std::size_t i = 0; i < alt.size(); ++i) alt[i] = static_cast<int>(i % 2);
  const DurationStats a = segment_durations(alt, 10.0);
  EXPECT_EQ(a.frames, std::vector<std::size_t>(9, 1));

  Rng rng(3);
  ChordSequence s;
  for (int i = 0; i < 30; ++i) s.insert(s.end(), static_cast<std::size_t>(rng.uniform_int(1, 9)), i % 4);
  std::size_t total = 0;
  for (std::size_t f : segment_durations(s, kDefaultFps).frames) total += f;
  EXPECT_EQ(total, s.size());

  const std::vector<Segment> runs = segment_runs({3, 3, 5, 5, 5, 3});
  ASSERT_EQ(runs.size(), 3u);
  EXPECT_EQ(runs[1].start, 2u);
  EXPECT_EQ(runs[1].frames, 3u);
  EXPECT_EQ(runs[1].label, 5);
  EXPECT_TRUE(segment_runs({}).empty());
  EXPECT_THROW(segment_durations({1}, 0.0), ValidationError);
}

TEST(Durations, PooledOverSongsWithMedian) {
  const ChordSequence a = {1, 1, 1, 2}, b = {4, 4, 4, 4, 4, 4};
  const DurationStats d = pooled_durations({&a, &b}, 2.0);
  EXPECT_EQ(d.frames, (std::vector<std::size_t>{3, 1, 6}));
  EXPECT_DOUBLE_EQ(d.mean_frames, 10.0 / 3.0);
  EXPECT_DOUBLE_EQ(d.median_frames, 3.0);
  EXPECT_DOUBLE_EQ(d.median_seconds(), 1.5);
  const ChordSequence c = {0, 0};
  EXPECT_DOUBLE_EQ(pooled_durations({&a, &c}, 1.0).median_frames, 2.0);
  EXPECT_NEAR(kDefaultFps, 10.766, 1e-3);
}

TEST(Evaluate, AggregatesSongs) {
  std::vector<SongEstimate> songs = {
      {"a", repeat("C:maj", 100), repeat("C:maj", 100), repeat("C:maj", 100)},
      {"b", repeat("D:min", 300), repeat("D:maj", 300), repeat("D:maj", 300)}};
  const EvalReport r = evaluate(songs, 10.0, {{"mode", "vae-ssl"}});
  ASSERT_EQ(r.songs.size(), 2u);
  EXPECT_DOUBLE_EQ(*r.majmin, 0.25);
  EXPECT_DOUBLE_EQ(*r.triads, 0.25);
  EXPECT_EQ(r.confusion.total(), 400u);
  ASSERT_TRUE(r.pre_viterbi_durations.has_value());
  EXPECT_EQ(r.estimate_durations.frames, (std::vector<std::size_t>{100, 300}));
  songs[1].pre_viterbi.reset();
  EXPECT_FALSE(evaluate(songs, 10.0).pre_viterbi_durations.has_value());
  EXPECT_THROW(evaluate({}, 10.0), ValidationError);
  songs[0].estimate.pop_back();
  EXPECT_THROW(evaluate(songs, 10.0), ValidationError);
}

TEST(Report, FilesRoundTripAndCarryMetadata) {
  TempDir tmp;
  std::vector<SongEstimate> songs = {
      {"song_a", {idx("C:maj"), idx("C:maj"), idx("G:maj")}, {idx("C:maj"), idx("C:min"), idx("G:maj")},
       ChordSequence{idx("C:maj"), idx("C:min"), idx("E:maj")}},
      {"song_b", repeat("C:sus4", 2), repeat("C:maj", 2), repeat("C:maj", 2)}};
  const nlohmann::json meta = {{"mode", "vae-ssl"}, {"prior", "markov"}, {"p_self", 0.9}, {"seed", 3}};
  const EvalReport r = evaluate(songs, 10.0, meta);
  emit_report(r, tmp / "report");

  const auto per_song = parse_csv(slurp(tmp / "report" / "per_song.csv"));
  ASSERT_EQ(per_song.size(), 3u);
  EXPECT_EQ(per_song[0], (std::vector<std::string>{"song_id", "frames", "majmin_matched",
                                                   "majmin_scored", "majmin_accuracy",
                                                   "triads_matched", "triads_scored",
                                                   "triads_accuracy"}));
  EXPECT_EQ(per_song[1][0], "song_a");
  EXPECT_EQ(std::stoul(per_song[1][2]), r.songs[0].majmin.matched);
  EXPECT_DOUBLE_EQ(std::stod(per_song[1][4]), *r.songs[0].majmin.accuracy());
  EXPECT_EQ(per_song[2][4], "NA");
  EXPECT_DOUBLE_EQ(std::stod(per_song[2][7]), 0.0);

  const auto conf = parse_csv(slurp(tmp / "report" / "confusion.csv"));
  ASSERT_EQ(conf.size(), 10u);
  EXPECT_EQ(conf[0].back(), "root_error");
  for (int t = 0; t < kChordTypes; ++t)
    for (int c = 0; c < kChordTypes; ++c)
      EXPECT_EQ(std::stoul(conf[static_cast<std::size_t>(t) + 1][static_cast<std::size_t>(c) + 1]),
                r.confusion.counts[t][c]);

  const auto dur = parse_csv(slurp(tmp / "report" / "durations.csv"));
  EXPECT_EQ(dur[0], (std::vector<std::string>{"source", "segment", "frames", "seconds"}));
  std::size_t pre = 0, est = 0;
  for (std::size_t i = 1; i < dur.size(); ++i) (dur[i][0] == "pre_viterbi" ? pre : est) += std::stoul(dur[i][2]);
  EXPECT_EQ(pre, 5u);
  EXPECT_EQ(est, 5u);

  const std::string summary = slurp(tmp / "report" / "summary.txt");
  for (const char* key : {"mode: vae-ssl", "prior: markov", "p_self: 0.9", "seed: 3", "songs: 2",
                          "majmin_accuracy: ", "triads_accuracy: ", "pre_viterbi_median_duration_s"})
    EXPECT_NE(summary.find(key), std::string::npos) << key;
  EXPECT_FALSE(std::filesystem::exists(tmp / "report" / ".staging"));
}

TEST(Report, NoScoredFramesAndSingleCriterion) {
  TempDir tmp;
  const EvalReport r = evaluate({{"x", repeat("C:sus4", 3), repeat("C:maj", 3), std::nullopt}}, 10.0);
  emit_report(r, tmp / "out", {Criterion::kMajmin});
  const std::string summary = slurp(tmp / "out" / "summary.txt");
  EXPECT_NE(summary.find("majmin_accuracy: no scored frames"), std::string::npos);
  EXPECT_EQ(summary.find("triads_accuracy"), std::string::npos);
  EXPECT_EQ(parse_csv(slurp(tmp / "out" / "per_song.csv"))[0].size(), 5u);
}

TEST(Report, EmptyCorpusWritesNothing) {
  TempDir tmp;
  EvalReport empty;
  EXPECT_THROW(emit_report(empty, tmp / "nothing"), ValidationError);
  EXPECT_FALSE(std::filesystem::exists(tmp / "nothing"));
}
