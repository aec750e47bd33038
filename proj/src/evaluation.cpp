#include "chordvae/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "chordvae/error.hpp"

namespace chordvae {
namespace {

void require_same_length(const ChordSequence& est, const ChordSequence& ref, const char* what) {
  if (est.size() != ref.size()) {
    throw ValidationError(std::string(what) + ": estimate has " + std::to_string(est.size()) +
                          " frames, reference has " + std::to_string(ref.size()));
  }
}

// Shortest text that parses back to the same double.
std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : "NA"; }

const char* type_column(int t) {
  static const char* names[kChordTypes] = {"maj", "min", "dim", "aug", "sus2",
                                           "sus4", "1",   "5",   "N"};
  return names[t];
}

double median_of(std::vector<std::size_t> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  if (v.size() % 2 == 1) return static_cast<double>(v[m]);
  return 0.5 * static_cast<double>(v[m - 1] + v[m]);
}

DurationStats stats_from(std::vector<std::size_t> frames, double fps) {
  if (!(fps > 0.0)) throw ValidationError("fps must be > 0");
  DurationStats d;
  d.fps = fps;
  d.frames = std::move(frames);
  if (!d.frames.empty()) {
    double s = 0.0;
    for (std::size_t f : d.frames) s += static_cast<double>(f);
    d.mean_frames = s / static_cast<double>(d.frames.size());
    d.median_frames = median_of(d.frames);
  }
  return d;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::string criterion_name(Criterion c) { return c == Criterion::kMajmin ? "majmin" : "triads"; }

std::optional<double> FrameScore::accuracy() const {
  if (scored == 0) return std::nullopt;
  return static_cast<double>(matched) / static_cast<double>(scored);
}

FrameScore& FrameScore::operator+=(const FrameScore& o) {
  matched += o.matched;
  scored += o.scored;
  return *this;
}

FrameScore frame_accuracy(const ChordSequence& est, const ChordSequence& ref, Criterion c) {
  require_same_length(est, ref, "frame_accuracy");
  FrameScore s;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    if (c == Criterion::kTriads) {
      ++s.scored;
      s.matched += est[n] == ref[n];
      continue;
    }
    const MajminLabel r = reduce_majmin(index_to_label(ref[n]));
    if (!r.mapped()) continue;
    ++s.scored;
    s.matched += reduce_majmin(index_to_label(est[n])) == r;
  }
  return s;
}

std::optional<double> weighted_corpus_accuracy(const std::vector<FrameScore>& songs) {
  FrameScore total;
  for (const FrameScore& s : songs) total += s;
  return total.accuracy();
}

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts)
    for (std::size_t v : row) t += v;
  return t;
}

std::size_t ConfusionMatrix::root_error_total() const {
  std::size_t t = 0;
  for (std::size_t v : root_errors) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  for (int r = 0; r < kChordTypes; ++r) {
    for (int c = 0; c < kChordTypes; ++c) counts[r][c] += o.counts[r][c];
    root_errors[r] += o.root_errors[r];
  }
  return *this;
}

ConfusionMatrix confusion_by_type(const ChordSequence& est, const ChordSequence& ref) {
  require_same_length(est, ref, "confusion_by_type");
  ConfusionMatrix m;
  for (std::size_t n = 0; n < ref.size(); ++n) {
    const ChordLabel r = index_to_label(ref[n]);
    const ChordLabel e = index_to_label(est[n]);
    const auto rt = static_cast<std::size_t>(r.type());
    const bool same_root = r.is_no_chord() == e.is_no_chord() &&
                           (r.is_no_chord() || r.root() == e.root());
    if (same_root) {
      ++m.counts[rt][static_cast<std::size_t>(e.type())];
    } else {
      ++m.root_errors[rt];
    }
  }
  return m;
}

std::vector<Segment> segment_runs(const ChordSequence& s) {
  std::vector<Segment> out;
  for (std::size_t n = 0; n < s.size(); ++n) {
    if (out.empty() || out.back().label != s[n]) {
      out.push_back({n, 1, s[n]});
    } else {
      ++out.back().frames;
    }
  }
  return out;
}

DurationStats segment_durations(const ChordSequence& s, double fps) {
  std::vector<std::size_t> frames;
  for (const Segment& seg : segment_runs(s)) frames.push_back(seg.frames);
  return stats_from(std::move(frames), fps);
}

DurationStats pooled_durations(const std::vector<const ChordSequence*>& seqs, double fps) {
  std::vector<std::size_t> frames;
  for (const ChordSequence* s : seqs)
    for (const Segment& seg : segment_runs(*s)) frames.push_back(seg.frames);
  return stats_from(std::move(frames), fps);
}

EvalReport evaluate(const std::vector<SongEstimate>& songs, double fps, nlohmann::json metadata) {
  if (songs.empty()) throw ValidationError("evaluation needs at least one song");
  if (!(fps > 0.0)) throw ValidationError("fps must be > 0");
  EvalReport rep;
  rep.metadata = std::move(metadata);
  std::vector<FrameScore> mm, tr;
  std::vector<const ChordSequence*> est_seqs, pre_seqs;
  bool all_pre = true;
  for (const SongEstimate& s : songs) {
    SongResult r;
    r.id = s.id;
    r.frames = s.reference.size();
    r.majmin = frame_accuracy(s.estimate, s.reference, Criterion::kMajmin);
    r.triads = frame_accuracy(s.estimate, s.reference, Criterion::kTriads);
    mm.push_back(r.majmin);
    tr.push_back(r.triads);
    rep.confusion += confusion_by_type(s.estimate, s.reference);
    est_seqs.push_back(&s.estimate);
    if (s.pre_viterbi) {
      require_same_length(*s.pre_viterbi, s.reference, s.id.c_str());
      pre_seqs.push_back(&*s.pre_viterbi);
    } else {
      all_pre = false;
    }
    rep.songs.push_back(std::move(r));
  }
  rep.majmin = weighted_corpus_accuracy(mm);
  rep.triads = weighted_corpus_accuracy(tr);
  rep.estimate_durations = pooled_durations(est_seqs, fps);
  if (all_pre) rep.pre_viterbi_durations = pooled_durations(pre_seqs, fps);
  return rep;
}

std::string per_song_csv(const EvalReport& report, const std::vector<Criterion>& criteria) {
  std::ostringstream out;
  out << "song_id,frames";
  for (Criterion c : criteria) {
    const std::string n = criterion_name(c);
    out << ',' << n << "_matched," << n << "_scored," << n << "_accuracy";
  }
  out << '\n';
  for (const SongResult& r : report.songs) {
    out << r.id << ',' << r.frames;
    for (Criterion c : criteria) {
      const FrameScore& s = c == Criterion::kMajmin ? r.majmin : r.triads;
      out << ',' << s.matched << ',' << s.scored << ',' << fmt(s.accuracy());
    }
    out << '\n';
  }
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& m) {
  std::ostringstream out;
  out << "reference";
  for (int t = 0; t < kChordTypes; ++t) out << ',' << type_column(t);
  out << ",root_error\n";
  for (int r = 0; r < kChordTypes; ++r) {
    out << type_column(r);
    for (int c = 0; c < kChordTypes; ++c) out << ',' << m.counts[r][c];
    out << ',' << m.root_errors[r] << '\n';
  }
  return out.str();
}

std::string durations_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "source,segment,frames,seconds\n";
  auto dump = [&](const char* source, const DurationStats& d) {
    for (std::size_t i = 0; i < d.frames.size(); ++i) {
      out << source << ',' << i << ',' << d.frames[i] << ','
          << fmt(static_cast<double>(d.frames[i]) / d.fps) << '\n';
    }
  };
  if (report.pre_viterbi_durations) dump("pre_viterbi", *report.pre_viterbi_durations);
  dump("estimate", report.estimate_durations);
  return out.str();
}

std::string summary_text(const EvalReport& report, const std::vector<Criterion>& criteria) {
  std::ostringstream out;
  for (const auto& [key, value] : report.metadata.items()) {
    out << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << '\n';
  }
  std::size_t frames = 0;
  for (const SongResult& r : report.songs) frames += r.frames;
  out << "songs: " << report.songs.size() << '\n';
  out << "frames: " << frames << '\n';
  for (Criterion c : criteria) {
    const auto& acc = c == Criterion::kMajmin ? report.majmin : report.triads;
    out << criterion_name(c) << "_accuracy: " << (acc ? fmt(*acc) : "no scored frames") << '\n';
  }
  out << "confusion_frames: " << report.confusion.total() << '\n';
  out << "root_error_frames: " << report.confusion.root_error_total() << '\n';
  auto dur = [&](const char* name, const DurationStats& d) {
    out << name << "_segments: " << d.frames.size() << '\n';
    out << name << "_mean_duration_s: " << fmt(d.mean_seconds()) << '\n';
    out << name << "_median_duration_s: " << fmt(d.median_seconds()) << '\n';
  };
  if (report.pre_viterbi_durations) dur("pre_viterbi", *report.pre_viterbi_durations);
  dur("estimate", report.estimate_durations);
  out << "fps: " << fmt(report.estimate_durations.fps) << '\n';
  return out.str();
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir,
                 const std::vector<Criterion>& criteria) {
  namespace fs = std::filesystem;
  if (report.songs.empty()) throw ValidationError("cannot emit a report for an empty corpus");
  if (criteria.empty()) throw ValidationError("no evaluation criterion selected");
  const std::vector<std::pair<std::string, std::string>> files = {
      {"per_song.csv", per_song_csv(report, criteria)},
      {"confusion.csv", confusion_csv(report.confusion)},
      {"durations.csv", durations_csv(report)},
      {"summary.txt", summary_text(report, criteria)},
  };
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const fs::path staging = dir / ".staging";
  fs::remove_all(staging, ec);
  fs::create_directories(staging, ec);
  if (ec) throw IoError("cannot create " + staging.string() + ": " + ec.message());
  try {
    for (const auto& [name, text] : files) write_file(staging / name, text);
    for (const auto& [name, text] : files) {
      fs::rename(staging / name, dir / name);
    }
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw IoError(e.what());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  fs::remove_all(staging, ec);
}

}  // namespace chordvae
