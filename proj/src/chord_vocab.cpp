#include "chordvae/chord_vocab.hpp"

#include <sstream>

#include "chordvae/error.hpp"
#include "chordvae/hash.hpp"

namespace chordvae {
namespace {

constexpr std::array<std::string_view, kChordTypes> kShorthands = {
    "maj", "min", "dim", "aug", "sus2", "sus4", "1", "5", "N"};

constexpr std::array<std::string_view, kPitchClasses> kSharpNames = {
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

int parse_note(std::string_view note) {
  if (note.empty()) throw ParseError("empty root note");
  int base = 0;
  switch (note[0]) {
    case 'C': base = 0; break;
    case 'D': base = 2; break;
    case 'E': base = 4; break;
    case 'F': base = 5; break;
    case 'G': base = 7; break;
    case 'A': base = 9; break;
    case 'B': base = 11; break;
    default:
      throw ParseError("unknown root note '" + std::string(note) + "'");
  }
  int shift = 0;
  for (char c : note.substr(1)) {
    if (c == '#') {
      ++shift;
    } else if (c == 'b') {
      --shift;
    } else {
      throw ParseError("unknown root note '" + std::string(note) + "'");
    }
  }
  if (shift < -1 || shift > 1) {
    throw ParseError("unknown root note '" + std::string(note) + "'");
  }
  return positive_mod(base + shift, kPitchClasses);
}

}  // namespace

std::string_view shorthand(ChordType type) {
  return kShorthands[static_cast<std::size_t>(type)];
}

ChordLabel::ChordLabel(int root, ChordType type) : root_(0), type_(type) {
  if (type != ChordType::kNoChord) {
    if (root < 0 || root >= kPitchClasses) {
      throw ValidationError("chord root out of range: " + std::to_string(root));
    }
    root_ = root;
  }
}

ChordLabel ChordLabel::from_index(int index) {
  if (index < 0 || index >= kVocabSize) {
    throw ValidationError("vocabulary index out of range: " + std::to_string(index));
  }
  if (index == kNoChordIndex) return no_chord();
  return ChordLabel(index % kPitchClasses, static_cast<ChordType>(index / kPitchClasses));
}

int ChordLabel::index() const {
  if (is_no_chord()) return kNoChordIndex;
  return static_cast<int>(type_) * kPitchClasses + root_;
}

int label_to_index(const ChordLabel& label) { return label.index(); }

ChordLabel index_to_label(int index) { return ChordLabel::from_index(index); }

ChordLabel parse_label(std::string_view text) {
  if (text == "N") return ChordLabel::no_chord();
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ParseError("malformed chord label '" + std::string(text) +
                     "': expected <note>:<shorthand> or N");
  }
  int root = 0;
  try {
    root = parse_note(text.substr(0, colon));
  } catch (const ParseError& e) {
    throw ParseError(std::string(e.what()) + " in '" + std::string(text) + "'");
  }
  const std::string_view tail = text.substr(colon + 1);
  for (int t = 0; t < kRootedTypes; ++t) {
    if (tail == kShorthands[t]) return ChordLabel(root, static_cast<ChordType>(t));
  }
  throw ParseError("unknown chord shorthand '" + std::string(tail) + "' in '" +
                   std::string(text) + "'");
}

std::string format_label(const ChordLabel& label) {
  if (label.is_no_chord()) return "N";
  std::string out(kSharpNames[label.root()]);
  out += ':';
  out += shorthand(label.type());
  return out;
}

ChordLabel rotate_label(const ChordLabel& label, int semitones) {
  if (label.is_no_chord()) return label;
  return ChordLabel(positive_mod(label.root() + semitones, kPitchClasses), label.type());
}

std::uint16_t chord_tone_mask(ChordType type) {
  auto bits = [](std::initializer_list<int> pcs) {
    std::uint16_t m = 0;
    for (int pc : pcs) m |= static_cast<std::uint16_t>(1u << pc);
    return m;
  };
  switch (type) {
    case ChordType::kMaj: return bits({0, 4, 7});
    case ChordType::kMin: return bits({0, 3, 7});
    case ChordType::kDim: return bits({0, 3, 6});
    case ChordType::kAug: return bits({0, 4, 8});
    case ChordType::kSus2: return bits({0, 2, 7});
    case ChordType::kSus4: return bits({0, 5, 7});
    case ChordType::kPow1: return bits({0});
    case ChordType::kPow5: return bits({0, 7});
    case ChordType::kNoChord: return 0;
  }
  return 0;
}

ChromaFrame chord_template(const ChordLabel& label) {
  ChromaFrame frame{};
  if (label.is_no_chord()) return frame;
  frame[label.root()] = 1.0;
  const std::uint16_t mask = chord_tone_mask(label.type());
  for (int interval = 0; interval < kPitchClasses; ++interval) {
    if ((mask >> interval) & 1u) {
      const int pc = (label.root() + interval) % kPitchClasses;
      frame[kPitchClasses + pc] = 1.0;
      frame[2 * kPitchClasses + pc] = 1.0;
    }
  }
  return frame;
}

ChromaFrame rotate_chroma(const ChromaFrame& frame, int semitones) {
  ChromaFrame out{};
  for (int c = 0; c < kChromaChannels; ++c) {
    for (int pc = 0; pc < kPitchClasses; ++pc) {
      out[c * kPitchClasses + positive_mod(pc + semitones, kPitchClasses)] =
          frame[c * kPitchClasses + pc];
    }
  }
  return out;
}

MajminLabel reduce_majmin(const ChordLabel& label) {
  switch (label.type()) {
    case ChordType::kMaj: return {label.root()};
    case ChordType::kMin: return {kPitchClasses + label.root()};
    case ChordType::kNoChord: return {2 * kPitchClasses};
    default: return {std::nullopt};
  }
}

std::string vocabulary_csv() {
  std::ostringstream out;
  out << "index,harte_name\n";
  for (int i = 0; i < kVocabSize; ++i) {
    out << i << ',' << format_label(ChordLabel::from_index(i)) << '\n';
  }
  return out.str();
}

std::string vocabulary_hash() { return hex64(fnv1a64(vocabulary_csv())); }

}  // namespace chordvae
