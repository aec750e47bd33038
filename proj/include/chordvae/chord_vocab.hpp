#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace chordvae {

inline constexpr int kPitchClasses = 12;
inline constexpr int kChromaChannels = 3;
inline constexpr int kChromaDims = kPitchClasses * kChromaChannels;  // 36
inline constexpr int kRootedTypes = 8;
inline constexpr int kVocabSize = kPitchClasses * kRootedTypes + 1;  // 97
inline constexpr int kNoChordIndex = kVocabSize - 1;                 // 96
inline constexpr int kChordTypes = kRootedTypes + 1;                  // 9

// Ordinal order is part of the vocabulary index contract.
enum class ChordType : std::uint8_t {
  kMaj = 0,
  kMin,
  kDim,
  kAug,
  kSus2,
  kSus4,
  kPow1,
  kPow5,
  kNoChord,
};

std::string_view shorthand(ChordType type);

// A chord label from the 97-entry vocabulary. No-chord has no root; its root
// field is kept at 0 so that equality is structural.
class ChordLabel {
 public:
  constexpr ChordLabel() : root_(0), type_(ChordType::kNoChord) {}
  ChordLabel(int root, ChordType type);

  static constexpr ChordLabel no_chord() { return ChordLabel(); }
  static ChordLabel from_index(int index);

  int root() const { return root_; }
  ChordType type() const { return type_; }
  bool is_no_chord() const { return type_ == ChordType::kNoChord; }
  int index() const;

  friend bool operator==(const ChordLabel&, const ChordLabel&) = default;

 private:
  int root_;
  ChordType type_;
};

// Index helpers mirror ChordLabel::index / from_index.
int label_to_index(const ChordLabel& label);
ChordLabel index_to_label(int index);

ChordLabel parse_label(std::string_view text);
std::string format_label(const ChordLabel& label);

ChordLabel rotate_label(const ChordLabel& label, int semitones);

// Pitch classes relative to the root; bitmask over 12 pitch classes.
std::uint16_t chord_tone_mask(ChordType type);

using ChromaFrame = std::array<double, kChromaDims>;

// Bass channel holds the root, middle and high channels hold every chord tone.
ChromaFrame chord_template(const ChordLabel& label);

// Rotates each 12-dim block of a chroma frame up by `semitones`.
ChromaFrame rotate_chroma(const ChromaFrame& frame, int semitones);

// 25-class majmin reduction. Indices 0..11 major, 12..23 minor, 24 no-chord.
inline constexpr int kMajminClasses = 25;
struct MajminLabel {
  std::optional<int> cls;  // empty = unmapped
  bool mapped() const { return cls.has_value(); }
  friend bool operator==(const MajminLabel&, const MajminLabel&) = default;
};

MajminLabel reduce_majmin(const ChordLabel& label);

// `index,harte_name` lines for all 97 labels, with a header row.
std::string vocabulary_csv();

// FNV-1a 64 over vocabulary_csv(), hex encoded. Guards serialized corpora.
std::string vocabulary_hash();

inline int positive_mod(int value, int modulus) {
  const int r = value % modulus;
  return r < 0 ? r + modulus : r;
}

}  // namespace chordvae
