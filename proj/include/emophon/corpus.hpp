#ifndef EMOPHON_CORPUS_HPP
#define EMOPHON_CORPUS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emophon/fmx.hpp"

namespace emophon {

// The four emotion categories. Parsing any other string is an error.
enum class EmotionLabel : int { Angry = 0, Happy = 1, Neutral = 2, Sad = 3 };

constexpr int kNumEmotions = 4;

EmotionLabel parse_emotion(const std::string& s);
const char* emotion_name(EmotionLabel e);

constexpr std::array<EmotionLabel, 4> kAllEmotions = {
    EmotionLabel::Angry, EmotionLabel::Happy, EmotionLabel::Neutral,
    EmotionLabel::Sad};

// One of the 39 stress-free ARPAbet phones, stored as an index into
// the canonical (alphabetically sorted) inventory.
struct Phone {
  int index = -1;

  bool valid() const { return index >= 0 && index < 39; }
  const std::string& symbol() const;
  auto operator<=>(const Phone&) const = default;
};

constexpr int kNumPhones = 39;

// Case-insensitive; throws on symbols outside the inventory.
Phone parse_phone(const std::string& symbol);
const std::vector<std::string>& phone_inventory();

struct PhonemeSegment {
  Phone phone;
  std::uint32_t start_frame = 0;  // inclusive
  std::uint32_t end_frame = 0;    // exclusive
};

struct Utterance {
  std::string id;
  std::string speaker;
  EmotionLabel emotion = EmotionLabel::Neutral;
  std::vector<std::string> tokens;
  std::vector<PhonemeSegment> segments;
  std::string feature_path;  // relative to the manifest directory
  FeatureMatrix features;    // loaded eagerly by load_manifest
};

struct Corpus {
  std::string origin;  // natural | acted | synthetic-A | synthetic-B
  double frame_hop_ms = 10.0;
  bool many_speakers = false;
  std::vector<Utterance> utterances;
  std::map<std::string, int> vocabulary;  // token -> id, sorted assignment
};

// Reserved id for out-of-vocabulary tokens at evaluation time.
// Vocabulary ids start at 1; id 0 is UNK.
constexpr int kUnkTokenId = 0;

// Loads and validates a JSON Lines manifest (header line + one
// utterance per line). Feature matrices are read from the paths in the
// manifest, resolved relative to the manifest's directory.
Corpus load_manifest(const std::string& path);

// Writes a corpus back out in the manifest format; feature files are
// written next to the manifest under feat/.
void write_manifest(const Corpus& corpus, const std::string& path);

std::array<std::int64_t, kNumEmotions> class_counts(const Corpus& corpus);

// weight_c = N / (K * n_c). Throws if any count is zero.
std::array<double, kNumEmotions> class_weights(
    const std::array<std::int64_t, kNumEmotions>& counts);

// Segment-occurrence count per phone.
std::array<std::int64_t, kNumPhones> phoneme_totals(const Corpus& corpus);

}  // namespace emophon

#endif
