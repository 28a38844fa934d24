#ifndef EMOPHON_TEST_HELPERS_HPP
#define EMOPHON_TEST_HELPERS_HPP

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "emophon/corpus.hpp"
#include "emophon/rng.hpp"

namespace emophon::test {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("emophon_test_" + tag + "_" + std::to_string(++counter) + "_" +
             std::to_string(static_cast<long>(::getpid())));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline FeatureMatrix random_features(std::uint32_t frames, std::uint32_t bins,
                                     Rng& rng) {
  FeatureMatrix m;
  m.frames = frames;
  m.bins = bins;
  m.data.resize(static_cast<std::size_t>(frames) * bins);
  for (auto& v : m.data) v = static_cast<float>(rng.normal());
  return m;
}

// A small in-memory corpus: one utterance per (speaker, emotion) pair,
// contiguous single-phone segments, deterministic features.
inline Corpus tiny_corpus(int n_speakers, int utts_per_speaker,
                          std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  c.origin = "synthetic-A";
  int uid = 0;
  for (int s = 0; s < n_speakers; ++s) {
    for (int k = 0; k < utts_per_speaker; ++k) {
      Utterance u;
      u.id = "u" + std::to_string(uid++);
      u.speaker = "spk" + std::to_string(s);
      u.emotion = static_cast<EmotionLabel>((s + k) % 4);
      const int n_phones = 3 + static_cast<int>(rng.uniform_int(4));
      std::uint32_t frame = 0;
      for (int p = 0; p < n_phones; ++p) {
        PhonemeSegment seg;
        seg.phone = Phone{static_cast<int>(rng.uniform_int(kNumPhones))};
        seg.start_frame = frame;
        seg.end_frame = frame + 2 + static_cast<std::uint32_t>(rng.uniform_int(3));
        frame = seg.end_frame;
        u.segments.push_back(seg);
        u.tokens.push_back("w" + seg.phone.symbol());
      }
      u.features = random_features(frame, 8, rng);
      c.utterances.push_back(std::move(u));
    }
  }
  std::map<std::string, int> vocab;
  for (const auto& u : c.utterances)
    for (const auto& t : u.tokens) vocab.emplace(t, 0);
  int next_id = 1;
  for (auto& [tok, id] : vocab) id = next_id++;
  c.vocabulary = vocab;
  return c;
}

}  // namespace emophon::test

#endif
