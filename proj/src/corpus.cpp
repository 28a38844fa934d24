#include "emophon/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace emophon {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kPhones = {
    "AA", "AE", "AH", "AO", "AW", "AY", "B",  "CH", "D",  "DH",
    "EH", "ER", "EY", "F",  "G",  "HH", "IH", "IY", "JH", "K",
    "L",  "M",  "N",  "NG", "OW", "OY", "P",  "R",  "S",  "SH",
    "T",  "TH", "UH", "UW", "V",  "W",  "Y",  "Z",  "ZH"};

}  // namespace

const std::vector<std::string>& phone_inventory() { return kPhones; }

const std::string& Phone::symbol() const {
  if (!valid()) throw std::runtime_error("invalid phone index");
  return kPhones[static_cast<std::size_t>(index)];
}

Phone parse_phone(const std::string& symbol) {
  std::string up = symbol;
  std::transform(up.begin(), up.end(), up.begin(),
                 [](unsigned char c) { return std::toupper(c); });
  auto it = std::lower_bound(kPhones.begin(), kPhones.end(), up);
  if (it == kPhones.end() || *it != up)
    throw std::runtime_error("unknown phone: " + symbol);
  return Phone{static_cast<int>(it - kPhones.begin())};
}

EmotionLabel parse_emotion(const std::string& s) {
  if (s == "angry") return EmotionLabel::Angry;
  if (s == "happy") return EmotionLabel::Happy;
  if (s == "neutral") return EmotionLabel::Neutral;
  if (s == "sad") return EmotionLabel::Sad;
  throw std::runtime_error("unknown emotion: " + s);
}

const char* emotion_name(EmotionLabel e) {
  switch (e) {
    case EmotionLabel::Angry: return "angry";
    case EmotionLabel::Happy: return "happy";
    case EmotionLabel::Neutral: return "neutral";
    case EmotionLabel::Sad: return "sad";
  }
  return "?";
}

Corpus load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open " + path);

  const fs::path base = fs::path(path).parent_path();
  Corpus corpus;
  std::string line;
  int line_no = 0;
  std::set<std::string> seen_ids;

  auto fail = [&](const std::string& msg) -> void {
    std::ostringstream os;
    os << "manifest " << path << " line " << line_no << ": " << msg;
    throw std::runtime_error(os.str());
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      fail(std::string("bad JSON: ") + e.what());
    }

    if (line_no == 1) {
      if (!j.contains("origin")) fail("header must carry \"origin\"");
      corpus.origin = j.at("origin").get<std::string>();
      corpus.frame_hop_ms = j.value("frame_hop_ms", 10.0);
      corpus.many_speakers = j.value("many_speakers", false);
      continue;
    }

    Utterance u;
    try {
      u.id = j.at("id").get<std::string>();
      u.speaker = j.at("speaker").get<std::string>();
      u.emotion = parse_emotion(j.at("emotion").get<std::string>());
      u.tokens = j.at("tokens").get<std::vector<std::string>>();
      for (const auto& js : j.at("segments")) {
        PhonemeSegment seg;
        seg.phone = parse_phone(js.at("phone").get<std::string>());
        const std::int64_t start = js.at("start").get<std::int64_t>();
        const std::int64_t end = js.at("end").get<std::int64_t>();
        if (start < 0 || end <= start)
          throw std::runtime_error("segment must satisfy 0 <= start < end");
        seg.start_frame = static_cast<std::uint32_t>(start);
        seg.end_frame = static_cast<std::uint32_t>(end);
        u.segments.push_back(seg);
      }
      u.feature_path = j.at("features").get<std::string>();
    } catch (const std::exception& e) {
      fail(e.what());
    }

    if (!seen_ids.insert(u.id).second) fail("duplicate utterance id " + u.id);
    if (u.tokens.empty()) fail("utterance " + u.id + ": empty token list");
    if (u.segments.empty()) fail("utterance " + u.id + ": empty segment list");
    for (std::size_t i = 1; i < u.segments.size(); ++i) {
      if (u.segments[i].start_frame < u.segments[i - 1].end_frame)
        fail("utterance " + u.id + ": segments overlap or are unsorted");
    }

    const fs::path feat = base / u.feature_path;
    if (!fs::exists(feat))
      fail("utterance " + u.id + ": missing feature file " + feat.string());
    try {
      u.features = read_fmx(feat.string());
    } catch (const std::exception& e) {
      fail("utterance " + u.id + ": " + e.what());
    }
    for (const auto& seg : u.segments) {
      if (seg.end_frame > u.features.frames)
        fail("utterance " + u.id + ": segment end " +
             std::to_string(seg.end_frame) + " exceeds frame count " +
             std::to_string(u.features.frames));
    }

    corpus.utterances.push_back(std::move(u));
  }

  if (line_no == 0) throw std::runtime_error("manifest " + path + ": empty file");
  if (corpus.utterances.empty())
    throw std::runtime_error("manifest " + path + ": empty corpus");

  // deterministic vocabulary: sorted distinct tokens, ids from 1 (0 = UNK)
  std::set<std::string> vocab;
  for (const auto& u : corpus.utterances)
    vocab.insert(u.tokens.begin(), u.tokens.end());
  int next_id = 1;
  for (const auto& tok : vocab) corpus.vocabulary[tok] = next_id++;

  return corpus;
}

void write_manifest(const Corpus& corpus, const std::string& path) {
  const fs::path base = fs::path(path).parent_path();
  const fs::path feat_dir = base / "feat";
  fs::create_directories(feat_dir.empty() ? fs::path("feat") : feat_dir);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot write " + path);

  json header;
  header["origin"] = corpus.origin;
  header["frame_hop_ms"] = corpus.frame_hop_ms;
  if (corpus.many_speakers) header["many_speakers"] = true;
  out << header.dump() << "\n";

  for (const auto& u : corpus.utterances) {
    const std::string rel = "feat/" + u.id + ".fmx";
    write_fmx(u.features, (base / rel).string());

    json j;
    j["id"] = u.id;
    j["speaker"] = u.speaker;
    j["emotion"] = emotion_name(u.emotion);
    j["tokens"] = u.tokens;
    json segs = json::array();
    for (const auto& s : u.segments) {
      segs.push_back({{"phone", s.phone.symbol()},
                      {"start", s.start_frame},
                      {"end", s.end_frame}});
    }
    j["segments"] = segs;
    j["features"] = rel;
    out << j.dump() << "\n";
  }
}

std::array<std::int64_t, kNumEmotions> class_counts(const Corpus& corpus) {
  std::array<std::int64_t, kNumEmotions> counts{};
  for (const auto& u : corpus.utterances)
    ++counts[static_cast<int>(u.emotion)];
  return counts;
}

std::array<double, kNumEmotions> class_weights(
    const std::array<std::int64_t, kNumEmotions>& counts) {
  std::int64_t total = 0;
  for (int i = 0; i < kNumEmotions; ++i) {
    if (counts[i] <= 0)
      throw std::runtime_error(
          std::string("class_weights: zero count for class ") +
          emotion_name(static_cast<EmotionLabel>(i)));
    total += counts[i];
  }
  std::array<double, kNumEmotions> w{};
  for (int i = 0; i < kNumEmotions; ++i)
    w[i] = static_cast<double>(total) /
           (static_cast<double>(kNumEmotions) * static_cast<double>(counts[i]));
  return w;
}

std::array<std::int64_t, kNumPhones> phoneme_totals(const Corpus& corpus) {
  std::array<std::int64_t, kNumPhones> totals{};
  for (const auto& u : corpus.utterances)
    for (const auto& s : u.segments) ++totals[s.phone.index];
  return totals;
}

}  // namespace emophon
