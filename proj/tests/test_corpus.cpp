#include <algorithm>
#include <fstream>

#include <doctest.h>

#include "emophon/corpus.hpp"
#include "emophon/fmx.hpp"
#include "helpers.hpp"

using namespace emophon;
using emophon::test::TempDir;

namespace {

FeatureMatrix const_features(std::uint32_t frames, std::uint32_t bins,
                             float value) {
  FeatureMatrix m;
  m.frames = frames;
  m.bins = bins;
  m.data.assign(static_cast<std::size_t>(frames) * bins, value);
  return m;
}

// Corpus with given per-class counts; single-segment utterances so the
// fixture stays light even at paper scale.
Corpus counted_corpus(const std::array<std::int64_t, 4>& counts) {
  Corpus c;
  c.origin = "acted";
  int uid = 0;
  for (int e = 0; e < 4; ++e) {
    for (std::int64_t i = 0; i < counts[e]; ++i) {
      Utterance u;
      u.id = "u" + std::to_string(uid++);
      u.speaker = "spk" + std::to_string(uid % 10);
      u.emotion = static_cast<EmotionLabel>(e);
      u.tokens = {"w"};
      u.segments = {{parse_phone("AA"), 0, 1}};
      c.utterances.push_back(std::move(u));
    }
  }
  return c;
}

}  // namespace

TEST_CASE("phone inventory: 39 sorted symbols, case-insensitive parse") {
  const auto& inv = phone_inventory();
  REQUIRE(inv.size() == 39);
  CHECK(std::is_sorted(inv.begin(), inv.end()));
  CHECK(parse_phone("AA").index == 0);
  CHECK(parse_phone("aa") == parse_phone("AA"));
  CHECK(parse_phone("zh").index == 38);
  CHECK(parse_phone("s").symbol() == "S");
  CHECK_THROWS(parse_phone("AX"));
  CHECK_THROWS(parse_phone(""));
}

TEST_CASE("emotion labels: closed set of four") {
  CHECK(parse_emotion("angry") == EmotionLabel::Angry);
  CHECK(parse_emotion("happy") == EmotionLabel::Happy);
  CHECK(parse_emotion("neutral") == EmotionLabel::Neutral);
  CHECK(parse_emotion("sad") == EmotionLabel::Sad);
  CHECK_THROWS(parse_emotion("bored"));
  CHECK(std::string(emotion_name(EmotionLabel::Sad)) == "sad");
}

TEST_CASE("fmx round trip is bit-exact") {
  TempDir dir("fmx");
  Rng rng(3);
  const auto m = emophon::test::random_features(17, 5, rng);
  write_fmx(m, dir.file("x.fmx"));
  const auto back = read_fmx(dir.file("x.fmx"));
  CHECK(back.frames == m.frames);
  CHECK(back.bins == m.bins);
  CHECK(back.frame_hop_ms == m.frame_hop_ms);
  CHECK(back.data == m.data);
}

TEST_CASE("fmx rejects garbage") {
  TempDir dir("fmxbad");
  std::ofstream(dir.file("bad.fmx"), std::ios::binary) << "not a matrix";
  CHECK_THROWS(read_fmx(dir.file("bad.fmx")));
  CHECK_THROWS(read_fmx(dir.file("missing.fmx")));
}

TEST_CASE("manifest round trip preserves the corpus") {
  TempDir dir("manifest");
  Corpus c;
  c.origin = "acted";
  c.frame_hop_ms = 10.0;
  for (int i = 0; i < 2; ++i) {
    Utterance u;
    u.id = "utt" + std::to_string(i);
    u.speaker = "spk" + std::to_string(i);
    u.emotion = i == 0 ? EmotionLabel::Angry : EmotionLabel::Sad;
    u.tokens = {"hello", "world"};
    u.segments = {{parse_phone("HH"), 0, 3}, {parse_phone("W"), 3, 6}};
    u.features = const_features(6, 4, 0.5f + i);
    c.utterances.push_back(std::move(u));
  }
  write_manifest(c, dir.file("manifest.jsonl"));

  const auto back = load_manifest(dir.file("manifest.jsonl"));
  CHECK(back.origin == "acted");
  CHECK(back.frame_hop_ms == doctest::Approx(10.0));
  REQUIRE(back.utterances.size() == 2);
  CHECK(back.utterances[0].id == "utt0");
  CHECK(back.utterances[0].emotion == EmotionLabel::Angry);
  CHECK(back.utterances[0].tokens == std::vector<std::string>{"hello", "world"});
  CHECK(back.utterances[0].segments.size() == 2);
  CHECK(back.utterances[0].segments[1].phone == parse_phone("W"));
  CHECK(back.utterances[0].features.data == c.utterances[0].features.data);
  // vocabulary: sorted distinct tokens, ids from 1
  REQUIRE(back.vocabulary.size() == 2);
  CHECK(back.vocabulary.at("hello") == 1);
  CHECK(back.vocabulary.at("world") == 2);
}

TEST_CASE("manifest with header only is an empty corpus") {
  TempDir dir("empty");
  std::ofstream(dir.file("m.jsonl")) << "{\"origin\":\"acted\"}\n";
  try {
    load_manifest(dir.file("m.jsonl"));
    FAIL("expected an error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("empty corpus") != std::string::npos);
  }
}

TEST_CASE("manifest validation names the offending utterance") {
  TempDir dir("badseg");
  write_fmx(const_features(98, 4, 0.0f), dir.file("u0.fmx"));
  std::ofstream(dir.file("m.jsonl"))
      << "{\"origin\":\"acted\"}\n"
      << "{\"id\":\"u0\",\"speaker\":\"s\",\"emotion\":\"angry\","
         "\"tokens\":[\"a\"],\"segments\":[{\"phone\":\"AA\",\"start\":0,"
         "\"end\":100}],\"features\":\"u0.fmx\"}\n";
  try {
    load_manifest(dir.file("m.jsonl"));
    FAIL("expected an error");
  } catch (const std::exception& e) {
    const std::string msg = e.what();
    CHECK(msg.find("u0") != std::string::npos);
    CHECK(msg.find("98") != std::string::npos);
  }
}

TEST_CASE("manifest rejects duplicate ids, overlaps, and missing features") {
  TempDir dir("dup");
  write_fmx(const_features(10, 4, 0.0f), dir.file("u.fmx"));
  const std::string rec =
      "{\"id\":\"u0\",\"speaker\":\"s\",\"emotion\":\"angry\","
      "\"tokens\":[\"a\"],\"segments\":[{\"phone\":\"AA\",\"start\":0,"
      "\"end\":5}],\"features\":\"u.fmx\"}\n";

  SUBCASE("duplicate id") {
    std::ofstream(dir.file("m.jsonl")) << "{\"origin\":\"acted\"}\n" << rec << rec;
    CHECK_THROWS_WITH_AS(load_manifest(dir.file("m.jsonl")),
                         doctest::Contains("duplicate"), std::runtime_error);
  }
  SUBCASE("overlapping segments") {
    std::ofstream(dir.file("m.jsonl"))
        << "{\"origin\":\"acted\"}\n"
        << "{\"id\":\"u0\",\"speaker\":\"s\",\"emotion\":\"angry\","
           "\"tokens\":[\"a\"],\"segments\":[{\"phone\":\"AA\",\"start\":0,"
           "\"end\":5},{\"phone\":\"B\",\"start\":4,\"end\":8}],"
           "\"features\":\"u.fmx\"}\n";
    CHECK_THROWS_WITH_AS(load_manifest(dir.file("m.jsonl")),
                         doctest::Contains("overlap"), std::runtime_error);
  }
  SUBCASE("missing feature file") {
    std::ofstream(dir.file("m.jsonl"))
        << "{\"origin\":\"acted\"}\n"
        << "{\"id\":\"u0\",\"speaker\":\"s\",\"emotion\":\"angry\","
           "\"tokens\":[\"a\"],\"segments\":[{\"phone\":\"AA\",\"start\":0,"
           "\"end\":5}],\"features\":\"gone.fmx\"}\n";
    CHECK_THROWS_WITH_AS(load_manifest(dir.file("m.jsonl")),
                         doctest::Contains("missing feature"),
                         std::runtime_error);
  }
  SUBCASE("header must carry origin") {
    std::ofstream(dir.file("m.jsonl")) << "{\"frame_hop_ms\":10}\n" << rec;
    CHECK_THROWS_WITH_AS(load_manifest(dir.file("m.jsonl")),
                         doctest::Contains("origin"), std::runtime_error);
  }
}

TEST_CASE("class counts on the acted-scale fixture") {
  const std::array<std::int64_t, 4> expect = {1103, 1636, 1708, 1084};
  const auto c = counted_corpus(expect);
  CHECK(class_counts(c) == expect);
  CHECK(c.utterances.size() == 5531);
}

TEST_CASE("class counts on the natural-scale fixture") {
  const std::array<std::int64_t, 4> expect = {1099, 3028, 1262, 611};
  const auto c = counted_corpus(expect);
  CHECK(class_counts(c) == expect);
  CHECK(c.utterances.size() == 6000);
}

TEST_CASE("class counts: single-emotion corpus") {
  const auto c = counted_corpus({0, 7, 0, 0});
  CHECK(class_counts(c) == std::array<std::int64_t, 4>{0, 7, 0, 0});
}

TEST_CASE("class weights") {
  SUBCASE("equal counts give unit weights") {
    const auto w = class_weights({25, 25, 25, 25});
    for (double v : w) CHECK(v == doctest::Approx(1.0));
  }
  SUBCASE("acted-scale counts") {
    const auto w = class_weights({1103, 1636, 1708, 1084});
    CHECK(std::fabs(w[0] - 1.2536) < 1e-4);
    CHECK(std::fabs(w[1] - 0.8452) < 1e-4);
    CHECK(std::fabs(w[2] - 0.8096) < 1e-4);
    CHECK(std::fabs(w[3] - 1.2756) < 1e-4);
    // sum of n_c * w_c equals N
    double acc = 1103 * w[0] + 1636 * w[1] + 1708 * w[2] + 1084 * w[3];
    CHECK(acc == doctest::Approx(5531.0).epsilon(1e-9));
  }
  SUBCASE("zero count is an error") {
    CHECK_THROWS(class_weights({5, 0, 5, 5}));
  }
}

TEST_CASE("phoneme totals") {
  Corpus c;
  c.origin = "acted";
  Utterance u;
  u.id = "u0";
  u.speaker = "s";
  u.emotion = EmotionLabel::Happy;
  u.tokens = {"x"};
  u.segments = {{parse_phone("AA"), 0, 2},
                {parse_phone("B"), 2, 4},
                {parse_phone("AA"), 4, 6}};
  c.utterances.push_back(u);

  const auto totals = phoneme_totals(c);
  CHECK(totals[parse_phone("AA").index] == 2);
  CHECK(totals[parse_phone("B").index] == 1);
  std::int64_t sum = 0;
  for (auto v : totals) sum += v;
  CHECK(sum == 3);

  const Corpus empty;
  for (auto v : phoneme_totals(empty)) CHECK(v == 0);
}
