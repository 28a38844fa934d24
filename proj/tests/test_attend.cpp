#include <cmath>

#include <doctest.h>

#include "emophon/attend.hpp"
#include "helpers.hpp"

using namespace emophon;
using emophon::test::TempDir;

TEST_CASE("phoneme attention: mass splits by segment span") {
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  const std::vector<PhonemeSegment> segs = {{parse_phone("AA"), 0, 2},
                                            {parse_phone("B"), 2, 4}};
  double sil = -1.0;
  const auto mass = phoneme_attention(w, segs, &sil);
  CHECK(mass.at(parse_phone("AA")) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(mass.at(parse_phone("B")) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(sil == doctest::Approx(0.0));
}

TEST_CASE("phoneme attention: uniform weights and equal spans give equal mass") {
  const std::vector<double> w(8, 0.125);
  const std::vector<PhonemeSegment> segs = {{parse_phone("S"), 0, 4},
                                            {parse_phone("T"), 4, 8}};
  const auto mass = phoneme_attention(w, segs, nullptr);
  CHECK(mass.at(parse_phone("S")) == doctest::Approx(mass.at(parse_phone("T"))));
}

TEST_CASE("phoneme attention: uncovered frames land in the SIL bucket") {
  const std::vector<double> w(4, 0.25);
  const std::vector<PhonemeSegment> segs = {{parse_phone("AA"), 0, 2}};
  double sil = 0.0;
  const auto mass = phoneme_attention(w, segs, &sil);
  CHECK(mass.at(parse_phone("AA")) == doctest::Approx(0.5));
  CHECK(sil == doctest::Approx(0.5));
  // SIL never appears in the rankings
  const auto top = top_attended(mass, 5);
  REQUIRE(top.size() == 1);
  CHECK(top[0] == parse_phone("AA"));
}

TEST_CASE("phoneme attention: repeated phone accumulates, totals conserve") {
  const std::vector<double> w = {0.4, 0.1, 0.1, 0.4};
  const std::vector<PhonemeSegment> segs = {{parse_phone("AA"), 0, 1},
                                            {parse_phone("B"), 1, 3},
                                            {parse_phone("AA"), 3, 4}};
  double sil = 0.0;
  const auto mass = phoneme_attention(w, segs, &sil);
  CHECK(mass.at(parse_phone("AA")) == doctest::Approx(0.8).epsilon(1e-12));
  double total = sil;
  for (const auto& [p, m] : mass) total += m;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS(phoneme_attention({0.5, 0.5}, {{parse_phone("AA"), 0, 3}}));
}

TEST_CASE("top attended: ordering and ties") {
  std::map<Phone, double> mass;
  mass[parse_phone("AA")] = 0.3;
  mass[parse_phone("B")] = 0.7;
  CHECK(top_attended(mass, 1) == std::vector<Phone>{parse_phone("B")});

  mass[parse_phone("AA")] = 0.5;
  mass[parse_phone("B")] = 0.5;
  CHECK(top_attended(mass, 1) == std::vector<Phone>{parse_phone("AA")});

  mass[parse_phone("Z")] = 0.2;
  const auto all = top_attended(mass, 10);
  REQUIRE(all.size() == 3);
  CHECK(all[0] == parse_phone("AA"));
  CHECK(all[1] == parse_phone("B"));
  CHECK(all[2] == parse_phone("Z"));

  CHECK_THROWS(top_attended({}, 1));
}

TEST_CASE("top attended: argmax is invariant under positive rescaling") {
  Rng rng(61);
  for (int rep = 0; rep < 20; ++rep) {
    std::map<Phone, double> mass;
    for (int i = 0; i < 6; ++i)
      mass[Phone{static_cast<int>(rng.uniform_int(kNumPhones))}] =
          rng.uniform(0.01, 1.0);
    const auto base = top_attended(mass, 3);
    const double scale = rng.uniform(0.1, 10.0);
    std::map<Phone, double> scaled = mass;
    for (auto& [p, m] : scaled) m *= scale;
    CHECK(top_attended(scaled, 3) == base);
  }
}

TEST_CASE("attended distribution: counts over records, normalized by totals") {
  std::array<std::int64_t, kNumPhones> totals{};
  totals[parse_phone("AA").index] = 50;

  std::vector<AttentionRecord> records;
  for (int i = 0; i < 5; ++i) {
    AttentionRecord r;
    r.utterance_id = "u" + std::to_string(i);
    r.emotion = EmotionLabel::Angry;
    r.top_phones = {parse_phone("AA")};
    records.push_back(r);
  }

  const auto dists = attended_distribution(records, totals);
  REQUIRE(dists.size() == 4);
  CHECK(dists[0].attended_counts.at(parse_phone("AA")) == 5);
  CHECK(dists[0].normalized_freq.at(parse_phone("AA")) == doctest::Approx(0.1));
  // no records for the other emotions
  for (int e = 1; e < 4; ++e) CHECK(dists[e].attended_counts.empty());

  // per-emotion attended totals equal record counts
  std::int64_t n = 0;
  for (const auto& [p, c] : dists[0].attended_counts) n += c;
  CHECK(n == 5);
}

TEST_CASE("attended distribution: attended phone missing from totals throws") {
  std::array<std::int64_t, kNumPhones> totals{};
  AttentionRecord r;
  r.emotion = EmotionLabel::Happy;
  r.top_phones = {parse_phone("S")};
  CHECK_THROWS_WITH_AS(attended_distribution({r}, totals),
                       doctest::Contains("absent from totals"),
                       std::runtime_error);
}

TEST_CASE("attention record: end-to-end construction and export") {
  TempDir dir("attend");
  const std::vector<double> w = {0.1, 0.2, 0.3, 0.4};
  const std::vector<PhonemeSegment> segs = {{parse_phone("AA"), 0, 2},
                                            {parse_phone("B"), 2, 4}};
  const auto rec = make_attention_record("u7", EmotionLabel::Sad, w, segs, 2);
  CHECK(rec.utterance_id == "u7");
  CHECK(rec.top_phones ==
        std::vector<Phone>{parse_phone("B"), parse_phone("AA")});

  write_attention_records({rec}, dir.file("rec.jsonl"));
  const auto full = emophon::test::slurp(dir.file("rec.jsonl"));
  CHECK(full.find("\"utterance_id\":\"u7\"") != std::string::npos);
  CHECK(full.find("frame_weights") != std::string::npos);
  write_attention_records({rec}, dir.file("rec2.jsonl"), true);
  const auto compact = emophon::test::slurp(dir.file("rec2.jsonl"));
  CHECK(compact.find("frame_weights") == std::string::npos);
}
