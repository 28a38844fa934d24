#ifndef EMOPHON_ATTEND_HPP
#define EMOPHON_ATTEND_HPP

#include <map>
#include <string>
#include <vector>

#include "emophon/corpus.hpp"

namespace emophon {

// Per-utterance attention attribution. Frames covered by no segment
// accumulate into sil_mass, which is excluded from rankings.
struct AttentionRecord {
  std::string utterance_id;
  EmotionLabel emotion = EmotionLabel::Neutral;
  std::vector<double> frame_weights;       // length T
  std::map<Phone, double> phone_mass;
  double sil_mass = 0.0;
  std::vector<Phone> top_phones;           // k phones, descending mass
};

struct AttendedDistribution {
  EmotionLabel emotion = EmotionLabel::Neutral;
  std::map<Phone, double> normalized_freq;    // attended / total
  std::map<Phone, std::int64_t> attended_counts;
  std::map<Phone, std::int64_t> totals;
};

// mass(p) = sum over p's segments of the frame weights in [start, end)
std::map<Phone, double> phoneme_attention(const std::vector<double>& frame_weights,
                                          const std::vector<PhonemeSegment>& segments,
                                          double* sil_mass = nullptr);

// k distinct phones of largest mass; ties broken alphabetically.
// Throws if the mass map is empty (utterance with only SIL coverage).
std::vector<Phone> top_attended(const std::map<Phone, double>& mass, int k = 1);

AttentionRecord make_attention_record(const std::string& utterance_id,
                                      EmotionLabel emotion,
                                      const std::vector<double>& frame_weights,
                                      const std::vector<PhonemeSegment>& segments,
                                      int top_k = 1);

// attended_count(p, e) = records with emotion e whose top phone is p,
// normalized by totals[p]. Throws if a phone is attended but absent
// from totals.
std::vector<AttendedDistribution> attended_distribution(
    const std::vector<AttentionRecord>& records,
    const std::array<std::int64_t, kNumPhones>& totals);

// JSON Lines export; frame weights elided when compact is true.
void write_attention_records(const std::vector<AttentionRecord>& records,
                             const std::string& path, bool compact = false);

}  // namespace emophon

#endif
