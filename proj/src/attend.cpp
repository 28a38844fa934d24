#include "emophon/attend.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace emophon {

using nlohmann::json;

std::map<Phone, double> phoneme_attention(const std::vector<double>& frame_weights,
                                          const std::vector<PhonemeSegment>& segments,
                                          double* sil_mass) {
  const std::size_t T = frame_weights.size();
  std::vector<bool> covered(T, false);
  std::map<Phone, double> mass;
  for (const auto& seg : segments) {
    if (seg.end_frame > T)
      throw std::runtime_error("phoneme_attention: segment exceeds frame count");
    double acc = 0.0;
    for (std::uint32_t t = seg.start_frame; t < seg.end_frame; ++t) {
      acc += frame_weights[t];
      covered[t] = true;
    }
    mass[seg.phone] += acc;
  }
  if (sil_mass) {
    double sil = 0.0;
    for (std::size_t t = 0; t < T; ++t)
      if (!covered[t]) sil += frame_weights[t];
    *sil_mass = sil;
  }
  return mass;
}

std::vector<Phone> top_attended(const std::map<Phone, double>& mass, int k) {
  if (mass.empty())
    throw std::runtime_error("top_attended: utterance has only SIL coverage");
  std::vector<std::pair<Phone, double>> order(mass.begin(), mass.end());
  // descending mass, ascending phone index (alphabetical) on ties
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  const std::size_t take = std::min<std::size_t>(order.size(),
                                                 static_cast<std::size_t>(k));
  std::vector<Phone> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(order[i].first);
  return out;
}

AttentionRecord make_attention_record(const std::string& utterance_id,
                                      EmotionLabel emotion,
                                      const std::vector<double>& frame_weights,
                                      const std::vector<PhonemeSegment>& segments,
                                      int top_k) {
  AttentionRecord r;
  r.utterance_id = utterance_id;
  r.emotion = emotion;
  r.frame_weights = frame_weights;
  r.phone_mass = phoneme_attention(frame_weights, segments, &r.sil_mass);
  r.top_phones = top_attended(r.phone_mass, top_k);
  return r;
}

std::vector<AttendedDistribution> attended_distribution(
    const std::vector<AttentionRecord>& records,
    const std::array<std::int64_t, kNumPhones>& totals) {
  std::vector<AttendedDistribution> out(kNumEmotions);
  for (int e = 0; e < kNumEmotions; ++e)
    out[e].emotion = static_cast<EmotionLabel>(e);

  for (const auto& r : records) {
    if (r.top_phones.empty())
      throw std::runtime_error("attended_distribution: record without top phone");
    const Phone top = r.top_phones.front();
    if (totals[top.index] <= 0)
      throw std::runtime_error("attended_distribution: phone " + top.symbol() +
                               " attended but absent from totals");
    ++out[static_cast<int>(r.emotion)].attended_counts[top];
  }

  for (auto& dist : out) {
    for (const auto& [phone, count] : dist.attended_counts) {
      dist.totals[phone] = totals[phone.index];
      dist.normalized_freq[phone] =
          static_cast<double>(count) / static_cast<double>(totals[phone.index]);
    }
  }
  return out;
}

void write_attention_records(const std::vector<AttentionRecord>& records,
                             const std::string& path, bool compact) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) {
    json j;
    j["utterance_id"] = r.utterance_id;
    j["emotion"] = emotion_name(r.emotion);
    if (!compact) j["frame_weights"] = r.frame_weights;
    json mass = json::object();
    for (const auto& [phone, m] : r.phone_mass) mass[phone.symbol()] = m;
    j["phone_mass"] = mass;
    j["sil_mass"] = r.sil_mass;
    json top = json::array();
    for (const auto& p : r.top_phones) top.push_back(p.symbol());
    j["top_phones"] = top;
    out << j.dump() << "\n";
  }
}

}  // namespace emophon
