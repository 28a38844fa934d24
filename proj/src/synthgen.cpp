#include "emophon/synthgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "emophon/rng.hpp"

namespace emophon {

using nlohmann::json;

void SynthConfig::validate() const {
  if (n_utterances < 1) throw std::runtime_error("synth: n_utterances must be >= 1");
  if (min_phones < 1 || max_phones < min_phones)
    throw std::runtime_error("synth: bad phone-count range");
  if (min_duration < 1 || max_duration < min_duration)
    throw std::runtime_error("synth: bad duration range");
  if (n_speakers < 2) throw std::runtime_error("synth: need at least 2 speakers");
  if (delta_a < 0.0 || delta_b < 0.0)
    throw std::runtime_error("synth: delta must be >= 0");
  if (noise_sigma <= 0.0) throw std::runtime_error("synth: sigma must be > 0");
  if (beta_a <= 0.0 || beta_b <= 0.0)
    throw std::runtime_error("synth: beta must be > 0");
  if (marker_base_weight <= 0.0)
    throw std::runtime_error("synth: marker_base_weight must be > 0");
  if (n_content_phones < 1 || n_content_phones > kNumPhones - 4)
    throw std::runtime_error("synth: n_content_phones out of range");
  std::set<std::string> seen;
  for (const auto& m : markers) {
    parse_phone(m);  // throws on unknown symbols
    if (!seen.insert(m).second)
      throw std::runtime_error("synth: duplicate marker phone " + m);
  }
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

Corpus generate_one(const SynthConfig& cfg, const std::string& origin,
                    const std::string& id_prefix, double beta, double delta,
                    const std::vector<std::vector<float>>& prototypes,
                    std::uint64_t seed) {
  Rng rng(seed);

  std::array<int, 4> marker_idx;
  for (int e = 0; e < 4; ++e) marker_idx[e] = parse_phone(cfg.markers[e]).index;

  // base weights: marker phones get marker_base_weight; the first
  // n_content_phones non-markers (inventory order) get 1; the rest 0
  std::array<double, kNumPhones> base{};
  {
    int content = 0;
    for (int p = 0; p < kNumPhones && content < cfg.n_content_phones; ++p) {
      if (std::find(marker_idx.begin(), marker_idx.end(), p) !=
          marker_idx.end())
        continue;
      base[p] = 1.0;
      ++content;
    }
  }
  for (int e = 0; e < 4; ++e) base[marker_idx[e]] = cfg.marker_base_weight;

  Corpus corpus;
  corpus.origin = origin;
  corpus.frame_hop_ms = 10.0;

  // exactly balanced emotion counts, uniformly shuffled across the
  // corpus so speaker/emotion pairing stays random
  std::vector<int> emotions(cfg.n_utterances);
  for (int u = 0; u < cfg.n_utterances; ++u) emotions[u] = u % 4;
  rng.shuffle(emotions);

  for (int u = 0; u < cfg.n_utterances; ++u) {
    // per-utterance stream: utterances are drawn independently, so one
    // utterance's content never perturbs another's
    Rng urng(seed ^ (0xf65f3c01f7a7ab25ull *
                     (static_cast<std::uint64_t>(u) + 1)));
    Utterance utt;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s%04d", id_prefix.c_str(), u);
    utt.id = idbuf;
    utt.speaker = "spk" + std::to_string(u % cfg.n_speakers);
    utt.emotion = static_cast<EmotionLabel>(emotions[u]);
    const int marker = marker_idx[static_cast<int>(utt.emotion)];

    // boosted, renormalized phone distribution
    std::array<double, kNumPhones> prob = base;
    prob[marker] *= beta;
    double z = 0.0;
    for (double p : prob) z += p;
    for (double& p : prob) p /= z;

    const int n_phones =
        cfg.min_phones +
        static_cast<int>(urng.uniform_int(
            static_cast<std::uint64_t>(cfg.max_phones - cfg.min_phones + 1)));

    // rounding fallback must land on a phone with nonzero probability
    int last_positive = 0;
    for (int p = 0; p < kNumPhones; ++p)
      if (prob[p] > 0.0) last_positive = p;

    std::vector<int> phones(n_phones);
    for (int i = 0; i < n_phones; ++i) {
      double r = urng.uniform();
      int pick = last_positive;
      for (int p = 0; p < kNumPhones; ++p) {
        r -= prob[p];
        if (r < 0.0) {
          pick = p;
          break;
        }
      }
      phones[i] = pick;
    }

    std::uint32_t frame = 0;
    std::vector<float> data;
    for (int i = 0; i < n_phones; ++i) {
      const int dur =
          cfg.min_duration +
          static_cast<int>(urng.uniform_int(static_cast<std::uint64_t>(
              cfg.max_duration - cfg.min_duration + 1)));
      PhonemeSegment seg;
      seg.phone = Phone{phones[i]};
      seg.start_frame = frame;
      seg.end_frame = frame + static_cast<std::uint32_t>(dur);
      utt.segments.push_back(seg);
      utt.tokens.push_back("w" + lower(seg.phone.symbol()));

      const double offset = phones[i] == marker ? delta : 0.0;
      const auto& mu = prototypes[phones[i]];
      for (int f = 0; f < dur; ++f)
        for (int m = 0; m < cfg.n_mels; ++m)
          data.push_back(static_cast<float>(mu[m] + offset +
                                            cfg.noise_sigma * urng.normal()));
      frame = seg.end_frame;
    }

    utt.features.frames = frame;
    utt.features.bins = static_cast<std::uint32_t>(cfg.n_mels);
    utt.features.frame_hop_ms = 10.0f;
    utt.features.data = std::move(data);
    corpus.utterances.push_back(std::move(utt));
  }

  std::set<std::string> vocab;
  for (const auto& u : corpus.utterances)
    vocab.insert(u.tokens.begin(), u.tokens.end());
  int next_id = 1;
  for (const auto& tok : vocab) corpus.vocabulary[tok] = next_id++;
  return corpus;
}

}  // namespace

std::pair<Corpus, Corpus> generate_pair(const SynthConfig& config,
                                        std::uint64_t seed) {
  config.validate();

  // phone prototypes are shared: the corpora differ only in beta/delta
  Rng proto_rng(seed);
  std::vector<std::vector<float>> prototypes(kNumPhones,
                                             std::vector<float>(config.n_mels));
  for (auto& mu : prototypes)
    for (auto& v : mu) v = static_cast<float>(proto_rng.normal());

  const std::uint64_t seed_a = seed ^ 0xcb98d6b3ed7c535aull;
  const std::uint64_t seed_b = seed ^ 0xc2b2ae3d27d4eb4full;
  Corpus a = generate_one(config, "synthetic-A", "a", config.beta_a,
                          config.delta_a, prototypes, seed_a);
  Corpus b = generate_one(config, "synthetic-B", "b", config.beta_b,
                          config.delta_b, prototypes, seed_b);
  return {std::move(a), std::move(b)};
}

PlantedTruth planted_truth(const SynthConfig& config) {
  config.validate();
  PlantedTruth t;
  t.markers = config.markers;
  t.expect_difference =
      config.beta_a != config.beta_b || config.delta_a != config.delta_b;
  if (config.beta_a > config.beta_b)
    t.expected_higher_corpus = "A";
  else if (config.beta_b > config.beta_a)
    t.expected_higher_corpus = "B";
  return t;
}

SynthConfig load_synth_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("synth config: cannot open " + path);
  json j;
  in >> j;

  SynthConfig c;
  c.n_utterances = j.value("n_utterances", c.n_utterances);
  c.min_phones = j.value("min_phones", c.min_phones);
  c.max_phones = j.value("max_phones", c.max_phones);
  c.min_duration = j.value("min_duration", c.min_duration);
  c.max_duration = j.value("max_duration", c.max_duration);
  c.n_mels = j.value("n_mels", c.n_mels);
  c.n_speakers = j.value("n_speakers", c.n_speakers);
  if (j.contains("markers")) {
    const auto m = j.at("markers").get<std::vector<std::string>>();
    if (m.size() != 4)
      throw std::runtime_error("synth config: markers must list 4 phones");
    for (int e = 0; e < 4; ++e) c.markers[e] = m[e];
  }
  c.n_content_phones = j.value("n_content_phones", c.n_content_phones);
  c.marker_base_weight = j.value("marker_base_weight", c.marker_base_weight);
  c.delta_a = j.value("delta_a", j.value("delta", c.delta_a));
  c.delta_b = j.value("delta_b", j.value("delta", c.delta_b));
  c.beta_a = j.value("beta_a", c.beta_a);
  c.beta_b = j.value("beta_b", c.beta_b);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.validate();
  return c;
}

void write_synth_config(const SynthConfig& config, const std::string& path) {
  json j;
  j["n_utterances"] = config.n_utterances;
  j["min_phones"] = config.min_phones;
  j["max_phones"] = config.max_phones;
  j["min_duration"] = config.min_duration;
  j["max_duration"] = config.max_duration;
  j["n_mels"] = config.n_mels;
  j["n_speakers"] = config.n_speakers;
  j["markers"] = config.markers;
  j["n_content_phones"] = config.n_content_phones;
  j["marker_base_weight"] = config.marker_base_weight;
  j["delta_a"] = config.delta_a;
  j["delta_b"] = config.delta_b;
  j["beta_a"] = config.beta_a;
  j["beta_b"] = config.beta_b;
  j["noise_sigma"] = config.noise_sigma;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("synth config: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace emophon
