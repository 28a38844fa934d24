#ifndef EMOPHON_SYNTHGEN_HPP
#define EMOPHON_SYNTHGEN_HPP

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "emophon/corpus.hpp"

namespace emophon {

// Paired synthetic corpora with a planted per-emotion marker phone.
// The marker carries the signal two ways: its sampling probability is
// boosted by beta (choice of phonemes) and its frames receive a mean
// offset delta (manner of delivery).
struct SynthConfig {
  int n_utterances = 400;        // per corpus
  int min_phones = 8, max_phones = 20;
  int min_duration = 3, max_duration = 10;  // frames per phone
  int n_mels = 40;
  int n_speakers = 10;

  // marker phone per emotion: angry, happy, neutral, sad
  std::array<std::string, 4> markers = {"AA", "IY", "N", "S"};

  // the base distribution is supported on the four markers plus the
  // first n_content_phones non-marker phones (inventory order); keeping
  // the support moderate gives every phone enough occurrences per fold
  // for stable normalized attended frequencies
  int n_content_phones = 6;

  // base sampling weight of the four marker phones relative to the
  // weight-1 content phones; keeps markers present in most utterances
  double marker_base_weight = 1.4;

  double delta_a = 2.0, delta_b = 2.0;  // marker acoustic offset
  double beta_a = 3.0, beta_b = 1.5;    // marker probability boost
  double noise_sigma = 0.5;

  void validate() const;
};

struct PlantedTruth {
  std::array<std::string, 4> markers;   // per emotion
  bool expect_difference = false;       // beta or delta differ
  // "A", "B", or "none": which corpus should show the larger
  // attended-frequency response for the markers
  std::string expected_higher_corpus = "none";
};

std::pair<Corpus, Corpus> generate_pair(const SynthConfig& config,
                                        std::uint64_t seed);

PlantedTruth planted_truth(const SynthConfig& config);

SynthConfig load_synth_config(const std::string& path);
void write_synth_config(const SynthConfig& config, const std::string& path);

}  // namespace emophon

#endif
