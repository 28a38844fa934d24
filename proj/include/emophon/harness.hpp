#ifndef EMOPHON_HARNESS_HPP
#define EMOPHON_HARNESS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "emophon/attend.hpp"
#include "emophon/corpus.hpp"
#include "emophon/model.hpp"
#include "emophon/stats.hpp"

namespace emophon {

struct FoldPlan {
  int fold_index = 0;
  std::vector<std::string> train_speakers;
  std::vector<std::string> test_speakers;  // exactly one for LOSO
  std::vector<int> train_indices;          // into corpus.utterances
  std::vector<int> test_indices;
};

struct HarnessConfig {
  TrainConfig train;   // train.seed is the master seed
  int top_k = 1;
  int workers = 0;     // 0 = auto (cores, capped at job count)
  int stratified_folds = 10;
};

// One fold per speaker, ordered by sorted speaker id. Corpora flagged
// many_speakers fall back to a seeded emotion-stratified k-fold split.
std::vector<FoldPlan> loso_folds(const Corpus& corpus, std::uint64_t seed,
                                 int stratified_folds = 10);

struct FoldResult {
  int fold_index = 0;
  double accuracy = 0.0;
  std::array<std::array<int, 4>, 4> confusion{};
  std::vector<AttentionRecord> records;  // fold's test set
  std::vector<EpochLog> epoch_log;
};

struct CorpusRunResult {
  std::vector<FoldPlan> folds;
  std::vector<FoldResult> fold_results;
  double mean_accuracy = 0.0;
};

// Trains one model per fold (per-fold seed = master ^ fold_index) and
// extracts attention records on each fold's test set. Folds run
// concurrently up to config.workers; results are deterministic.
CorpusRunResult run_corpus(const Corpus& corpus, const HarnessConfig& config);

// mean + per-fold normalized attended frequency of one phone
struct PhoneFreq {
  double mean = 0.0;
  std::vector<double> folds;
};

struct CorpusSummary {
  std::string origin;
  int n_utterances = 0;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  // emotion -> phone -> freq, over the per-corpus attended phone set
  std::array<std::map<Phone, PhoneFreq>, kNumEmotions> distributions;
  std::vector<Phone> attended_phones;  // union over emotions and folds
};

struct ComparisonReport {
  HarnessConfig config;
  TestResult content_bias;
  CorpusSummary corpus_a, corpus_b;
  std::array<TestResult, kNumEmotions> paired_over_phones;
  std::array<std::map<Phone, TestResult>, kNumEmotions> per_phone_welch;
  // corpus (0=A,1=B) x emotion -> phone -> box stats over fold freqs
  std::array<std::array<std::map<Phone, BoxStats>, kNumEmotions>, 2> box;
  std::vector<Phone> excluded_phones;
};

ComparisonReport compare(const Corpus& corpus_a, const Corpus& corpus_b,
                         const HarnessConfig& config);

// Canonical report.json (sorted keys, 9 significant digits) plus
// distributions.csv, boxstats.csv, tests.csv.
enum class ReportFormat { Json, Csv, Both };
void emit_report(const ComparisonReport& report, const std::string& out_dir,
                 ReportFormat format = ReportFormat::Both);

}  // namespace emophon

#endif
