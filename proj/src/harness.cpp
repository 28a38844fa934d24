#include "emophon/harness.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "emophon/rng.hpp"

namespace emophon {

std::vector<FoldPlan> loso_folds(const Corpus& corpus, std::uint64_t seed,
                                 int stratified_folds) {
  std::map<std::string, std::vector<int>> by_speaker;
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
    by_speaker[corpus.utterances[i].speaker].push_back(static_cast<int>(i));

  std::vector<FoldPlan> folds;

  if (!corpus.many_speakers) {
    if (by_speaker.size() < 2)
      throw std::runtime_error(
          "loso_folds: need >= 2 distinct speakers (or the many_speakers flag)");
    int idx = 0;
    for (const auto& [test_spk, test_idx] : by_speaker) {
      FoldPlan f;
      f.fold_index = idx++;
      f.test_speakers = {test_spk};
      f.test_indices = test_idx;
      for (const auto& [spk, utt_idx] : by_speaker) {
        if (spk == test_spk) continue;
        f.train_speakers.push_back(spk);
        f.train_indices.insert(f.train_indices.end(), utt_idx.begin(),
                               utt_idx.end());
      }
      std::sort(f.train_indices.begin(), f.train_indices.end());
      folds.push_back(std::move(f));
    }
    return folds;
  }

  // many-speakers corpora: emotion-stratified random k-fold
  const int k = stratified_folds;
  folds.resize(k);
  for (int i = 0; i < k; ++i) folds[i].fold_index = i;

  Rng rng(seed);
  int start = 0;  // rotate so per-emotion remainders spread over folds
  for (int e = 0; e < kNumEmotions; ++e) {
    std::vector<int> members;
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
      if (static_cast<int>(corpus.utterances[i].emotion) == e)
        members.push_back(static_cast<int>(i));
    rng.shuffle(members);
    for (std::size_t i = 0; i < members.size(); ++i)
      folds[(start + static_cast<int>(i)) % k].test_indices.push_back(members[i]);
    start = (start + static_cast<int>(members.size())) % k;
  }
  for (auto& f : folds) {
    std::sort(f.test_indices.begin(), f.test_indices.end());
    std::set<int> test_set(f.test_indices.begin(), f.test_indices.end());
    for (std::size_t i = 0; i < corpus.utterances.size(); ++i)
      if (!test_set.count(static_cast<int>(i)))
        f.train_indices.push_back(static_cast<int>(i));
  }
  return folds;
}

namespace {

FoldResult run_fold(const Corpus& corpus, const FoldPlan& fold,
                    const HarnessConfig& cfg) {
  std::vector<const Utterance*> train_utts, test_utts;
  for (int i : fold.train_indices) train_utts.push_back(&corpus.utterances[i]);
  for (int i : fold.test_indices) test_utts.push_back(&corpus.utterances[i]);
  if (train_utts.empty() || test_utts.empty())
    throw std::runtime_error("fold " + std::to_string(fold.fold_index) +
                             ": empty train or test split");

  std::array<std::int64_t, kNumEmotions> counts{};
  for (const Utterance* u : train_utts) ++counts[static_cast<int>(u->emotion)];
  const auto weights = class_weights(counts);

  ModelConfig mc;
  mc.vocab_size = static_cast<int>(corpus.vocabulary.size()) + 1;  // + UNK
  mc.n_mels = static_cast<int>(corpus.utterances.front().features.bins);

  TrainConfig tc = cfg.train;
  tc.seed = cfg.train.seed ^ static_cast<std::uint64_t>(fold.fold_index);

  const auto train_samples = make_samples(train_utts, corpus.vocabulary);
  const auto test_samples = make_samples(test_utts, corpus.vocabulary);

  auto outcome = train<float>(train_samples, mc, tc, weights);
  const auto eval = evaluate(test_samples, outcome.params);

  FoldResult r;
  r.fold_index = fold.fold_index;
  r.accuracy = eval.accuracy;
  r.confusion = eval.confusion;
  r.epoch_log = std::move(outcome.log);

  for (std::size_t i = 0; i < test_utts.size(); ++i) {
    const Utterance* u = test_utts[i];
    auto tr = forward(test_samples[i].token_ids, u->features, outcome.params);
    std::vector<double> weights_d(tr.attention_weights.begin(),
                                  tr.attention_weights.end());
    r.records.push_back(make_attention_record(u->id, u->emotion, weights_d,
                                              u->segments, cfg.top_k));
  }
  return r;
}

int resolve_workers(const HarnessConfig& cfg, int jobs) {
  int w = cfg.workers;
  if (w <= 0) {
#ifdef _OPENMP
    w = omp_get_num_procs();
#else
    w = 1;
#endif
  }
  return std::max(1, std::min(w, jobs));
}

}  // namespace

CorpusRunResult run_corpus(const Corpus& corpus, const HarnessConfig& config) {
  CorpusRunResult out;
  out.folds = loso_folds(corpus, config.train.seed, config.stratified_folds);
  const int n = static_cast<int>(out.folds.size());
  out.fold_results.resize(n);

  std::string error;
  const int workers = resolve_workers(config, n);
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int i = 0; i < n; ++i) {
    try {
      out.fold_results[i] = run_fold(corpus, out.folds[i], config);
    } catch (const std::exception& e) {
#pragma omp critical
      error = "fold " + std::to_string(i) + ": " + e.what();
    }
  }
  if (!error.empty()) throw std::runtime_error(error);

  double acc = 0.0;
  for (const auto& f : out.fold_results) acc += f.accuracy;
  out.mean_accuracy = acc / n;
  return out;
}

namespace {

std::array<std::int64_t, kNumPhones> split_totals(const Corpus& corpus,
                                                  const std::vector<int>& indices) {
  std::array<std::int64_t, kNumPhones> totals{};
  for (int i : indices)
    for (const auto& s : corpus.utterances[i].segments) ++totals[s.phone.index];
  return totals;
}

CorpusSummary summarize(const Corpus& corpus, const CorpusRunResult& run) {
  CorpusSummary s;
  s.origin = corpus.origin;
  s.n_utterances = static_cast<int>(corpus.utterances.size());
  s.mean_accuracy = run.mean_accuracy;
  const int n_folds = static_cast<int>(run.fold_results.size());

  // fold-level normalized attended frequencies: denominator is the
  // phone total within that fold's test split
  std::set<Phone> attended;
  std::vector<std::array<std::map<Phone, double>, kNumEmotions>> fold_freqs(
      static_cast<std::size_t>(n_folds));
  for (int f = 0; f < n_folds; ++f) {
    s.fold_accuracies.push_back(run.fold_results[f].accuracy);
    const auto totals = split_totals(corpus, run.folds[f].test_indices);
    const auto dists = attended_distribution(run.fold_results[f].records, totals);
    for (int e = 0; e < kNumEmotions; ++e) {
      for (const auto& [phone, freq] : dists[e].normalized_freq) {
        fold_freqs[f][e][phone] = freq;
        attended.insert(phone);
      }
    }
  }
  s.attended_phones.assign(attended.begin(), attended.end());

  for (int e = 0; e < kNumEmotions; ++e) {
    for (const Phone& p : s.attended_phones) {
      PhoneFreq pf;
      pf.folds.resize(n_folds, 0.0);
      for (int f = 0; f < n_folds; ++f) {
        auto it = fold_freqs[f][e].find(p);
        if (it != fold_freqs[f][e].end()) pf.folds[f] = it->second;
        pf.mean += pf.folds[f];
      }
      pf.mean /= n_folds;
      s.distributions[e][p] = pf;
    }
  }
  return s;
}

TestResult degenerate_result(const std::string& method) {
  TestResult r;
  r.method = method;
  r.statistic = 0.0;
  r.p_value = 1.0;
  r.degenerate = true;
  r.finish();
  return r;
}

}  // namespace

ComparisonReport compare(const Corpus& corpus_a, const Corpus& corpus_b,
                         const HarnessConfig& config) {
  ComparisonReport rep;
  rep.config = config;

  // content-bias check: relative phone frequencies paired by phone
  {
    const auto ta = phoneme_totals(corpus_a);
    const auto tb = phoneme_totals(corpus_b);
    double sum_a = 0.0, sum_b = 0.0;
    for (int p = 0; p < kNumPhones; ++p) {
      sum_a += static_cast<double>(ta[p]);
      sum_b += static_cast<double>(tb[p]);
    }
    std::vector<double> fa(kNumPhones), fb(kNumPhones);
    for (int p = 0; p < kNumPhones; ++p) {
      fa[p] = static_cast<double>(ta[p]) / sum_a;
      fb[p] = static_cast<double>(tb[p]) / sum_b;
    }
    try {
      rep.content_bias = wilcoxon_signed_rank(fa, fb);
    } catch (const std::exception&) {
      rep.content_bias = degenerate_result("wilcoxon-exact");
      rep.content_bias.n = kNumPhones;
    }
  }

  const auto run_a = run_corpus(corpus_a, config);
  const auto run_b = run_corpus(corpus_b, config);
  rep.corpus_a = summarize(corpus_a, run_a);
  rep.corpus_b = summarize(corpus_b, run_b);

  // a phone attended in one corpus but with zero total occurrences in
  // the other cannot be paired; drop and record it
  const auto totals_a = phoneme_totals(corpus_a);
  const auto totals_b = phoneme_totals(corpus_b);
  std::set<Phone> attended_either(rep.corpus_a.attended_phones.begin(),
                                  rep.corpus_a.attended_phones.end());
  attended_either.insert(rep.corpus_b.attended_phones.begin(),
                         rep.corpus_b.attended_phones.end());
  std::set<Phone> excluded;
  for (const Phone& p : attended_either)
    if (totals_a[p.index] == 0 || totals_b[p.index] == 0) excluded.insert(p);
  rep.excluded_phones.assign(excluded.begin(), excluded.end());

  for (int e = 0; e < kNumEmotions; ++e) {
    // tested phones: attended for this emotion in either corpus
    std::set<Phone> tested;
    for (const auto& [p, pf] : rep.corpus_a.distributions[e])
      if (pf.mean > 0.0) tested.insert(p);
    for (const auto& [p, pf] : rep.corpus_b.distributions[e])
      if (pf.mean > 0.0) tested.insert(p);
    for (const Phone& p : excluded) tested.erase(p);

    auto freq_of = [&](const CorpusSummary& s, const Phone& p) -> PhoneFreq {
      auto it = s.distributions[e].find(p);
      if (it != s.distributions[e].end()) return it->second;
      PhoneFreq z;
      z.folds.resize(s.fold_accuracies.size(), 0.0);
      return z;
    };

    // family (a): paired t over phones on mean-over-folds frequencies
    std::vector<double> xa, xb;
    for (const Phone& p : tested) {
      xa.push_back(freq_of(rep.corpus_a, p).mean);
      xb.push_back(freq_of(rep.corpus_b, p).mean);
    }
    if (xa.size() < 2) {
      rep.paired_over_phones[e] = degenerate_result("t-paired");
      rep.paired_over_phones[e].n = static_cast<int>(xa.size());
    } else {
      try {
        rep.paired_over_phones[e] = paired_t_test(xa, xb);
      } catch (const std::exception&) {
        rep.paired_over_phones[e] = degenerate_result("t-paired");
        rep.paired_over_phones[e].n = static_cast<int>(xa.size());
      }
    }

    // family (b): per-phone Welch across fold-level frequencies
    for (const Phone& p : tested) {
      const auto fa = freq_of(rep.corpus_a, p);
      const auto fb = freq_of(rep.corpus_b, p);
      try {
        rep.per_phone_welch[e][p] = welch_t_test(fa.folds, fb.folds);
      } catch (const std::exception&) {
        rep.per_phone_welch[e][p] = degenerate_result("t-welch");
      }
    }

    // box stats over fold frequencies, full per-corpus attended set
    for (const Phone& p : rep.corpus_a.attended_phones)
      rep.box[0][e][p] = box_stats(freq_of(rep.corpus_a, p).folds);
    for (const Phone& p : rep.corpus_b.attended_phones)
      rep.box[1][e][p] = box_stats(freq_of(rep.corpus_b, p).folds);
  }

  return rep;
}

}  // namespace emophon
