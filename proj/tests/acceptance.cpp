// Acceptance gate: one pass/fail line per criterion.
//
//   1  gradient correctness against central finite differences
//   2  FFT/DSP correctness against a direct DFT oracle
//   3  statistical kernels against exact and quadrature oracles
//   4  end-to-end planted-signal recovery on the synthetic pair
//   5  null calibration (no planted difference -> no significance)
//   6  byte-identical reports across runs and worker counts
//   7  attention attribution invariants

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "emophon/dsp.hpp"
#include "emophon/harness.hpp"
#include "emophon/model.hpp"
#include "emophon/rng.hpp"
#include "emophon/stats.hpp"
#include "emophon/synthgen.hpp"

using namespace emophon;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int criterion, const char* what, bool ok, double seconds,
            const std::string& detail) {
  std::printf("[%s] criterion %d: %-34s (%6.1f s)%s%s\n", ok ? "PASS" : "FAIL",
              criterion, what, seconds, detail.empty() ? "" : "  -- ",
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------- criterion 1

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 5;
  c.d_embed = 3;
  c.d_hidden = 3;
  c.d_key = 3;
  c.n_mels = 3;
  c.conv_width = 3;
  return c;
}

struct FdBatch {
  std::vector<std::vector<int>> tokens;
  std::vector<FeatureMatrix> features;
  std::vector<EmotionLabel> labels;
};

double fd_batch_loss(const FdBatch& b, const ModelParams<double>& p,
                     const std::array<double, 4>& w) {
  double loss = 0.0;
  for (std::size_t s = 0; s < b.tokens.size(); ++s) {
    auto tr = forward(b.tokens[s], b.features[s], p);
    loss += weighted_ce_loss(tr, b.labels[s], w) / b.tokens.size();
  }
  return loss;
}

void criterion_1() {
  const auto t0 = Clock::now();
  const ModelConfig mc = tiny_config();
  const std::array<double, 4> w = {1.2536, 0.8452, 0.8096, 1.2756};
  const double h = 1e-4;

  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
    Rng rng(seed);
    auto params = ModelParams<double>::init(mc, rng);

    FdBatch batch;
    for (int s = 0; s < 4; ++s) {
      std::vector<int> toks(4);
      for (auto& t : toks) t = static_cast<int>(rng.uniform_int(mc.vocab_size));
      batch.tokens.push_back(toks);
      FeatureMatrix m;
      m.frames = 6;
      m.bins = 3;
      m.data.resize(18);
      for (auto& v : m.data) v = static_cast<float>(rng.normal());
      batch.features.push_back(std::move(m));
      batch.labels.push_back(static_cast<EmotionLabel>(s));
    }

    auto grads = ModelParams<double>::shaped(mc);
    for (std::size_t s = 0; s < batch.tokens.size(); ++s) {
      auto tr = forward(batch.tokens[s], batch.features[s], params);
      backward(batch.tokens[s], batch.features[s], params, tr, batch.labels[s],
               w[static_cast<int>(batch.labels[s])] / batch.tokens.size(),
               grads);
    }

    auto pt = params.all();
    auto gt = grads.all();
    for (std::size_t t = 0; t < pt.size() && ok; ++t) {
      for (std::size_t j = 0; j < pt[t]->size() && ok; ++j) {
        double& pj = pt[t]->a[j];
        const double orig = pj;
        pj = orig + h;
        const double up = fd_batch_loss(batch, params, w);
        pj = orig - h;
        const double down = fd_batch_loss(batch, params, w);
        pj = orig;
        const double fd = (up - down) / (2.0 * h);
        const double an = gt[t]->a[j];
        const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-3});
        if (std::fabs(fd - an) > 1e-4 * denom) {
          ok = false;
          detail = "mismatch in " + pt[t]->name + "[" + std::to_string(j) +
                   "]: fd=" + std::to_string(fd) + " an=" + std::to_string(an);
        }
      }
    }
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && secs >= 10.0) {
    ok = false;
    detail = "runtime budget 10 s exceeded";
  }
  report(1, "gradient vs finite differences", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 2

void criterion_2() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  Rng rng(5);

  for (int n = 8; n <= 1024 && ok; n *= 2) {
    std::vector<double> frame(n);
    for (auto& v : frame) v = rng.uniform(-1.0, 1.0);
    const auto fast = fft_power(frame, n);
    const auto slow = reference::dft_power(frame, n);
    double scale = 0.0;
    for (double v : slow) scale = std::max(scale, std::fabs(v));
    for (std::size_t k = 0; k < fast.size(); ++k) {
      if (std::fabs(fast[k] - slow[k]) > 1e-6 * scale) {
        ok = false;
        detail = "fft/dft mismatch at n=" + std::to_string(n);
        break;
      }
    }
    // Parseval via the real-signal half spectrum
    double time_e = 0.0;
    for (double v : frame) time_e += v * v;
    double spec_e = fast[0] + fast[n / 2];
    for (int k = 1; k < n / 2; ++k) spec_e += 2.0 * fast[k];
    spec_e /= n;
    if (std::fabs(time_e - spec_e) > 1e-6 * time_e) {
      ok = false;
      detail = "Parseval violated at n=" + std::to_string(n);
    }
  }

  if (ok && log_mel_frame_count(16000) != 98) {
    ok = false;
    detail = "16000 samples did not give 98 frames";
  }
  if (ok) {
    std::vector<std::int16_t> samples(16000);
    for (auto& s : samples)
      s = static_cast<std::int16_t>(rng.uniform(-8000.0, 8000.0));
    const auto m = log_mel(samples);
    if (m.frames != 98 || m.bins != 40) {
      ok = false;
      detail = "log_mel shape wrong";
    }
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && secs >= 5.0) {
    ok = false;
    detail = "runtime budget 5 s exceeded";
  }
  report(2, "DSP vs direct DFT oracle", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 3

double t_cdf_quadrature(double t, double df) {
  const double ln_norm = std::lgamma(0.5 * (df + 1.0)) -
                         std::lgamma(0.5 * df) -
                         0.5 * std::log(df * 3.14159265358979323846);
  auto density = [&](double x) {
    return std::exp(ln_norm - 0.5 * (df + 1.0) * std::log1p(x * x / df));
  };
  const int steps = 20000;
  const double h = t / steps;
  double acc = density(0.0) + density(t);
  for (int i = 1; i < steps; ++i) acc += density(i * h) * (i % 2 ? 4.0 : 2.0);
  return 0.5 + acc * h / 3.0;
}

void criterion_3() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  const auto wil = wilcoxon_signed_rank({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0});
  if (std::fabs(wil.p_value - 0.0625) > 1e-12) {
    ok = false;
    detail = "wilcoxon exact p != 0.0625";
  }

  if (ok) {
    Rng rng(101);
    for (int n = 15; n <= 20 && ok; ++n) {
      std::vector<double> x(n), y(n);
      for (int i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal() + 0.3;
      }
      const auto exact = wilcoxon_signed_rank(x, y, 0.05, 20);
      const auto normal = wilcoxon_signed_rank(x, y, 0.05, 0);
      if (std::fabs(exact.p_value - normal.p_value) > 0.02) {
        ok = false;
        detail = "exact/normal gap > 0.02 at n=" + std::to_string(n);
      }
    }
  }

  if (ok) {
    const auto welch = welch_t_test({1, 2, 3}, {4, 5, 6});
    const double p_oracle =
        2.0 * (1.0 - t_cdf_quadrature(std::fabs(welch.statistic), welch.df));
    if (std::fabs(welch.statistic + 3.6742) > 1e-3 ||
        std::fabs(welch.df - 4.0) > 1e-9 ||
        std::fabs(welch.p_value - 0.0213) > 5e-4 ||
        std::fabs(welch.p_value - p_oracle) > 5e-4) {
      ok = false;
      detail = "welch example off";
    }
  }

  if (ok && (std::fabs(student_t_cdf(0.0, 7.0) - 0.5) > 1e-10 ||
             std::fabs(student_t_cdf(1.0, 1.0) - 0.75) > 1e-10)) {
    ok = false;
    detail = "t-CDF closed forms off";
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && secs >= 5.0) {
    ok = false;
    detail = "runtime budget 5 s exceeded";
  }
  report(3, "statistical kernels vs oracles", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 4

void criterion_4() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  SynthConfig scfg;  // defaults: 400 utterances, delta 2.0, beta 3.0/1.5
  const auto [a, b] = generate_pair(scfg, 42);
  const auto truth = planted_truth(scfg);

  HarnessConfig cfg;  // defaults: 30 epochs, batch 16, lr 1e-3, seed 42
  const auto rep = compare(a, b, cfg);

  std::ostringstream info;
  info << "acc A " << rep.corpus_a.mean_accuracy << ", B "
       << rep.corpus_b.mean_accuracy;

  if (rep.corpus_a.mean_accuracy < 0.80 || rep.corpus_b.mean_accuracy < 0.80) {
    ok = false;
    detail = "mean fold accuracy below 0.80 (" + info.str() + ")";
  }

  int marker_wins = 0;
  for (int e = 0; e < 4; ++e) {
    const Phone marker = parse_phone(truth.markers[e]);
    double best = -1.0, marker_freq = 0.0;
    for (const auto& [p, pf] : rep.corpus_a.distributions[e]) {
      best = std::max(best, pf.mean);
      if (p == marker) marker_freq = pf.mean;
    }
    if (marker_freq >= best && best > 0.0) ++marker_wins;
  }
  if (ok && marker_wins < 3) {
    ok = false;
    detail = "marker is top phone in only " + std::to_string(marker_wins) +
             "/4 emotions";
  }

  for (int e = 0; e < 4 && ok; ++e) {
    const auto& t = rep.paired_over_phones[e];
    if (t.degenerate || t.p_value >= 0.05) {
      ok = false;
      detail = std::string("paired test not significant for ") +
               emotion_name(static_cast<EmotionLabel>(e)) +
               " (p=" + std::to_string(t.p_value) + ")";
    }
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && secs > 600.0) {
    ok = false;
    detail = "runtime budget 600 s exceeded";
  }
  if (ok) detail = info.str() + ", markers top " +
                   std::to_string(marker_wins) + "/4";
  report(4, "planted-signal recovery", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion_5() {
  const auto t0 = Clock::now();

  // identical generators: equal beta, equal delta; reduced scale keeps
  // ten repetitions inside the 30-minute budget
  SynthConfig scfg;
  scfg.n_utterances = 200;
  scfg.beta_a = scfg.beta_b = 1.5;
  scfg.delta_a = scfg.delta_b = 2.0;

  HarnessConfig cfg;
  cfg.train.epochs = 10;

  int calibrated = 0;
  std::ostringstream ps;
  for (int rep = 0; rep < 10; ++rep) {
    const std::uint64_t seed = 1000 + 17 * static_cast<std::uint64_t>(rep);
    const auto [a, b] = generate_pair(scfg, seed);
    cfg.train.seed = seed;
    const auto r = compare(a, b, cfg);
    bool quiet = true;
    for (int e = 0; e < 4; ++e) {
      if (!r.paired_over_phones[e].degenerate &&
          r.paired_over_phones[e].p_value <= 0.05)
        quiet = false;
      ps << (e == 0 ? (rep == 0 ? "" : " | ") : " ")
         << r.paired_over_phones[e].p_value;
    }
    if (quiet) ++calibrated;
  }

  bool ok = calibrated >= 9;
  std::string detail = std::to_string(calibrated) + "/10 null runs quiet";
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (ok && secs > 1800.0) {
    ok = false;
    detail = "runtime budget 1800 s exceeded";
  }
  report(5, "null calibration", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 6

void criterion_6() {
  const auto t0 = Clock::now();

  SynthConfig scfg;
  scfg.n_utterances = 60;
  const auto [a, b] = generate_pair(scfg, 9);

  HarnessConfig cfg;
  cfg.train.epochs = 3;
  cfg.train.seed = 77;

  const fs::path base = fs::temp_directory_path() / "emophon_acceptance_c6";
  fs::remove_all(base);

  cfg.workers = 1;
  emit_report(compare(a, b, cfg), (base / "w1_run1").string(),
              ReportFormat::Json);
  emit_report(compare(a, b, cfg), (base / "w1_run2").string(),
              ReportFormat::Json);
  cfg.workers = 4;
  emit_report(compare(a, b, cfg), (base / "w4").string(), ReportFormat::Json);

  const auto r1 = slurp((base / "w1_run1" / "report.json").string());
  const auto r2 = slurp((base / "w1_run2" / "report.json").string());
  const auto r4 = slurp((base / "w4" / "report.json").string());
  fs::remove_all(base);

  bool ok = !r1.empty() && r1 == r2 && r1 == r4;
  const std::string detail = ok ? "" : (r1 != r2 ? "repeat run differs"
                                                 : "worker count changes bytes");
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  report(6, "byte-identical reports", ok, secs, detail);
}

// ---------------------------------------------------------------- criterion 7

void criterion_7() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;

  SynthConfig scfg;
  scfg.n_utterances = 60;
  const auto [a, b] = generate_pair(scfg, 15);

  HarnessConfig cfg;
  cfg.train.epochs = 2;
  cfg.train.seed = 5;
  cfg.workers = 0;
  const auto run = run_corpus(a, cfg);

  for (std::size_t f = 0; f < run.fold_results.size() && ok; ++f) {
    const auto& fr = run.fold_results[f];
    // attended-count totals per emotion equal record counts
    const auto totals = phoneme_totals(a);
    const auto dists = attended_distribution(fr.records, totals);
    std::array<std::int64_t, 4> record_counts{}, attended_counts{};
    for (const auto& r : fr.records)
      ++record_counts[static_cast<int>(r.emotion)];
    for (int e = 0; e < 4; ++e)
      for (const auto& [p, c] : dists[e].attended_counts)
        attended_counts[e] += c;
    for (int e = 0; e < 4 && ok; ++e) {
      if (attended_counts[e] != record_counts[e]) {
        ok = false;
        detail = "attended counts do not match record counts";
      }
    }

    // records follow the order of the fold's test indices
    for (std::size_t i = 0; i < fr.records.size(); ++i) {
      const auto& r = fr.records[i];
      double sum = 0.0;
      for (double w : r.frame_weights) sum += w;
      if (std::fabs(sum - 1.0) > 1e-6) {
        ok = false;
        detail = "attention weights of " + r.utterance_id +
                 " sum to " + std::to_string(sum);
        break;
      }
      // argmax invariance under positive rescaling
      const auto& u = a.utterances[run.folds[f].test_indices[i]];
      std::vector<double> scaled = r.frame_weights;
      for (double& w : scaled) w *= 3.7;
      const auto rescaled =
          make_attention_record(r.utterance_id, r.emotion, scaled, u.segments,
                                1);
      if (rescaled.top_phones.front() != r.top_phones.front()) {
        ok = false;
        detail = "argmax changed under positive rescaling";
        break;
      }
    }
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  report(7, "attribution invariants", ok, secs, detail);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_7();
  criterion_6();
  criterion_4();
  criterion_5();
  if (g_failures == 0) {
    std::printf("all acceptance criteria satisfied\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", g_failures);
  return 1;
}
