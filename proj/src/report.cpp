#include "emophon/harness.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emophon {

namespace fs = std::filesystem;

namespace {

// canonical number formatting: 9 significant digits
std::string num(double v) {
  if (!std::isfinite(v)) return "0";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

// Minimal writer for the canonical report layout: keys are emitted in
// sorted order by construction.
class JsonWriter {
public:
  explicit JsonWriter(std::ostream& os) : os_(os) {}

  void begin_object() { punct("{"); }
  void end_object() { os_ << "}"; first_ = false; }
  void begin_array() { punct("["); }
  void end_array() { os_ << "]"; first_ = false; }

  void key(const std::string& k) {
    comma();
    os_ << quote(k) << ":";
    first_ = true;
  }
  void value(double v) { comma(); os_ << num(v); }
  void value(int v) { comma(); os_ << v; }
  void value(std::int64_t v) { comma(); os_ << v; }
  void value(std::uint64_t v) { comma(); os_ << v; }
  void value(bool v) { comma(); os_ << (v ? "true" : "false"); }
  void value(const std::string& v) { comma(); os_ << quote(v); }
  void value(const char* v) { comma(); os_ << quote(v); }

private:
  void punct(const char* p) { comma(); os_ << p; first_ = true; }
  void comma() {
    if (!first_) os_ << ",";
    first_ = false;
  }
  std::ostream& os_;
  bool first_ = true;
};

void write_test_result(JsonWriter& w, const TestResult& t) {
  w.begin_object();
  w.key("alpha"); w.value(t.alpha);
  w.key("degenerate"); w.value(t.degenerate);
  w.key("df"); w.value(t.df);
  w.key("method"); w.value(t.method);
  w.key("n"); w.value(t.n);
  w.key("p_value"); w.value(t.p_value);
  w.key("reject"); w.value(t.reject);
  w.key("statistic"); w.value(t.statistic);
  w.end_object();
}

void write_corpus_summary(JsonWriter& w, const CorpusSummary& s) {
  w.begin_object();
  w.key("fold_accuracies");
  w.begin_array();
  for (double a : s.fold_accuracies) w.value(a);
  w.end_array();
  w.key("mean_accuracy"); w.value(s.mean_accuracy);
  w.key("n_utterances"); w.value(s.n_utterances);
  w.key("origin"); w.value(s.origin);
  w.end_object();
}

void write_distributions(JsonWriter& w, const CorpusSummary& s) {
  w.begin_object();
  for (int e = 0; e < kNumEmotions; ++e) {
    w.key(emotion_name(static_cast<EmotionLabel>(e)));
    w.begin_object();
    for (const Phone& p : s.attended_phones) {
      const auto& pf = s.distributions[e].at(p);
      w.key(p.symbol());
      w.begin_object();
      w.key("folds");
      w.begin_array();
      for (double f : pf.folds) w.value(f);
      w.end_array();
      w.key("mean"); w.value(pf.mean);
      w.end_object();
    }
    w.end_object();
  }
  w.end_object();
}

void write_box(JsonWriter& w,
               const std::array<std::map<Phone, BoxStats>, kNumEmotions>& box) {
  w.begin_object();
  for (int e = 0; e < kNumEmotions; ++e) {
    w.key(emotion_name(static_cast<EmotionLabel>(e)));
    w.begin_object();
    for (const auto& [p, b] : box[e]) {
      w.key(p.symbol());
      w.begin_object();
      w.key("iqr"); w.value(b.iqr);
      w.key("median"); w.value(b.median);
      w.key("outliers");
      w.begin_array();
      for (double o : b.outliers) w.value(o);
      w.end_array();
      w.key("q1"); w.value(b.q1);
      w.key("q3"); w.value(b.q3);
      w.key("whisker_high"); w.value(b.whisker_high);
      w.key("whisker_low"); w.value(b.whisker_low);
      w.end_object();
    }
    w.end_object();
  }
  w.end_object();
}

void write_report_json(const ComparisonReport& r, const std::string& path) {
  std::ostringstream os;
  JsonWriter w(os);
  w.begin_object();

  w.key("box_stats");
  w.begin_object();
  w.key("A"); write_box(w, r.box[0]);
  w.key("B"); write_box(w, r.box[1]);
  w.end_object();

  w.key("config");
  w.begin_object();
  w.key("batch_size"); w.value(r.config.train.batch_size);
  w.key("clip_norm"); w.value(r.config.train.clip_norm);
  w.key("epochs"); w.value(r.config.train.epochs);
  w.key("learning_rate"); w.value(r.config.train.learning_rate);
  w.key("stratified_folds"); w.value(r.config.stratified_folds);
  w.key("top_k"); w.value(r.config.top_k);
  w.end_object();

  w.key("content_bias");
  write_test_result(w, r.content_bias);

  w.key("corpora");
  w.begin_object();
  w.key("A"); write_corpus_summary(w, r.corpus_a);
  w.key("B"); write_corpus_summary(w, r.corpus_b);
  w.end_object();

  w.key("distributions");
  w.begin_object();
  w.key("A"); write_distributions(w, r.corpus_a);
  w.key("B"); write_distributions(w, r.corpus_b);
  w.end_object();

  w.key("excluded_phones");
  w.begin_array();
  for (const Phone& p : r.excluded_phones) w.value(p.symbol());
  w.end_array();

  w.key("seed");
  w.value(r.config.train.seed);

  w.key("tests");
  w.begin_object();
  w.key("paired_over_phones");
  w.begin_object();
  for (int e = 0; e < kNumEmotions; ++e) {
    w.key(emotion_name(static_cast<EmotionLabel>(e)));
    write_test_result(w, r.paired_over_phones[e]);
  }
  w.end_object();
  w.key("per_phone_welch");
  w.begin_object();
  for (int e = 0; e < kNumEmotions; ++e) {
    w.key(emotion_name(static_cast<EmotionLabel>(e)));
    w.begin_object();
    for (const auto& [p, t] : r.per_phone_welch[e]) {
      w.key(p.symbol());
      write_test_result(w, t);
    }
    w.end_object();
  }
  w.end_object();
  w.end_object();

  w.end_object();
  os << "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << os.str();
}

void write_distributions_csv(const ComparisonReport& r, const std::string& path) {
  std::size_t max_folds = 0;
  for (const auto* s : {&r.corpus_a, &r.corpus_b})
    max_folds = std::max(max_folds, s->fold_accuracies.size());

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "corpus,emotion,phone,mean_freq";
  for (std::size_t f = 0; f < max_folds; ++f) out << ",fold" << f;
  out << "\n";

  const std::pair<const char*, const CorpusSummary*> corpora[] = {
      {"A", &r.corpus_a}, {"B", &r.corpus_b}};
  for (const auto& [name, s] : corpora) {
    for (int e = 0; e < kNumEmotions; ++e) {
      for (const Phone& p : s->attended_phones) {
        const auto& pf = s->distributions[e].at(p);
        out << name << "," << emotion_name(static_cast<EmotionLabel>(e)) << ","
            << p.symbol() << "," << num(pf.mean);
        for (std::size_t f = 0; f < max_folds; ++f)
          out << "," << (f < pf.folds.size() ? num(pf.folds[f]) : "");
        out << "\n";
      }
    }
  }
}

void write_boxstats_csv(const ComparisonReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "corpus,emotion,phone,median,q1,q3,iqr,whisker_low,whisker_high,"
         "outliers\n";
  for (int c = 0; c < 2; ++c) {
    const char* name = c == 0 ? "A" : "B";
    for (int e = 0; e < kNumEmotions; ++e) {
      for (const auto& [p, b] : r.box[c][e]) {
        out << name << "," << emotion_name(static_cast<EmotionLabel>(e)) << ","
            << p.symbol() << "," << num(b.median) << "," << num(b.q1) << ","
            << num(b.q3) << "," << num(b.iqr) << "," << num(b.whisker_low)
            << "," << num(b.whisker_high) << ",";
        for (std::size_t i = 0; i < b.outliers.size(); ++i) {
          if (i) out << ";";
          out << num(b.outliers[i]);
        }
        out << "\n";
      }
    }
  }
}

void write_tests_csv(const ComparisonReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "family,emotion,phone,method,statistic,df,p,reject\n";

  auto row = [&](const std::string& family, const std::string& emotion,
                 const std::string& phone, const TestResult& t) {
    out << family << "," << emotion << "," << phone << "," << t.method << ","
        << num(t.statistic) << "," << num(t.df) << "," << num(t.p_value) << ","
        << (t.reject ? "true" : "false") << "\n";
  };

  row("content_bias", "", "", r.content_bias);
  for (int e = 0; e < kNumEmotions; ++e)
    row("paired_over_phones", emotion_name(static_cast<EmotionLabel>(e)), "",
        r.paired_over_phones[e]);
  for (int e = 0; e < kNumEmotions; ++e)
    for (const auto& [p, t] : r.per_phone_welch[e])
      row("per_phone_welch", emotion_name(static_cast<EmotionLabel>(e)),
          p.symbol(), t);
}

}  // namespace

void emit_report(const ComparisonReport& report, const std::string& out_dir,
                 ReportFormat format) {
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  if (format == ReportFormat::Json || format == ReportFormat::Both)
    write_report_json(report, (dir / "report.json").string());
  if (format == ReportFormat::Csv || format == ReportFormat::Both) {
    write_distributions_csv(report, (dir / "distributions.csv").string());
    write_boxstats_csv(report, (dir / "boxstats.csv").string());
    write_tests_csv(report, (dir / "tests.csv").string());
  }
}

}  // namespace emophon
