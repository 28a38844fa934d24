#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "emophon/corpus.hpp"
#include "emophon/dsp.hpp"
#include "emophon/harness.hpp"
#include "emophon/model.hpp"
#include "emophon/synthgen.hpp"
#include "emophon/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emophon;

namespace {

// exit codes: 0 success, 1 runtime failure, 2 bad input/config,
// 3 refused overwrite
constexpr int kExitRuntime = 1;
constexpr int kExitBadInput = 2;
constexpr int kExitRefused = 3;

struct Refused : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_writable(const fs::path& target, bool force) {
  if (fs::exists(target) && !force)
    throw Refused("refusing to overwrite " + target.string() +
                  " (use --force)");
}

void echo_config(const fs::path& dir, const json& cfg) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.json");
  out << cfg.dump(2) << "\n";
}

struct CommonOpts {
  std::uint64_t seed = 42;
  int epochs = 30;
  int batch_size = 16;
  double lr = 1e-3;
  int top_k = 1;
  int workers = 0;
  bool force = false;
  std::string format = "both";
};

HarnessConfig harness_config(const CommonOpts& o) {
  HarnessConfig h;
  h.train.seed = o.seed;
  h.train.epochs = o.epochs;
  h.train.batch_size = o.batch_size;
  h.train.learning_rate = o.lr;
  h.top_k = o.top_k;
  h.workers = o.workers;
  return h;
}

json config_json(const CommonOpts& o) {
  return {{"seed", o.seed},       {"epochs", o.epochs},
          {"batch_size", o.batch_size}, {"learning_rate", o.lr},
          {"top_k", o.top_k},     {"workers", o.workers},
          {"format", o.format}};
}

int cmd_featurize(const std::string& wav_dir, const std::string& manifest_in,
                  const std::string& out_dir, bool force) {
  if (!fs::is_directory(wav_dir)) throw BadInput("no such directory: " + wav_dir);
  std::vector<fs::path> wavs;
  for (const auto& e : fs::directory_iterator(wav_dir))
    if (e.is_regular_file() && e.path().extension() == ".wav")
      wavs.push_back(e.path());
  if (wavs.empty()) throw BadInput("no input files in " + wav_dir);
  std::sort(wavs.begin(), wavs.end());

  std::ifstream in(manifest_in);
  if (!in) throw BadInput("cannot open manifest " + manifest_in);

  const fs::path out_manifest = fs::path(out_dir) / "manifest.jsonl";
  require_writable(out_manifest, force);
  fs::create_directories(fs::path(out_dir) / "feat");

  // index manifest records by utterance id; header passes through
  std::string line;
  json header;
  std::map<std::string, json> records;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line);
    if (line_no == 1 && j.contains("origin")) {
      header = j;
      continue;
    }
    records[j.at("id").get<std::string>()] = j;
  }
  if (header.is_null()) throw BadInput("manifest has no header line");

  std::vector<std::string> failures;
  std::map<std::string, json> out_records;
  for (const auto& wav : wavs) {
    const std::string id = wav.stem().string();
    auto it = records.find(id);
    if (it == records.end()) {
      failures.push_back(id + ": not in manifest");
      continue;
    }
    try {
      const auto samples = read_wav_16k_mono(wav.string());
      const auto features = log_mel(samples);
      const std::string rel = "feat/" + id + ".fmx";
      write_fmx(features, (fs::path(out_dir) / rel).string());
      json rec = it->second;
      rec["features"] = rel;
      rec["frame_count"] = features.frames;
      out_records[id] = rec;
    } catch (const std::exception& e) {
      failures.push_back(id + ": " + e.what());
    }
  }

  header["frame_hop_ms"] = 10.0;
  std::ofstream out(out_manifest);
  out << header.dump() << "\n";
  for (const auto& [id, rec] : out_records) out << rec.dump() << "\n";

  std::cout << "featurized " << out_records.size() << " of " << wavs.size()
            << " files into " << out_dir << "\n";
  for (const auto& f : failures) std::cout << "failed: " << f << "\n";
  return failures.empty() ? 0 : kExitRuntime;
}

int cmd_synth(const std::string& config_path, std::uint64_t seed,
              const std::string& out_a, const std::string& out_b, bool force) {
  SynthConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_synth_config(config_path);
    cfg.validate();
  } catch (const std::exception& e) {
    throw BadInput(e.what());
  }

  const fs::path manifest_a = fs::path(out_a) / "manifest.jsonl";
  const fs::path manifest_b = fs::path(out_b) / "manifest.jsonl";
  require_writable(manifest_a, force);
  require_writable(manifest_b, force);
  fs::create_directories(out_a);
  fs::create_directories(out_b);

  auto [a, b] = generate_pair(cfg, seed);
  write_manifest(a, manifest_a.string());
  write_manifest(b, manifest_b.string());
  write_synth_config(cfg, (fs::path(out_a) / "synth_config.json").string());
  write_synth_config(cfg, (fs::path(out_b) / "synth_config.json").string());

  const auto truth = planted_truth(cfg);
  std::cout << "generated " << a.utterances.size() << " + "
            << b.utterances.size() << " utterances (seed " << seed << ")\n";
  std::cout << "planted markers: angry=" << truth.markers[0]
            << " happy=" << truth.markers[1] << " neutral=" << truth.markers[2]
            << " sad=" << truth.markers[3] << "\n";
  if (truth.expect_difference)
    std::cout << "planted difference: yes (stronger marker usage in corpus "
              << truth.expected_higher_corpus << ")\n";
  else
    std::cout << "planted difference: none (null configuration)\n";
  return 0;
}

int cmd_train(const std::string& manifest, const std::string& out_dir,
              const CommonOpts& o) {
  const fs::path ckpt = fs::path(out_dir) / "model.ckpt";
  require_writable(ckpt, o.force);

  const Corpus corpus = load_manifest(manifest);
  const auto weights = class_weights(class_counts(corpus));

  ModelConfig mc;
  mc.vocab_size = static_cast<int>(corpus.vocabulary.size()) + 1;
  mc.n_mels = static_cast<int>(corpus.utterances.front().features.bins);

  TrainConfig tc;
  tc.seed = o.seed;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch_size;
  tc.learning_rate = o.lr;

  std::vector<const Utterance*> utts;
  for (const auto& u : corpus.utterances) utts.push_back(&u);
  const auto samples = make_samples(utts, corpus.vocabulary);
  auto outcome = train<float>(samples, mc, tc, weights);

  fs::create_directories(out_dir);
  save_checkpoint(outcome.params, ckpt.string());
  write_epoch_log(outcome.log, (fs::path(out_dir) / "epoch_log.csv").string());
  echo_config(out_dir, config_json(o));

  const auto& last = outcome.log.back();
  std::cout << "trained " << tc.epochs << " epochs on "
            << corpus.utterances.size() << " utterances; final loss "
            << last.loss << ", train accuracy " << last.train_acc << "\n";
  return 0;
}

int cmd_attend(const std::string& manifest, const std::string& checkpoint,
               const std::string& out_path, int top_k, bool compact,
               bool force) {
  require_writable(out_path, force);
  const Corpus corpus = load_manifest(manifest);
  const auto params = load_checkpoint<float>(checkpoint);

  std::vector<AttentionRecord> records;
  for (const auto& u : corpus.utterances) {
    const auto ids = tokens_to_ids(u.tokens, corpus.vocabulary);
    const auto tr = forward(ids, u.features, params);
    std::vector<double> w(tr.attention_weights.begin(),
                          tr.attention_weights.end());
    records.push_back(make_attention_record(u.id, u.emotion, w, u.segments,
                                            top_k));
  }
  write_attention_records(records, out_path, compact);
  std::cout << "wrote " << records.size() << " attention records to "
            << out_path << "\n";
  return 0;
}

int cmd_compare(const std::string& manifest_a, const std::string& manifest_b,
                const std::string& out_dir, const CommonOpts& o) {
  const fs::path report_path = fs::path(out_dir) / "report.json";
  require_writable(report_path, o.force);

  Corpus a, b;
  try {
    a = load_manifest(manifest_a);
    b = load_manifest(manifest_b);
  } catch (const std::exception& e) {
    throw BadInput(e.what());
  }
  const HarnessConfig cfg = harness_config(o);

  const auto report = compare(a, b, cfg);

  ReportFormat fmt = ReportFormat::Both;
  if (o.format == "json") fmt = ReportFormat::Json;
  else if (o.format == "csv") fmt = ReportFormat::Csv;
  emit_report(report, out_dir, fmt);
  echo_config(out_dir, config_json(o));

  std::cout << "corpus A (" << a.origin
            << "): mean fold accuracy " << report.corpus_a.mean_accuracy << "\n";
  std::cout << "corpus B (" << b.origin
            << "): mean fold accuracy " << report.corpus_b.mean_accuracy << "\n";
  std::cout << "content bias: " << report.content_bias.method << " p="
            << report.content_bias.p_value
            << (report.content_bias.degenerate ? " (degenerate)" : "") << "\n";
  for (int e = 0; e < kNumEmotions; ++e) {
    const auto& t = report.paired_over_phones[e];
    std::cout << "paired t (" << emotion_name(static_cast<EmotionLabel>(e))
              << "): p=" << t.p_value
              << (t.degenerate ? " (degenerate)" : t.reject ? " *" : "")
              << "\n";
  }
  std::cout << "report written to " << out_dir << "\n";
  return 0;
}

int cmd_report(const std::string& report_path) {
  std::ifstream in(report_path);
  if (!in) throw BadInput("cannot open " + report_path);
  json r;
  in >> r;

  std::cout << "corpus A (" << r["corpora"]["A"]["origin"].get<std::string>()
            << "): mean accuracy "
            << r["corpora"]["A"]["mean_accuracy"].get<double>() << "\n";
  std::cout << "corpus B (" << r["corpora"]["B"]["origin"].get<std::string>()
            << "): mean accuracy "
            << r["corpora"]["B"]["mean_accuracy"].get<double>() << "\n";
  const auto& cb = r["content_bias"];
  std::cout << "content bias: " << cb["method"].get<std::string>()
            << " p=" << cb["p_value"].get<double>() << "\n";
  for (const auto& [emotion, t] : r["tests"]["paired_over_phones"].items())
    std::cout << "paired t (" << emotion << "): p=" << t["p_value"].get<double>()
              << (t["reject"].get<bool>() ? " *" : "") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based analysis of attended phonemes in emotional speech"};
  app.require_subcommand(1);

  CommonOpts o;

  std::string wav_dir, manifest_in, manifest_a, manifest_b, out_dir, out_a,
      out_b, checkpoint, out_path, synth_config, report_path;
  bool compact = false;

  auto add_common = [&](CLI::App* cmd, bool with_train = true) {
    cmd->add_option("--seed", o.seed, "master seed");
    cmd->add_flag("--force", o.force, "overwrite existing outputs");
    if (with_train) {
      cmd->add_option("--epochs", o.epochs, "training epochs");
      cmd->add_option("--batch-size", o.batch_size, "batch size");
      cmd->add_option("--lr", o.lr, "learning rate");
    }
  };

  auto* featurize = app.add_subcommand("featurize", "extract log-mel features");
  featurize->add_option("wav_dir", wav_dir)->required();
  featurize->add_option("manifest_in", manifest_in)->required();
  featurize->add_option("out_dir", out_dir)->required();
  featurize->add_flag("--force", o.force, "overwrite existing outputs");

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus pair");
  synth->add_option("out_a", out_a)->required();
  synth->add_option("out_b", out_b)->required();
  synth->add_option("--config", synth_config, "synth config JSON");
  synth->add_option("--seed", o.seed, "master seed");
  synth->add_flag("--force", o.force, "overwrite existing outputs");

  auto* train_cmd = app.add_subcommand("train", "train a classifier on a corpus");
  train_cmd->add_option("manifest", manifest_in)->required();
  train_cmd->add_option("out_dir", out_dir)->required();
  add_common(train_cmd);

  auto* attend = app.add_subcommand("attend", "extract attention records");
  attend->add_option("manifest", manifest_in)->required();
  attend->add_option("checkpoint", checkpoint)->required();
  attend->add_option("out", out_path)->required();
  attend->add_option("--top-k", o.top_k, "phones per record");
  attend->add_flag("--compact", compact, "elide frame weights");
  attend->add_flag("--force", o.force, "overwrite existing outputs");

  auto* compare_cmd = app.add_subcommand("compare", "run the two-corpus comparison");
  compare_cmd->add_option("manifest_a", manifest_a)->required();
  compare_cmd->add_option("manifest_b", manifest_b)->required();
  compare_cmd->add_option("out_dir", out_dir)->required();
  add_common(compare_cmd);
  compare_cmd->add_option("--top-k", o.top_k, "phones per record");
  compare_cmd->add_option("--workers", o.workers, "concurrent fold workers");
  compare_cmd->add_option("--format", o.format, "json|csv|both")
      ->check(CLI::IsMember({"json", "csv", "both"}));

  auto* report_cmd = app.add_subcommand("report", "summarize an existing report");
  report_cmd->add_option("report_json", report_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitBadInput;
  }

  try {
    if (featurize->parsed())
      return cmd_featurize(wav_dir, manifest_in, out_dir, o.force);
    if (synth->parsed())
      return cmd_synth(synth_config, o.seed, out_a, out_b, o.force);
    if (train_cmd->parsed()) return cmd_train(manifest_in, out_dir, o);
    if (attend->parsed())
      return cmd_attend(manifest_in, checkpoint, out_path, o.top_k, compact,
                        o.force);
    if (compare_cmd->parsed())
      return cmd_compare(manifest_a, manifest_b, out_dir, o);
    if (report_cmd->parsed()) return cmd_report(report_path);
  } catch (const Refused& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRefused;
  } catch (const BadInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitBadInput;
}
