// aetsep command line: corpus mixing, training, separation, evaluation and
// basis inspection. Exit codes: 0 success, 2 usage/config error, 3 runtime
// failure.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aetsep/aet.hpp"
#include "aetsep/bss_eval.hpp"
#include "aetsep/corpus.hpp"
#include "aetsep/losses.hpp"
#include "aetsep/separator.hpp"
#include "aetsep/trainer.hpp"
#include "aetsep/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace aetsep;

namespace {

// user-input problems exit with 2; everything else that throws exits with 3
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config_path;
  bool verbose = false;
};

void require_keys(const json& obj, const std::string& where,
                  const std::vector<std::string>& known) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw UsageError("config: unknown key '" + key + "' in " + where);
  }
}

struct ExperimentConfig {
  FrontendKind frontend = FrontendKind::kAetOrthogonal;
  std::string manifest_path;
  TrainConfig train;
  ModelGeometry geometry;
  std::string checkpoint_out;
  std::string log_out;
};

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("config: cannot open " + path);
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw UsageError("config: invalid JSON in " + path + ": " + e.what());
  }
  if (!root.is_object()) throw UsageError("config: top level must be an object");

  require_keys(root, "top level",
               {"frontend", "manifest", "target", "loss", "epochs", "batch_size", "dropout",
                "optimizer", "learning_rate", "seed", "segment_len", "aet", "stft", "hidden_units",
                "sample_rate", "checkpoint_out", "log_out"});

  ExperimentConfig cfg;
  try {
    cfg.frontend = frontend_from_string(root.at("frontend").get<std::string>());
    cfg.manifest_path = root.at("manifest").get<std::string>();
    cfg.train.target = target_from_string(root.at("target").get<std::string>());
    cfg.train.epochs = root.at("epochs").get<int>();
    cfg.checkpoint_out = root.at("checkpoint_out").get<std::string>();
    if (root.contains("loss")) cfg.train.loss = loss_from_string(root["loss"].get<std::string>());
    if (root.contains("batch_size")) cfg.train.batch_size = root["batch_size"].get<Index>();
    if (root.contains("dropout")) cfg.train.dropout = root["dropout"].get<double>();
    if (root.contains("optimizer"))
      cfg.train.optimizer = optimizer_from_string(root["optimizer"].get<std::string>());
    if (root.contains("learning_rate")) cfg.train.learning_rate = root["learning_rate"].get<double>();
    if (root.contains("seed")) cfg.train.seed = root["seed"].get<std::uint64_t>();
    if (root.contains("segment_len")) cfg.train.segment_len = root["segment_len"].get<Index>();
    if (root.contains("hidden_units")) cfg.geometry.hidden = root["hidden_units"].get<Index>();
    if (root.contains("sample_rate")) cfg.geometry.sample_rate = root["sample_rate"].get<double>();
    if (root.contains("aet")) {
      const json& aet = root["aet"];
      require_keys(aet, "aet", {"num_filters", "filter_width", "pool", "smoothing_length"});
      if (aet.contains("num_filters")) cfg.geometry.aet.num_filters = aet["num_filters"].get<Index>();
      if (aet.contains("filter_width"))
        cfg.geometry.aet.filter_width = aet["filter_width"].get<Index>();
      if (aet.contains("pool")) cfg.geometry.aet.pool = aet["pool"].get<Index>();
      if (aet.contains("smoothing_length"))
        cfg.geometry.aet.smoothing_len = aet["smoothing_length"].get<Index>();
    }
    if (root.contains("stft")) {
      const json& stft = root["stft"];
      require_keys(stft, "stft", {"window", "hop"});
      if (stft.contains("window")) cfg.geometry.stft.window = stft["window"].get<Index>();
      if (stft.contains("hop")) cfg.geometry.stft.hop = stft["hop"].get<Index>();
    }
    cfg.log_out = root.contains("log_out") ? root["log_out"].get<std::string>()
                                           : cfg.checkpoint_out + ".log.csv";
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }

  try {
    validate(cfg.train);
    if (cfg.frontend != FrontendKind::kStft) validate(cfg.geometry.aet);
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::pair<std::vector<MixturePair>, std::vector<MixturePair>> realize_splits(
    const SplitManifest& manifest, bool verbose) {
  std::vector<MixturePair> train_pairs, test_pairs;
  for (const auto& spec : manifest.mixtures) {
    MixturePair pair = realize_mixture(spec);
    (spec.is_test ? test_pairs : train_pairs).push_back(std::move(pair));
  }
  if (verbose)
    std::cerr << "realized " << train_pairs.size() << " train and " << test_pairs.size()
              << " test mixtures\n";
  return {std::move(train_pairs), std::move(test_pairs)};
}

std::string wav_name(const MixtureSpec& spec, const char* role) {
  std::ostringstream os;
  os << spec.pair_id << "_s" << spec.sentence_id << "_" << role << ".wav";
  return os.str();
}

// quantile with linear interpolation between closest ranks
double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return std::nan("");
  double h = (static_cast<double>(v.size()) - 1.0) * p;
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(v.size() - 1, lo + 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_mix(const std::string& corpus_root, const std::string& out_dir, int pairs, int sentences,
            std::uint64_t seed, bool verbose) {
  if (!fs::is_directory(corpus_root))
    throw UsageError("corpus root does not exist: " + corpus_root);
  fs::create_directories(out_dir);

  SplitManifest manifest;
  try {
    manifest = build_manifest(corpus_root, pairs, sentences, seed);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  save_manifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());

  for (const auto& spec : manifest.mixtures) {
    MixturePair pair = realize_mixture(spec);
    write_wav((fs::path(out_dir) / wav_name(spec, "mix")).string(), pair.mixture);
    write_wav((fs::path(out_dir) / wav_name(spec, "src_a")).string(), pair.source_a);
    write_wav((fs::path(out_dir) / wav_name(spec, "src_b")).string(), pair.source_b);
  }
  if (verbose)
    std::cerr << "wrote " << manifest.mixtures.size() << " mixtures ("
              << manifest.train_count() << " train / " << manifest.test_count() << " test) to "
              << out_dir << "\n";
  std::cout << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
  return 0;
}

int cmd_train(const GlobalFlags& flags) {
  if (flags.config_path.empty()) throw UsageError("train requires --config <file>");
  ExperimentConfig cfg = parse_config(flags.config_path);
  if (flags.seed_set) cfg.train.seed = flags.seed;

  if (!fs::exists(cfg.manifest_path))
    throw UsageError("manifest not found: " + cfg.manifest_path);
  SplitManifest manifest = load_manifest(cfg.manifest_path);
  for (const auto& spec : manifest.mixtures) {
    if (!fs::exists(spec.path_a)) throw UsageError("corpus sentence missing: " + spec.path_a);
    if (!fs::exists(spec.path_b)) throw UsageError("corpus sentence missing: " + spec.path_b);
  }

  auto [train_pairs, test_pairs] = realize_splits(manifest, flags.verbose);
  if (train_pairs.empty()) throw UsageError("manifest has no training mixtures");

  SeparationModel model = build_model(cfg.frontend, cfg.geometry, cfg.train.seed);
  TrainerState state = train(model, train_pairs, test_pairs, cfg.train, {}, flags.verbose);

  save_checkpoint({model, state, cfg.train}, cfg.checkpoint_out);

  std::ofstream log(cfg.log_out);
  if (!log) throw std::runtime_error("cannot write training log: " + cfg.log_out);
  log << "epoch,train_loss,val_sdr_db\n";
  for (const auto& entry : state.log)
    log << entry.epoch << "," << entry.train_loss << "," << entry.val_sdr_db << "\n";

  std::cout << cfg.checkpoint_out << "\n";
  return 0;
}

int cmd_separate(const std::string& checkpoint_path, const std::string& mixture_path,
                 const std::string& out_path) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  Waveform mixture = read_wav(mixture_path);
  if (mixture.sample_rate != cp.model.geometry.sample_rate)
    throw UsageError("sample rate mismatch: mixture has " + std::to_string(mixture.sample_rate) +
                     " Hz, checkpoint was trained at " +
                     std::to_string(cp.model.geometry.sample_rate) + " Hz");
  Waveform estimate;
  estimate.sample_rate = mixture.sample_rate;
  estimate.samples = separate(cp.model, mixture.samples);
  write_wav(out_path, estimate);
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& manifest_path,
                 const std::string& out_csv, Index filter_len, bool verbose) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  if (!fs::exists(manifest_path)) throw UsageError("manifest not found: " + manifest_path);
  SplitManifest manifest = load_manifest(manifest_path);

  std::vector<MixtureSpec> test_specs;
  for (const auto& spec : manifest.mixtures)
    if (spec.is_test) test_specs.push_back(spec);
  if (test_specs.empty()) throw UsageError("manifest has an empty test split");

  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("AETSEP_THREADS")) {
    long parsed = std::strtol(cap, nullptr, 10);
    if (parsed >= 1) threads = std::min<std::size_t>(threads, static_cast<std::size_t>(parsed));
  }
  threads = std::min(threads, test_specs.size());

  struct Row {
    std::string pair_id;
    int sentence_id = 0;
    BssScores scores;
  };
  std::vector<Row> rows(test_specs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mutex;

  auto worker = [&]() {
    std::size_t i;
    while (!failed && (i = next.fetch_add(1)) < test_specs.size()) {
      try {
        const MixtureSpec& spec = test_specs[i];
        MixturePair pair = realize_mixture(spec);
        std::vector<double> estimate = separate(cp.model, pair.mixture.samples);
        std::vector<std::vector<double>> refs;
        if (cp.config.target == TargetSource::kA)
          refs = {pair.source_a.samples, pair.source_b.samples};
        else
          refs = {pair.source_b.samples, pair.source_a.samples};
        rows[i] = Row{spec.pair_id, spec.sentence_id,
                      bss_eval(estimate, refs, 0, filter_len)};
      } catch (const std::exception& e) {
        std::lock_guard lock(failure_mutex);
        failure = e.what();
        failed = true;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i + 1 < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failed) throw std::runtime_error("evaluation failed: " + failure);

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot write CSV: " + out_csv);
  out << "pair,sentence,sdr_db,sir_db,sar_db,L\n";
  std::vector<double> sdr, sir, sar;
  for (const auto& row : rows) {
    out << row.pair_id << "," << row.sentence_id << "," << row.scores.sdr_db << ","
        << row.scores.sir_db << "," << row.scores.sar_db << "," << row.scores.filter_len << "\n";
    sdr.push_back(row.scores.sdr_db);
    sir.push_back(row.scores.sir_db);
    sar.push_back(row.scores.sar_db);
  }
  out << "# summary metric,median,q1,q3\n";
  auto summary = [&](const char* name, const std::vector<double>& v) {
    out << "# " << name << "," << quantile(v, 0.5) << "," << quantile(v, 0.25) << ","
        << quantile(v, 0.75) << "\n";
  };
  summary("sdr_db", sdr);
  summary("sir_db", sir);
  summary("sar_db", sar);
  if (verbose)
    std::cerr << "evaluated " << rows.size() << " test mixtures with " << threads << " threads\n";
  std::cout << out_csv << "\n";
  return 0;
}

int cmd_inspect(const std::string& checkpoint_path, const std::string& out_dir, int top_n) {
  Checkpoint cp = load_checkpoint(checkpoint_path);
  if (cp.model.frontend == FrontendKind::kStft)
    throw UsageError("stft checkpoints have no learned front-end to inspect");
  fs::create_directories(out_dir);

  std::vector<BasisSpectrum> spectra = inspect_bases(cp.model.aet_params, 1024);
  std::size_t count = std::min<std::size_t>(spectra.size(), static_cast<std::size_t>(top_n));

  std::ofstream filters(fs::path(out_dir) / "filters.csv");
  filters << "rank,filter_index,dominant_bin,taps...\n";
  for (std::size_t i = 0; i < count; ++i) {
    filters << i << "," << spectra[i].filter_index << "," << spectra[i].dominant_bin;
    for (double v : spectra[i].filter) filters << "," << v;
    filters << "\n";
  }

  std::ofstream spec_csv(fs::path(out_dir) / "spectra.csv");
  spec_csv << "rank,dominant_bin,magnitude...\n";
  for (std::size_t i = 0; i < count; ++i) {
    spec_csv << i << "," << spectra[i].dominant_bin;
    for (double v : spectra[i].spectrum) spec_csv << "," << v;
    spec_csv << "\n";
  }

  std::ofstream bins(fs::path(out_dir) / "dominant_bins.csv");
  bins << "rank,filter_index,dominant_bin\n";
  for (std::size_t i = 0; i < count; ++i)
    bins << i << "," << spectra[i].filter_index << "," << spectra[i].dominant_bin << "\n";

  std::cout << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive front-end source separation toolkit"};
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--seed", flags.seed, "seed override")->each([&](const std::string&) {
    flags.seed_set = true;
  });
  app.add_option("--config", flags.config_path, "experiment config (JSON)");
  app.add_flag("--verbose", flags.verbose, "chatty progress on stderr");

  std::string corpus_root, out_dir, checkpoint, mixture_wav, out_wav, manifest, out_csv;
  int pairs = 10, sentences = 10, top_n = 32;
  Index filter_len = 512;

  CLI::App* mix = app.add_subcommand("mix", "build a manifest and write 0 dB mixtures");
  mix->fallthrough();
  mix->add_option("corpus_root", corpus_root)->required();
  mix->add_option("out_dir", out_dir)->required();
  mix->add_option("--pairs", pairs, "speaker pairs to draw");
  mix->add_option("--sentences", sentences, "sentences per speaker");

  CLI::App* train_cmd = app.add_subcommand("train", "train a separation model from --config");
  train_cmd->fallthrough();

  CLI::App* sep = app.add_subcommand("separate", "run a checkpoint on a mixture WAV");
  sep->fallthrough();
  sep->add_option("checkpoint", checkpoint)->required();
  sep->add_option("mixture_wav", mixture_wav)->required();
  sep->add_option("out_wav", out_wav)->required();

  CLI::App* eval = app.add_subcommand("evaluate", "score the test split of a manifest");
  eval->fallthrough();
  eval->add_option("checkpoint", checkpoint)->required();
  eval->add_option("manifest", manifest)->required();
  eval->add_option("out_csv", out_csv)->required();
  eval->add_option("--filter-len", filter_len, "BSS_EVAL distortion filter length");

  CLI::App* inspect = app.add_subcommand("inspect", "dump sorted basis functions and spectra");
  inspect->fallthrough();
  inspect->add_option("checkpoint", checkpoint)->required();
  inspect->add_option("out_dir", out_dir)->required();
  inspect->add_option("--top-n", top_n, "filters to emit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (mix->parsed()) return cmd_mix(corpus_root, out_dir, pairs, sentences, flags.seed, flags.verbose);
    if (train_cmd->parsed()) return cmd_train(flags);
    if (sep->parsed()) return cmd_separate(checkpoint, mixture_wav, out_wav);
    if (eval->parsed()) return cmd_evaluate(checkpoint, manifest, out_csv, filter_len, flags.verbose);
    if (inspect->parsed()) return cmd_inspect(checkpoint, out_dir, top_n);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}
