// Command-line front end for the landmark-regression pipeline. Subcommands
// mirror the pipeline stages; each one validates its upstream artifacts and
// writes only into its output directory.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tcnn/errors.hpp"
#include "tcnn/pipeline.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string data_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned jobs = 0;
  bool jobs_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_data = true) {
  cmd->add_option("--config", flags.config_path, "JSON config file (flags override it)");
  cmd->add_option("--out", flags.out_dir, "output directory");
  if (with_data) cmd->add_option("--data", flags.data_dir, "dataset directory");
  cmd->add_option("--seed", flags.seed, "global random seed")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--jobs", flags.jobs, "worker thread cap (0 = hardware)")
      ->each([&flags](const std::string&) { flags.jobs_set = true; });
}

tcnn::RunConfig make_config(const CommonFlags& flags) {
  tcnn::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = tcnn::RunConfig::from_json_file(flags.config_path);
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (!flags.data_dir.empty()) cfg.data_dir = flags.data_dir;
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.jobs_set) cfg.jobs = flags.jobs;
  cfg.resolve();
  return cfg;
}

std::vector<std::size_t> parse_k_list(const std::string& s) {
  std::vector<std::size_t> ks;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) ks.push_back(std::stoull(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (ks.empty()) throw tcnn::usage_error("sweepk: empty K list");
  return ks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"facial landmark regression with cluster-tweaked heads"};
  app.require_subcommand(1);

  CommonFlags flags;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::uint64_t synth_n = 1000, synth_modes = 3;
  synth->add_option("--n", synth_n, "number of images");
  synth->add_option("--modes", synth_modes, "number of pose modes");
  add_common(synth, flags, false);

  // train
  auto* train = app.add_subcommand("train", "train the vanilla network");
  std::uint64_t epochs = 0, batch = 0, patience = 0;
  double lr = 0.0;
  train->add_option("--epochs", epochs, "epoch cap");
  train->add_option("--batch", batch, "mini-batch size");
  train->add_option("--patience", patience, "early-stopping patience");
  train->add_option("--lr", lr, "learning rate");
  add_common(train, flags);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "fit the feature-space router");
  std::uint64_t cluster_k = 0;
  std::string tap;
  cluster->add_option("--k", cluster_k, "number of clusters");
  cluster->add_option("--tap", tap, "feature tap (default FC5)");
  add_common(cluster, flags);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "per-layer cluster diagnostics");
  std::string analyze_taps;
  std::uint64_t analyze_k = 0;
  analyze->add_option("--taps", analyze_taps, "comma-separated tap list");
  analyze->add_option("--k", analyze_k, "clusters per layer");
  add_common(analyze, flags);

  // tweak
  auto* tweak = app.add_subcommand("tweak", "fine-tune per-cluster heads");
  std::int64_t tweak_patience = -1;
  std::int64_t augment_target = -1;
  int augment_flag = -1;
  tweak->add_option("--patience", tweak_patience, "head early-stopping patience");
  tweak->add_option("--augment-target", augment_target, "per-cluster training size target");
  tweak->add_flag("--augment,!--no-augment", augment_flag, "alignment-sensitive augmentation");
  add_common(tweak, flags);

  // eval
  auto* eval = app.add_subcommand("eval", "evaluate vanilla vs tweaked");
  std::string eval_data;
  eval->add_option("--eval-data", eval_data, "external annotation file (default: run's validation split)");
  add_common(eval, flags);

  // predict
  auto* predict = app.add_subcommand("predict", "predict landmarks for images");
  std::string model_path, input_path, output_path;
  bool mirror_average = false;
  predict->add_option("--model", model_path, "model container or tweaked-model directory")
      ->required();
  predict->add_option("--input", input_path, "PPM image or annotation file")->required();
  predict->add_option("--output", output_path, "output file (default stdout)");
  predict->add_flag("--mirror-average", mirror_average, "average with the mirrored prediction");
  add_common(predict, flags, false);

  // sweepk
  auto* sweepk = app.add_subcommand("sweepk", "tweak+eval over a list of K");
  std::string k_list = "1,4,8";
  sweepk->add_option("--ks", k_list, "comma-separated cluster counts");
  add_common(sweepk, flags);

  // report
  auto* report = app.add_subcommand("report", "collate run artifacts into report.md");
  add_common(report, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    tcnn::RunConfig cfg = make_config(flags);

    if (synth->parsed()) {
      if (synth_modes < 1) throw tcnn::usage_error("synth: --modes must be >= 1");
      if (synth_n < 1) throw tcnn::usage_error("synth: --n must be >= 1");
      cfg.synth.count = synth_n;
      cfg.synth.modes = synth_modes;
      cfg.synth.seed = cfg.seed;
      tcnn::run_synth(cfg);
    } else if (train->parsed()) {
      if (epochs > 0) cfg.train.epochs_cap = epochs;
      if (batch > 0) cfg.train.batch_size = batch;
      if (patience > 0) cfg.train.patience = patience;
      if (lr > 0) cfg.train.adam.lr = lr;
      cfg.resolve();
      tcnn::run_train(cfg);
    } else if (cluster->parsed()) {
      if (cluster_k > 0) cfg.cluster_k = cluster_k;
      if (!tap.empty()) cfg.tap = tap;
      tcnn::run_cluster(cfg);
    } else if (analyze->parsed()) {
      if (analyze_k > 0) cfg.cluster_k = analyze_k;
      if (!analyze_taps.empty()) {
        cfg.analyze_taps.clear();
        std::string cur;
        for (char ch : analyze_taps + ",") {
          if (ch == ',') {
            if (!cur.empty()) cfg.analyze_taps.push_back(cur);
            cur.clear();
          } else {
            cur.push_back(ch);
          }
        }
      }
      tcnn::run_analyze(cfg);
    } else if (tweak->parsed()) {
      if (tweak_patience >= 0) cfg.tweak.patience = static_cast<std::size_t>(tweak_patience);
      if (augment_target >= 0) cfg.tweak.augment_target = static_cast<std::size_t>(augment_target);
      if (augment_flag >= 0) cfg.tweak.augment = augment_flag != 0;
      tcnn::run_tweak(cfg);
    } else if (eval->parsed()) {
      tcnn::EvalSummary s = tcnn::run_eval(cfg, eval_data);
      std::printf("evaluated %zu samples (%zu failures)\n", s.evaluated, s.failures);
      std::printf("mean error: vanilla %.4f%%, tweaked %.4f%%, tweaked+mirror %.4f%%\n",
                  s.mean_vanilla, s.mean_tweaked, s.mean_tweaked_mirror);
      std::printf("clusters improved: %zu / %zu\n", s.clusters_improved, s.clusters_total);
    } else if (predict->parsed()) {
      tcnn::run_predict(cfg, model_path, input_path, output_path, mirror_average);
    } else if (sweepk->parsed()) {
      auto rows = tcnn::run_sweepk(cfg, parse_k_list(k_list));
      std::printf("k\tmean_error_tweaked_mirror\n");
      for (const auto& r : rows) std::printf("%zu\t%.4f\n", r.k, r.mean_tweaked_mirror);
    } else if (report->parsed()) {
      tcnn::run_report(cfg);
      std::printf("wrote %s/report.md\n", cfg.out_dir.c_str());
    }
  } catch (const tcnn::usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const tcnn::numeric_error& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const tcnn::data_error& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
