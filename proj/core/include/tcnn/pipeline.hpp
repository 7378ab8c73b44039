#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tcnn/synth.hpp"
#include "tcnn/trainer.hpp"
#include "tcnn/tweak.hpp"

namespace tcnn {

/// Full experiment configuration. Every command snapshots the resolved
/// config (including the seed) into its run directory so runs replay
/// exactly. One seed feeds named streams per stage (synth / split / init /
/// batches / cluster / tweak / augment), so enabling one stage never
/// perturbs another's draws.
struct RunConfig {
  std::string data_dir;  // dataset directory: annotations.txt + images/
  std::string out_dir;   // run directory; all artifacts land here
  std::uint64_t seed = 0;
  unsigned jobs = 0;  // 0 = hardware concurrency

  std::size_t landmarks = 5;
  std::string arch;  // layer stack override; empty = default stack

  SynthConfig synth;

  TrainConfig train;

  std::size_t cluster_k = 8;
  std::string tap = "FC5";

  std::vector<std::string> analyze_taps = {"input", "CL2", "CL3", "CL4", "FC5"};

  TweakConfig tweak;

  std::vector<double> eval_thresholds;  // percent; default 0.5..30 step 0.5

  RunConfig();

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_json_file(const std::string& path);
  void resolve();  // propagate seed/jobs into nested configs, apply defaults
};

// Artifact file names inside a run directory.
namespace artifact {
inline constexpr const char* kConfig = "config.json";
inline constexpr const char* kModel = "model_vanilla.tcnn";
inline constexpr const char* kTrainLog = "train_log.tsv";
inline constexpr const char* kSplit = "split.tsv";
inline constexpr const char* kRouter = "router.tcnn";
inline constexpr const char* kAssignments = "assignments.tsv";
inline constexpr const char* kFeatures = "features_tap.tcnn";
inline constexpr const char* kTweakedDir = "tweaked";
inline constexpr const char* kHeadLogDir = "head_logs";
inline constexpr const char* kTweakSummary = "tweak_heads.tsv";
inline constexpr const char* kAugmentStats = "augment_stats.tsv";
inline constexpr const char* kEvalDir = "eval";
inline constexpr const char* kSweep = "sweepk.tsv";
inline constexpr const char* kReport = "report.md";
}  // namespace artifact

void run_synth(const RunConfig& cfg);
void run_train(const RunConfig& cfg);
void run_cluster(const RunConfig& cfg);
void run_analyze(const RunConfig& cfg);
void run_tweak(const RunConfig& cfg);

struct EvalSummary {
  std::size_t evaluated = 0, failures = 0;
  double mean_vanilla = 0.0, mean_tweaked = 0.0, mean_tweaked_mirror = 0.0;
  std::size_t clusters_improved = 0, clusters_total = 0;
};
/// Evaluates vanilla vs tweaked on the run's validation split, or on an
/// external annotation file when eval_data is non-empty.
EvalSummary run_eval(const RunConfig& cfg, const std::string& eval_data = "");

struct SweepRow {
  std::size_t k = 0;
  double mean_vanilla = 0.0, mean_tweaked_mirror = 0.0;
  double epochs_mean = 0.0, epochs_sd = 0.0;
  std::size_t fallbacks = 0;
};
std::vector<SweepRow> run_sweepk(const RunConfig& cfg, const std::vector<std::size_t>& ks);

void run_predict(const RunConfig& cfg, const std::string& model_path, const std::string& input,
                 const std::string& output, bool mirror_average);

/// Collates every artifact in the run directory into report.md; missing
/// artifacts are listed as absent. Pure over the directory contents.
std::string run_report(const RunConfig& cfg);

}  // namespace tcnn
