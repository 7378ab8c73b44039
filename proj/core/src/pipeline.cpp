#include "tcnn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tcnn/analysis.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/parallel.hpp"
#include "tcnn/render.hpp"
#include "tcnn/serialize.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace tcnn {

namespace {

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw data_error("cannot write: " + path.string());
  f << text;
}

void require_artifact(const fs::path& path, const std::string& command) {
  if (!fs::exists(path))
    throw data_error("missing artifact " + path.string() + "; run `tcnn " + command + "` first");
}

unsigned effective_jobs(const RunConfig& cfg) {
  return cfg.jobs == 0 ? default_jobs() : cfg.jobs;
}

NetworkModel build_network(const RunConfig& cfg) {
  if (cfg.arch.empty()) return NetworkModel::make_default(cfg.landmarks);
  return NetworkModel::make({kPatchSize, kPatchSize, 3}, stack_from_string(cfg.arch));
}

Dataset load_run_dataset(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw usage_error("no dataset directory configured (--data)");
  fs::path ann = fs::path(cfg.data_dir) / "annotations.txt";
  require_artifact(ann, "synth");
  return load_dataset(ann.string(), cfg.data_dir, cfg.train.validation_fraction, cfg.seed);
}

void snapshot_config(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  write_text(fs::path(cfg.out_dir) / artifact::kConfig, cfg.to_json());
}

std::string split_tsv(const SplitIndices& split) {
  std::ostringstream os;
  os << "index\trole\n";
  std::vector<std::pair<std::size_t, const char*>> rows;
  for (std::size_t i : split.train) rows.push_back({i, "train"});
  for (std::size_t i : split.val) rows.push_back({i, "val"});
  std::sort(rows.begin(), rows.end());
  for (const auto& [i, role] : rows) os << i << "\t" << role << "\n";
  return os.str();
}

FeatureMatrix load_feature_cache(const fs::path& path, std::string* tap = nullptr) {
  Container c = Container::load(path.string());
  const Tensor& t = c.get_tensor("features");
  FeatureMatrix fm(t.shape[0], t.shape[1]);
  fm.data = t.data;
  if (tap) *tap = c.get_string("tap");
  return fm;
}

void save_feature_cache(const fs::path& path, const FeatureMatrix& fm, const std::string& tap) {
  Container c;
  c.put_string("kind", "features");
  c.put_string("tap", tap);
  c.put_tensor("features", Tensor({fm.n, fm.d}, fm.data));
  c.save(path.string());
}

std::vector<Sample> gather(const std::vector<Sample>& samples,
                           const std::vector<std::size_t>& idx) {
  std::vector<Sample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

}  // namespace

RunConfig::RunConfig() {
  for (double t = 0.5; t <= 30.0 + 1e-9; t += 0.5) eval_thresholds.push_back(t);
}

void RunConfig::resolve() {
  synth.seed = seed;
  train.seed = seed;
  tweak.seed = seed;
  tweak.adam = train.adam;
  unsigned j = effective_jobs(*this);
  train.jobs = j;
  tweak.jobs = j;
  if (eval_thresholds.empty()) {
    for (double t = 0.5; t <= 30.0 + 1e-9; t += 0.5) eval_thresholds.push_back(t);
  }
}

std::string RunConfig::to_json() const {
  json j;
  j["data_dir"] = data_dir;
  j["out_dir"] = out_dir;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["landmarks"] = landmarks;
  j["arch"] = arch;
  j["synth"] = {{"count", synth.count},
                {"modes", synth.modes},
                {"yaw_span", synth.yaw_span},
                {"pitch_amplitude", synth.pitch_amplitude},
                {"roll_sigma", synth.roll_sigma},
                {"scale_sigma", synth.scale_sigma},
                {"shift_sigma", synth.shift_sigma},
                {"point_jitter_sigma", synth.point_jitter_sigma}};
  j["train"] = {{"epochs_cap", train.epochs_cap},
                {"batch_size", train.batch_size},
                {"validation_fraction", train.validation_fraction},
                {"patience", train.patience},
                {"lr", train.adam.lr},
                {"beta1", train.adam.beta1},
                {"beta2", train.adam.beta2},
                {"eps", train.adam.eps},
                {"divergence_guard", train.divergence_guard}};
  j["cluster"] = {{"k", cluster_k}, {"tap", tap}};
  j["analyze"] = {{"taps", analyze_taps}};
  j["tweak"] = {{"patience", tweak.patience},
                {"epochs_cap", tweak.epochs_cap},
                {"batch_size", tweak.batch_size},
                {"lr_scale", tweak.lr_scale},
                {"validation_fraction", tweak.validation_fraction},
                {"augment", tweak.augment},
                {"augment_target", tweak.augment_target},
                {"retry_factor", tweak.retry_factor},
                {"cross_probe_attempts", tweak.cross_probe_attempts}};
  j["eval"] = {{"thresholds", eval_thresholds}};
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw data_error(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  auto get = [&](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get(j, "data_dir", cfg.data_dir);
  get(j, "out_dir", cfg.out_dir);
  get(j, "seed", cfg.seed);
  get(j, "jobs", cfg.jobs);
  get(j, "landmarks", cfg.landmarks);
  get(j, "arch", cfg.arch);
  if (j.contains("synth")) {
    const json& s = j["synth"];
    get(s, "count", cfg.synth.count);
    get(s, "modes", cfg.synth.modes);
    get(s, "yaw_span", cfg.synth.yaw_span);
    get(s, "pitch_amplitude", cfg.synth.pitch_amplitude);
    get(s, "roll_sigma", cfg.synth.roll_sigma);
    get(s, "scale_sigma", cfg.synth.scale_sigma);
    get(s, "shift_sigma", cfg.synth.shift_sigma);
    get(s, "point_jitter_sigma", cfg.synth.point_jitter_sigma);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    get(t, "epochs_cap", cfg.train.epochs_cap);
    get(t, "batch_size", cfg.train.batch_size);
    get(t, "validation_fraction", cfg.train.validation_fraction);
    get(t, "patience", cfg.train.patience);
    get(t, "lr", cfg.train.adam.lr);
    get(t, "beta1", cfg.train.adam.beta1);
    get(t, "beta2", cfg.train.adam.beta2);
    get(t, "eps", cfg.train.adam.eps);
    get(t, "divergence_guard", cfg.train.divergence_guard);
  }
  if (j.contains("cluster")) {
    get(j["cluster"], "k", cfg.cluster_k);
    get(j["cluster"], "tap", cfg.tap);
  }
  if (j.contains("analyze")) get(j["analyze"], "taps", cfg.analyze_taps);
  if (j.contains("tweak")) {
    const json& t = j["tweak"];
    get(t, "patience", cfg.tweak.patience);
    get(t, "epochs_cap", cfg.tweak.epochs_cap);
    get(t, "batch_size", cfg.tweak.batch_size);
    get(t, "lr_scale", cfg.tweak.lr_scale);
    get(t, "validation_fraction", cfg.tweak.validation_fraction);
    get(t, "augment", cfg.tweak.augment);
    get(t, "augment_target", cfg.tweak.augment_target);
    get(t, "retry_factor", cfg.tweak.retry_factor);
    get(t, "cross_probe_attempts", cfg.tweak.cross_probe_attempts);
  }
  if (j.contains("eval")) get(j["eval"], "thresholds", cfg.eval_thresholds);
  cfg.resolve();
  return cfg;
}

RunConfig RunConfig::from_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return from_json(text);
}

// ---- synth -----------------------------------------------------------------

void run_synth(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw usage_error("synth: output directory required (--out)");
  SynthResult res = synth_generate(cfg.synth);
  synth_write(res, cfg.synth, cfg.out_dir);
}

// ---- train -----------------------------------------------------------------

void run_train(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw usage_error("train: output directory required (--out)");
  snapshot_config(cfg);
  Dataset ds = load_run_dataset(cfg);

  NetworkModel model = build_network(cfg);
  model.norm_mean = ds.stats.mean;
  model.norm_std = ds.stats.std;
  TrainResult result = train_vanilla(model, ds.samples, ds.split, cfg.train);

  model.save((fs::path(cfg.out_dir) / artifact::kModel).string());
  write_text(fs::path(cfg.out_dir) / artifact::kTrainLog, train_log_tsv(result));
  write_text(fs::path(cfg.out_dir) / artifact::kSplit, split_tsv(ds.split));
}

// ---- cluster ----------------------------------------------------------------

void run_cluster(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  require_artifact(out / artifact::kModel, "train");
  snapshot_config(cfg);

  NetworkModel model = NetworkModel::load((out / artifact::kModel).string());
  Dataset ds = load_run_dataset(cfg);

  const unsigned jobs = effective_jobs(cfg);
  FeatureMatrix all = extract_feature_matrix(model, ds.samples, cfg.tap, jobs);
  save_feature_cache(out / artifact::kFeatures, all, cfg.tap);

  // Router fitted on the training split only.
  FeatureMatrix train_features(ds.split.train.size(), all.d);
  for (std::size_t i = 0; i < ds.split.train.size(); ++i) {
    auto src = all.row(ds.split.train[i]);
    std::copy(src.begin(), src.end(), train_features.row(i).begin());
  }
  GmmFitOptions opts;
  opts.jobs = jobs;
  GmmFitResult fit = gmm_fit(train_features, cfg.cluster_k, StreamRng(cfg.seed, "cluster"), opts);
  fit.model.tap = cfg.tap;
  fit.model.save((out / artifact::kRouter).string());

  std::ostringstream os;
  os << "index\trole\tcluster\tposterior\n";
  std::vector<char> role(ds.samples.size(), 'v');
  for (std::size_t i : ds.split.train) role[i] = 't';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    GmmAssignment a = gmm_assign(fit.model, all.row(i));
    os << i << "\t" << (role[i] == 't' ? "train" : "val") << "\t" << a.index << "\t"
       << fmt(a.posterior[a.index], 8) << "\n";
  }
  write_text(out / artifact::kAssignments, os.str());
}

// ---- analyze ----------------------------------------------------------------

void run_analyze(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  require_artifact(out / artifact::kModel, "train");
  snapshot_config(cfg);

  NetworkModel model = NetworkModel::load((out / artifact::kModel).string());
  Dataset ds = load_run_dataset(cfg);
  const unsigned jobs = effective_jobs(cfg);

  std::vector<Sample> train = gather(ds.samples, ds.split.train);
  std::vector<LandmarkSet> truths;
  std::vector<std::array<int, 3>> attrs;
  bool have_attrs = true;
  for (const Sample& s : train) {
    truths.push_back(s.landmarks);
    attrs.push_back(s.attributes);
    have_attrs = have_attrs && s.has_attributes;
  }

  // Vanilla per-sample errors on the training split, for ordering the mean
  // image grids.
  std::vector<double> train_errors(train.size());
  parallel_chunks(train.size(), 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      train_errors[i] = error_rate(predict(model, train[i]), train[i].landmarks);
  });

  std::ostringstream stats_tsv, lv_tsv, av_tsv;
  stats_tsv << "layer\tk\tmedian\tsd\n";
  lv_tsv << "layer\tlandmark\tmean_variance\tse\n";
  av_tsv << "layer\tattribute\tmean_variance\tse\n";

  fs::path adir = out / "analysis";
  fs::create_directories(adir);

  for (const std::string& tap : cfg.analyze_taps) {
    if (!model.has_tap(tap)) throw data_error("analyze: unknown tap '" + tap + "'");
    FeatureMatrix fm = extract_feature_matrix(model, train, tap, jobs);
    GmmFitOptions opts;
    opts.jobs = jobs;
    GmmFitResult fit =
        gmm_fit(fm, cfg.cluster_k, StreamRng(cfg.seed, "analyze/" + tap), opts);
    fit.model.tap = tap;

    std::vector<std::size_t> assign(train.size());
    std::vector<std::size_t> sizes(cfg.cluster_k, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      assign[i] = gmm_assign(fit.model, fm.row(i)).index;
      sizes[assign[i]] += 1;
    }

    SizeStats ss = cluster_size_stats(sizes);
    stats_tsv << tap << "\t" << cfg.cluster_k << "\t" << fmt(ss.median) << "\t" << fmt(ss.sd)
              << "\n";

    LandmarkVarianceReport lv = landmark_variance_report(assign, cfg.cluster_k, truths);
    for (std::size_t j = 0; j < lv.mean_per_landmark.size(); ++j)
      lv_tsv << tap << "\t" << j << "\t" << fmt(lv.mean_per_landmark[j], 10) << "\t"
             << fmt(lv.se_per_landmark[j], 10) << "\n";

    if (have_attrs && !attrs.empty()) {
      AttributeVarianceReport av = attribute_variance_report(assign, cfg.cluster_k, attrs);
      for (std::size_t a = 0; a < 3; ++a)
        av_tsv << tap << "\t" << a << "\t" << fmt(av.mean_per_attribute[a], 10) << "\t"
               << fmt(av.se_per_attribute[a], 10) << "\n";
    }

    // Mean images ordered by ascending per-cluster vanilla error.
    std::vector<double> keys(cfg.cluster_k, 0.0);
    std::vector<std::size_t> counts(cfg.cluster_k, 0);
    for (std::size_t i = 0; i < train.size(); ++i) {
      keys[assign[i]] += train_errors[i];
      counts[assign[i]] += 1;
    }
    for (std::size_t c = 0; c < cfg.cluster_k; ++c)
      if (counts[c] > 0) keys[c] /= static_cast<double>(counts[c]);
    NormalizationStats stats{model.norm_mean, model.norm_std};
    ImageU8 grid = mean_cluster_images(train, assign, cfg.cluster_k, stats, keys);
    write_ppm((adir / ("meanimg_" + tap + ".ppm")).string(), grid);
  }

  write_text(adir / "cluster_stats.tsv", stats_tsv.str());
  write_text(adir / "landmark_variance.tsv", lv_tsv.str());
  write_text(adir / "attribute_variance.tsv", av_tsv.str());
}

// ---- tweak ------------------------------------------------------------------

void run_tweak(const RunConfig& cfg) {
  fs::path out(cfg.out_dir);
  require_artifact(out / artifact::kModel, "train");
  require_artifact(out / artifact::kRouter, "cluster");
  snapshot_config(cfg);

  NetworkModel model = NetworkModel::load((out / artifact::kModel).string());
  GmmModel router = GmmModel::load((out / artifact::kRouter).string());
  Dataset ds = load_run_dataset(cfg);
  std::vector<Sample> train = gather(ds.samples, ds.split.train);

  // Reuse cached features when they match the training split.
  FeatureMatrix train_features;
  const FeatureMatrix* cached = nullptr;
  if (fs::exists(out / artifact::kFeatures)) {
    std::string cached_tap;
    FeatureMatrix all = load_feature_cache(out / artifact::kFeatures, &cached_tap);
    if (cached_tap == router.tap && all.n == ds.samples.size()) {
      train_features = FeatureMatrix(ds.split.train.size(), all.d);
      for (std::size_t i = 0; i < ds.split.train.size(); ++i) {
        auto src = all.row(ds.split.train[i]);
        std::copy(src.begin(), src.end(), train_features.row(i).begin());
      }
      cached = &train_features;
    }
  }

  BuildReport report;
  TweakedModel tweaked =
      build_tweaked(model, train, router.k, cfg.tweak, &router, &report, cached);
  tweaked.save((out / artifact::kTweakedDir).string());

  std::ostringstream heads_tsv, aug_tsv;
  heads_tsv << "cluster\tmembers\ttrain\tval\tfallback\tbest_epoch\tepochs_trained"
            << "\tvanilla_val_loss\ttweaked_val_loss\n";
  aug_tsv << "cluster\tattempted\taccepted\trejected\trejection_rate\tshortfall"
          << "\tcross_attempted\tcross_rejected\tcross_rejection_rate\n";
  fs::create_directories(out / artifact::kHeadLogDir);
  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const ClusterBuildInfo& info = report.clusters[c];
    heads_tsv << c << "\t" << info.members << "\t" << info.train_count << "\t" << info.val_count
              << "\t" << (info.fallback ? 1 : 0) << "\t" << info.best_epoch << "\t"
              << info.epochs_trained << "\t" << fmt(info.vanilla_val_loss, 10) << "\t"
              << fmt(info.tweaked_val_loss, 10) << "\n";
    aug_tsv << c << "\t" << info.augment_stats.attempted << "\t" << info.augment_stats.accepted
            << "\t" << info.augment_stats.rejected << "\t"
            << fmt(info.augment_stats.rejection_rate(), 6) << "\t"
            << (info.augment_stats.shortfall ? 1 : 0) << "\t" << info.cross_stats.attempted
            << "\t" << info.cross_stats.rejected << "\t" << fmt(info.cross_stats.rejection_rate(), 6)
            << "\n";
    char name[32];
    std::snprintf(name, sizeof(name), "head_%03zu.tsv", c);
    write_text(out / artifact::kHeadLogDir / name, train_log_tsv(tweaked.heads[c].log));
  }
  write_text(out / artifact::kTweakSummary, heads_tsv.str());
  write_text(out / artifact::kAugmentStats, aug_tsv.str());
}

// ---- eval -------------------------------------------------------------------

EvalSummary run_eval(const RunConfig& cfg, const std::string& eval_data) {
  fs::path out(cfg.out_dir);
  require_artifact(out / artifact::kModel, "train");
  require_artifact(fs::path(out / artifact::kTweakedDir) / "manifest.json", "tweak");
  snapshot_config(cfg);

  NetworkModel vanilla = NetworkModel::load((out / artifact::kModel).string());
  TweakedModel tweaked = TweakedModel::load((out / artifact::kTweakedDir).string());

  std::vector<Sample> eval_samples;
  std::size_t failures = 0;
  if (eval_data.empty()) {
    Dataset ds = load_run_dataset(cfg);
    eval_samples = gather(ds.samples, ds.split.val);
  } else {
    // External annotation file; unusable records count as failures.
    Dataset ds = load_dataset(eval_data, fs::path(eval_data).parent_path().string(),
                              cfg.train.validation_fraction, cfg.seed);
    // Re-normalize with the model's training stats, not the eval set's own.
    NormalizationStats model_stats{vanilla.norm_mean, vanilla.norm_std};
    NormalizationStats eval_stats = ds.stats;
    for (Sample& s : ds.samples)
      s.image = apply_stats(unapply_stats(s.image, eval_stats), model_stats);
    eval_samples = std::move(ds.samples);
    failures = ds.skipped.size();
  }
  if (eval_samples.empty()) throw data_error("eval: no usable samples");

  const unsigned jobs = effective_jobs(cfg);
  const std::size_t n = eval_samples.size();
  std::vector<double> err_vanilla(n), err_tweaked(n), err_mirror(n);
  std::vector<std::size_t> cluster(n);
  parallel_chunks(n, 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const Sample& s = eval_samples[i];
      err_vanilla[i] = error_rate(predict(vanilla, s), s.landmarks);
      cluster[i] = route(tweaked, s);
      err_tweaked[i] = error_rate(predict_tweaked(tweaked, s, false), s.landmarks);
      err_mirror[i] = error_rate(predict_tweaked(tweaked, s, true), s.landmarks);
    }
  });

  fs::path edir = out / artifact::kEvalDir;
  fs::create_directories(edir);

  std::ostringstream ps;
  ps << "index\tsource\tcluster\terr_vanilla\terr_tweaked\terr_tweaked_mirror\n";
  for (std::size_t i = 0; i < n; ++i)
    ps << i << "\t" << eval_samples[i].source << "\t" << cluster[i] << "\t"
       << fmt(err_vanilla[i], 10) << "\t" << fmt(err_tweaked[i], 10) << "\t"
       << fmt(err_mirror[i], 10) << "\n";
  write_text(edir / "per_sample.tsv", ps.str());

  // Per-cluster means, vanilla vs mirror-averaged tweaked.
  const std::size_t k = tweaked.k();
  std::vector<double> cl_vanilla(k, 0.0), cl_tweaked(k, 0.0);
  std::vector<std::size_t> cl_count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    cl_vanilla[cluster[i]] += err_vanilla[i];
    cl_tweaked[cluster[i]] += err_mirror[i];
    cl_count[cluster[i]] += 1;
  }
  EvalSummary summary;
  std::ostringstream pc;
  pc << "cluster\tn\tmean_vanilla\tmean_tweaked_mirror\timproved\n";
  for (std::size_t c = 0; c < k; ++c) {
    if (cl_count[c] == 0) {
      pc << c << "\t0\tnan\tnan\t0\n";
      continue;
    }
    cl_vanilla[c] /= static_cast<double>(cl_count[c]);
    cl_tweaked[c] /= static_cast<double>(cl_count[c]);
    const bool improved = cl_tweaked[c] <= cl_vanilla[c];
    summary.clusters_total += 1;
    summary.clusters_improved += improved ? 1 : 0;
    pc << c << "\t" << cl_count[c] << "\t" << fmt(cl_vanilla[c], 8) << "\t"
       << fmt(cl_tweaked[c], 8) << "\t" << (improved ? 1 : 0) << "\n";
  }
  write_text(edir / "per_cluster.tsv", pc.str());

  // Cumulative error curves; failures enter the denominator at +inf.
  auto with_failures = [&](std::vector<double> errs) {
    for (std::size_t i = 0; i < failures; ++i) errs.push_back(kFailureError);
    return errs;
  };
  std::vector<double> cv = cumulative_error_curve(with_failures(err_vanilla), cfg.eval_thresholds);
  std::vector<double> ct = cumulative_error_curve(with_failures(err_tweaked), cfg.eval_thresholds);
  std::vector<double> cm = cumulative_error_curve(with_failures(err_mirror), cfg.eval_thresholds);
  std::ostringstream cs;
  cs << "threshold\tvanilla\ttweaked\ttweaked_mirror\n";
  for (std::size_t i = 0; i < cfg.eval_thresholds.size(); ++i)
    cs << fmt(cfg.eval_thresholds[i]) << "\t" << fmt(cv[i], 8) << "\t" << fmt(ct[i], 8) << "\t"
       << fmt(cm[i], 8) << "\n";
  write_text(edir / "curve.tsv", cs.str());

  ImageU8 curves = render_curves(
      {{"vanilla", cfg.eval_thresholds, cv, {200, 40, 40}},
       {"tweaked", cfg.eval_thresholds, ct, {40, 160, 60}},
       {"tweaked_mirror", cfg.eval_thresholds, cm, {40, 60, 200}}},
      0.0, 1.0);
  write_ppm((edir / "curves.ppm").string(), curves);
  write_ppm((edir / "per_cluster.ppm").string(), render_paired_bars(cl_vanilla, cl_tweaked));

  auto mean_of = [&](const std::vector<double>& v) {
    double acc = 0;
    for (double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  summary.evaluated = n;
  summary.failures = failures;
  summary.mean_vanilla = mean_of(err_vanilla);
  summary.mean_tweaked = mean_of(err_tweaked);
  summary.mean_tweaked_mirror = mean_of(err_mirror);

  std::ostringstream sm;
  sm << "metric\tvalue\n"
     << "evaluated\t" << summary.evaluated << "\n"
     << "failures\t" << summary.failures << "\n"
     << "mean_error_vanilla\t" << fmt(summary.mean_vanilla, 10) << "\n"
     << "mean_error_tweaked\t" << fmt(summary.mean_tweaked, 10) << "\n"
     << "mean_error_tweaked_mirror\t" << fmt(summary.mean_tweaked_mirror, 10) << "\n"
     << "clusters_improved\t" << summary.clusters_improved << "\n"
     << "clusters_total\t" << summary.clusters_total << "\n";
  write_text(edir / "summary.tsv", sm.str());
  return summary;
}

// ---- sweepk -----------------------------------------------------------------

std::vector<SweepRow> run_sweepk(const RunConfig& cfg, const std::vector<std::size_t>& ks) {
  fs::path out(cfg.out_dir);
  require_artifact(out / artifact::kModel, "train");
  snapshot_config(cfg);

  NetworkModel vanilla = NetworkModel::load((out / artifact::kModel).string());
  Dataset ds = load_run_dataset(cfg);
  std::vector<Sample> train = gather(ds.samples, ds.split.train);
  std::vector<Sample> val = gather(ds.samples, ds.split.val);
  const unsigned jobs = effective_jobs(cfg);

  std::vector<double> err_vanilla(val.size());
  parallel_chunks(val.size(), 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      err_vanilla[i] = error_rate(predict(vanilla, val[i]), val[i].landmarks);
  });
  double vanilla_mean = 0;
  for (double v : err_vanilla) vanilla_mean += v;
  vanilla_mean /= static_cast<double>(val.size());

  FeatureMatrix train_features = extract_feature_matrix(vanilla, train, cfg.tap, jobs);

  std::vector<SweepRow> rows;
  for (std::size_t k : ks) {
    TweakConfig tcfg = cfg.tweak;
    BuildReport report;
    TweakedModel tweaked = build_tweaked(vanilla, train, k, tcfg, nullptr, &report, &train_features);

    std::vector<double> err(val.size());
    parallel_chunks(val.size(), 32, jobs, [&](std::size_t, std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i)
        err[i] = error_rate(predict_tweaked(tweaked, val[i], true), val[i].landmarks);
    });

    SweepRow row;
    row.k = k;
    row.mean_vanilla = vanilla_mean;
    double acc = 0;
    for (double v : err) acc += v;
    row.mean_tweaked_mirror = acc / static_cast<double>(val.size());
    std::vector<double> epochs;
    for (const ClusterBuildInfo& info : report.clusters) {
      if (info.fallback) {
        row.fallbacks += 1;
        continue;
      }
      epochs.push_back(static_cast<double>(info.epochs_trained));
    }
    if (!epochs.empty()) {
      double em = 0;
      for (double e : epochs) em += e;
      em /= static_cast<double>(epochs.size());
      double ev = 0;
      for (double e : epochs) ev += (e - em) * (e - em);
      row.epochs_mean = em;
      row.epochs_sd = std::sqrt(ev / static_cast<double>(epochs.size()));
    }
    rows.push_back(row);
  }

  std::ostringstream os;
  os << "k\tmean_error_vanilla\tmean_error_tweaked_mirror\tepochs_mean\tepochs_sd\tfallbacks\n";
  for (const SweepRow& r : rows)
    os << r.k << "\t" << fmt(r.mean_vanilla, 8) << "\t" << fmt(r.mean_tweaked_mirror, 8) << "\t"
       << fmt(r.epochs_mean, 6) << "\t" << fmt(r.epochs_sd, 6) << "\t" << r.fallbacks << "\n";
  write_text(out / artifact::kSweep, os.str());
  return rows;
}

// ---- predict ----------------------------------------------------------------

void run_predict(const RunConfig& cfg, const std::string& model_path, const std::string& input,
                 const std::string& output, bool mirror_average) {
  if (model_path.empty()) throw usage_error("predict: model path required (--model)");
  if (input.empty()) throw usage_error("predict: input required (--input)");

  const bool is_tweaked = fs::is_directory(model_path);
  NetworkModel vanilla;
  TweakedModel tweaked;
  NormalizationStats stats;
  std::size_t m = cfg.landmarks;
  if (is_tweaked) {
    tweaked = TweakedModel::load(model_path);
    stats = {tweaked.trunk.norm_mean, tweaked.trunk.norm_std};
    m = tweaked.trunk.num_landmarks();
  } else {
    vanilla = NetworkModel::load(model_path);
    stats = {vanilla.norm_mean, vanilla.norm_std};
    m = vanilla.num_landmarks();
  }
  if (stats.mean.numel() == 0)
    throw data_error("predict: model carries no normalization stats");

  struct Item {
    std::string path;
    Sample sample;
  };
  std::vector<Item> items;
  if (input.size() > 4 && input.substr(input.size() - 4) == ".ppm") {
    ImageU8 img = read_ppm(input);
    Item it;
    it.path = input;
    it.sample.image = apply_stats(
        crop_resize(img, 0, 0, static_cast<double>(img.width), static_cast<double>(img.height),
                    kPatchSize),
        stats);
    it.sample.landmarks.pts.assign(m, {0.0, 0.0});
    items.push_back(std::move(it));
  } else {
    std::vector<AnnotationRecord> recs = load_annotations(input);
    const std::string root = fs::path(input).parent_path().string();
    for (const AnnotationRecord& rec : recs) {
      fs::path ipath = fs::path(rec.image_path).is_absolute()
                           ? fs::path(rec.image_path)
                           : fs::path(root) / rec.image_path;
      ImageU8 img = read_ppm(ipath.string());
      Item it;
      it.path = rec.image_path;
      it.sample.image =
          apply_stats(crop_resize(img, rec.box_x, rec.box_y, rec.box_w, rec.box_h, kPatchSize),
                      stats);
      it.sample.landmarks.pts.assign(m, {0.0, 0.0});
      items.push_back(std::move(it));
    }
  }

  std::ostringstream os;
  os.precision(8);
  for (const Item& it : items) {
    LandmarkSet pred;
    if (is_tweaked) {
      pred = predict_tweaked(tweaked, it.sample, mirror_average);
    } else if (mirror_average) {
      LandmarkSet direct = predict(vanilla, it.sample);
      LandmarkSet back = mirror_landmarks(predict(vanilla, mirror_sample(it.sample)));
      pred.pts.resize(direct.size());
      for (std::size_t j = 0; j < direct.size(); ++j)
        pred.pts[j] = {(direct.pts[j][0] + back.pts[j][0]) / 2.0,
                       (direct.pts[j][1] + back.pts[j][1]) / 2.0};
    } else {
      pred = predict(vanilla, it.sample);
    }
    os << it.path;
    for (const auto& p : pred.pts) os << " " << p[0] << " " << p[1];
    os << "\n";
  }

  if (output.empty() || output == "-") {
    std::fputs(os.str().c_str(), stdout);
  } else {
    write_text(output, os.str());
  }
}

}  // namespace tcnn
