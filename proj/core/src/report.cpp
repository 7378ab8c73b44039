#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "tcnn/errors.hpp"
#include "tcnn/pipeline.hpp"

namespace fs = std::filesystem;

namespace tcnn {

namespace {

bool slurp(const fs::path& p, std::string& out) {
  std::ifstream f(p);
  if (!f) return false;
  out.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return true;
}

// TSV -> markdown table.
std::string tsv_table(const std::string& tsv, std::size_t max_rows = 200) {
  std::istringstream is(tsv);
  std::string line;
  std::ostringstream os;
  std::size_t row = 0;
  while (std::getline(is, line) && row < max_rows) {
    std::ostringstream cells;
    cells << "|";
    std::istringstream ls(line);
    std::string cell;
    std::size_t ncells = 0;
    while (std::getline(ls, cell, '\t')) {
      cells << " " << cell << " |";
      ++ncells;
    }
    os << cells.str() << "\n";
    if (row == 0) {
      os << "|";
      for (std::size_t i = 0; i < ncells; ++i) os << " --- |";
      os << "\n";
    }
    ++row;
  }
  return os.str();
}

// Training log without the wall-clock column, so reports stay byte-identical
// across reruns.
std::string train_summary(const std::string& tsv) {
  std::istringstream is(tsv);
  std::string line;
  std::getline(is, line);  // header
  std::size_t epochs = 0, best_epoch = 0;
  double best_val = 0.0, final_train = 0.0;
  bool have = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::size_t epoch;
    double train_loss, val_loss;
    if (!(ls >> epoch >> train_loss >> val_loss)) continue;
    if (!have || val_loss < best_val) {
      best_val = val_loss;
      best_epoch = epoch;
      have = true;
    }
    final_train = train_loss;
    epochs = epoch;
  }
  std::ostringstream os;
  os.precision(10);
  os << "- epochs trained: " << epochs << "\n"
     << "- best validation loss: " << best_val << " (epoch " << best_epoch << ")\n"
     << "- final training loss: " << final_train << "\n";
  return os.str();
}

}  // namespace

std::string run_report(const RunConfig& cfg) {
  const fs::path out(cfg.out_dir);
  std::ostringstream md;
  md << "# Run report\n\n";

  std::string text;
  md << "## Configuration\n\n";
  if (slurp(out / artifact::kConfig, text)) {
    md << "```json\n" << text << "```\n\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Dataset\n\n";
  if (!cfg.data_dir.empty() && slurp(fs::path(cfg.data_dir) / "manifest.json", text)) {
    md << "```json\n" << text << "```\n\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Vanilla training\n\n";
  if (slurp(out / artifact::kTrainLog, text)) {
    md << train_summary(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Cluster size statistics (median +- SD per layer)\n\n";
  if (slurp(out / "analysis" / "cluster_stats.tsv", text)) {
    md << tsv_table(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Landmark position variance by layer\n\n";
  if (slurp(out / "analysis" / "landmark_variance.tsv", text)) {
    md << tsv_table(text) << "\n";
    md << "Cluster mean images: ";
    bool any = false;
    for (const std::string& tap : cfg.analyze_taps) {
      fs::path img = out / "analysis" / ("meanimg_" + tap + ".ppm");
      if (fs::exists(img)) {
        md << (any ? ", " : "") << "![" << tap << "](analysis/meanimg_" << tap << ".ppm)";
        any = true;
      }
    }
    md << (any ? "\n\n" : "*none rendered*\n\n");
  } else {
    md << "*absent*\n\n";
  }

  md << "## Attribute label variance by layer\n\n";
  if (slurp(out / "analysis" / "attribute_variance.tsv", text)) {
    md << tsv_table(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Tweaked heads\n\n";
  if (slurp(out / artifact::kTweakSummary, text)) {
    md << tsv_table(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Augmentation acceptance\n\n";
  if (slurp(out / artifact::kAugmentStats, text)) {
    md << tsv_table(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  md << "## Evaluation\n\n";
  if (slurp(out / artifact::kEvalDir / "summary.tsv", text)) {
    md << tsv_table(text) << "\n";
    if (slurp(out / artifact::kEvalDir / "per_cluster.tsv", text)) {
      md << "### Per-cluster validation error\n\n" << tsv_table(text) << "\n";
      md << "![per-cluster](eval/per_cluster.ppm)\n\n";
    }
    if (fs::exists(out / artifact::kEvalDir / "curve.tsv")) {
      md << "### Cumulative error curves\n\n![curves](eval/curves.ppm)\n\n";
    }
  } else {
    md << "*absent*\n\n";
  }

  md << "## Cluster count sweep\n\n";
  if (slurp(out / artifact::kSweep, text)) {
    md << tsv_table(text) << "\n";
  } else {
    md << "*absent*\n\n";
  }

  const std::string report = md.str();
  fs::create_directories(out);
  std::ofstream f(out / artifact::kReport, std::ios::trunc);
  if (!f) throw data_error("cannot write report in " + cfg.out_dir);
  f << report;
  return report;
}

}  // namespace tcnn
