#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "tcnn/image.hpp"
#include "tcnn/landmarks.hpp"
#include "tcnn/rng.hpp"
#include "tcnn/tensor.hpp"

namespace tcnn {

/// One annotation line: image path, face box in pixels, m landmark pixel
/// coordinates, optional three binary attributes.
/// Text layout (whitespace-delimited, one record per line):
///   path box_x box_y box_w box_h x1 y1 ... xm ym [a1 a2 a3]
struct AnnotationRecord {
  std::string image_path;
  double box_x = 0, box_y = 0, box_w = 0, box_h = 0;
  std::vector<std::array<double, 2>> landmarks_px;
  std::array<int, 3> attributes = {0, 0, 0};
  bool has_attributes = false;
};

AnnotationRecord parse_annotation_line(const std::string& line);
std::string format_annotation_line(const AnnotationRecord& rec);
std::vector<AnnotationRecord> load_annotations(const std::string& path);

/// Per-pixel mean and standard deviation of the training images, used to
/// normalize every crop. Std is floored at 1e-6.
struct NormalizationStats {
  Tensor mean, std;
};

/// One training or evaluation unit: a normalized 40x40x3 crop plus
/// box-normalized landmarks and optional binary attributes.
struct Sample {
  Tensor image;
  LandmarkSet landmarks;
  std::array<int, 3> attributes = {0, 0, 0};
  bool has_attributes = false;
  std::string source;
};

struct SplitIndices {
  std::vector<std::size_t> train, val;
};

struct Dataset {
  std::vector<Sample> samples;
  NormalizationStats stats;
  SplitIndices split;
  std::vector<std::string> skipped;  // records dropped at load time, with reasons
};

constexpr std::size_t kPatchSize = 40;

/// Landmark pixel coordinate <-> box-normalized coordinate. Continuous pixel
/// coordinates span [0, extent]; pixel i covers [i, i+1].
inline double px_to_norm(double px, double origin, double extent) {
  return (px - origin) / extent;
}
inline double norm_to_px(double n, double origin, double extent) {
  return origin + n * extent;
}

NormalizationStats compute_stats(const std::vector<Tensor>& images,
                                 const std::vector<std::size_t>& indices);
Tensor apply_stats(const Tensor& img01, const NormalizationStats& stats);
Tensor unapply_stats(const Tensor& normalized, const NormalizationStats& stats);

/// 90/10-style shuffled split; val gets round(fraction * n), at least 1
/// when 0 < fraction < 1 and n > 1.
SplitIndices split_indices(std::size_t n, double val_fraction, StreamRng rng);

/// Loads annotations, crops and resizes each face box to 40x40, computes
/// normalization stats over the training part of the split, and normalizes
/// every sample with those stats. Records with unreadable images or with a
/// landmark outside the 1.5x enlarged box are skipped with a warning entry.
/// Image paths resolve relative to image_root.
Dataset load_dataset(const std::string& annotation_path, const std::string& image_root,
                     double val_fraction, std::uint64_t seed);

/// Columns reversed, landmark x -> 1-x, left/right roles swapped.
Sample mirror_sample(const Sample& s);

}  // namespace tcnn
