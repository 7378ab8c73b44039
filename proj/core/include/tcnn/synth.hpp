#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tcnn/dataio.hpp"
#include "tcnn/geometry.hpp"
#include "tcnn/image.hpp"

namespace tcnn {

/// Synthetic multi-pose face generator. Each pose mode projects a small 3D
/// five-point template at a mode-specific yaw/pitch, so landmark
/// configurations differ between modes by more than a similarity transform.
/// Per sample the template is rotated/scaled/translated and the pixels render
/// intensity blobs at the landmark positions over a textured background whose
/// brightness varies independently of pose.
struct SynthConfig {
  std::size_t count = 1000;
  std::size_t modes = 3;
  std::uint64_t seed = 0;

  double yaw_span = 1.7;            // total yaw range across modes, radians
  double pitch_amplitude = 0.22;    // alternating per-mode pitch
  double roll_sigma = 0.05;         // per-sample similarity jitter
  double scale_sigma = 0.035;
  double shift_sigma = 0.012;
  double point_jitter_sigma = 0.005;  // per-landmark non-similarity jitter
};

struct SynthMeta {
  std::size_t mode = 0;
  SimilarityTransform sim;                       // box-normalized coordinates
  std::array<std::array<double, 2>, 5> jitter{};  // added after the transform
};

struct SynthResult {
  std::vector<ImageU8> images;            // 40x40 renders
  std::vector<AnnotationRecord> records;  // boxes cover the full image
  std::vector<SynthMeta> meta;
};

/// Canonical box-normalized template of a pose mode.
std::array<std::array<double, 2>, 5> synth_mode_template(const SynthConfig& cfg,
                                                         std::size_t mode);

SynthResult synth_generate(const SynthConfig& cfg);

/// Writes images/NNNNN.ppm, annotations.txt and manifest.json under out_dir.
/// The manifest records counts and a content checksum; equal configs produce
/// byte-identical outputs.
void synth_write(const SynthResult& res, const SynthConfig& cfg, const std::string& out_dir);

}  // namespace tcnn
