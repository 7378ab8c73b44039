#include "tcnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcnn/errors.hpp"

namespace tcnn {

namespace {

// 3D five-point face template, face-box units. The nose sits forward of the
// eye plane, so yaw moves it laterally relative to the eyes -- a deformation
// no 2D similarity transform can reproduce.
constexpr std::array<std::array<double, 3>, 5> kTemplate3d = {{
    {-0.20, -0.13, 0.00},  // left eye
    {+0.20, -0.13, 0.00},  // right eye
    {0.00, +0.05, 0.22},   // nose tip
    {-0.14, +0.22, 0.03},  // left mouth corner
    {+0.14, +0.22, 0.03},  // right mouth corner
}};
constexpr double kFaceCenterX = 0.5, kFaceCenterY = 0.53, kFaceScale = 0.95;

double gauss_blob(double dx, double dy, double sigma) {
  return std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
}

}  // namespace

std::array<std::array<double, 2>, 5> synth_mode_template(const SynthConfig& cfg,
                                                         std::size_t mode) {
  if (cfg.modes < 1) throw std::invalid_argument("synth: modes must be >= 1");
  if (mode >= cfg.modes) throw std::invalid_argument("synth: mode out of range");
  const double yaw = cfg.modes == 1
                         ? 0.0
                         : -cfg.yaw_span / 2.0 +
                               cfg.yaw_span * static_cast<double>(mode) /
                                   static_cast<double>(cfg.modes - 1);
  const double pitch = cfg.modes == 1 ? 0.0
                                      : (mode % 2 == 0 ? 1.0 : -1.0) * cfg.pitch_amplitude;

  std::array<std::array<double, 2>, 5> out{};
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  for (std::size_t j = 0; j < 5; ++j) {
    const auto& p = kTemplate3d[j];
    // yaw about the vertical axis, then pitch about the horizontal axis
    const double x1 = p[0] * cy + p[2] * sy;
    const double z1 = -p[0] * sy + p[2] * cy;
    const double y2 = p[1] * cp - z1 * sp;
    out[j] = {kFaceCenterX + kFaceScale * x1, kFaceCenterY + kFaceScale * y2};
  }
  return out;
}

SynthResult synth_generate(const SynthConfig& cfg) {
  if (cfg.count < 1) throw std::invalid_argument("synth: count must be >= 1");
  if (cfg.modes < 1) throw std::invalid_argument("synth: modes must be >= 1");

  std::vector<std::array<std::array<double, 2>, 5>> templates;
  for (std::size_t p = 0; p < cfg.modes; ++p) templates.push_back(synth_mode_template(cfg, p));

  SynthResult res;
  res.images.reserve(cfg.count);
  res.records.reserve(cfg.count);
  res.meta.reserve(cfg.count);

  StreamRng root(cfg.seed, "synth");
  const double S = static_cast<double>(kPatchSize);

  for (std::size_t i = 0; i < cfg.count; ++i) {
    StreamRng rng = root.substream(i);
    SynthMeta meta;
    meta.mode = i % cfg.modes;

    // Per-sample similarity about the face center plus per-landmark jitter.
    const double roll = rng.normal(0.0, cfg.roll_sigma);
    const double scale = std::clamp(rng.normal(1.0, cfg.scale_sigma), 0.8, 1.2);
    const double dx = rng.normal(0.0, cfg.shift_sigma);
    const double dy = rng.normal(0.0, cfg.shift_sigma);
    SimilarityTransform about = SimilarityTransform::from_parts(scale, roll, 0.0, 0.0);
    const auto c = about.apply({kFaceCenterX, kFaceCenterY});
    about.tx = kFaceCenterX - c[0] + dx;
    about.ty = kFaceCenterY - c[1] + dy;
    meta.sim = about;

    LandmarkSet lm;
    lm.pts.resize(5);
    for (std::size_t j = 0; j < 5; ++j) {
      meta.jitter[j] = {rng.normal(0.0, cfg.point_jitter_sigma),
                        rng.normal(0.0, cfg.point_jitter_sigma)};
      const auto q = about.apply(templates[meta.mode][j]);
      lm.pts[j] = {q[0] + meta.jitter[j][0], q[1] + meta.jitter[j][1]};
    }

    // Background and face tones vary independently of the pose mode.
    const double bg = rng.uniform(0.15, 0.85);
    const double grad_x = rng.uniform(-0.25, 0.25), grad_y = rng.uniform(-0.25, 0.25);
    const double face_tone = rng.uniform(0.45, 0.95);
    const double face_r = 0.46 * scale;

    Tensor img({kPatchSize, kPatchSize, 3});
    const auto face_center = about.apply({kFaceCenterX, kFaceCenterY});
    for (std::size_t y = 0; y < kPatchSize; ++y) {
      for (std::size_t x = 0; x < kPatchSize; ++x) {
        const double u = (static_cast<double>(x) + 0.5) / S;  // pixel center, normalized
        const double v = (static_cast<double>(y) + 0.5) / S;
        double base = bg + grad_x * (u - 0.5) + grad_y * (v - 0.5) + rng.uniform(-0.04, 0.04);
        double r = base, g = base, b = base;

        const double fd = std::hypot(u - face_center[0], v - face_center[1]);
        if (fd < face_r) {
          const double t = 1.0 - fd / face_r;
          const double skin = face_tone * (0.75 + 0.25 * t);
          r = 0.9 * skin + 0.1 * r;
          g = 0.82 * skin + 0.1 * g;
          b = 0.72 * skin + 0.1 * b;
        }

        for (std::size_t j = 0; j < 5; ++j) {
          const double bx = lm.pts[j][0] * S, by = lm.pts[j][1] * S;
          const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
          if (j < 2) {  // eyes: dark
            const double w = gauss_blob(px - bx, py - by, 1.5);
            r -= 0.55 * w;
            g -= 0.55 * w;
            b -= 0.45 * w;
          } else if (j == 2) {  // nose: warm highlight
            const double w = gauss_blob(px - bx, py - by, 1.7);
            r += 0.40 * w;
            g += 0.10 * w;
            b -= 0.10 * w;
          } else {  // mouth corners: red-dark
            const double w = gauss_blob(px - bx, py - by, 1.5);
            r += 0.10 * w;
            g -= 0.38 * w;
            b -= 0.30 * w;
          }
        }
        img.at3(y, x, 0) = std::clamp(r, 0.0, 1.0);
        img.at3(y, x, 1) = std::clamp(g, 0.0, 1.0);
        img.at3(y, x, 2) = std::clamp(b, 0.0, 1.0);
      }
    }

    AnnotationRecord rec;
    {
      std::ostringstream name;
      name << "images/";
      name.width(5);
      name.fill('0');
      name << i;
      name << ".ppm";
      rec.image_path = name.str();
    }
    rec.box_x = 0;
    rec.box_y = 0;
    rec.box_w = S;
    rec.box_h = S;
    rec.landmarks_px.resize(5);
    for (std::size_t j = 0; j < 5; ++j)
      rec.landmarks_px[j] = {lm.pts[j][0] * S, lm.pts[j][1] * S};
    rec.has_attributes = true;
    for (std::size_t a = 0; a < 3; ++a) rec.attributes[a] = static_cast<int>((meta.mode >> a) & 1);

    res.images.push_back(tensor_to_image(img));
    res.records.push_back(std::move(rec));
    res.meta.push_back(meta);
  }
  return res;
}

void synth_write(const SynthResult& res, const SynthConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "images");

  std::string annotations;
  for (const auto& rec : res.records) annotations += format_annotation_line(rec) + "\n";
  {
    std::ofstream f(fs::path(out_dir) / "annotations.txt");
    if (!f) throw data_error("cannot write annotations in " + out_dir);
    f << annotations;
  }

  std::uint64_t checksum = fnv1a64(annotations);
  for (std::size_t i = 0; i < res.images.size(); ++i) {
    const auto& img = res.images[i];
    write_ppm((fs::path(out_dir) / res.records[i].image_path).string(), img);
    checksum = fnv1a64(img.rgb.data(), img.rgb.size(), checksum);
  }

  std::ostringstream manifest;
  manifest << "{\n"
           << "  \"count\": " << res.images.size() << ",\n"
           << "  \"modes\": " << cfg.modes << ",\n"
           << "  \"seed\": " << cfg.seed << ",\n"
           << "  \"landmarks\": 5,\n"
           << "  \"checksum\": \"" << std::hex << checksum << "\"\n"
           << "}\n";
  std::ofstream mf(fs::path(out_dir) / "manifest.json");
  if (!mf) throw data_error("cannot write manifest in " + out_dir);
  mf << manifest.str();
}

}  // namespace tcnn
