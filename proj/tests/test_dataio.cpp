#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "tcnn/dataio.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/synth.hpp"

using namespace tcnn;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("tcnn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("annotation line round-trip") {
  AnnotationRecord rec;
  rec.image_path = "images/00042.ppm";
  rec.box_x = 3.5;
  rec.box_y = -1.0;
  rec.box_w = 100;
  rec.box_h = 120;
  rec.landmarks_px = {{10, 11}, {20, 21}, {15, 30}, {12, 40}, {18, 41}};
  rec.has_attributes = true;
  rec.attributes = {1, 0, 1};
  AnnotationRecord back = parse_annotation_line(format_annotation_line(rec));
  CHECK(back.image_path == rec.image_path);
  CHECK(back.box_w == rec.box_w);
  REQUIRE(back.landmarks_px.size() == 5);
  CHECK(back.landmarks_px[4][1] == 41);
  CHECK(back.has_attributes);
  CHECK(back.attributes == rec.attributes);

  rec.has_attributes = false;
  AnnotationRecord back2 = parse_annotation_line(format_annotation_line(rec));
  CHECK_FALSE(back2.has_attributes);
}

TEST_CASE("annotation parsing rejects malformed lines") {
  CHECK_THROWS_AS(parse_annotation_line("img.ppm 0 0 0 40 1 2"), data_error);   // zero box
  CHECK_THROWS_AS(parse_annotation_line("img.ppm 0 0 40 40 1"), data_error);    // short
  CHECK_THROWS_AS(parse_annotation_line("img.ppm"), data_error);
  CHECK_THROWS_AS(parse_annotation_line("img.ppm 0 0 40 40 1 2 3 4 5 6 7 8 9 10 2 0 1"),
                  data_error);  // attribute not 0/1
}

TEST_CASE("box normalization: midpoint and round-trip") {
  CHECK(px_to_norm(50.0, 0.0, 100.0) == doctest::Approx(0.5));
  StreamRng rng(31, "t");
  for (int i = 0; i < 100; ++i) {
    const double bx = rng.uniform(-10, 10), bw = rng.uniform(1, 200);
    const double px = bx + rng.uniform(0, 1) * bw;
    CHECK(norm_to_px(px_to_norm(px, bx, bw), bx, bw) == doctest::Approx(px).epsilon(1e-12));
  }
}

TEST_CASE("ppm round-trip is byte-exact") {
  fs::path dir = temp_dir("ppm");
  ImageU8 img(7, 5);
  StreamRng rng(32, "t");
  for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.below(256));
  write_ppm((dir / "x.ppm").string(), img);
  ImageU8 back = read_ppm((dir / "x.ppm").string());
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.rgb == img.rgb);
  CHECK_THROWS_AS(read_ppm((dir / "missing.ppm").string()), data_error);
}

TEST_CASE("crop_resize of a full 40x40 box is exact") {
  StreamRng rng(33, "t");
  ImageU8 img(kPatchSize, kPatchSize);
  for (auto& b : img.rgb) b = static_cast<std::uint8_t>(rng.below(256));
  Tensor crop = crop_resize(img, 0, 0, kPatchSize, kPatchSize, kPatchSize);
  for (std::size_t y = 0; y < kPatchSize; ++y)
    for (std::size_t x = 0; x < kPatchSize; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(crop.at3(y, x, c) == doctest::Approx(img.at(x, y, c) / 255.0).epsilon(1e-12));
}

TEST_CASE("identical images normalize to zero (std floored)") {
  std::vector<Tensor> images(4, Tensor::full({4, 4, 3}, 0.25));
  NormalizationStats stats = compute_stats(images, {0, 1, 2, 3});
  Tensor norm = apply_stats(images[0], stats);
  for (double v : norm.data) CHECK(v == 0.0);
  for (double v : stats.std.data) CHECK(v >= 1e-6);
  Tensor back = unapply_stats(norm, stats);
  for (double v : back.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("mirror_sample is an involution with the expected fixed points") {
  SynthConfig cfg;
  cfg.count = 3;
  cfg.seed = 9;
  SynthResult synth = synth_generate(cfg);
  Sample s;
  s.image = crop_resize(synth.images[0], 0, 0, kPatchSize, kPatchSize, kPatchSize);
  s.landmarks.pts = {{0.3, 0.3}, {0.7, 0.3}, {0.5, 0.52}, {0.35, 0.7}, {0.65, 0.7}};

  Sample m = mirror_sample(s);
  CHECK(m.landmarks.pts[0][0] == doctest::Approx(0.3));  // left eye <- right eye mirrored
  CHECK(m.landmarks.pts[0][1] == doctest::Approx(0.3));
  CHECK(m.landmarks.pts[2][0] == doctest::Approx(0.5));  // nose stays on the axis
  CHECK(m.landmarks.pts[2][1] == doctest::Approx(0.52));

  Sample mm = mirror_sample(m);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(mm.landmarks.pts[j][0] == doctest::Approx(s.landmarks.pts[j][0]).epsilon(1e-12));
    CHECK(mm.landmarks.pts[j][1] == doctest::Approx(s.landmarks.pts[j][1]).epsilon(1e-12));
  }
  for (std::size_t i = 0; i < s.image.data.size(); ++i)
    CHECK(mm.image.data[i] == s.image.data[i]);

  // Asymmetric eyes swap exactly.
  Sample asym = s;
  asym.landmarks.pts[0] = {0.3, 0.30};
  asym.landmarks.pts[1] = {0.7, 0.35};
  Sample ma = mirror_sample(asym);
  CHECK(ma.landmarks.pts[0][0] == doctest::Approx(0.3));
  CHECK(ma.landmarks.pts[0][1] == doctest::Approx(0.35));
  CHECK(ma.landmarks.pts[1][0] == doctest::Approx(0.7));
  CHECK(ma.landmarks.pts[1][1] == doctest::Approx(0.30));
}

TEST_CASE("synth: one mode with zero jitter gives identical landmark sets") {
  SynthConfig cfg;
  cfg.count = 12;
  cfg.modes = 1;
  cfg.seed = 3;
  cfg.roll_sigma = cfg.scale_sigma = cfg.shift_sigma = cfg.point_jitter_sigma = 0.0;
  SynthResult res = synth_generate(cfg);
  for (std::size_t i = 1; i < res.records.size(); ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(res.records[i].landmarks_px[j][0] ==
            doctest::Approx(res.records[0].landmarks_px[j][0]).epsilon(1e-12));
      CHECK(res.records[i].landmarks_px[j][1] ==
            doctest::Approx(res.records[0].landmarks_px[j][1]).epsilon(1e-12));
    }
}

TEST_CASE("synth: ground truth equals the transformed template plus jitter") {
  SynthConfig cfg;
  cfg.count = 40;
  cfg.modes = 3;
  cfg.seed = 17;
  SynthResult res = synth_generate(cfg);
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const SynthMeta& meta = res.meta[i];
    auto tmpl = synth_mode_template(cfg, meta.mode);
    for (std::size_t j = 0; j < 5; ++j) {
      const auto expect = meta.sim.apply(tmpl[j]);
      const double gx = (expect[0] + meta.jitter[j][0]) * static_cast<double>(kPatchSize);
      const double gy = (expect[1] + meta.jitter[j][1]) * static_cast<double>(kPatchSize);
      CHECK(std::fabs(res.records[i].landmarks_px[j][0] - gx) < 1e-9);
      CHECK(std::fabs(res.records[i].landmarks_px[j][1] - gy) < 1e-9);
    }
  }
}

TEST_CASE("synth: equal seeds are bit-identical, different seeds differ") {
  SynthConfig cfg;
  cfg.count = 8;
  cfg.modes = 2;
  cfg.seed = 5;
  SynthResult a = synth_generate(cfg);
  SynthResult b = synth_generate(cfg);
  REQUIRE(a.images.size() == b.images.size());
  for (std::size_t i = 0; i < a.images.size(); ++i) CHECK(a.images[i].rgb == b.images[i].rgb);

  cfg.seed = 6;
  SynthResult c = synth_generate(cfg);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.images.size() && !any_diff; ++i)
    any_diff = a.images[i].rgb != c.images[i].rgb;
  CHECK(any_diff);
}

TEST_CASE("synth modes are well separated relative to within-mode spread") {
  SynthConfig cfg;
  cfg.count = 600;
  cfg.modes = 3;
  cfg.seed = 23;
  SynthResult res = synth_generate(cfg);

  // Per-mode mean landmark positions and within-mode per-coordinate variance.
  std::vector<std::array<std::array<double, 2>, 5>> mean(cfg.modes);
  std::vector<std::size_t> count(cfg.modes, 0);
  for (auto& m : mean)
    for (auto& p : m) p = {0, 0};
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const std::size_t mode = res.meta[i].mode;
    count[mode] += 1;
    for (std::size_t j = 0; j < 5; ++j) {
      mean[mode][j][0] += res.records[i].landmarks_px[j][0];
      mean[mode][j][1] += res.records[i].landmarks_px[j][1];
    }
  }
  for (std::size_t m = 0; m < cfg.modes; ++m)
    for (auto& p : mean[m]) {
      p[0] /= static_cast<double>(count[m]);
      p[1] /= static_cast<double>(count[m]);
    }

  double var = 0.0;
  std::size_t var_n = 0;
  for (std::size_t i = 0; i < res.records.size(); ++i) {
    const std::size_t m = res.meta[i].mode;
    for (std::size_t j = 0; j < 5; ++j) {
      const double dx = res.records[i].landmarks_px[j][0] - mean[m][j][0];
      const double dy = res.records[i].landmarks_px[j][1] - mean[m][j][1];
      var += dx * dx + dy * dy;
      var_n += 2;
    }
  }
  const double within_sd = std::sqrt(var / static_cast<double>(var_n));

  double between = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < cfg.modes; ++a)
    for (std::size_t b = a + 1; b < cfg.modes; ++b) {
      double d = 0;
      for (std::size_t j = 0; j < 5; ++j)
        d += std::hypot(mean[a][j][0] - mean[b][j][0], mean[a][j][1] - mean[b][j][1]);
      between += d / 5.0;
      ++pairs;
    }
  between /= static_cast<double>(pairs);

  CHECK(between > 3.0 * within_sd);
}

TEST_CASE("load_dataset skips bad records and normalizes the rest") {
  fs::path dir = temp_dir("load");
  SynthConfig cfg;
  cfg.count = 30;
  cfg.modes = 2;
  cfg.seed = 40;
  SynthResult res = synth_generate(cfg);
  synth_write(res, cfg, dir.string());

  // Append a record whose landmarks sit far outside the box, and one whose
  // image is missing.
  {
    std::ofstream ann(dir / "annotations.txt", std::ios::app);
    ann << "images/00000.ppm 0 0 40 40 500 500 510 500 505 520 501 530 509 530\n";
    ann << "images/missing.ppm 0 0 40 40 10 10 20 10 15 20 12 30 18 30\n";
  }

  Dataset ds = load_dataset((dir / "annotations.txt").string(), dir.string(), 0.1, 7);
  CHECK(ds.samples.size() == 30);
  CHECK(ds.skipped.size() == 2);
  CHECK(ds.split.train.size() + ds.split.val.size() == 30);
  for (const Sample& s : ds.samples) {
    CHECK(all_finite(s.image));
    for (const auto& p : s.landmarks.pts) {
      CHECK(p[0] > -0.5);
      CHECK(p[0] < 1.5);
      CHECK(p[1] > -0.5);
      CHECK(p[1] < 1.5);
    }
  }

  // Stats come from the training part only; reloading with the same seed is
  // identical.
  Dataset ds2 = load_dataset((dir / "annotations.txt").string(), dir.string(), 0.1, 7);
  CHECK(ds2.stats.mean.data == ds.stats.mean.data);
  CHECK(ds2.samples[0].image.data == ds.samples[0].image.data);
}

TEST_CASE("empty datasets are an error") {
  fs::path dir = temp_dir("empty");
  {
    std::ofstream ann(dir / "annotations.txt");
    ann << "# nothing but comments\n";
  }
  CHECK_THROWS_AS(load_dataset((dir / "annotations.txt").string(), dir.string(), 0.1, 1),
                  data_error);
}
