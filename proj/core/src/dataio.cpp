#include "tcnn/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tcnn/errors.hpp"

namespace tcnn {

namespace {
constexpr double kStdFloor = 1e-6;

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}
}  // namespace

AnnotationRecord parse_annotation_line(const std::string& line) {
  std::istringstream is(line);
  AnnotationRecord rec;
  if (!(is >> rec.image_path)) throw data_error("annotation: empty record");
  if (!(is >> rec.box_x >> rec.box_y >> rec.box_w >> rec.box_h))
    throw data_error("annotation: malformed box fields in '" + line + "'");
  if (rec.box_w <= 0 || rec.box_h <= 0)
    throw data_error("annotation: non-positive box extents in '" + line + "'");

  std::vector<double> rest;
  double v;
  while (is >> v) rest.push_back(v);
  // 2m landmark fields, optionally followed by exactly 3 attribute fields.
  // An odd field count can only happen when the attributes are present.
  std::size_t n = rest.size();
  bool attrs = n % 2 == 1;
  if (attrs) {
    if (n < 7) throw data_error("annotation: too few fields in '" + line + "'");
    n -= 3;
  }
  if (n < 4) throw data_error("annotation: bad landmark field count in '" + line + "'");
  std::size_t m = n / 2;
  rec.landmarks_px.resize(m);
  for (std::size_t j = 0; j < m; ++j) rec.landmarks_px[j] = {rest[2 * j], rest[2 * j + 1]};
  if (attrs) {
    rec.has_attributes = true;
    for (std::size_t a = 0; a < 3; ++a) {
      double av = rest[n + a];
      if (av != 0.0 && av != 1.0)
        throw data_error("annotation: attributes must be 0/1 in '" + line + "'");
      rec.attributes[a] = static_cast<int>(av);
    }
  }
  return rec;
}

std::string format_annotation_line(const AnnotationRecord& rec) {
  std::ostringstream os;
  os << rec.image_path << " " << format_double(rec.box_x) << " " << format_double(rec.box_y)
     << " " << format_double(rec.box_w) << " " << format_double(rec.box_h);
  for (const auto& p : rec.landmarks_px)
    os << " " << format_double(p[0]) << " " << format_double(p[1]);
  if (rec.has_attributes)
    os << " " << rec.attributes[0] << " " << rec.attributes[1] << " " << rec.attributes[2];
  return os.str();
}

std::vector<AnnotationRecord> load_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot open annotation file: " + path);
  std::vector<AnnotationRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    try {
      out.push_back(parse_annotation_line(line));
    } catch (const data_error& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

NormalizationStats compute_stats(const std::vector<Tensor>& images,
                                 const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw data_error("compute_stats: no training images");
  const auto shape = images[indices[0]].shape;
  Tensor mean = Tensor::zeros(shape), m2 = Tensor::zeros(shape);
  // Welford, elementwise over images.
  double count = 0;
  for (std::size_t idx : indices) {
    const Tensor& img = images[idx];
    count += 1;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
      const double delta = img.data[i] - mean.data[i];
      mean.data[i] += delta / count;
      m2.data[i] += delta * (img.data[i] - mean.data[i]);
    }
  }
  NormalizationStats stats{std::move(mean), Tensor(shape)};
  for (std::size_t i = 0; i < stats.std.data.size(); ++i)
    stats.std.data[i] = std::max(std::sqrt(m2.data[i] / count), kStdFloor);
  return stats;
}

Tensor apply_stats(const Tensor& img01, const NormalizationStats& stats) {
  require_shape(img01, stats.mean.shape, "apply_stats");
  Tensor out(img01.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = (img01.data[i] - stats.mean.data[i]) / stats.std.data[i];
  return out;
}

Tensor unapply_stats(const Tensor& normalized, const NormalizationStats& stats) {
  require_shape(normalized, stats.mean.shape, "unapply_stats");
  Tensor out(normalized.shape);
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = normalized.data[i] * stats.std.data[i] + stats.mean.data[i];
  return out;
}

SplitIndices split_indices(std::size_t n, double val_fraction, StreamRng rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw std::invalid_argument("validation fraction must be in (0, 1)");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t val_count = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n > 1) val_count = std::clamp<std::size_t>(val_count, 1, n - 1);
  SplitIndices split;
  split.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(val_count));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(val_count), order.end());
  return split;
}

Dataset load_dataset(const std::string& annotation_path, const std::string& image_root,
                     double val_fraction, std::uint64_t seed) {
  namespace fs = std::filesystem;
  std::vector<AnnotationRecord> records = load_annotations(annotation_path);

  std::vector<Tensor> crops;
  std::vector<Sample> partial;
  std::vector<std::string> skipped;
  for (const AnnotationRecord& rec : records) {
    fs::path ipath = fs::path(rec.image_path).is_absolute()
                         ? fs::path(rec.image_path)
                         : fs::path(image_root) / rec.image_path;
    ImageU8 img;
    try {
      img = read_ppm(ipath.string());
    } catch (const data_error& e) {
      skipped.push_back(rec.image_path + ": " + e.what());
      continue;
    }

    // Landmarks outside the 1.5x enlarged box indicate a bad box; skip.
    bool outside = false;
    LandmarkSet lm;
    lm.pts.resize(rec.landmarks_px.size());
    for (std::size_t j = 0; j < rec.landmarks_px.size(); ++j) {
      const double nx = px_to_norm(rec.landmarks_px[j][0], rec.box_x, rec.box_w);
      const double ny = px_to_norm(rec.landmarks_px[j][1], rec.box_y, rec.box_h);
      if (nx < -0.25 || nx > 1.25 || ny < -0.25 || ny > 1.25) outside = true;
      lm.pts[j] = {nx, ny};
    }
    if (outside) {
      skipped.push_back(rec.image_path + ": landmark outside 1.5x box");
      continue;
    }

    crops.push_back(crop_resize(img, rec.box_x, rec.box_y, rec.box_w, rec.box_h, kPatchSize));
    Sample s;
    s.landmarks = std::move(lm);
    s.attributes = rec.attributes;
    s.has_attributes = rec.has_attributes;
    s.source = rec.image_path;
    partial.push_back(std::move(s));
  }
  if (partial.empty()) throw data_error("no usable records in " + annotation_path);

  Dataset ds;
  ds.split = split_indices(partial.size(), val_fraction, StreamRng(seed, "split"));
  ds.stats = compute_stats(crops, ds.split.train);
  ds.samples = std::move(partial);
  for (std::size_t i = 0; i < ds.samples.size(); ++i)
    ds.samples[i].image = apply_stats(crops[i], ds.stats);
  ds.skipped = std::move(skipped);
  return ds;
}

Sample mirror_sample(const Sample& s) {
  Sample out;
  require_rank(s.image, 3, "mirror_sample");
  const std::size_t H = s.image.shape[0], W = s.image.shape[1], C = s.image.shape[2];
  out.image = Tensor({H, W, C});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) out.image.at3(y, x, c) = s.image.at3(y, W - 1 - x, c);
  out.landmarks = mirror_landmarks(s.landmarks);
  out.attributes = s.attributes;
  out.has_attributes = s.has_attributes;
  out.source = s.source;
  return out;
}

}  // namespace tcnn
