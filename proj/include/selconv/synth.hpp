#pragma once

// Seeded synthetic retrieval datasets with planted class structure and
// bursty repeats.
//
// Every class owns a few sparse non-negative "pattern" vectors. An image
// of the class places noisy copies of its patterns at random foreground
// locations (emitted as keypoints), copies one of those foreground vectors
// onto burst_rate * W * H further locations, and fills the rest of the
// grid with weak non-negative background noise. A disjoint set of classes
// is generated as the held-out training corpus.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"
#include "selconv/manifest.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

struct SynthConfig {
  std::uint32_t classes = 4;
  std::uint32_t images_per_class = 10;
  std::uint32_t width = 16;
  std::uint32_t height = 16;
  std::uint32_t channels = 64;
  std::uint32_t patterns_per_class = 8;
  std::uint32_t foreground_locations = 16;
  double pattern_noise = 0.1;           // relative jitter of foreground copies
  double background_noise_scale = 0.2;  // background values are uniform in [0, scale)
  double burst_rate = 0.3;
  double pattern_density = 0.25;        // fraction of active channels in a pattern
  std::uint32_t heldout_classes = 4;
  std::uint32_t heldout_per_class = 10;
  std::uint32_t pixels_per_cell = 16;
  std::uint64_t seed = 7;

  void validate() const {
    if (classes < 1 || images_per_class < 1 || width < 1 || height < 1 || channels < 1 || patterns_per_class < 1 ||
        foreground_locations < 1 || pixels_per_cell < 1)
      throw ParameterError("synth: all counts must be >= 1");
    if (!(burst_rate >= 0.0 && burst_rate <= 1.0)) throw ParameterError("synth: burst_rate must lie in [0, 1]");
    if (!(pattern_density > 0.0 && pattern_density <= 1.0))
      throw ParameterError("synth: pattern_density must lie in (0, 1]");
    if (pattern_noise < 0.0 || background_noise_scale < 0.0) throw ParameterError("synth: noise scales must be >= 0");
    if (foreground_locations > width * height)
      throw ParameterError("synth: more foreground locations than grid cells");
  }
};

struct SynthImage {
  std::string id;
  std::uint32_t label = 0;
  ImageRole role = ImageRole::database;
  FeatureTensor tensor;
  KeypointSet keypoints;
  std::vector<std::size_t> foreground;  // row-major location indices
  std::vector<std::size_t> burst;
};

struct SynthData {
  std::vector<SynthImage> evaluation;  // database + one query per class
  std::vector<SynthImage> heldout;
};

namespace detail {

inline Vector synth_pattern(Rng& rng, std::uint32_t channels, double density) {
  Vector p = Vector::Zero(channels);
  for (std::uint32_t k = 0; k < channels; ++k)
    if (rng.uniform() < density) p(k) = 0.5 + rng.uniform();
  if (p.sum() == 0.0) p(static_cast<Index>(rng.below(channels))) = 1.0;
  return p;
}

inline void shuffle_prefix(std::vector<std::size_t>& v, std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count && i + 1 < v.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(v.size() - i));
    std::swap(v[i], v[j]);
  }
}

inline SynthImage synth_image(const SynthConfig& cfg, const std::vector<Vector>& patterns, Rng& rng) {
  const std::uint32_t W = cfg.width, H = cfg.height, K = cfg.channels;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  SynthImage img;
  std::vector<float> data(n * K);
  for (auto& v : data) v = static_cast<float>(cfg.background_noise_scale * rng.uniform());

  std::vector<std::size_t> locs(n);
  for (std::size_t i = 0; i < n; ++i) locs[i] = i;
  const std::size_t fg = cfg.foreground_locations;
  const auto bursts = std::min<std::size_t>(n - fg, static_cast<std::size_t>(std::llround(cfg.burst_rate * static_cast<double>(n))));
  shuffle_prefix(locs, fg + bursts, rng);

  auto put = [&](std::size_t loc, const Vector& v) {
    for (std::uint32_t k = 0; k < K; ++k) data[loc * K + k] = static_cast<float>(v(k));
  };
  std::vector<Vector> copies;
  for (std::size_t i = 0; i < fg; ++i) {
    const Vector& p = patterns[i % patterns.size()];
    Vector c(K);
    for (std::uint32_t k = 0; k < K; ++k) c(k) = std::max(0.0, p(k) * (1.0 + cfg.pattern_noise * rng.normal()));
    put(locs[i], c);
    copies.push_back(std::move(c));
    img.foreground.push_back(locs[i]);
  }
  if (bursts > 0) {
    const Vector& b = copies[static_cast<std::size_t>(rng.below(copies.size()))];
    for (std::size_t i = fg; i < fg + bursts; ++i) {
      put(locs[i], b);
      img.burst.push_back(locs[i]);
    }
  }
  std::sort(img.foreground.begin(), img.foreground.end());
  std::sort(img.burst.begin(), img.burst.end());

  const double s = cfg.pixels_per_cell;
  img.keypoints.image_width = W * cfg.pixels_per_cell;
  img.keypoints.image_height = H * cfg.pixels_per_cell;
  for (std::size_t loc : img.foreground) {
    const double gx = static_cast<double>(loc % W) + 1.0;
    const double gy = static_cast<double>(loc / W) + 1.0;
    const double px = std::clamp(gx * s + (rng.uniform() - 0.5) * 0.5 * s, 0.0, static_cast<double>(img.keypoints.image_width));
    const double py = std::clamp(gy * s + (rng.uniform() - 0.5) * 0.5 * s, 0.0, static_cast<double>(img.keypoints.image_height));
    img.keypoints.points.push_back({px, py});
  }
  img.tensor = FeatureTensor(W, H, K, std::move(data));
  return img;
}

}  // namespace detail

/// In-memory dataset; fully determined by the config (seed included).
inline SynthData generate_images(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthData out;
  auto make = [&](std::uint32_t classes, std::uint32_t per_class, const char* prefix, bool heldout,
                  std::vector<SynthImage>& dst) {
    for (std::uint32_t c = 0; c < classes; ++c) {
      std::vector<Vector> patterns;
      for (std::uint32_t p = 0; p < cfg.patterns_per_class; ++p)
        patterns.push_back(detail::synth_pattern(rng, cfg.channels, cfg.pattern_density));
      for (std::uint32_t i = 0; i < per_class; ++i) {
        SynthImage img = detail::synth_image(cfg, patterns, rng);
        img.id = std::string(prefix) + std::to_string(c) + "_" + std::to_string(i);
        img.label = c;
        img.role = heldout ? ImageRole::heldout : (i == 0 ? ImageRole::query : ImageRole::database);
        dst.push_back(std::move(img));
      }
    }
  };
  make(cfg.classes, cfg.images_per_class, "c", false, out.evaluation);
  make(cfg.heldout_classes, cfg.heldout_per_class, "h", true, out.heldout);
  return out;
}

/// Ground-truth queries: one per class, every other class member positive.
inline std::vector<QueryEntry> synth_queries(const std::vector<SynthImage>& images) {
  std::vector<QueryEntry> queries;
  for (const auto& q : images) {
    if (q.role != ImageRole::query) continue;
    QueryEntry e;
    e.query_id = q.id;
    for (const auto& o : images)
      if (o.label == q.label && o.id != q.id) e.positive_ids.push_back(o.id);
    queries.push_back(std::move(e));
  }
  return queries;
}

struct SynthDataset {
  DatasetManifest evaluation;
  DatasetManifest heldout;
  std::filesystem::path evaluation_path;
  std::filesystem::path heldout_path;
};

/// Writes tensors, keypoints, manifest.json (evaluation) and heldout.json.
inline SynthDataset generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  const SynthData data = generate_images(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "tensors", ec);
  if (!ec) fs::create_directories(out_dir / "keypoints", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  auto emit = [&](const std::vector<SynthImage>& images, DatasetManifest& m) {
    for (const auto& img : images) {
      ImageEntry e;
      e.id = img.id;
      e.role = img.role;
      e.tensor_path = out_dir / "tensors" / (img.id + ".scf");
      e.keypoints_path = out_dir / "keypoints" / (img.id + ".txt");
      write_tensor(img.tensor, e.tensor_path);
      write_keypoints(img.keypoints, *e.keypoints_path);
      m.images.push_back(std::move(e));
    }
  };
  SynthDataset ds;
  emit(data.evaluation, ds.evaluation);
  ds.evaluation.queries = synth_queries(data.evaluation);
  emit(data.heldout, ds.heldout);
  ds.evaluation_path = out_dir / "manifest.json";
  ds.heldout_path = out_dir / "heldout.json";
  write_manifest(ds.evaluation, ds.evaluation_path);
  write_manifest(ds.heldout, ds.heldout_path);
  return ds;
}

}  // namespace selconv
