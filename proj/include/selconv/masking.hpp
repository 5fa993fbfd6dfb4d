#pragma once

// Selection masks over the W x H grid of a FeatureTensor.
//
// Coordinates are 1-based and a Mask always stores them sorted row-major
// (by y, then x) without duplicates, so every downstream step sees the
// selected features in a fixed order.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"
#include "selconv/tensor.hpp"

namespace selconv {

struct GridCoord {
  std::uint32_t x = 1;
  std::uint32_t y = 1;

  friend bool operator==(const GridCoord&, const GridCoord&) = default;
  // Row-major order.
  friend std::strong_ordering operator<=>(const GridCoord& a, const GridCoord& b) {
    if (auto c = a.y <=> b.y; c != 0) return c;
    return a.x <=> b.x;
  }
};

enum class MaskKind { sift, sum, max, none };

inline std::string to_string(MaskKind k) {
  switch (k) {
    case MaskKind::sift: return "sift";
    case MaskKind::sum: return "sum";
    case MaskKind::max: return "max";
    case MaskKind::none: return "none";
  }
  return "none";
}

inline MaskKind parse_mask_kind(const std::string& s) {
  if (s == "sift") return MaskKind::sift;
  if (s == "sum") return MaskKind::sum;
  if (s == "max") return MaskKind::max;
  if (s == "none") return MaskKind::none;
  throw ParameterError("unknown mask kind: " + s);
}

struct Mask {
  std::vector<GridCoord> coords;
  MaskKind kind = MaskKind::none;

  std::size_t size() const { return coords.size(); }
};

/// Local features selected from a tensor: one column per feature.
struct FeatureSet {
  Matrix vectors;                  // dim x n
  std::vector<GridCoord> coords;   // parallel to columns

  Index dim() const { return vectors.rows(); }
  std::size_t size() const { return static_cast<std::size_t>(vectors.cols()); }
};

namespace detail {

inline GridCoord coord_from_index(std::size_t loc, std::uint32_t width) {
  return {static_cast<std::uint32_t>(loc % width) + 1, static_cast<std::uint32_t>(loc / width) + 1};
}

inline void sort_unique(std::vector<GridCoord>& c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
}

}  // namespace detail

inline Mask full_mask(std::uint32_t width, std::uint32_t height) {
  Mask m;
  m.kind = MaskKind::none;
  m.coords.reserve(static_cast<std::size_t>(width) * height);
  for (std::uint32_t y = 1; y <= height; ++y)
    for (std::uint32_t x = 1; x <= width; ++x) m.coords.push_back({x, y});
  return m;
}

inline Mask full_mask(const FeatureTensor& t) { return full_mask(t.width(), t.height()); }

/// Location of each channel's maximum; ties go to the first location in
/// row-major order.
inline Mask max_mask(const FeatureTensor& t) {
  const std::uint32_t K = t.channels();
  const auto data = t.data();
  std::vector<std::size_t> best_loc(K, 0);
  std::vector<float> best_val(data.begin(), data.begin() + K);
  for (std::size_t loc = 1; loc < t.locations(); ++loc) {
    const float* f = data.data() + loc * K;
    for (std::uint32_t k = 0; k < K; ++k) {
      if (f[k] > best_val[k]) {
        best_val[k] = f[k];
        best_loc[k] = loc;
      }
    }
  }
  Mask m;
  m.kind = MaskKind::max;
  m.coords.reserve(K);
  for (std::size_t loc : best_loc) m.coords.push_back(detail::coord_from_index(loc, t.width()));
  detail::sort_unique(m.coords);
  return m;
}

/// Per-location activation sums, row-major.
inline std::vector<double> location_sums(const FeatureTensor& t) {
  const std::uint32_t K = t.channels();
  const auto data = t.data();
  std::vector<double> sums(t.locations(), 0.0);
  for (std::size_t loc = 0; loc < sums.size(); ++loc) {
    double s = 0.0;
    for (std::uint32_t k = 0; k < K; ++k) s += data[loc * K + k];
    sums[loc] = s;
  }
  return sums;
}

/// Median with the even-count convention (mean of the two middle values).
inline double median(std::vector<double> values) {
  if (values.empty()) throw EmptyInputError("median of empty sequence");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

/// Keeps locations whose channel sum reaches the median sum.
inline Mask sum_mask(const FeatureTensor& t) {
  const auto sums = location_sums(t);
  const double threshold = median(sums);
  Mask m;
  m.kind = MaskKind::sum;
  for (std::size_t loc = 0; loc < sums.size(); ++loc)
    if (sums[loc] >= threshold) m.coords.push_back(detail::coord_from_index(loc, t.width()));
  return m;  // already row-major
}

inline std::uint32_t round_half_up_clamped(double v, std::uint32_t hi) {
  const double r = std::floor(v + 0.5);
  if (r < 1.0) return 1;
  if (r > static_cast<double>(hi)) return hi;
  return static_cast<std::uint32_t>(r);
}

/// Projects pixel keypoints onto the grid. An empty keypoint set yields the
/// full-grid NONE mask.
inline Mask sift_mask(const KeypointSet& kp, std::uint32_t grid_w, std::uint32_t grid_h) {
  if (grid_w == 0 || grid_h == 0) throw ParameterError("grid dimensions must be >= 1");
  if (kp.points.empty()) return full_mask(grid_w, grid_h);
  const double sx = static_cast<double>(grid_w) / kp.image_width;
  const double sy = static_cast<double>(grid_h) / kp.image_height;
  Mask m;
  m.kind = MaskKind::sift;
  m.coords.reserve(kp.points.size());
  for (const auto& p : kp.points)
    m.coords.push_back({round_half_up_clamped(p.x * sx, grid_w), round_half_up_clamped(p.y * sy, grid_h)});
  detail::sort_unique(m.coords);
  return m;
}

/// Copies the selected K-dimensional features, in mask order.
inline FeatureSet apply_mask(const FeatureTensor& t, const Mask& mask) {
  FeatureSet fs;
  fs.vectors.resize(t.channels(), static_cast<Index>(mask.size()));
  fs.coords = mask.coords;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const auto c = mask.coords[i];
    if (c.x < 1 || c.x > t.width() || c.y < 1 || c.y > t.height())
      throw ContractError("mask coordinate (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                          ") outside tensor grid");
    const auto f = t.feature(c.x, c.y);
    for (std::uint32_t k = 0; k < t.channels(); ++k) fs.vectors(k, static_cast<Index>(i)) = f[k];
  }
  return fs;
}

/// Dispatches on mask kind. SIFT without keypoints falls back to the full grid.
inline Mask compute_mask(MaskKind kind, const FeatureTensor& t, const KeypointSet* keypoints) {
  switch (kind) {
    case MaskKind::max: return max_mask(t);
    case MaskKind::sum: return sum_mask(t);
    case MaskKind::sift:
      if (keypoints == nullptr) {
        warn("SIFT mask requested without keypoints; using all locations");
        return full_mask(t);
      }
      return sift_mask(*keypoints, t.width(), t.height());
    case MaskKind::none: return full_mask(t);
  }
  return full_mask(t);
}

}  // namespace selconv
