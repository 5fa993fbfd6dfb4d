#pragma once

// Diagnostics of mask quality: retention and pairwise-correlation histograms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"
#include "selconv/masking.hpp"

namespace selconv {

inline constexpr double kCentralBand = 0.15;
inline constexpr std::size_t kExactPairLimit = 5000;
inline constexpr std::uint64_t kSampledPairs = 10'000'000;

struct RetentionStats {
  std::vector<double> per_image;  // |mask| / (W*H)
  double mean = 0.0;
};

inline double retention(const Mask& mask, const FeatureTensor& t) {
  return static_cast<double>(mask.size()) / static_cast<double>(t.locations());
}

/// `keypoints` may be empty or hold one entry (possibly null) per tensor.
inline RetentionStats retention_stats(std::span<const FeatureTensor> tensors, MaskKind kind,
                                      std::span<const KeypointSet* const> keypoints = {}) {
  if (tensors.empty()) throw ParameterError("retention_stats: no tensors");
  if (!keypoints.empty() && keypoints.size() != tensors.size())
    throw ContractError("retention_stats: keypoint list does not match tensors");
  RetentionStats s;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const KeypointSet* kp = keypoints.empty() ? nullptr : keypoints[i];
    s.per_image.push_back(retention(compute_mask(kind, tensors[i], kp), tensors[i]));
  }
  double total = 0.0;
  for (double r : s.per_image) total += r;
  s.mean = total / static_cast<double>(s.per_image.size());
  return s;
}

struct CovarianceHistogram {
  std::vector<double> centers;  // bin centers on [-1, 1]
  std::vector<double> mass;     // sums to 1
  double central_fraction = 0.0;
  std::uint64_t pairs = 0;
  bool sampled = false;
};

/// Histogram of pairwise dot products of the l2-normalized features.
/// Exact over all pairs up to 5000 features, otherwise a seeded sample of
/// 10^7 pairs.
inline CovarianceHistogram covariance_histogram(const FeatureSet& features, std::size_t bins, std::uint64_t seed = 0) {
  const Index n = features.vectors.cols();
  if (n < 2) throw ParameterError("covariance_histogram: need at least 2 features");
  if (bins < 1) throw ParameterError("covariance_histogram: need at least 1 bin");
  Matrix x = features.vectors;
  l2_normalize_columns(x);

  CovarianceHistogram h;
  h.centers.resize(bins);
  const double width = 2.0 / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) h.centers[b] = -1.0 + (static_cast<double>(b) + 0.5) * width;
  std::vector<std::uint64_t> counts(bins, 0);
  std::uint64_t central = 0;

  auto record = [&](double dot) {
    dot = std::clamp(dot, -1.0, 1.0);
    auto b = static_cast<std::size_t>((dot + 1.0) / width);
    if (b >= bins) b = bins - 1;
    ++counts[b];
    if (std::abs(dot) <= kCentralBand) ++central;
    ++h.pairs;
  };

  if (static_cast<std::size_t>(n) <= kExactPairLimit) {
    const Matrix gram = x.transpose() * x;
    for (Index j = 1; j < n; ++j)
      for (Index i = 0; i < j; ++i) record(gram(i, j));
  } else {
    h.sampled = true;
    Rng rng(seed);
    const auto nn = static_cast<std::uint64_t>(n);
    for (std::uint64_t s = 0; s < kSampledPairs; ++s) {
      const auto i = static_cast<Index>(rng.below(nn));
      auto j = static_cast<Index>(rng.below(nn - 1));
      if (j >= i) ++j;
      record(x.col(i).dot(x.col(j)));
    }
  }
  h.mass.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) h.mass[b] = static_cast<double>(counts[b]) / static_cast<double>(h.pairs);
  h.central_fraction = static_cast<double>(central) / static_cast<double>(h.pairs);
  return h;
}

}  // namespace selconv
