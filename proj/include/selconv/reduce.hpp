#pragma once

// PCA compression of local features followed by l2 normalization.

#include <span>
#include <string>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"
#include "selconv/masking.hpp"

namespace selconv {

struct PcaModel {
  Vector mean;         // input_dim
  Matrix projection;   // output_dim x input_dim, orthonormal rows
  Vector eigenvalues;  // output_dim, non-increasing

  Index input_dim() const { return projection.cols(); }
  Index output_dim() const { return projection.rows(); }
};

/// Concatenates the columns of several feature sets.
inline Matrix stack_features(std::span<const FeatureSet> sets) {
  Index dim = -1;
  Index total = 0;
  for (const auto& s : sets) {
    if (s.size() == 0) continue;
    if (dim >= 0 && s.dim() != dim) throw ContractError("feature sets have different dimensions");
    dim = s.dim();
    total += static_cast<Index>(s.size());
  }
  Matrix out(dim < 0 ? 0 : dim, total);
  Index col = 0;
  for (const auto& s : sets) {
    if (s.size() == 0) continue;
    out.middleCols(col, s.vectors.cols()) = s.vectors;
    col += s.vectors.cols();
  }
  return out;
}

/// Fits PCA on the columns of `samples`, keeping `d` components.
inline PcaModel fit_pca(const Matrix& samples, Index d) {
  if (d < 1) throw ParameterError("pca: d must be >= 1");
  if (d > samples.rows())
    throw ParameterError("pca: d=" + std::to_string(d) + " exceeds input dimension " + std::to_string(samples.rows()));
  if (d > samples.cols())
    throw ParameterError("pca: d=" + std::to_string(d) + " exceeds sample count " + std::to_string(samples.cols()));

  auto [mean, cov] = mean_and_covariance(samples);
  Eigensystem eig = symmetric_eigen(cov);

  const double tol = 1e-12 * std::max(1.0, eig.values(0));
  Index nonzero = 0;
  for (Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) > tol) ++nonzero;
  if (nonzero < d)
    warn("pca: only " + std::to_string(nonzero) + " non-zero eigenvalues for d=" + std::to_string(d) +
         "; remaining components complete an orthonormal basis");

  PcaModel model;
  model.mean = std::move(mean);
  model.projection = eig.vectors.topRows(d);
  model.eigenvalues = eig.values.head(d);
  return model;
}

inline PcaModel fit_pca(std::span<const FeatureSet> sets, Index d) { return fit_pca(stack_features(sets), d); }

/// l2-normalized projection of one feature.
inline Vector reduce_feature(const PcaModel& model, const Vector& x) {
  if (x.size() != model.input_dim())
    throw ContractError("reduce: expected dimension " + std::to_string(model.input_dim()) + ", got " +
                        std::to_string(x.size()));
  return l2_normalize(model.projection * (x - model.mean));
}

/// Column-wise reduce_feature.
inline Matrix reduce_features(const PcaModel& model, const Matrix& xs) {
  if (xs.rows() != model.input_dim())
    throw ContractError("reduce: expected dimension " + std::to_string(model.input_dim()) + ", got " +
                        std::to_string(xs.rows()));
  Matrix out = model.projection * (xs.colwise() - model.mean);
  l2_normalize_columns(out);
  return out;
}

}  // namespace selconv
