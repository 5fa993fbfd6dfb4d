#pragma once

// Power-law normalization, learned rotation/whitening and head truncation.
//
// Applied to an aggregated vector in this order:
//   [F-FAemb head truncation] -> power law + l2 -> rotate/whiten
//   -> drop truncate_head leading components -> l2

#include <cmath>
#include <span>
#include <string>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"

namespace selconv {

inline constexpr double kWhitenRegularizer = 1e-6;

struct PostprocessParams {
  double pn_alpha = 0.5;
  bool whiten = true;
  Index truncate_head = 0;
};

struct RotationModel {
  Vector mean;
  Matrix rotation;     // input_dim x input_dim, eigenvectors as rows
  Vector eigenvalues;  // non-increasing
  bool whiten = true;
  double regularizer = kWhitenRegularizer;
  Index truncate_head = 0;

  Index input_dim() const { return rotation.cols(); }
  Index output_dim() const { return rotation.rows() - truncate_head; }
};

/// sign(x)|x|^alpha elementwise (0^0 taken as 0), then l2 normalization.
inline Vector power_law(const Vector& v, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ParameterError("power_law: alpha must lie in [0, 1]");
  Vector out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double x = v(i);
    if (x == 0.0) {
      out(i) = 0.0;
    } else {
      const double m = std::pow(std::abs(x), alpha);
      out(i) = x < 0.0 ? -m : m;
    }
  }
  return l2_normalize(out);
}

/// Drops the leading d(d+1) entries of an aggregated F-FAemb vector.
inline Vector truncate_ffaemb(const Vector& v, Index d) {
  const Index drop = d * (d + 1);
  if (v.size() <= drop)
    throw ContractError("truncate_ffaemb: vector of length " + std::to_string(v.size()) + " cannot drop " +
                        std::to_string(drop) + " entries");
  return v.tail(v.size() - drop);
}

/// Learns the eigenbasis of the training vectors (columns of `train`).
inline RotationModel fit_rotation(const Matrix& train, bool whiten, Index truncate_head) {
  if (train.cols() < 2) throw ParameterError("fit_rotation: need at least 2 training vectors");
  if (truncate_head < 0 || truncate_head >= train.rows())
    throw ParameterError("fit_rotation: truncate_head must be smaller than the input dimension");
  auto [mean, cov] = mean_and_covariance(train);
  Eigensystem eig = symmetric_eigen(cov);
  RotationModel m;
  m.mean = std::move(mean);
  m.rotation = std::move(eig.vectors);
  m.eigenvalues = std::move(eig.values);
  m.whiten = whiten;
  m.truncate_head = truncate_head;
  return m;
}

/// Identity rotation: no centering, no whitening, no truncation.
inline RotationModel identity_rotation(Index dim) {
  RotationModel m;
  m.mean = Vector::Zero(dim);
  m.rotation = Matrix::Identity(dim, dim);
  m.eigenvalues = Vector::Ones(dim);
  m.whiten = false;
  return m;
}

inline Vector apply_rotation(const RotationModel& m, const Vector& v) {
  if (v.size() != m.input_dim())
    throw ContractError("apply_rotation: expected dimension " + std::to_string(m.input_dim()) + ", got " +
                        std::to_string(v.size()));
  Vector r = m.rotation * (v - m.mean);
  if (m.whiten) r = (r.array() / (m.eigenvalues.array() + m.regularizer).sqrt()).matrix();
  return l2_normalize(Vector(r.tail(r.size() - m.truncate_head)));
}

}  // namespace selconv
