#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

namespace selconv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kNormFloor = 1e-12;

/// Returns v / ||v||, or v unchanged when ||v|| <= 1e-12.
inline Vector l2_normalize(const Vector& v) {
  const double n = v.norm();
  if (n > kNormFloor) return v / n;
  return v;
}

inline void l2_normalize_columns(Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    const double n = m.col(j).norm();
    if (n > kNormFloor) m.col(j) /= n;
  }
}

// Flip each column so that its entry of largest magnitude is positive
// (first such entry on ties).
inline void fix_eigenvector_signs(Matrix& vecs) {
  for (Index j = 0; j < vecs.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < vecs.rows(); ++i) {
      const double a = std::abs(vecs(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (vecs(arg, j) < 0.0) vecs.col(j) = -vecs.col(j);
  }
}

struct Eigensystem {
  Vector values;   // non-increasing, clamped at zero
  Matrix vectors;  // one eigenvector per row, same order as values
};

/// Eigendecomposition of a symmetric PSD matrix, largest eigenvalue first,
/// with the deterministic sign convention applied.
inline Eigensystem symmetric_eigen(const Matrix& cov) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  const Index n = cov.rows();
  Eigensystem out;
  out.values.resize(n);
  Matrix cols(n, n);
  for (Index j = 0; j < n; ++j) {
    out.values(j) = std::max(0.0, solver.eigenvalues()(n - 1 - j));
    cols.col(j) = solver.eigenvectors().col(n - 1 - j);
  }
  fix_eigenvector_signs(cols);
  out.vectors = cols.transpose();
  return out;
}

/// Sample mean and biased (1/n) covariance of the columns of `samples`.
inline std::pair<Vector, Matrix> mean_and_covariance(const Matrix& samples) {
  const double n = static_cast<double>(samples.cols());
  Vector mean = samples.rowwise().sum() / n;
  Matrix centered = samples.colwise() - mean;
  Matrix cov = (centered * centered.transpose()) / n;
  return {std::move(mean), std::move(cov)};
}

/// Seeded generator with a portable uniform draw; std distributions are
/// implementation-defined, which would break byte-for-byte reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n; }

  // Box-Muller.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace selconv
