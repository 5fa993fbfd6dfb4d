#pragma once

// Visual vocabularies: k-means centroids and diagonal-covariance GMMs.
//
// All fitting is single-threaded with fixed summation order so that the
// same samples and seed reproduce the same codebook bit for bit.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "selconv/error.hpp"
#include "selconv/linalg.hpp"

namespace selconv {

inline constexpr int kMaxCodebookIterations = 100;
inline constexpr double kKmeansChangeTolerance = 1e-4;
inline constexpr double kGmmRelativeTolerance = 1e-5;
inline constexpr double kVarianceFloor = 1e-6;

struct KmeansCodebook {
  Matrix centroids;  // dim x k

  Index k() const { return centroids.cols(); }
  Index dim() const { return centroids.rows(); }
};

struct GmmCodebook {
  Vector weights;    // k
  Matrix means;      // dim x k
  Matrix variances;  // dim x k, diagonal covariances

  Index k() const { return means.cols(); }
  Index dim() const { return means.rows(); }
};

using Codebook = std::variant<KmeansCodebook, GmmCodebook>;

struct KmeansFit {
  KmeansCodebook codebook;
  std::vector<Index> assignment;
  std::vector<double> distortion;  // after each assignment step
  int iterations = 0;
};

struct GmmFit {
  GmmCodebook codebook;
  std::vector<double> log_likelihood;  // of the parameters entering each E-step
  int iterations = 0;
};

/// Index of the closest centroid; ties resolve to the smaller index.
inline Index nearest_centroid(const KmeansCodebook& cb, const Vector& x) {
  if (x.size() != cb.dim()) throw ContractError("nearest_centroid: dimension mismatch");
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < cb.k(); ++j) {
    const double d = (x - cb.centroids.col(j)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

namespace detail {

inline Matrix kmeanspp_seed(const Matrix& x, Index k, Rng& rng) {
  const Index n = x.cols();
  Matrix c(x.rows(), k);
  c.col(0) = x.col(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2(i) = (x.col(i) - c.col(0)).squaredNorm();
  for (Index j = 1; j < k; ++j) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) total += d2(i);
    Index pick = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    c.col(j) = x.col(pick);
    for (Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), (x.col(i) - c.col(j)).squaredNorm());
  }
  return c;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Stops when fewer than 1e-4 of
/// the assignments change or after 100 iterations.
inline KmeansFit fit_kmeans_traced(const Matrix& x, Index k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("kmeans: k must be >= 1");
  const Index n = x.cols();
  if (n < k) throw ParameterError("kmeans: " + std::to_string(n) + " samples for k=" + std::to_string(k));

  Rng rng(seed);
  KmeansFit fit;
  fit.codebook.centroids = detail::kmeanspp_seed(x, k, rng);
  Matrix& c = fit.codebook.centroids;
  std::vector<Index>& assign = fit.assignment;
  assign.assign(static_cast<std::size_t>(n), -1);
  std::vector<double> dist(static_cast<std::size_t>(n), 0.0);

  for (int iter = 0; iter < kMaxCodebookIterations; ++iter) {
    Index changed = 0;
    double distortion = 0.0;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (Index j = 0; j < k; ++j) {
        const double d = (x.col(i) - c.col(j)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = j;
        }
      }
      if (assign[i] != best) ++changed;
      assign[i] = best;
      dist[i] = best_d;
      distortion += best_d;
    }
    fit.distortion.push_back(distortion);
    fit.iterations = iter + 1;
    if (iter > 0 && static_cast<double>(changed) < kKmeansChangeTolerance * static_cast<double>(n)) break;

    Matrix sums = Matrix::Zero(x.rows(), k);
    std::vector<Index> counts(static_cast<std::size_t>(k), 0);
    for (Index i = 0; i < n; ++i) {
      sums.col(assign[i]) += x.col(i);
      ++counts[assign[i]];
    }
    for (Index j = 0; j < k; ++j)
      if (counts[j] > 0) c.col(j) = sums.col(j) / static_cast<double>(counts[j]);
    // Empty clusters take the point currently farthest from its centroid.
    for (Index j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      Index far = 0;
      for (Index i = 1; i < n; ++i)
        if (dist[i] > dist[far]) far = i;
      c.col(j) = x.col(far);
      dist[far] = 0.0;
    }
  }
  return fit;
}

inline KmeansCodebook fit_kmeans(const Matrix& x, Index k, std::uint64_t seed) {
  return fit_kmeans_traced(x, k, seed).codebook;
}

namespace detail {

// log(w_i N(x; mu_i, diag var_i)) for every component.
inline Vector gmm_log_joint(const GmmCodebook& g, const Vector& x) {
  const Index k = g.k();
  Vector out(k);
  constexpr double kLog2Pi = 1.8378770664093454836;
  for (Index i = 0; i < k; ++i) {
    double acc = 0.0;
    for (Index d = 0; d < g.dim(); ++d) {
      const double var = g.variances(d, i);
      const double r = x(d) - g.means(d, i);
      acc += kLog2Pi + std::log(var) + r * r / var;
    }
    out(i) = std::log(g.weights(i)) - 0.5 * acc;
  }
  return out;
}

// Normalizes log joint values into posteriors; returns the log evidence.
inline double log_normalize(const Vector& log_joint, Vector& post) {
  const double mx = log_joint.maxCoeff();
  if (!std::isfinite(mx)) {
    post = Vector::Constant(log_joint.size(), 1.0 / static_cast<double>(log_joint.size()));
    return mx;
  }
  post = (log_joint.array() - mx).exp().matrix();
  const double s = post.sum();
  post /= s;
  return mx + std::log(s);
}

inline void gmm_m_step(const Matrix& x, const Matrix& resp, GmmCodebook& g) {
  const Index n = x.cols();
  const Index k = resp.rows();
  const Index dim = x.rows();
  Vector nk = Vector::Zero(k);
  Matrix s1 = Matrix::Zero(dim, k);
  Matrix s2 = Matrix::Zero(dim, k);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      const double r = resp(j, i);
      if (r == 0.0) continue;
      nk(j) += r;
      s1.col(j) += r * x.col(i);
    }
  }
  g.means.resize(dim, k);
  for (Index j = 0; j < k; ++j) g.means.col(j) = nk(j) > 0.0 ? Vector(s1.col(j) / nk(j)) : Vector(g.means.col(j));
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < k; ++j) {
      const double r = resp(j, i);
      if (r == 0.0) continue;
      s2.col(j) += r * (x.col(i) - g.means.col(j)).cwiseAbs2();
    }
  }
  g.variances.resize(dim, k);
  g.weights.resize(k);
  const double min_weight = 1e-12;
  for (Index j = 0; j < k; ++j) {
    for (Index d = 0; d < dim; ++d)
      g.variances(d, j) = nk(j) > 0.0 ? std::max(kVarianceFloor, s2(d, j) / nk(j)) : 1.0;
    g.weights(j) = std::max(min_weight, nk(j) / static_cast<double>(n));
  }
  g.weights /= g.weights.sum();
}

}  // namespace detail

/// Posterior responsibilities p_i(x), computed in log space.
inline Vector gmm_posteriors(const GmmCodebook& g, const Vector& x) {
  if (x.size() != g.dim()) throw ContractError("gmm_posteriors: dimension mismatch");
  Vector post;
  const double ll = detail::log_normalize(detail::gmm_log_joint(g, x), post);
  if (!std::isfinite(ll)) warn("gmm_posteriors: all components underflow; using uniform posteriors");
  return post;
}

/// EM for a diagonal GMM, initialized from k-means hard assignments.
inline GmmFit fit_gmm_traced(const Matrix& x, Index k, std::uint64_t seed) {
  if (k < 1) throw ParameterError("gmm: k must be >= 1");
  const Index n = x.cols();
  if (n < 2 * k) throw ParameterError("gmm: " + std::to_string(n) + " samples for k=" + std::to_string(k) + " (need 2k)");

  const KmeansFit km = fit_kmeans_traced(x, k, seed);
  Matrix resp = Matrix::Zero(k, n);
  for (Index i = 0; i < n; ++i) resp(km.assignment[i], i) = 1.0;

  GmmFit fit;
  fit.codebook.means = km.codebook.centroids;
  detail::gmm_m_step(x, resp, fit.codebook);

  Vector post;
  for (int iter = 0; iter < kMaxCodebookIterations; ++iter) {
    double ll = 0.0;
    for (Index i = 0; i < n; ++i) {
      ll += detail::log_normalize(detail::gmm_log_joint(fit.codebook, x.col(i)), post);
      resp.col(i) = post;
    }
    const bool converged =
        !fit.log_likelihood.empty() && ll - fit.log_likelihood.back() < kGmmRelativeTolerance * std::abs(ll);
    fit.log_likelihood.push_back(ll);
    fit.iterations = iter + 1;
    if (converged) break;
    detail::gmm_m_step(x, resp, fit.codebook);
  }
  return fit;
}

inline GmmCodebook fit_gmm(const Matrix& x, Index k, std::uint64_t seed) { return fit_gmm_traced(x, k, seed).codebook; }

}  // namespace selconv
