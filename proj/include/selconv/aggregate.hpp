#pragma once

// Pooling of an embedded set into one vector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "selconv/embed.hpp"
#include "selconv/error.hpp"
#include "selconv/linalg.hpp"

namespace selconv {

enum class PoolMode { sum, avg, max, democratic };

inline std::string to_string(PoolMode m) {
  switch (m) {
    case PoolMode::sum: return "sum";
    case PoolMode::avg: return "avg";
    case PoolMode::max: return "max";
    case PoolMode::democratic: return "democratic";
  }
  return "sum";
}

inline PoolMode parse_pool_mode(const std::string& s) {
  if (s == "sum") return PoolMode::sum;
  if (s == "avg") return PoolMode::avg;
  if (s == "max") return PoolMode::max;
  if (s == "democratic") return PoolMode::democratic;
  throw ParameterError("unknown pool mode: " + s);
}

inline constexpr int kDemocraticDefaultIterations = 10;
inline constexpr double kDemocraticTarget = 1.0;
inline constexpr double kDemocraticEpsilon = 1e-10;
inline constexpr double kDemocraticTolerance = 1e-6;
inline constexpr Index kDemocraticNewtonLimit = 1024;

/// Elementwise sum, mean or max over the columns. PoolMode::democratic is
/// handled by pool_democratic.
inline Vector pool(const Matrix& vectors, PoolMode mode) {
  if (vectors.cols() == 0) throw EmptyInputError("pool: empty set");
  switch (mode) {
    case PoolMode::sum: return vectors.rowwise().sum();
    case PoolMode::avg: return vectors.rowwise().sum() / static_cast<double>(vectors.cols());
    case PoolMode::max: return vectors.rowwise().maxCoeff();
    case PoolMode::democratic: break;
  }
  throw ParameterError("pool: use pool_democratic for democratic aggregation");
}

inline Vector pool(const EmbeddedSet& set, PoolMode mode) { return pool(set.vectors, mode); }

struct DemocraticSolution {
  Vector weights;        // lambda, one per feature
  double target = kDemocraticTarget;
  double residual = 0.0; // max_i |lambda_i (K lambda)_i - C| over non-zero features
  int iterations = 0;
};

/// Weights lambda balancing every feature's contribution lambda_i (K lambda)_i
/// to the pooled self-similarity.
///
/// Each iteration first proposes the symmetric Sinkhorn step
///   lambda_i <- lambda_i / sqrt(max(s_i, eps) / C),  s_i = lambda_i (K lambda)_i
/// The balanced lambda is the unique minimizer of the convex function
///   f(lambda) = 1/2 lambda^T K lambda - C sum_i log lambda_i
/// (K positive definite). The Sinkhorn step is kept whenever every s_i is
/// positive, it at least halves the balance residual and it sufficiently
/// decreases f. Otherwise, which happens on kernels with many
/// negative entries where the plain step oscillates, a damped Newton step
/// on f is taken instead (sets up to kDemocraticNewtonLimit features) or
/// the Sinkhorn step is halved until f decreases.
///
/// Zero vectors cannot be balanced; they keep weight 1 and are excluded
/// from the residual. On rank-deficient kernels f may be unbounded and the
/// iterates drift off; the iterate with the smallest residual is returned.
inline DemocraticSolution democratic_weights(const Matrix& vectors, int max_iter = kDemocraticDefaultIterations) {
  const Index n = vectors.cols();
  if (n == 0) throw EmptyInputError("democratic_weights: empty set");
  if (max_iter < 0) throw ParameterError("democratic_weights: negative iteration count");

  DemocraticSolution sol;
  Vector active(n);
  for (Index i = 0; i < n; ++i) active(i) = vectors.col(i).norm() > kNormFloor ? 1.0 : 0.0;
  if (active.sum() == 0.0) throw DegenerateError("democratic_weights: all embedded vectors are zero");

  if (n == 1) {
    sol.weights = Vector::Constant(1, 1.0 / vectors.col(0).norm());
    sol.residual = 0.0;
    return sol;
  }

  const Matrix kernel = vectors.transpose() * vectors;
  auto objective = [&](const Vector& lambda, const Vector& kl) {
    double logs = 0.0;
    for (Index i = 0; i < n; ++i)
      if (active(i) > 0.0) logs += std::log(lambda(i));
    return 0.5 * lambda.dot(kl) - kDemocraticTarget * logs;
  };
  constexpr double kArmijo = 1e-4;
  constexpr double kSinkhornContraction = 0.5;

  Vector lambda = Vector::Ones(n);
  Vector kl = kernel * lambda;
  Vector best = lambda;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    double residual = 0.0;
    for (Index i = 0; i < n; ++i)
      if (active(i) > 0.0) residual = std::max(residual, std::abs(lambda(i) * kl(i) - kDemocraticTarget));
    if (residual < best_residual) {
      best_residual = residual;
      best = lambda;
    }
    if (residual < kDemocraticTolerance || it == max_iter) break;
    sol.iterations = it + 1;

    // Gradient of f with respect to lambda; inactive entries stay fixed.
    Vector grad = Vector::Zero(n);
    for (Index i = 0; i < n; ++i)
      if (active(i) > 0.0) grad(i) = kl(i) - kDemocraticTarget / lambda(i);
    const double f0 = objective(lambda, kl);

    Vector scale = Vector::Ones(n);  // multiplicative Sinkhorn update
    bool skipped = false;
    for (Index i = 0; i < n; ++i) {
      const double s = lambda(i) * kl(i);
      if (active(i) == 0.0) continue;
      if (s <= 0.0) {
        skipped = true;
        continue;
      }
      scale(i) = 1.0 / std::sqrt(std::max(s, kDemocraticEpsilon) / kDemocraticTarget);
    }
    if (!skipped) {
      Vector trial = lambda.cwiseProduct(scale);
      Vector trial_kl = kernel * trial;
      double trial_residual = 0.0;
      for (Index i = 0; i < n; ++i)
        if (active(i) > 0.0)
          trial_residual = std::max(trial_residual, std::abs(trial(i) * trial_kl(i) - kDemocraticTarget));
      if (trial_residual <= kSinkhornContraction * residual &&
          objective(trial, trial_kl) <= f0 + kArmijo * grad.dot(trial - lambda)) {
        lambda = std::move(trial);
        kl = std::move(trial_kl);
        continue;
      }
    }

    Vector dir;
    if (n <= kDemocraticNewtonLimit) {
      Matrix hess = kernel;
      for (Index i = 0; i < n; ++i) {
        if (active(i) > 0.0) {
          hess(i, i) += kDemocraticTarget / (lambda(i) * lambda(i));
        } else {
          hess.row(i).setZero();
          hess.col(i).setZero();
          hess(i, i) = 1.0;
        }
      }
      dir = -hess.ldlt().solve(grad);
      if (!dir.allFinite() || grad.dot(dir) >= 0.0) dir = lambda.cwiseProduct(scale) - lambda;
    } else {
      dir = lambda.cwiseProduct(scale) - lambda;
    }
    // Stay inside lambda > 0.
    double t = 1.0;
    for (Index i = 0; i < n; ++i)
      if (dir(i) < 0.0) t = std::min(t, -0.99 * lambda(i) / dir(i));
    const double slope = grad.dot(dir);
    Vector trial, trial_kl;
    for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
      trial = lambda + t * dir;
      trial_kl = kernel * trial;
      if (objective(trial, trial_kl) <= f0 + kArmijo * t * slope) break;
    }
    lambda = std::move(trial);
    kl = std::move(trial_kl);
  }
  sol.residual = best_residual;
  sol.weights = std::move(best);
  return sol;
}

inline DemocraticSolution democratic_weights(const EmbeddedSet& set, int max_iter = kDemocraticDefaultIterations) {
  return democratic_weights(set.vectors, max_iter);
}

/// Sum of lambda_i * phi_i with democratic weights.
inline Vector pool_democratic(const Matrix& vectors, int max_iter = kDemocraticDefaultIterations) {
  const DemocraticSolution sol = democratic_weights(vectors, max_iter);
  return vectors * sol.weights;
}

inline Vector pool_democratic(const EmbeddedSet& set, int max_iter = kDemocraticDefaultIterations) {
  return pool_democratic(set.vectors, max_iter);
}

/// Pooling by mode, democratic included.
inline Vector aggregate(const Matrix& vectors, PoolMode mode, int democratic_iters = kDemocraticDefaultIterations) {
  if (mode == PoolMode::democratic) return pool_democratic(vectors, democratic_iters);
  return pool(vectors, mode);
}

}  // namespace selconv
