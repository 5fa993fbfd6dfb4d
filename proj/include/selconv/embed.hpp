#pragma once

// Per-feature embeddings. Each maps one reduced local feature to a
// high-dimensional vector; summing them over an image reproduces the
// classic aggregated form, and any other pooling can be used instead.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "selconv/codebook.hpp"
#include "selconv/error.hpp"
#include "selconv/linalg.hpp"

namespace selconv {

enum class EmbeddingMethod { fv, vlad, temb, ffaemb };

inline std::string to_string(EmbeddingMethod m) {
  switch (m) {
    case EmbeddingMethod::fv: return "fv";
    case EmbeddingMethod::vlad: return "vlad";
    case EmbeddingMethod::temb: return "temb";
    case EmbeddingMethod::ffaemb: return "ffaemb";
  }
  return "temb";
}

inline EmbeddingMethod parse_embedding(const std::string& s) {
  if (s == "fv") return EmbeddingMethod::fv;
  if (s == "vlad") return EmbeddingMethod::vlad;
  if (s == "temb") return EmbeddingMethod::temb;
  if (s == "ffaemb") return EmbeddingMethod::ffaemb;
  throw ParameterError("unknown embedding method: " + s);
}

struct EmbeddedSet {
  Matrix vectors;  // D_emb x n
  EmbeddingMethod method = EmbeddingMethod::temb;

  Index dim() const { return vectors.rows(); }
  Index size() const { return vectors.cols(); }
};

inline Index embedding_dim(EmbeddingMethod m, Index d, Index k) {
  switch (m) {
    case EmbeddingMethod::fv: return 2 * k * d;
    case EmbeddingMethod::vlad:
    case EmbeddingMethod::temb: return d * k;
    case EmbeddingMethod::ffaemb: return k * d * (d + 1) / 2;
  }
  return 0;
}

namespace detail {

inline void check_dim(Index got, Index want, const char* what) {
  if (got != want)
    throw ContractError(std::string(what) + ": expected dimension " + std::to_string(want) + ", got " +
                        std::to_string(got));
}

}  // namespace detail

/// Fisher vector of one feature: all first-order blocks u_i, then all
/// second-order blocks v_i.
inline Vector embed_fv(const GmmCodebook& g, const Vector& x) {
  detail::check_dim(x.size(), g.dim(), "embed_fv");
  const Index d = g.dim();
  const Index k = g.k();
  const Vector p = gmm_posteriors(g, x);
  Vector out = Vector::Zero(2 * k * d);
  for (Index i = 0; i < k; ++i) {
    const Vector z = ((x - g.means.col(i)).array() / g.variances.col(i).array().sqrt()).matrix();
    const double su = p(i) / std::sqrt(g.weights(i));
    const double sv = p(i) / std::sqrt(2.0 * g.weights(i));
    out.segment(i * d, d) = su * z;
    out.segment((k + i) * d, d) = sv * (z.array().square() - 1.0).matrix();
  }
  return out;
}

/// Residual to the nearest centroid in that centroid's block, zeros elsewhere.
inline Vector embed_vlad(const KmeansCodebook& cb, const Vector& x) {
  detail::check_dim(x.size(), cb.dim(), "embed_vlad");
  const Index d = cb.dim();
  Vector out = Vector::Zero(d * cb.k());
  const Index j = nearest_centroid(cb, x);
  out.segment(j * d, d) = x - cb.centroids.col(j);
  return out;
}

/// Unit residual direction to every centroid (triangulation embedding).
inline Vector embed_temb(const KmeansCodebook& cb, const Vector& x) {
  detail::check_dim(x.size(), cb.dim(), "embed_temb");
  const Index d = cb.dim();
  Vector out = Vector::Zero(d * cb.k());
  for (Index i = 0; i < cb.k(); ++i) {
    const Vector r = x - cb.centroids.col(i);
    const double n = r.norm();
    if (n >= kNormFloor) out.segment(i * d, d) = r / n;
  }
  return out;
}

/// Upper triangle of a symmetric matrix, row-major, off-diagonal entries
/// scaled by sqrt(2) so that <V(A), V(B)> equals the Frobenius product.
inline Vector flatten_symmetric(const Matrix& a) {
  const Index d = a.rows();
  Vector out(d * (d + 1) / 2);
  Index pos = 0;
  for (Index r = 0; r < d; ++r) {
    out(pos++) = a(r, r);
    for (Index c = r + 1; c < d; ++c) out(pos++) = std::sqrt(2.0) * a(r, c);
  }
  return out;
}

/// Local coding weights: supported on the m nearest centroids, minimizing
/// ||x - sum g_i c_i||^2 + mu ||g||^2 subject to sum g_i = 1.
inline Vector local_coding_weights(const KmeansCodebook& cb, const Vector& x, Index m, double mu) {
  detail::check_dim(x.size(), cb.dim(), "local_coding_weights");
  const Index k = cb.k();
  if (m < 1 || m > k) throw ParameterError("ffaemb: m must satisfy 1 <= m <= k");

  std::vector<Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  Vector dist(k);
  for (Index i = 0; i < k; ++i) dist(i) = (x - cb.centroids.col(i)).squaredNorm();
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return dist(a) < dist(b); });

  Matrix z(cb.dim(), m);  // shifted support, one column per centroid
  for (Index j = 0; j < m; ++j) z.col(j) = cb.centroids.col(order[j]) - x;
  Matrix c = z.transpose() * z;
  c.diagonal().array() += mu;
  Vector sol = c.ldlt().solve(Vector::Ones(m));
  const double s = sol.sum();
  Vector gamma = Vector::Zero(k);
  if (!sol.allFinite() || std::abs(s) < 1e-300) {
    warn("ffaemb: singular local system; using uniform weights on the support");
    for (Index j = 0; j < m; ++j) gamma(order[j]) = 1.0 / static_cast<double>(m);
    return gamma;
  }
  for (Index j = 0; j < m; ++j) gamma(order[j]) = sol(j) / s;
  return gamma;
}

inline constexpr Index kFfaembDefaultSupport = 5;
inline constexpr double kFfaembDefaultMu = 1e-4;

/// Second-order local embedding: gamma_i(x) * V((x - c_i)(x - c_i)^T) per centroid.
inline Vector embed_ffaemb(const KmeansCodebook& cb, const Vector& x, Index m = kFfaembDefaultSupport,
                           double mu = kFfaembDefaultMu) {
  const Vector gamma = local_coding_weights(cb, x, m, mu);
  const Index d = cb.dim();
  const Index block = d * (d + 1) / 2;
  Vector out = Vector::Zero(cb.k() * block);
  for (Index i = 0; i < cb.k(); ++i) {
    if (gamma(i) == 0.0) continue;
    const Vector r = x - cb.centroids.col(i);
    out.segment(i * block, block) = gamma(i) * flatten_symmetric(r * r.transpose());
  }
  return out;
}

struct EmbedParams {
  EmbeddingMethod method = EmbeddingMethod::temb;
  Index ffaemb_m = kFfaembDefaultSupport;
  double ffaemb_mu = kFfaembDefaultMu;
};

/// Embeds every column of `features`.
inline EmbeddedSet embed_set(const Codebook& codebook, const Matrix& features, const EmbedParams& params) {
  EmbeddedSet out;
  out.method = params.method;
  const Index n = features.cols();
  auto run = [&](auto&& fn, Index dim) {
    out.vectors.resize(dim, n);
    for (Index i = 0; i < n; ++i) out.vectors.col(i) = fn(Vector(features.col(i)));
  };
  if (params.method == EmbeddingMethod::fv) {
    const auto* g = std::get_if<GmmCodebook>(&codebook);
    if (!g) throw ParameterError("fv embedding requires a GMM codebook");
    run([&](const Vector& x) { return embed_fv(*g, x); }, embedding_dim(params.method, g->dim(), g->k()));
    return out;
  }
  const auto* km = std::get_if<KmeansCodebook>(&codebook);
  if (!km) throw ParameterError(to_string(params.method) + " embedding requires a k-means codebook");
  const Index dim = embedding_dim(params.method, km->dim(), km->k());
  switch (params.method) {
    case EmbeddingMethod::vlad: run([&](const Vector& x) { return embed_vlad(*km, x); }, dim); break;
    case EmbeddingMethod::temb: run([&](const Vector& x) { return embed_temb(*km, x); }, dim); break;
    case EmbeddingMethod::ffaemb:
      run([&](const Vector& x) { return embed_ffaemb(*km, x, params.ffaemb_m, params.ffaemb_mu); }, dim);
      break;
    case EmbeddingMethod::fv: break;
  }
  return out;
}

}  // namespace selconv
