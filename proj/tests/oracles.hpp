#pragma once

// Reference implementations written straight from the textbook definitions,
// sharing no code with the library beyond its data types.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// One-shot VLAD: accumulate x - c_q(x) into the block of the nearest centroid.
inline Vec classic_vlad(const Mat& centroids, const Mat& xs) {
  const long d = centroids.rows(), k = centroids.cols();
  Vec v = Vec::Zero(d * k);
  for (long t = 0; t < xs.cols(); ++t) {
    long best = 0;
    double best_d = INFINITY;
    for (long j = 0; j < k; ++j) {
      double s = 0.0;
      for (long i = 0; i < d; ++i) s += (xs(i, t) - centroids(i, j)) * (xs(i, t) - centroids(i, j));
      if (s < best_d) {
        best_d = s;
        best = j;
      }
    }
    for (long i = 0; i < d; ++i) v(best * d + i) += xs(i, t) - centroids(i, best);
  }
  return v;
}

// Fisher vector of a set: gradients w.r.t. means and standard deviations,
// with posteriors from direct exponentials (no log-space tricks).
inline Vec textbook_fisher(const Vec& w, const Mat& mu, const Mat& var, const Mat& xs) {
  const long d = mu.rows(), k = mu.cols();
  Vec g_mu = Vec::Zero(d * k), g_sigma = Vec::Zero(d * k);
  for (long t = 0; t < xs.cols(); ++t) {
    std::vector<double> dens(k);
    double total = 0.0;
    for (long j = 0; j < k; ++j) {
      double q = 0.0, det = 1.0;
      for (long i = 0; i < d; ++i) {
        const double r = xs(i, t) - mu(i, j);
        q += r * r / var(i, j);
        det *= 2.0 * M_PI * var(i, j);
      }
      dens[j] = w(j) * std::exp(-0.5 * q) / std::sqrt(det);
      total += dens[j];
    }
    for (long j = 0; j < k; ++j) {
      const double gamma = dens[j] / total;
      for (long i = 0; i < d; ++i) {
        const double z = (xs(i, t) - mu(i, j)) / std::sqrt(var(i, j));
        g_mu(j * d + i) += gamma * z / std::sqrt(w(j));
        g_sigma(j * d + i) += gamma * (z * z - 1.0) / std::sqrt(2.0 * w(j));
      }
    }
  }
  Vec out(2 * d * k);
  out << g_mu, g_sigma;
  return out;
}

// AP as the mean, over positives, of precision at that positive's rank in
// the junk-free list; unretrieved positives score zero. Terms are added in
// rank order so the result is comparable bit for bit.
inline double brute_force_ap(const std::vector<std::string>& ranking, const std::set<std::string>& positives,
                             const std::set<std::string>& junk) {
  std::vector<std::string> clean;
  for (const auto& id : ranking)
    if (!junk.count(id)) clean.push_back(id);
  std::vector<std::pair<long, double>> terms;
  for (const auto& p : positives) {
    auto it = std::find(clean.begin(), clean.end(), p);
    if (it == clean.end()) continue;
    const long rank = (it - clean.begin()) + 1;
    long hits = 0;
    for (long r = 0; r < rank; ++r) hits += positives.count(clean[r]) ? 1 : 0;
    terms.emplace_back(rank, static_cast<double>(hits) / static_cast<double>(rank));
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (const auto& t : terms) total += t.second;
  return total / static_cast<double>(positives.size());
}

// Per-channel argmax over a location-major W*H*K buffer; returns the set of
// 0-based row-major location indices, first maximum wins.
inline std::set<long> argmax_locations(const std::vector<float>& data, long w, long h, long k) {
  std::set<long> out;
  for (long c = 0; c < k; ++c) {
    long best = 0;
    for (long loc = 1; loc < w * h; ++loc)
      if (data[loc * k + c] > data[best * k + c]) best = loc;
    out.insert(best);
  }
  return out;
}

}  // namespace oracle
