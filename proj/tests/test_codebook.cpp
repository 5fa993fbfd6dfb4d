#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "selconv/codebook.hpp"

using namespace selconv;

namespace {

Matrix points(std::initializer_list<std::initializer_list<double>> cols) {
  const Index d = static_cast<Index>(cols.begin()->size());
  Matrix m(d, static_cast<Index>(cols.size()));
  Index j = 0;
  for (const auto& c : cols) {
    Index i = 0;
    for (double v : c) m(i++, j) = v;
    ++j;
  }
  return m;
}

Matrix blobs(Rng& rng, const Matrix& centers, Index per_blob, double sd) {
  Matrix x(centers.rows(), centers.cols() * per_blob);
  for (Index b = 0; b < centers.cols(); ++b)
    for (Index i = 0; i < per_blob; ++i)
      for (Index d = 0; d < centers.rows(); ++d) x(d, b * per_blob + i) = centers(d, b) + sd * rng.normal();
  return x;
}

// Sorts centroid columns lexicographically so order does not matter.
Matrix sorted_columns(const Matrix& m) {
  std::vector<Vector> cols;
  for (Index j = 0; j < m.cols(); ++j) cols.emplace_back(m.col(j));
  std::sort(cols.begin(), cols.end(), [](const Vector& a, const Vector& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  });
  Matrix out(m.rows(), m.cols());
  for (Index j = 0; j < m.cols(); ++j) out.col(j) = cols[static_cast<std::size_t>(j)];
  return out;
}

}  // namespace

TEST(Kmeans, ObviousPartition) {
  const Matrix x = points({{0, 0}, {0, 1}, {10, 10}, {10, 11}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix c = sorted_columns(fit_kmeans(x, 2, seed).centroids);
    EXPECT_TRUE(c.isApprox(points({{0, 0.5}, {10, 10.5}}), 1e-6)) << "seed " << seed;
  }
}

TEST(Kmeans, SingleClusterIsMean) {
  Rng rng(1);
  const Matrix x = blobs(rng, Matrix::Zero(3, 1), 50, 1.0);
  const KmeansCodebook cb = fit_kmeans(x, 1, 0);
  EXPECT_LE((cb.centroids.col(0) - x.rowwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Kmeans, KEqualsSampleCount) {
  const Matrix x = points({{0, 0}, {1, 5}, {-3, 2}, {7, 7}});
  const KmeansFit fit = fit_kmeans_traced(x, 4, 3);
  EXPECT_EQ(fit.distortion.back(), 0.0);
  EXPECT_EQ(sorted_columns(fit.codebook.centroids), sorted_columns(x));
}

TEST(Kmeans, TooFewSamples) {
  EXPECT_THROW(fit_kmeans(points({{0}, {1}}), 3, 0), ParameterError);
  EXPECT_THROW(fit_kmeans(points({{0}, {1}}), 0, 0), ParameterError);
}

TEST(Kmeans, DistortionNonIncreasingAndDeterministic) {
  Rng rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x(4, 300);
    for (Index j = 0; j < x.cols(); ++j)
      for (Index i = 0; i < 4; ++i) x(i, j) = rng.normal();
    const KmeansFit a = fit_kmeans_traced(x, 12, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < a.distortion.size(); ++i) ASSERT_LE(a.distortion[i], a.distortion[i - 1]);
    const KmeansFit b = fit_kmeans_traced(x, 12, static_cast<std::uint64_t>(trial));
    ASSERT_EQ(a.codebook.centroids, b.codebook.centroids);
  }
}

TEST(Kmeans, DuplicatePointsStillFill) {
  // Only 2 distinct points for k=3: some cluster must be reseeded.
  const Matrix x = points({{0, 0}, {0, 0}, {0, 0}, {5, 5}, {5, 5}});
  const KmeansCodebook cb = fit_kmeans(x, 3, 1);
  EXPECT_TRUE(cb.centroids.allFinite());
  EXPECT_EQ(cb.k(), 3);
}

TEST(NearestCentroid, Rules) {
  const KmeansCodebook cb{points({{0}, {10}})};
  EXPECT_EQ(nearest_centroid(cb, Vector::Constant(1, 1.0)), 0);
  EXPECT_EQ(nearest_centroid(cb, Vector::Constant(1, 5.0)), 0);  // tie
  EXPECT_EQ(nearest_centroid(cb, Vector::Constant(1, 10.0)), 1);
  EXPECT_THROW(nearest_centroid(cb, Vector::Zero(2)), ContractError);
}

TEST(Gmm, SingleComponentFixedPoint) {
  Rng rng(3);
  Matrix x(2, 400);
  for (Index j = 0; j < 400; ++j) x.col(j) << 1.0 + rng.normal(), -2.0 + 3.0 * rng.normal();
  const GmmCodebook g = fit_gmm(x, 1, 0);
  const Vector mean = x.rowwise().mean();
  const Vector var = (x.colwise() - mean).cwiseAbs2().rowwise().mean();
  EXPECT_NEAR(g.weights(0), 1.0, 1e-12);
  EXPECT_LE((g.means.col(0) - mean).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LE((g.variances.col(0) - var).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Gmm, SeparatedBlobs) {
  Rng rng(4);
  const Matrix centers = points({{-3, 0}, {3, 1}});
  const Matrix x = blobs(rng, centers, 2000, 0.5);
  const GmmFit fit = fit_gmm_traced(x, 2, 0);
  const Matrix means = sorted_columns(fit.codebook.means);
  EXPECT_LE((means - centers).cwiseAbs().maxCoeff(), 0.05);
  EXPECT_NEAR(fit.codebook.weights.sum(), 1.0, 1e-6);
}

TEST(Gmm, LogLikelihoodNonDecreasing) {
  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix x(3, 500);
    for (Index j = 0; j < x.cols(); ++j)
      for (Index i = 0; i < 3; ++i) x(i, j) = rng.normal() + (j % 3 == 0 ? 2.0 : 0.0);
    const GmmFit fit = fit_gmm_traced(x, 4, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i)
      ASSERT_GE(fit.log_likelihood[i], fit.log_likelihood[i - 1] - 1e-8 * std::abs(fit.log_likelihood[i - 1]));
    const GmmFit again = fit_gmm_traced(x, 4, static_cast<std::uint64_t>(trial));
    ASSERT_EQ(fit.codebook.means, again.codebook.means);
    ASSERT_EQ(fit.codebook.variances, again.codebook.variances);
  }
}

TEST(Gmm, IdenticalPointsHitFloor) {
  const Matrix x = Matrix::Constant(2, 10, 0.25);
  const GmmCodebook g = fit_gmm(x, 2, 0);
  EXPECT_EQ(g.variances.maxCoeff(), kVarianceFloor);
  EXPECT_NEAR(g.weights.sum(), 1.0, 1e-6);
  EXPECT_GT(g.weights.minCoeff(), 0.0);
}

TEST(Gmm, TooFewSamples) { EXPECT_THROW(fit_gmm(Matrix::Zero(2, 5), 3, 0), ParameterError); }

TEST(Gmm, OneEmStepMatchesHandComputation) {
  // 1-D, four points, two components: one E-step then one M-step by hand.
  const Matrix x = points({{0}, {1}, {4}, {5}});
  GmmCodebook g;
  g.weights = (Vector(2) << 0.5, 0.5).finished();
  g.means = points({{0.5}, {4.5}});
  g.variances = points({{1.0}, {1.0}});
  Matrix resp(2, 4);
  for (Index i = 0; i < 4; ++i) {
    const double a = std::exp(-0.5 * std::pow(x(0, i) - 0.5, 2));
    const double b = std::exp(-0.5 * std::pow(x(0, i) - 4.5, 2));
    resp(0, i) = a / (a + b);
    resp(1, i) = b / (a + b);
    const Vector p = gmm_posteriors(g, x.col(i));
    EXPECT_NEAR(p(0), resp(0, i), 1e-12);
  }
  GmmCodebook next = g;
  detail::gmm_m_step(x, resp, next);
  const double n0 = resp.row(0).sum();
  const double m0 = (resp.row(0).array() * x.row(0).array()).sum() / n0;
  const double v0 = (resp.row(0).array() * (x.row(0).array() - m0).square()).sum() / n0;
  EXPECT_NEAR(next.weights(0), n0 / 4.0, 1e-12);
  EXPECT_NEAR(next.means(0, 0), m0, 1e-12);
  EXPECT_NEAR(next.variances(0, 0), v0, 1e-12);
}

TEST(GmmPosteriors, Examples) {
  GmmCodebook one{Vector::Ones(1), Matrix::Zero(2, 1), Matrix::Ones(2, 1)};
  EXPECT_EQ(gmm_posteriors(one, (Vector(2) << 100, -7).finished()), Vector::Ones(1));

  GmmCodebook two{Vector::Constant(2, 0.5), points({{-1, 0}, {1, 0}}), Matrix::Ones(2, 2)};
  const Vector mid = gmm_posteriors(two, Vector::Zero(2));
  EXPECT_NEAR(mid(0), 0.5, 1e-9);
  EXPECT_NEAR(mid(1), 0.5, 1e-9);

  GmmCodebook far{Vector::Constant(2, 0.5), points({{0, 0}, {10, 0}}), Matrix::Ones(2, 2)};
  EXPECT_GT(gmm_posteriors(far, Vector::Zero(2))(0), 0.999);
}

TEST(GmmPosteriors, StableFarFromEverything) {
  GmmCodebook g{Vector::Constant(2, 0.5), points({{0}, {1}}), Matrix::Constant(1, 2, 1e-6)};
  const Vector p = gmm_posteriors(g, Vector::Constant(1, 1e4));
  EXPECT_TRUE(p.allFinite());
  EXPECT_NEAR(p.sum(), 1.0, 1e-9);
  EXPECT_NEAR(p(1), 1.0, 1e-9);
}

TEST(GmmPosteriors, SumToOne) {
  Rng rng(6);
  Matrix x(3, 200);
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < 3; ++i) x(i, j) = rng.normal();
  const GmmCodebook g = fit_gmm(x, 5, 1);
  for (Index j = 0; j < x.cols(); ++j) {
    const Vector p = gmm_posteriors(g, x.col(j));
    ASSERT_NEAR(p.sum(), 1.0, 1e-9);
    ASSERT_GE(p.minCoeff(), 0.0);
  }
}
