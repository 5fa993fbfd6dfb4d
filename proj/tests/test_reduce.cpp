#include <gtest/gtest.h>

#include <cmath>

#include "selconv/reduce.hpp"

using namespace selconv;

namespace {

Matrix gaussian(Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

}  // namespace

TEST(L2Normalize, Examples) {
  EXPECT_TRUE(l2_normalize((Vector(2) << 3, 4).finished()).isApprox((Vector(2) << 0.6, 0.8).finished(), 1e-15));
  EXPECT_EQ(l2_normalize(Vector::Zero(2)), Vector::Zero(2));
  const Vector u = (Vector(3) << 0, 1, 0).finished();
  EXPECT_EQ(l2_normalize(u), u);
}

TEST(Pca, RankOneDirection) {
  Matrix x(2, 200);
  for (Index j = 0; j < 200; ++j) {
    const double t = (j - 99.5) / 10.0;
    x.col(j) << 1.0 + t / std::sqrt(2.0), -2.0 + t / std::sqrt(2.0);
  }
  ScopedWarningHandler quiet([](std::string_view) {});
  const PcaModel m = fit_pca(x, 1);
  EXPECT_NEAR(m.projection(0, 0), std::sqrt(0.5), 1e-3);
  EXPECT_NEAR(m.projection(0, 1), std::sqrt(0.5), 1e-3);
}

TEST(Pca, AxisAlignedGivesSignedPermutation) {
  Rng rng(2);
  Matrix x = gaussian(rng, 3, 5000);
  x.row(0) *= 1.0;
  x.row(1) *= 3.0;
  x.row(2) *= 2.0;
  // exact axis alignment: zero the cross terms by symmetrizing the sample
  Matrix sym(3, 2 * 5000 * 4);
  Index c = 0;
  for (Index j = 0; j < 5000; ++j)
    for (int sa : {-1, 1})
      for (int sb : {-1, 1}) {
        sym.col(c) << x(0, j), sa * x(1, j), sb * x(2, j);
        ++c;
        sym.col(c) << -x(0, j), sa * x(1, j), sb * x(2, j);
        ++c;
      }
  const PcaModel m = fit_pca(sym, 3);
  const Matrix a = m.projection.cwiseAbs();
  EXPECT_NEAR(a(0, 1), 1.0, 1e-9);
  EXPECT_NEAR(a(1, 2), 1.0, 1e-9);
  EXPECT_NEAR(a(2, 0), 1.0, 1e-9);
  EXPECT_NEAR(a.sum(), 3.0, 1e-8);
}

TEST(Pca, ParameterErrors) {
  Rng rng(4);
  const Matrix x = gaussian(rng, 5, 3);
  EXPECT_THROW(fit_pca(x, 4), ParameterError);  // more than samples
  EXPECT_THROW(fit_pca(x, 0), ParameterError);
  EXPECT_THROW(fit_pca(gaussian(rng, 2, 10), 3), ParameterError);  // more than K
}

TEST(Pca, OrthonormalSortedAndSignFixed) {
  Rng rng(5);
  const Matrix mix = gaussian(rng, 12, 12);
  const Matrix x = mix * gaussian(rng, 12, 800);
  const PcaModel m = fit_pca(x, 8);
  EXPECT_LE((m.projection * m.projection.transpose() - Matrix::Identity(8, 8)).cwiseAbs().maxCoeff(), 1e-5);
  for (Index i = 1; i < 8; ++i) EXPECT_GE(m.eigenvalues(i - 1), m.eigenvalues(i));
  for (Index i = 0; i < 8; ++i) {
    Index arg = 0;
    m.projection.row(i).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(m.projection(i, arg), 0.0);
  }
  EXPECT_GE(m.eigenvalues.minCoeff(), 0.0);
}

TEST(Pca, RecoversKnownEigenvalues) {
  Rng rng(6);
  const Vector sd = (Vector(4) << 3.0, 2.0, 1.0, 0.5).finished();
  Matrix q = gaussian(rng, 4, 4).householderQr().householderQ();
  const Matrix x = q * sd.asDiagonal() * gaussian(rng, 4, 10000);
  const PcaModel m = fit_pca(x, 4);
  for (Index i = 0; i < 4; ++i) EXPECT_NEAR(m.eigenvalues(i), sd(i) * sd(i), 0.05 * sd(i) * sd(i));
}

TEST(Pca, DegenerateDataWarnsAndCompletesBasis) {
  Matrix x = Matrix::Zero(4, 10);
  x.row(0).setLinSpaced(10, -1.0, 1.0);
  int warnings = 0;
  ScopedWarningHandler count([&](std::string_view) { ++warnings; });
  const PcaModel m = fit_pca(x, 3);
  EXPECT_EQ(warnings, 1);
  EXPECT_LE((m.projection * m.projection.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Pca, ProjectionPreservesSubspaceInnerProducts) {
  Rng rng(7);
  const Matrix x = gaussian(rng, 10, 500);
  const PcaModel m = fit_pca(x, 4);
  const Matrix p = m.projection.transpose() * m.projection;
  for (int t = 0; t < 50; ++t) {
    const Vector a = gaussian(rng, 10, 1), b = gaussian(rng, 10, 1);
    EXPECT_NEAR((m.projection * a).dot(m.projection * b), (p * a).dot(p * b), 1e-5);
  }
}

TEST(Pca, Deterministic) {
  Rng rng(8);
  const Matrix x = gaussian(rng, 6, 300);
  const PcaModel a = fit_pca(x, 3), b = fit_pca(x, 3);
  EXPECT_EQ(a.projection, b.projection);
  EXPECT_EQ(a.mean, b.mean);
}

TEST(Reduce, MeanMapsToZero) {
  Rng rng(9);
  const PcaModel m = fit_pca(gaussian(rng, 5, 100), 2);
  const Vector out = reduce_feature(m, m.mean);
  EXPECT_EQ(out, Vector::Zero(2));
  EXPECT_TRUE(out.allFinite());
}

TEST(Reduce, NormIsZeroOrOne) {
  Rng rng(10);
  const PcaModel m = fit_pca(gaussian(rng, 6, 200), 3);
  const Matrix xs = gaussian(rng, 6, 100);
  const Matrix r = reduce_features(m, xs);
  for (Index j = 0; j < xs.cols(); ++j) {
    EXPECT_NEAR(r.col(j).norm(), 1.0, 1e-6);
    EXPECT_LE((reduce_feature(m, xs.col(j)) - r.col(j)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Reduce, OneDimensionalModel) {
  PcaModel m;
  m.mean = Vector::Zero(1);
  m.projection = Matrix::Ones(1, 1);
  m.eigenvalues = Vector::Ones(1);
  EXPECT_EQ(reduce_feature(m, Vector::Constant(1, -3.0)), Vector::Constant(1, -1.0));
}

TEST(Reduce, DimensionMismatch) {
  Rng rng(11);
  const PcaModel m = fit_pca(gaussian(rng, 4, 20), 2);
  EXPECT_THROW(reduce_feature(m, Vector::Zero(3)), ContractError);
  EXPECT_THROW(reduce_features(m, Matrix::Zero(5, 2)), ContractError);
}

TEST(Reduce, StackFeatureSets) {
  FeatureSet a, b;
  a.vectors = Matrix::Ones(3, 2);
  b.vectors = Matrix::Zero(3, 4);
  const std::vector<FeatureSet> sets = {a, b};
  const Matrix s = stack_features(sets);
  EXPECT_EQ(s.cols(), 6);
  EXPECT_EQ(s.leftCols(2), a.vectors);
  const PcaModel m = fit_pca(std::span<const FeatureSet>(sets), 1);
  EXPECT_EQ(m.input_dim(), 3);
}
