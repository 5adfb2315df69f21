#include <gtest/gtest.h>

#include <random>

#include "densetest/random.hpp"
#include "densetest/synthesize.hpp"

using namespace densetest;

namespace {

Matrix gaussian(std::size_t n, std::size_t p, std::uint64_t seed) {
  Rng rng(seed);
  Matrix x(n, p);
  for (double& v : x.data()) v = rng.normal();
  return x;
}

Matrix toeplitz(std::size_t p, double r) {
  Matrix s(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      s(i, j) = std::pow(r, std::abs(static_cast<double>(i) - static_cast<double>(j)));
  return s;
}

}  // namespace

TEST(DecomposeKnown, IdentityCovarianceGivesNormalisedProjection) {
  const Matrix x = gaussian(30, 6, 1);
  const Vector a{1, -2, 0, 0.5, 3, 1};
  const SynthFeaturesKnown f = decompose_known(x, a, Matrix::identity(6));
  const double aa = dot(a, a);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double expect = 0.0;
    for (std::size_t j = 0; j < 6; ++j) expect += a[j] * x(i, j) / aa;
    EXPECT_NEAR(f.z[i], expect, 1e-12);
  }
}

TEST(DecomposeKnown, ReconstructsDesignAndIsUncorrelatedInPopulation) {
  const Matrix sigma = toeplitz(8, 0.4);
  const Matrix x = gaussian(20, 8, 2);
  const Vector a{0, 1, 0, 0, 2, 0, 0, -1};
  const SynthFeaturesKnown f = decompose_known(x, a, sigma);
  const Matrix w = f.materialize_w(x, a);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(w(i, j) + a[j] * f.z[i], x(i, j), 1e-12);
  // Cov(w, z) = Σb − a·bᵀΣb = 0 since Σb = a/(aᵀΩa) and bᵀΣb = 1/(aᵀΩa).
  const Vector sb = multiply(sigma, f.b);
  const double bsb = dot(f.b, sb);
  for (std::size_t j = 0; j < 8; ++j) EXPECT_NEAR(sb[j] - a[j] * bsb, 0.0, 1e-12);
  EXPECT_NEAR(dot(a, f.b), 1.0, 1e-12);
}

TEST(DecomposeKnown, EmpiricalCovarianceVanishesForLargeSample) {
  const Matrix sigma = toeplitz(5, 0.4);
  Rng rng(9);
  const Matrix x = sample_gaussian_rows(cholesky(sigma), 40000, rng);
  const Vector a{1, 1, 1, 1, 1};
  const SynthFeaturesKnown f = decompose_known(x, a, sigma);
  const Matrix w = f.materialize_w(x, a);
  const Vector cov = multiply_transposed(w, f.z);
  for (double c : cov) EXPECT_LT(std::abs(c) / 40000.0, 0.02);
}

TEST(DecomposeKnown, Errors) {
  const Matrix x = gaussian(5, 3, 3);
  try {
    decompose_known(x, Vector{0, 0, 0}, Matrix::identity(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroLoading);
  }
  try {
    decompose_known(x, Vector{1, 0}, Matrix::identity(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DimensionMismatch);
  }
  try {
    decompose_known(x, Vector{1, 0, 0}, Matrix(3, 3, {1, 2, 0, 2, 1, 0, 0, 0, 1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
  }
}

TEST(DecomposeUnknown, EqualsKnownWithIdentityCovariance) {
  const Matrix x = gaussian(25, 7, 4);
  const Vector a{0.3, 0, -1, 2, 0, 0, 1};
  const SynthFeaturesKnown k = decompose_known(x, a, Matrix::identity(7));
  const SynthFeaturesUnknown u = decompose_unknown(x, a);
  for (std::size_t i = 0; i < 25; ++i) EXPECT_NEAR(k.z[i], u.z[i], 1e-12);
}

TEST(DecomposeUnknown, ResidualSpanOrthogonalToLoading) {
  const Matrix x = gaussian(12, 9, 5);
  const Vector a{1, 1, 1, 1, 1, 1, 1, 1, 1};
  const SynthFeaturesUnknown u = decompose_unknown(x, a);
  ASSERT_EQ(u.w_tilde.rows(), 12u);
  ASSERT_EQ(u.w_tilde.cols(), 8u);
  EXPECT_LT(norm_inf(multiply_transposed(u.u_a, a)), 1e-12);
  // X = z aᵀ + W̃ U_aᵀ.
  const Matrix back = multiply(u.w_tilde, transpose(u.u_a));
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(back(i, j) + u.z[i] * a[j], x(i, j), 1e-12);
}

TEST(DecomposeUnknown, NeedsTwoRowsAndColumns) {
  EXPECT_THROW(decompose_unknown(gaussian(1, 3, 6), Vector{1, 0, 0}), Error);
  EXPECT_THROW(decompose_unknown(gaussian(4, 1, 6), Vector{1}), Error);
}

TEST(ProjectionDirection, DegenerateCovariance) {
  // A tiny-scale covariance makes aᵀΩa huge, not degenerate; a near-singular
  // factor fails in Cholesky instead. Check the positive path numerically.
  const Matrix sigma(2, 2, {2, 0, 0, 8});
  const Vector b = projection_direction(cholesky(sigma), Vector{1, 1});
  // Ωa = (1/2, 1/8), aᵀΩa = 5/8.
  EXPECT_NEAR(b[0], 0.8, 1e-14);
  EXPECT_NEAR(b[1], 0.2, 1e-14);
}

TEST(ProjectionDirection, NonFiniteLoading) {
  try {
    projection_direction(cholesky(Matrix::identity(2)), Vector{1, std::nan("")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
  }
}
