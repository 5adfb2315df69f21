#pragma once

// Hypothesis-driven feature synthesis.
//
// For H₀: aᵀβ = g₀ each row x_i is split as x_i = a·z_i + w_i, where z_i is
// the coordinate of x_i along the hypothesis direction. With a known
// covariance the split uses the direction Ωa/(aᵀΩa); without it the
// covariance is treated as the identity and the remainder is compressed to
// p − 1 stabilized coordinates w̃_i = U_aᵀ w_i.

#include <cmath>
#include <string>

#include "densetest/error.hpp"
#include "densetest/numerics.hpp"

namespace densetest {

struct Hypothesis {
  Vector a;
  double g0 = 0.0;
};

inline void validate_loading(std::span<const double> a) {
  for (double v : a) {
    if (!std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "loading has non-finite entry");
  }
  if (a.empty() || !(norm2(a) > 0.0)) {
    throw Error(ErrorKind::ZeroLoading, "loading vector has zero norm");
  }
}

struct SynthFeaturesKnown {
  Vector z;
  Vector b;  // Ωa / (aᵀΩa)

  /// w = X − z aᵀ, built on demand (n×p).
  Matrix materialize_w(const Matrix& x, std::span<const double> a) const {
    Matrix w = x;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      auto wi = w.row(i);
      for (std::size_t j = 0; j < x.cols(); ++j) wi[j] -= a[j] * z[i];
    }
    return w;
  }
};

/// Ωa/(aᵀΩa) given a Cholesky factor of Σ.
inline Vector projection_direction(const LowerTriangular& sigma_factor, std::span<const double> a) {
  validate_loading(a);
  require_same(a.size(), sigma_factor.dim(), "loading length vs covariance");
  Vector omega_a = solve_cholesky(sigma_factor, a);
  const double quad = dot(a, omega_a);
  if (!(quad > 1e-12)) {
    throw Error(ErrorKind::DegenerateProjection, "aᵀΩa = " + std::to_string(quad));
  }
  for (double& v : omega_a) v /= quad;
  return omega_a;
}

inline SynthFeaturesKnown decompose_known(const Matrix& x, std::span<const double> a,
                                          const LowerTriangular& sigma_factor) {
  require_same(a.size(), x.cols(), "loading length vs design columns");
  SynthFeaturesKnown out;
  out.b = projection_direction(sigma_factor, a);
  out.z = multiply(x, out.b);
  return out;
}

inline SynthFeaturesKnown decompose_known(const Matrix& x, std::span<const double> a,
                                          const Matrix& sigma) {
  require_same(a.size(), x.cols(), "loading length vs design columns");
  validate_loading(a);
  require_same(sigma.rows(), x.cols(), "covariance dimension vs design columns");
  return decompose_known(x, a, cholesky(sigma));
}

struct SynthFeaturesUnknown {
  Vector z;
  Matrix w_tilde;  // n×(p−1)
  Matrix u_a;      // p×(p−1)
};

inline SynthFeaturesUnknown decompose_unknown(const Matrix& x, std::span<const double> a) {
  validate_loading(a);
  require_same(a.size(), x.cols(), "loading length vs design columns");
  if (x.rows() < 2 || x.cols() < 2) {
    throw Error(ErrorKind::InvalidArgument, "unknown-covariance decomposition needs n, p >= 2");
  }
  SynthFeaturesUnknown out;
  out.z = multiply(x, scaled(a, 1.0 / dot(a, a)));
  out.u_a = householder_complement(a);
  // U_aᵀ(I − aaᵀ/aᵀa) = U_aᵀ, so w̃_i = U_aᵀ x_i directly.
  out.w_tilde = multiply(x, out.u_a);
  return out;
}

}  // namespace densetest
