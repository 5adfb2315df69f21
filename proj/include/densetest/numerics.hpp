#pragma once

// Dense linear algebra and distribution helpers shared by every other module.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "densetest/error.hpp"

namespace densetest {

using Vector = std::vector<double>;

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw Error(ErrorKind::DimensionMismatch,
                  "matrix data length " + std::to_string(data_.size()) + " != " +
                      std::to_string(rows_) + "x" + std::to_string(cols_));
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const noexcept {
    assert(i < rows_ && j < cols_);
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  Vector column(std::size_t j) const {
    Vector out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
  }

  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Lower-triangular factor stored densely; the strict upper part is zero.
class LowerTriangular {
 public:
  LowerTriangular() = default;
  explicit LowerTriangular(Matrix factor) : factor_(std::move(factor)) {}

  std::size_t dim() const noexcept { return factor_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return factor_(i, j); }
  const Matrix& matrix() const noexcept { return factor_; }

 private:
  Matrix factor_;
};

// ---------------------------------------------------------------------------
// Vector and matrix arithmetic

inline double dot(std::span<const double> a, std::span<const double> b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double norm1(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += std::abs(v);
  return s;
}

inline double norm_inf(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s = std::max(s, std::abs(v));
  return s;
}

inline Vector scaled(std::span<const double> a, double c) {
  Vector out(a.begin(), a.end());
  for (double& v : out) v *= c;
  return out;
}

/// a - c * b
inline Vector axpy_sub(std::span<const double> a, double c, std::span<const double> b) {
  assert(a.size() == b.size());
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - c * b[i];
  return out;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
  return axpy_sub(a, 1.0, b);
}

inline void require_same(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw Error(ErrorKind::DimensionMismatch, std::string(what) + ": got " +
                                                  std::to_string(got) + ", expected " +
                                                  std::to_string(want));
  }
}

/// m * v
inline Vector multiply(const Matrix& m, std::span<const double> v) {
  require_same(v.size(), m.cols(), "matrix-vector product");
  Vector out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), v);
  return out;
}

/// mᵀ * v
inline Vector multiply_transposed(const Matrix& m, std::span<const double> v) {
  require_same(v.size(), m.rows(), "transposed matrix-vector product");
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += vi * r[j];
  }
  return out;
}

/// a * b
inline Matrix multiply(const Matrix& a, const Matrix& b) {
  require_same(b.rows(), a.cols(), "matrix product");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline Matrix transpose(const Matrix& m) {
  Matrix out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

/// mᵀ * m, symmetric, exploiting the row-major layout.
inline Matrix gram(const Matrix& m) {
  const std::size_t k = m.cols();
  Matrix out(k, k);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t a = 0; a < k; ++a) {
      const double ra = r[a];
      if (ra == 0.0) continue;
      double* orow = out.row(a).data();
      for (std::size_t b = a; b < k; ++b) orow[b] += ra * r[b];
    }
  }
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < a; ++b) out(a, b) = out(b, a);
  return out;
}

inline double frobenius_norm(const Matrix& m) { return norm2(m.data()); }

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same(a.rows(), b.rows(), "matrix rows");
  require_same(a.cols(), b.cols(), "matrix cols");
  double d = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

// ---------------------------------------------------------------------------
// Cholesky and SPD solves

inline LowerTriangular cholesky(const Matrix& sigma) {
  const std::size_t p = sigma.rows();
  if (p == 0 || sigma.cols() != p) {
    throw Error(ErrorKind::DimensionMismatch, "cholesky needs a non-empty square matrix");
  }
  double max_diag = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    max_diag = std::max(max_diag, std::abs(sigma(i, i)));
    for (std::size_t j = 0; j < i; ++j) {
      const double scale = std::max({1.0, std::abs(sigma(i, j)), std::abs(sigma(j, i))});
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-10 * scale) {
        throw Error(ErrorKind::InvalidArgument, "cholesky input is not symmetric");
      }
    }
  }
  const double pivot_floor = 1e-12 * max_diag;

  Matrix l(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    auto lj = l.row(j);
    double d = sigma(j, j) - dot(lj.first(j), lj.first(j));
    if (!(d > pivot_floor) || !std::isfinite(d)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " is " + std::to_string(d));
    }
    const double ljj = std::sqrt(d);
    lj[j] = ljj;
    for (std::size_t i = j + 1; i < p; ++i) {
      auto li = l.row(i);
      li[j] = (sigma(i, j) - dot(li.first(j), lj.first(j))) / ljj;
    }
  }
  return LowerTriangular(std::move(l));
}

/// Solves L y = b.
inline Vector forward_substitute(const LowerTriangular& l, std::span<const double> b) {
  const std::size_t p = l.dim();
  require_same(b.size(), p, "forward substitution rhs");
  Vector y(p);
  for (std::size_t i = 0; i < p; ++i) {
    auto li = l.matrix().row(i);
    y[i] = (b[i] - dot(li.first(i), std::span<const double>(y).first(i))) / li[i];
  }
  return y;
}

/// Solves Lᵀ x = y.
inline Vector backward_substitute(const LowerTriangular& l, std::span<const double> y) {
  const std::size_t p = l.dim();
  require_same(y.size(), p, "backward substitution rhs");
  Vector x(y.begin(), y.end());
  for (std::size_t ii = p; ii-- > 0;) {
    x[ii] /= l(ii, ii);
    const double xi = x[ii];
    auto li = l.matrix().row(ii);
    for (std::size_t k = 0; k < ii; ++k) x[k] -= li[k] * xi;
  }
  return x;
}

inline Vector solve_cholesky(const LowerTriangular& l, std::span<const double> b) {
  return backward_substitute(l, forward_substitute(l, b));
}

inline Vector solve_spd(const Matrix& sigma, std::span<const double> b) {
  require_same(b.size(), sigma.rows(), "solve_spd rhs");
  return solve_cholesky(cholesky(sigma), b);
}

// ---------------------------------------------------------------------------
// Orthogonal complement of a loading direction

/// Columns 2..p of the Householder reflector that maps a onto
/// sign(a₁)‖a‖₂e₁ (sign(0) taken as +). The result U satisfies UᵀU = I and
/// UUᵀ = I − aaᵀ/aᵀa.
inline Matrix householder_complement(std::span<const double> a) {
  const std::size_t p = a.size();
  const double norm = norm2(a);
  if (p == 0 || !(norm > 0.0)) {
    throw Error(ErrorKind::ZeroLoading, "loading vector has zero norm");
  }
  if (p == 1) return Matrix(1, 0);

  // v = a + sign(a1)‖a‖e1; H = I − 2vvᵀ/vᵀv.
  const double sign = a[0] < 0.0 ? -1.0 : 1.0;
  Vector v(a.begin(), a.end());
  v[0] += sign * norm;
  const double vv = dot(v, v);

  Matrix u(p, p - 1);
  for (std::size_t i = 0; i < p; ++i) {
    const double ci = 2.0 * v[i] / vv;
    auto ui = u.row(i);
    for (std::size_t j = 1; j < p; ++j) ui[j - 1] = (i == j ? 1.0 : 0.0) - ci * v[j];
  }
  return u;
}

// ---------------------------------------------------------------------------
// Standard normal distribution

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Acklam's rational approximation refined by one Newton step on normal_cdf.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorKind::OutOfRange, "normal_quantile needs p in (0,1), got " +
                                           std::to_string(p));
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double density = normal_pdf(x);
  if (density > 0.0) x -= (normal_cdf(x) - p) / density;
  return x;
}

// ---------------------------------------------------------------------------
// Kolmogorov–Smirnov against N(0,1)

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov tail Q(λ) = 2 Σ (−1)^{k−1} exp(−2k²λ²).
inline double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  const double a2 = -2.0 * lambda * lambda;
  double sum = 0.0;
  double sign = 2.0;
  double previous_term = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(a2 * k * k);
    sum += term;
    if (std::abs(term) <= 1e-10 * previous_term || std::abs(term) <= 1e-16 * sum) {
      return std::clamp(sum, 0.0, 1.0);
    }
    sign = -sign;
    previous_term = std::abs(term);
  }
  // Series has not converged: λ is tiny and Q(λ) is 1 to working precision.
  return 1.0;
}

inline KsResult ks_test_standard_normal(std::span<const double> sample) {
  const std::size_t n = sample.size();
  if (n < 10) {
    throw Error(ErrorKind::TooFewSamples,
                "KS test needs at least 10 samples, got " + std::to_string(n));
  }
  Vector sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const double nn = static_cast<double>(n);
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / nn - f, f - static_cast<double>(i) / nn});
  }
  const double sqrt_n = std::sqrt(nn);
  const double lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
  return {d, kolmogorov_tail(lambda)};
}

}  // namespace densetest
