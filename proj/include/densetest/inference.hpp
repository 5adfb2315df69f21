#pragma once

// Test statistics, decisions, confidence intervals by test inversion, the
// local power envelope, and loading builders for common hypotheses.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "densetest/dantzig.hpp"
#include "densetest/error.hpp"
#include "densetest/numerics.hpp"
#include "densetest/synthesize.hpp"

namespace densetest {

enum class Method { KnownSigma, UnknownSigma };

inline std::string_view to_string(Method m) {
  return m == Method::KnownSigma ? "KnownSigma" : "UnknownSigma";
}

struct TestReport {
  Method method = Method::KnownSigma;
  double statistic = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
  std::optional<DantzigFit> diagnostics;
};

inline void validate_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::OutOfRange, "alpha must lie in (0,1), got " + std::to_string(alpha));
  }
}

/// Two-sided decision: reject iff |stat| > Φ⁻¹(1 − α/2); p = 2(1 − Φ(|stat|)).
inline TestReport make_report(Method method, double statistic, double alpha) {
  validate_alpha(alpha);
  TestReport r;
  r.method = method;
  r.statistic = statistic;
  r.alpha = alpha;
  r.p_value = std::min(1.0, std::erfc(std::abs(statistic) / std::numbers::sqrt2));
  r.reject = std::abs(statistic) > normal_quantile(1.0 - alpha / 2.0);
  return r;
}

// ---------------------------------------------------------------------------
// Known covariance

/// T_n = n^{-1/2}Σl_i / (n^{-1}Σl_i²)^{1/2} with l_i = z_i(y_i − z_i g₀).
inline double known_sigma_statistic(std::span<const double> z, std::span<const double> y,
                                    double g0) {
  require_same(y.size(), z.size(), "response length vs synthesized feature");
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double l = z[i] * (y[i] - z[i] * g0);
    sum += l;
    sum_sq += l * l;
  }
  if (!(sum_sq > 0.0)) {
    throw Error(ErrorKind::DegenerateStatistic, "all moment summands are zero");
  }
  return sum / std::sqrt(sum_sq);
}

inline void check_known_inputs(const Matrix& x, std::span<const double> y, const Hypothesis& hyp,
                               double alpha) {
  validate_alpha(alpha);
  require_same(y.size(), x.rows(), "response length vs design rows");
  require_same(hyp.a.size(), x.cols(), "loading length vs design columns");
  if (x.rows() < 2) throw Error(ErrorKind::InvalidArgument, "need n >= 2");
}

inline TestReport test_known_sigma(const Matrix& x, std::span<const double> y,
                                   const LowerTriangular& sigma_factor, const Hypothesis& hyp,
                                   double alpha) {
  check_known_inputs(x, y, hyp, alpha);
  const SynthFeaturesKnown f = decompose_known(x, hyp.a, sigma_factor);
  return make_report(Method::KnownSigma, known_sigma_statistic(f.z, y, hyp.g0), alpha);
}

inline TestReport test_known_sigma(const Matrix& x, std::span<const double> y,
                                   const Matrix& sigma, const Hypothesis& hyp, double alpha) {
  check_known_inputs(x, y, hyp, alpha);
  require_same(sigma.rows(), x.cols(), "covariance dimension vs design columns");
  return test_known_sigma(x, y, cholesky(sigma), hyp, alpha);
}

// ---------------------------------------------------------------------------
// Unknown covariance

/// S_n = √n·uᵀe / (‖u‖₂‖e‖₂) for u = Z − W̃γ̂ and e = V − W̃π̂.
inline double unknown_sigma_statistic(std::span<const double> u_residual,
                                      std::span<const double> eps_residual) {
  require_same(eps_residual.size(), u_residual.size(), "residual lengths");
  const double nu = norm2(u_residual);
  const double ne = norm2(eps_residual);
  if (nu < 1e-12 || ne < 1e-12) {
    throw Error(ErrorKind::DegenerateResidual, "residual norm below 1e-12");
  }
  const double n = static_cast<double>(u_residual.size());
  return std::sqrt(n) * dot(u_residual, eps_residual) / (nu * ne);
}

/// Holds everything about one dataset and loading that does not depend on
/// g₀: the decomposition, W̃ᵀW̃, and γ̂. Testing several g₀ values then costs
/// one π-program each.
class UnknownSigmaTester {
 public:
  UnknownSigmaTester(const Matrix& x, std::span<const double> y, std::span<const double> a,
                     const Tuning& tuning)
      : y_(y.begin(), y.end()),
        features_(decompose_unknown(x, a)),
        moments_(features_.w_tilde),
        tuning_(tuning) {
    require_same(y.size(), x.rows(), "response length vs design rows");
    tuning_.validate();
    gamma_ = fit_gamma(moments_, features_.z, tuning_);
  }

  UnknownSigmaTester(const UnknownSigmaTester&) = delete;
  UnknownSigmaTester& operator=(const UnknownSigmaTester&) = delete;

  const SynthFeaturesUnknown& features() const { return features_; }
  const GammaFit& gamma_fit() const { return gamma_; }

  /// Fits both estimators at g₀; never throws on infeasibility.
  DantzigFit fit(double g0) const {
    const Vector v = axpy_sub(y_, g0, features_.z);
    PiFit pi = fit_pi_rho(moments_, v, tuning_);
    return assemble_fit(features_.w_tilde, features_.z, v, gamma_, std::move(pi));
  }

  TestReport test(double g0, double alpha) const {
    validate_alpha(alpha);
    DantzigFit f = fit(g0);
    if (!f.feasible()) {
      throw Error(ErrorKind::InfeasibleEstimator,
                  std::string(f.gamma_feasible ? "" : "gamma-program infeasible; ") +
                      (f.pi_feasible ? "" : "pi-program infeasible"));
    }
    TestReport r = make_report(Method::UnknownSigma,
                               unknown_sigma_statistic(f.u_residual, f.eps_residual), alpha);
    r.diagnostics = std::move(f);
    return r;
  }

  /// (Z − W̃γ̂)ᵀY / (Z − W̃γ̂)ᵀZ, used only to center interval grids.
  double plug_in_estimate() const {
    if (!gamma_.feasible) {
      return dot(features_.z, y_) / dot(features_.z, features_.z);
    }
    const Vector u = subtract(features_.z, multiply(features_.w_tilde, gamma_.gamma));
    return dot(u, y_) / dot(u, features_.z);
  }

 private:
  Vector y_;
  SynthFeaturesUnknown features_;
  DesignMoments moments_;
  Tuning tuning_;
  GammaFit gamma_;
};

inline TestReport test_unknown_sigma(const Matrix& x, std::span<const double> y,
                                     const Hypothesis& hyp, double alpha, const Tuning& tuning) {
  validate_alpha(alpha);
  require_same(hyp.a.size(), x.cols(), "loading length vs design columns");
  const UnknownSigmaTester tester(x, y, hyp.a, tuning);
  return tester.test(hyp.g0, alpha);
}

// ---------------------------------------------------------------------------
// Confidence intervals by grid inversion

struct GridSpec {
  double center = 0.0;
  double half_width = 0.0;
  double step = 1.0;

  std::vector<double> points() const {
    if (!(step > 0.0) || !(half_width >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "grid needs step > 0 and half_width >= 0");
    }
    const auto count = static_cast<std::size_t>(std::floor(2.0 * half_width / step + 1e-9)) + 1;
    std::vector<double> out(count);
    for (std::size_t k = 0; k < count; ++k) {
      out[k] = center - half_width + static_cast<double>(k) * step;
    }
    return out;
  }
};

/// Default grid: 401 points spanning ±10‖a‖₂/√n around `center`.
inline GridSpec default_grid(double center, std::span<const double> a, std::size_t n) {
  const double hw = 10.0 * norm2(a) / std::sqrt(static_cast<double>(n));
  return {center, hw, 2.0 * hw / 400.0};
}

enum class CiStatus { Ok, EmptyAcceptanceRegion };

struct ConfidenceInterval {
  CiStatus status = CiStatus::Ok;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  double grid_resolution = 0.0;
  bool contiguous = true;          // no rejected grid point inside [lower, upper]
  std::size_t undetermined = 0;    // grid points where an estimator was infeasible
  std::size_t accepted = 0;
};

/// `rejects(g0)` returns nullopt for undetermined points.
inline ConfidenceInterval invert_test(const std::function<std::optional<bool>(double)>& rejects,
                                      const GridSpec& grid, double alpha) {
  validate_alpha(alpha);
  const std::vector<double> pts = grid.points();
  std::vector<int> state(pts.size());  // 1 accepted, 0 rejected, −1 undetermined
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const std::optional<bool> r = rejects(pts[k]);
    state[k] = r ? (*r ? 0 : 1) : -1;
  }
  ConfidenceInterval ci;
  ci.level = 1.0 - alpha;
  ci.grid_resolution = grid.step;
  std::size_t first = pts.size();
  std::size_t last = 0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (state[k] == -1) ++ci.undetermined;
    if (state[k] != 1) continue;
    ++ci.accepted;
    first = std::min(first, k);
    last = k;
  }
  if (ci.accepted == 0) {
    ci.status = CiStatus::EmptyAcceptanceRegion;
    return ci;
  }
  ci.lower = pts[first];
  ci.upper = pts[last];
  for (std::size_t k = first; k <= last; ++k) {
    if (state[k] == 0) ci.contiguous = false;
  }
  return ci;
}

struct CiRequest {
  Method method = Method::KnownSigma;
  double alpha = 0.05;
  const Matrix* sigma = nullptr;  // required for KnownSigma, forbidden otherwise
  std::optional<Tuning> tuning;
  std::optional<GridSpec> grid;
};

inline ConfidenceInterval confidence_interval(const Matrix& x, std::span<const double> y,
                                              std::span<const double> a, const CiRequest& req) {
  validate_alpha(req.alpha);
  require_same(y.size(), x.rows(), "response length vs design rows");
  require_same(a.size(), x.cols(), "loading length vs design columns");
  if ((req.method == Method::KnownSigma) != (req.sigma != nullptr)) {
    throw Error(ErrorKind::InvalidArgument,
                "known-covariance intervals need sigma; unknown-covariance intervals must not get one");
  }
  if (req.method == Method::KnownSigma) {
    const SynthFeaturesKnown f = decompose_known(x, a, *req.sigma);
    const GridSpec grid =
        req.grid ? *req.grid : default_grid(dot(f.z, y) / dot(f.z, f.z), a, x.rows());
    const double crit = normal_quantile(1.0 - req.alpha / 2.0);
    return invert_test(
        [&](double g0) -> std::optional<bool> {
          return std::abs(known_sigma_statistic(f.z, y, g0)) > crit;
        },
        grid, req.alpha);
  }
  const Tuning tuning = req.tuning ? *req.tuning : default_tuning(x.rows(), x.cols());
  const UnknownSigmaTester tester(x, y, a, tuning);
  const GridSpec grid =
      req.grid ? *req.grid : default_grid(tester.plug_in_estimate(), a, x.rows());
  return invert_test(
      [&](double g0) -> std::optional<bool> {
        try {
          return tester.test(g0, req.alpha).reject;
        } catch (const Error& e) {
          if (e.kind() == ErrorKind::InfeasibleEstimator ||
              e.kind() == ErrorKind::DegenerateResidual || e.kind() == ErrorKind::IterationLimit) {
            return std::nullopt;
          }
          throw;
        }
      },
      grid, req.alpha);
}

// ---------------------------------------------------------------------------
// Local power

/// Ψ_α(d) = Φ(−q + d) + Φ(−q − d), q = Φ⁻¹(1 − α/2).
inline double power_envelope(double alpha, double d) {
  validate_alpha(alpha);
  const double q = normal_quantile(1.0 - alpha / 2.0);
  return normal_cdf(-q + d) + normal_cdf(-q - d);
}

// ---------------------------------------------------------------------------
// Loading builders (0-based indices)

/// a_k = 1, a_j = −1: tests β_k = β_j with g₀ = 0.
inline Vector pairwise_loading(std::size_t k, std::size_t j, std::size_t p) {
  if (k >= p || j >= p) {
    throw Error(ErrorKind::IndexOutOfRange, "pairwise index out of range for p = " +
                                                std::to_string(p));
  }
  if (k == j) throw Error(ErrorKind::InvalidArgument, "pairwise indices must differ");
  Vector a(p, 0.0);
  a[k] = 1.0;
  a[j] = -1.0;
  return a;
}

/// a restricted to `group` equals c; zero elsewhere.
inline Vector group_loading(std::span<const double> c, std::span<const std::size_t> group,
                            std::size_t p) {
  require_same(group.size(), c.size(), "group size vs coefficient count");
  if (group.empty()) throw Error(ErrorKind::InvalidArgument, "group must be non-empty");
  std::set<std::size_t> seen;
  Vector a(p, 0.0);
  for (std::size_t h = 0; h < group.size(); ++h) {
    if (group[h] >= p) {
      throw Error(ErrorKind::IndexOutOfRange, "group index " + std::to_string(group[h]) +
                                                  " out of range for p = " + std::to_string(p));
    }
    if (!seen.insert(group[h]).second) {
      throw Error(ErrorKind::InvalidArgument, "duplicate group index " + std::to_string(group[h]));
    }
    a[group[h]] = c[h];
  }
  return a;
}

/// Entrywise powers 1..degree of each raw coordinate; column j·degree + (m−1)
/// holds ζ_j^m.
struct PowerDictionary {
  Matrix x;
  std::size_t raw_dim = 0;
  std::size_t degree = 0;

  Vector loading_at(std::span<const double> point) const {
    require_same(point.size(), raw_dim, "evaluation point dimension");
    Vector a(raw_dim * degree);
    for (std::size_t j = 0; j < raw_dim; ++j) {
      double power = 1.0;
      for (std::size_t m = 0; m < degree; ++m) {
        power *= point[j];
        a[j * degree + m] = power;
      }
    }
    return a;
  }
};

inline PowerDictionary power_dictionary(const Matrix& zeta, std::size_t degree) {
  if (degree < 1) throw Error(ErrorKind::InvalidArgument, "degree must be >= 1");
  PowerDictionary d;
  d.raw_dim = zeta.cols();
  d.degree = degree;
  d.x = Matrix(zeta.rows(), zeta.cols() * degree);
  for (std::size_t i = 0; i < zeta.rows(); ++i) {
    for (std::size_t j = 0; j < zeta.cols(); ++j) {
      double power = 1.0;
      for (std::size_t m = 0; m < degree; ++m) {
        power *= zeta(i, j);
        d.x(i, j * degree + m) = power;
      }
    }
  }
  return d;
}

}  // namespace densetest
