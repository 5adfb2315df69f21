#pragma once

// Constrained ℓ₁ estimators on the stabilized design W̃.
//
//   (π̂, ρ̂) = argmin ‖π‖₁  s.t.  ‖W̃ᵀ(V − W̃π)‖∞ ≤ η ρ √n ‖V‖₂,
//                               Vᵀ(V − W̃π) ≥ ρ₀ ρ ‖V‖₂² / 2,   ρ ∈ [ρ₀, 1]
//   γ̂       = argmin ‖γ‖₁  s.t.  ‖W̃ᵀ(Z − W̃γ)‖∞ ≤ λ √n ‖Z‖₂
//
// with V = Y − Z g₀. Both are assembled as LpProblem instances over the
// variables (c, π[, ρ]) with −c ≤ π ≤ c.

#include <cmath>
#include <optional>
#include <string>

#include "densetest/error.hpp"
#include "densetest/lp.hpp"
#include "densetest/numerics.hpp"

namespace densetest {

struct Tuning {
  double eta = 0.0;
  double lambda = 0.0;
  double rho0 = 0.01;

  void validate() const {
    if (!(eta > 0.0) || !(lambda > 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "tuning eta and lambda must be positive");
    }
    if (!(rho0 > 0.0 && rho0 < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "tuning rho0 must lie in (0,1)");
    }
  }
};

/// η = λ = √(2 log p / n), ρ₀ = 0.01.
inline Tuning default_tuning(std::size_t n, std::size_t p) {
  if (n < 2 || p < 2) throw Error(ErrorKind::InvalidArgument, "default_tuning needs n, p >= 2");
  const double eta = std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
  return {eta, eta, 0.01};
}

/// Column layout of the π-program: c, then π, then ρ.
struct PiLpLayout {
  std::size_t k;  // p − 1
  std::size_t c(std::size_t j) const { return j; }
  std::size_t pi(std::size_t j) const { return k + j; }
  std::size_t rho() const { return 2 * k; }
  std::size_t num_vars() const { return 2 * k + 1; }
};

/// Quantities shared by both programs for one stabilized design.
struct DesignMoments {
  const Matrix* w_tilde = nullptr;
  Matrix gram;  // W̃ᵀW̃

  explicit DesignMoments(const Matrix& w) : w_tilde(&w), gram(densetest::gram(w)) {}
};

inline LpProblem build_pi_lp(const DesignMoments& moments, std::span<const double> v,
                             const Tuning& tuning) {
  tuning.validate();
  const Matrix& w = *moments.w_tilde;
  require_same(v.size(), w.rows(), "residual vector length vs design rows");
  const double vv = dot(v, v);
  if (!(vv > 0.0)) throw Error(ErrorKind::ZeroResidualVector, "‖Y − Z g0‖₂ = 0");
  const double vnorm = std::sqrt(vv);
  const double n = static_cast<double>(w.rows());

  const PiLpLayout lay{w.cols()};
  const std::size_t k = lay.k;
  const double d1 = tuning.rho0 * vv / 2.0;
  const double d2 = vv;
  const Vector d1_vec = multiply_transposed(w, v);  // D₁ = W̃ᵀV
  const double d2_entry = std::sqrt(n) * tuning.eta * vnorm;  // entries of D₂
  const Matrix& d3 = moments.gram;

  LpProblem lp(lay.num_vars());
  for (std::size_t j = 0; j < k; ++j) {
    lp.objective[lay.c(j)] = 1.0;
    // c ≥ |π| ≥ 0 is implied by the absolute-value rows; the explicit lower
    // bound leaves the feasible set unchanged and avoids splitting c.
    lp.bounds[lay.c(j)] = VarBound{0.0, std::numeric_limits<double>::infinity()};
    lp.bounds[lay.pi(j)] = VarBound::free();
  }
  lp.bounds[lay.rho()] = VarBound{tuning.rho0, 1.0};

  for (std::size_t j = 0; j < k; ++j) {
    Vector upper(lay.num_vars(), 0.0);  // π − c ≤ 0
    upper[lay.pi(j)] = 1.0;
    upper[lay.c(j)] = -1.0;
    lp.add(std::move(upper), Relation::LessEqual, 0.0);
    Vector lower(lay.num_vars(), 0.0);  // −π − c ≤ 0
    lower[lay.pi(j)] = -1.0;
    lower[lay.c(j)] = -1.0;
    lp.add(std::move(lower), Relation::LessEqual, 0.0);
  }
  {
    Vector row(lay.num_vars(), 0.0);  // d₁ρ + D₁ᵀπ ≤ d₂
    row[lay.rho()] = d1;
    for (std::size_t j = 0; j < k; ++j) row[lay.pi(j)] = d1_vec[j];
    lp.add(std::move(row), Relation::LessEqual, d2);
  }
  for (std::size_t j = 0; j < k; ++j) {
    auto d3j = d3.row(j);
    Vector hi(lay.num_vars(), 0.0);  // D₁ − D₃π ≤ D₂ρ  ⇔  −D₃π − D₂ρ ≤ −D₁
    Vector lo(lay.num_vars(), 0.0);  // D₁ − D₃π ≥ −D₂ρ ⇔  D₃π − D₂ρ ≤ D₁
    for (std::size_t l = 0; l < k; ++l) {
      hi[lay.pi(l)] = -d3j[l];
      lo[lay.pi(l)] = d3j[l];
    }
    hi[lay.rho()] = -d2_entry;
    lo[lay.rho()] = -d2_entry;
    lp.add(std::move(hi), Relation::LessEqual, -d1_vec[j]);
    lp.add(std::move(lo), Relation::LessEqual, d1_vec[j]);
  }
  return lp;
}

inline LpProblem build_pi_lp(const Matrix& w_tilde, std::span<const double> v,
                             const Tuning& tuning) {
  return build_pi_lp(DesignMoments(w_tilde), v, tuning);
}

/// Largest violation of the three constraint families of the π-estimator,
/// evaluated directly on (π, ρ) rather than through the LP.
inline double pi_constraint_violation(const Matrix& w_tilde, std::span<const double> v,
                                      const Tuning& tuning, std::span<const double> pi,
                                      double rho) {
  const double n = static_cast<double>(w_tilde.rows());
  const Vector resid = subtract(v, multiply(w_tilde, pi));
  const double vnorm = norm2(v);
  const double corr = norm_inf(multiply_transposed(w_tilde, resid));
  double worst = corr - tuning.eta * rho * std::sqrt(n) * vnorm;
  worst = std::max(worst, tuning.rho0 * rho * vnorm * vnorm / 2.0 - dot(v, resid));
  worst = std::max({worst, tuning.rho0 - rho, rho - 1.0});
  return worst;
}

struct PiFit {
  Vector pi;
  double rho = 0.0;
  bool feasible = false;
};

inline PiFit fit_pi_rho(const DesignMoments& moments, std::span<const double> v,
                        const Tuning& tuning) {
  const LpProblem lp = build_pi_lp(moments, v, tuning);
  const LpSolution sol = solve_lp(lp);
  const PiLpLayout lay{moments.w_tilde->cols()};
  PiFit fit;
  if (sol.status != LpStatus::Optimal) return fit;
  fit.feasible = true;
  fit.pi.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(lay.pi(0)),
                sol.x.begin() + static_cast<std::ptrdiff_t>(lay.pi(0) + lay.k));
  fit.rho = sol.x[lay.rho()];
  return fit;
}

inline PiFit fit_pi_rho(const Matrix& w_tilde, std::span<const double> v, const Tuning& tuning) {
  return fit_pi_rho(DesignMoments(w_tilde), v, tuning);
}

inline LpProblem build_gamma_lp(const DesignMoments& moments, std::span<const double> z,
                                const Tuning& tuning) {
  tuning.validate();
  const Matrix& w = *moments.w_tilde;
  require_same(z.size(), w.rows(), "synthesized feature length vs design rows");
  const double znorm = norm2(z);
  if (!(znorm > 0.0)) throw Error(ErrorKind::ZeroSynthesizedFeature, "‖Z‖₂ = 0");
  const std::size_t k = w.cols();
  const double bound = std::sqrt(static_cast<double>(w.rows())) * tuning.lambda * znorm;
  const Vector wz = multiply_transposed(w, z);

  // Variables: c in [0, k), γ in [k, 2k).
  LpProblem lp(2 * k);
  for (std::size_t j = 0; j < k; ++j) {
    lp.objective[j] = 1.0;
    lp.bounds[k + j] = VarBound::free();
  }
  for (std::size_t j = 0; j < k; ++j) {
    Vector upper(2 * k, 0.0);
    upper[k + j] = 1.0;
    upper[j] = -1.0;
    lp.add(std::move(upper), Relation::LessEqual, 0.0);
    Vector lower(2 * k, 0.0);
    lower[k + j] = -1.0;
    lower[j] = -1.0;
    lp.add(std::move(lower), Relation::LessEqual, 0.0);
  }
  for (std::size_t j = 0; j < k; ++j) {
    auto gj = moments.gram.row(j);
    Vector hi(2 * k, 0.0);  // W̃ᵀZ − D₃γ ≤ b  ⇔ −D₃γ ≤ b − W̃ᵀZ
    Vector lo(2 * k, 0.0);  // W̃ᵀZ − D₃γ ≥ −b ⇔ D₃γ ≤ b + W̃ᵀZ
    for (std::size_t l = 0; l < k; ++l) {
      hi[k + l] = -gj[l];
      lo[k + l] = gj[l];
    }
    lp.add(std::move(hi), Relation::LessEqual, bound - wz[j]);
    lp.add(std::move(lo), Relation::LessEqual, bound + wz[j]);
  }
  return lp;
}

struct GammaFit {
  Vector gamma;
  bool feasible = false;
};

inline GammaFit fit_gamma(const DesignMoments& moments, std::span<const double> z,
                          const Tuning& tuning) {
  const LpProblem lp = build_gamma_lp(moments, z, tuning);
  const LpSolution sol = solve_lp(lp);
  GammaFit fit;
  if (sol.status != LpStatus::Optimal) return fit;
  const std::size_t k = moments.w_tilde->cols();
  fit.feasible = true;
  fit.gamma.assign(sol.x.begin() + static_cast<std::ptrdiff_t>(k), sol.x.end());
  return fit;
}

inline GammaFit fit_gamma(const Matrix& w_tilde, std::span<const double> z, const Tuning& tuning) {
  return fit_gamma(DesignMoments(w_tilde), z, tuning);
}

struct DantzigFit {
  Vector pi_hat;
  double rho_hat = 0.0;
  Vector gamma_hat;
  double sigma_eps_hat = 0.0;  // n^{-1/2}‖V − W̃π̂‖₂
  double sigma_u_hat = 0.0;    // n^{-1/2}‖Z − W̃γ̂‖₂
  bool pi_feasible = false;
  bool gamma_feasible = false;
  Vector eps_residual;  // V − W̃π̂
  Vector u_residual;    // Z − W̃γ̂

  bool feasible() const { return pi_feasible && gamma_feasible; }
};

/// Combines a γ-fit (reusable across g₀) with a fresh π-fit for residual V.
inline DantzigFit assemble_fit(const Matrix& w_tilde, std::span<const double> z,
                               std::span<const double> v, const GammaFit& gamma, PiFit pi) {
  DantzigFit fit;
  const double root_n = std::sqrt(static_cast<double>(w_tilde.rows()));
  fit.gamma_feasible = gamma.feasible;
  fit.pi_feasible = pi.feasible;
  if (gamma.feasible) {
    fit.gamma_hat = gamma.gamma;
    fit.u_residual = subtract(z, multiply(w_tilde, gamma.gamma));
    fit.sigma_u_hat = norm2(fit.u_residual) / root_n;
  }
  if (pi.feasible) {
    fit.pi_hat = std::move(pi.pi);
    fit.rho_hat = pi.rho;
    fit.eps_residual = subtract(v, multiply(w_tilde, fit.pi_hat));
    fit.sigma_eps_hat = norm2(fit.eps_residual) / root_n;
  }
  return fit;
}

inline DantzigFit fit_dantzig(const Matrix& w_tilde, std::span<const double> z,
                              std::span<const double> v, const Tuning& tuning) {
  const DesignMoments moments(w_tilde);
  const GammaFit gamma = fit_gamma(moments, z, tuning);
  return assemble_fit(w_tilde, z, v, gamma, fit_pi_rho(moments, v, tuning));
}

}  // namespace densetest
