#include <gtest/gtest.h>

#include "densetest/dantzig.hpp"
#include "densetest/random.hpp"
#include "densetest/synthesize.hpp"

using namespace densetest;

namespace {

struct Problem {
  Matrix x;
  Vector y;
  Vector a;
};

Problem make_problem(std::size_t n, std::size_t p, std::uint64_t seed, double beta_scale = 1.0) {
  Rng rng(seed);
  Problem pr;
  pr.x = Matrix(n, p);
  for (double& v : pr.x.data()) v = rng.normal();
  Vector beta(p, 0.0);
  beta[0] = beta[1] = 0.8 * beta_scale;
  pr.y = multiply(pr.x, beta);
  for (double& v : pr.y) v += rng.normal();
  pr.a.assign(p, 0.0);
  pr.a[1] = 1.0;
  return pr;
}

// Independent evaluation of the π-estimator constraints, written without the
// library's helpers beyond basic linear algebra.
double pi_violation(const Matrix& w, const Vector& v, const Tuning& t, const Vector& pi,
                    double rho) {
  const std::size_t n = w.rows(), k = w.cols();
  Vector r = v;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) r[i] -= w(i, j) * pi[j];
  double vv = 0.0, vr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    vv += v[i] * v[i];
    vr += v[i] * r[i];
  }
  double worst = std::max(t.rho0 - rho, rho - 1.0);
  worst = std::max(worst, t.rho0 * rho * vv / 2.0 - vr);
  for (std::size_t j = 0; j < k; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += w(i, j) * r[i];
    worst = std::max(worst, std::abs(c) - std::sqrt(double(n)) * t.eta * rho * std::sqrt(vv));
  }
  return worst;
}

double gamma_violation(const Matrix& w, const Vector& z, const Tuning& t, const Vector& g) {
  const std::size_t n = w.rows(), k = w.cols();
  Vector r = z;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) r[i] -= w(i, j) * g[j];
  double zz = 0.0;
  for (double v : z) zz += v * v;
  double worst = -1e300;
  for (std::size_t j = 0; j < k; ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += w(i, j) * r[i];
    worst = std::max(worst, std::abs(c) - std::sqrt(double(n)) * t.lambda * std::sqrt(zz));
  }
  return worst;
}

Vector least_squares(const Matrix& w, const Vector& v) {
  return solve_spd(gram(w), multiply_transposed(w, v));
}

}  // namespace

TEST(DefaultTuning, ReferenceValues) {
  EXPECT_NEAR(default_tuning(100, 500).eta, 0.35255093528232745, 1e-15);
  EXPECT_NEAR(default_tuning(400, 500).lambda, 0.17627546764116372, 1e-15);
  EXPECT_EQ(default_tuning(100, 500).rho0, 0.01);
  EXPECT_THROW(default_tuning(1, 10), Error);
}

TEST(Tuning, Validation) {
  EXPECT_THROW((Tuning{0.0, 0.1, 0.01}.validate()), Error);
  EXPECT_THROW((Tuning{0.1, 0.1, 1.0}.validate()), Error);
  EXPECT_NO_THROW((Tuning{0.1, 0.1, 0.5}.validate()));
}

TEST(PiProgram, SolutionSatisfiesConstraintsAndBeatsLeastSquares) {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Problem pr = make_problem(80, 30, seed);
    const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
    const Vector v = axpy_sub(pr.y, 0.8, f.z);
    const Tuning t = default_tuning(80, 30);
    const PiFit fit = fit_pi_rho(f.w_tilde, v, t);
    ASSERT_TRUE(fit.feasible);
    EXPECT_LT(pi_violation(f.w_tilde, v, t, fit.pi, fit.rho), 1e-7 * dot(v, v));
    EXPECT_NEAR(pi_constraint_violation(f.w_tilde, v, t, fit.pi, fit.rho),
                pi_violation(f.w_tilde, v, t, fit.pi, fit.rho), 1e-6);
    // The least-squares coefficient with ρ = 1 is feasible whenever its
    // residual carries enough of V; then it bounds the optimum.
    const Vector ls = least_squares(f.w_tilde, v);
    if (pi_violation(f.w_tilde, v, t, ls, 1.0) <= 0.0) {
      EXPECT_LE(norm1(fit.pi), norm1(ls) + 1e-8);
    }
  }
}

TEST(PiProgram, ZeroWhenCorrelationsAreWithinBudget) {
  const Problem pr = make_problem(60, 10, 11, 0.0);
  const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
  const Vector v = pr.y;
  const Tuning t{10.0, 10.0, 0.01};  // huge budget
  const PiFit fit = fit_pi_rho(f.w_tilde, v, t);
  ASSERT_TRUE(fit.feasible);
  EXPECT_LT(norm1(fit.pi), 1e-10);
}

TEST(PiProgram, RecoversSparseSignalDirection) {
  // V = W̃π* + noise with a single strong coordinate.
  Rng rng(12);
  Matrix w(200, 20);
  for (double& x : w.data()) x = rng.normal();
  Vector pi_star(20, 0.0);
  pi_star[3] = 2.0;
  Vector v = multiply(w, pi_star);
  for (double& x : v) x += rng.normal();
  const PiFit fit = fit_pi_rho(w, v, default_tuning(200, 21));
  ASSERT_TRUE(fit.feasible);
  std::size_t argmax = 0;
  for (std::size_t j = 1; j < 20; ++j)
    if (std::abs(fit.pi[j]) > std::abs(fit.pi[argmax])) argmax = j;
  EXPECT_EQ(argmax, 3u);
  EXPECT_NEAR(fit.pi[3], 2.0, 0.5);
}

TEST(PiProgram, LayoutAndBounds) {
  const Problem pr = make_problem(10, 4, 13);
  const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
  const LpProblem lp = build_pi_lp(f.w_tilde, pr.y, Tuning{0.3, 0.3, 0.05});
  const PiLpLayout lay{3};
  EXPECT_EQ(lp.num_vars, 7u);
  EXPECT_EQ(lp.constraints.size(), 2 * 3 + 1 + 2 * 3u);
  EXPECT_EQ(lp.bounds[lay.rho()].lower, 0.05);
  EXPECT_EQ(lp.bounds[lay.rho()].upper, 1.0);
  EXPECT_TRUE(std::isinf(lp.bounds[lay.pi(0)].lower));
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(lp.objective[lay.c(j)], 1.0);
    EXPECT_EQ(lp.objective[lay.pi(j)], 0.0);
  }
  EXPECT_EQ(lp.objective[lay.rho()], 0.0);
}

TEST(PiProgram, ZeroResidualVector) {
  const Problem pr = make_problem(10, 4, 14);
  const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
  try {
    fit_pi_rho(f.w_tilde, Vector(10, 0.0), default_tuning(10, 4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroResidualVector);
  }
}

TEST(GammaProgram, SolutionSatisfiesConstraintsAndBeatsLeastSquares) {
  for (std::uint64_t seed = 20; seed < 26; ++seed) {
    const Problem pr = make_problem(80, 30, seed);
    const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
    const Tuning t = default_tuning(80, 30);
    const GammaFit fit = fit_gamma(f.w_tilde, f.z, t);
    ASSERT_TRUE(fit.feasible);
    EXPECT_LT(gamma_violation(f.w_tilde, f.z, t, fit.gamma), 1e-7 * dot(f.z, f.z));
    EXPECT_LE(norm1(fit.gamma), norm1(least_squares(f.w_tilde, f.z)) + 1e-8);
  }
}

TEST(GammaProgram, ZeroWhenFeatureIsAlreadyOrthogonal) {
  // Columns of W̃ orthogonal to z in sample: γ̂ = 0.
  Matrix w(4, 2, {1, 0, -1, 0, 0, 1, 0, -1});
  const Vector z{1, 1, 1, 1};
  const GammaFit fit = fit_gamma(w, z, Tuning{0.01, 0.01, 0.01});
  ASSERT_TRUE(fit.feasible);
  EXPECT_EQ(norm1(fit.gamma), 0.0);
}

TEST(GammaProgram, TwoDimensionalClosedForm) {
  // Orthonormal-ish design: W̃ᵀW̃ = 4I, W̃ᵀz = (4, 0), b = √n·λ·‖z‖ = 2·0.25·2 = 1.
  // Constraint |4 − 4γ₁| ≤ 1, |−4γ₂| ≤ 1 → γ = (0.75, 0).
  Matrix w(4, 2, {1, 1, 1, -1, 1, 1, 1, -1});
  const Vector z{1, 1, 1, 1};
  const GammaFit fit = fit_gamma(w, z, Tuning{0.25, 0.25, 0.01});
  ASSERT_TRUE(fit.feasible);
  EXPECT_NEAR(fit.gamma[0], 0.75, 1e-12);
  EXPECT_NEAR(fit.gamma[1], 0.0, 1e-12);
}

TEST(GammaProgram, ZeroFeature) {
  Matrix w(3, 2, {1, 0, 0, 1, 1, 1});
  try {
    fit_gamma(w, Vector(3, 0.0), Tuning{0.1, 0.1, 0.01});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroSynthesizedFeature);
  }
}

TEST(FitDantzig, ResidualsAndScales) {
  const Problem pr = make_problem(60, 20, 30);
  const SynthFeaturesUnknown f = decompose_unknown(pr.x, pr.a);
  const Vector v = axpy_sub(pr.y, 0.8, f.z);
  const DantzigFit fit = fit_dantzig(f.w_tilde, f.z, v, default_tuning(60, 20));
  ASSERT_TRUE(fit.feasible());
  EXPECT_LT(max_abs_diff(Matrix(60, 1, fit.u_residual),
                         Matrix(60, 1, subtract(f.z, multiply(f.w_tilde, fit.gamma_hat)))),
            1e-12);
  EXPECT_NEAR(fit.sigma_u_hat, norm2(fit.u_residual) / std::sqrt(60.0), 1e-14);
  EXPECT_NEAR(fit.sigma_eps_hat, norm2(fit.eps_residual) / std::sqrt(60.0), 1e-14);
  EXPECT_GE(fit.rho_hat, 0.01);
  EXPECT_LE(fit.rho_hat, 1.0);
}
