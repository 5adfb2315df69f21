#include <gtest/gtest.h>

#include "densetest/inference.hpp"
#include "densetest/random.hpp"

using namespace densetest;

namespace {

struct Data {
  Matrix x;
  Vector y;
};

Data linear_data(std::size_t n, std::size_t p, const Vector& beta, std::uint64_t seed) {
  Rng rng(seed);
  Data d{Matrix(n, p), {}};
  for (double& v : d.x.data()) v = rng.normal();
  d.y = multiply(d.x, beta);
  for (double& v : d.y) v += rng.normal();
  return d;
}

}  // namespace

TEST(MakeReport, TwoSidedDecision) {
  const TestReport r = make_report(Method::KnownSigma, 1.959963984540054 + 1e-9, 0.05);
  EXPECT_TRUE(r.reject);
  EXPECT_NEAR(r.p_value, 0.05, 1e-8);
  EXPECT_FALSE(make_report(Method::KnownSigma, -1.9, 0.05).reject);
  EXPECT_TRUE(make_report(Method::KnownSigma, -2.0, 0.05).reject);
  EXPECT_DOUBLE_EQ(make_report(Method::KnownSigma, 0.0, 0.05).p_value, 1.0);
}

TEST(MakeReport, AlphaOutOfRange) {
  for (double a : {0.0, 1.0, -0.5}) {
    try {
      make_report(Method::KnownSigma, 1.0, a);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::OutOfRange);
    }
  }
}

TEST(KnownSigmaStatistic, HandComputed) {
  // l = z(y − z g0) with g0 = 1: l = (1·(2−1), 2·(1−2), −1·(0+1)) = (1, −2, −1).
  const Vector z{1, 2, -1}, y{2, 1, 0};
  const double expect = (1 - 2 - 1) / std::sqrt(1.0 + 4.0 + 1.0);
  EXPECT_NEAR(known_sigma_statistic(z, y, 1.0), expect, 1e-15);
}

TEST(KnownSigmaStatistic, Degenerate) {
  try {
    known_sigma_statistic(Vector{1, 1}, Vector{2, 2}, 2.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateStatistic);
  }
}

TEST(UnknownSigmaStatistic, HandComputed) {
  const Vector u{1, 0, 1, 0}, e{1, 1, 0, 0};
  EXPECT_NEAR(unknown_sigma_statistic(u, e), std::sqrt(4.0) * 1.0 / 2.0, 1e-15);
  EXPECT_THROW(unknown_sigma_statistic(Vector{0, 0}, Vector{1, 1}), Error);
}

TEST(TestKnownSigma, RejectsFarAndKeepsTruth) {
  Vector beta(20, 0.0);
  beta[0] = 1.0;
  const Data d = linear_data(400, 20, beta, 1);
  Vector a(20, 0.0);
  a[0] = 1.0;
  const Matrix sigma = Matrix::identity(20);
  const TestReport far = test_known_sigma(d.x, d.y, sigma, Hypothesis{a, 3.0}, 0.05);
  EXPECT_TRUE(far.reject);
  const TestReport truth = test_known_sigma(d.x, d.y, sigma, Hypothesis{a, 1.0}, 0.05);
  EXPECT_NEAR(truth.statistic, known_sigma_statistic(decompose_known(d.x, a, sigma).z, d.y, 1.0),
              1e-15);
  EXPECT_LT(far.p_value, 1e-6);
  EXPECT_EQ(far.method, Method::KnownSigma);
  EXPECT_FALSE(far.diagnostics.has_value());
}

TEST(TestUnknownSigma, ReportsDiagnostics) {
  Vector beta(15, 0.0);
  beta[0] = beta[1] = 0.8;
  const Data d = linear_data(100, 15, beta, 2);
  Hypothesis h{Vector(15, 0.0), 0.8};
  h.a[1] = 1.0;
  const TestReport r = test_unknown_sigma(d.x, d.y, h, 0.05, default_tuning(100, 15));
  EXPECT_EQ(r.method, Method::UnknownSigma);
  ASSERT_TRUE(r.diagnostics.has_value());
  EXPECT_TRUE(r.diagnostics->feasible());
  EXPECT_GT(r.diagnostics->sigma_eps_hat, 0.5);
  EXPECT_LT(r.diagnostics->sigma_eps_hat, 1.5);
  const TestReport far = test_unknown_sigma(d.x, d.y, Hypothesis{h.a, 3.0}, 0.05,
                                            default_tuning(100, 15));
  EXPECT_TRUE(far.reject);
}

TEST(UnknownSigmaTester, MatchesOneShotAndPlugIn) {
  Vector beta(12, 0.0);
  beta[2] = 1.5;
  const Data d = linear_data(120, 12, beta, 3);
  Vector a(12, 0.0);
  a[2] = 1.0;
  const Tuning t = default_tuning(120, 12);
  const UnknownSigmaTester tester(d.x, d.y, a, t);
  for (double g0 : {0.0, 1.5, 2.0}) {
    const TestReport one = test_unknown_sigma(d.x, d.y, Hypothesis{a, g0}, 0.05, t);
    EXPECT_EQ(tester.test(g0, 0.05).statistic, one.statistic);
  }
  EXPECT_NEAR(tester.plug_in_estimate(), 1.5, 0.3);
}

TEST(InvertTest, ContiguousAndGaps) {
  const GridSpec grid{0.0, 1.0, 0.5};  // −1, −.5, 0, .5, 1
  ASSERT_EQ(grid.points().size(), 5u);
  const auto ci = invert_test([](double g) -> std::optional<bool> { return std::abs(g) > 0.6; },
                              grid, 0.05);
  EXPECT_EQ(ci.status, CiStatus::Ok);
  EXPECT_EQ(ci.lower, -0.5);
  EXPECT_EQ(ci.upper, 0.5);
  EXPECT_TRUE(ci.contiguous);
  EXPECT_EQ(ci.accepted, 3u);
  EXPECT_DOUBLE_EQ(ci.level, 0.95);

  const auto gap = invert_test(
      [](double g) -> std::optional<bool> {
        if (g == 0.5) return std::nullopt;
        return g == 0.0;
      },
      grid, 0.1);
  EXPECT_EQ(gap.lower, -1.0);
  EXPECT_EQ(gap.upper, 1.0);
  EXPECT_FALSE(gap.contiguous);
  EXPECT_EQ(gap.undetermined, 1u);

  const auto empty =
      invert_test([](double) -> std::optional<bool> { return true; }, grid, 0.05);
  EXPECT_EQ(empty.status, CiStatus::EmptyAcceptanceRegion);
}

TEST(GridSpec, DefaultHas401Points) {
  const Vector a{3, 4};
  const GridSpec g = default_grid(1.0, a, 100);
  const auto pts = g.points();
  ASSERT_EQ(pts.size(), 401u);
  EXPECT_NEAR(pts.front(), 1.0 - 5.0, 1e-12);
  EXPECT_NEAR(pts.back(), 1.0 + 5.0, 1e-12);
  EXPECT_THROW((GridSpec{0, 1, 0}.points()), Error);
}

TEST(ConfidenceInterval, KnownSigmaMatchesClosedFormEndpoints) {
  // T_n(g0) is a ratio of a linear and a quadratic in g0; the accepted set
  // {|T| ≤ q} is the interval between the roots of Σl² q² − (Σl)² = 0.
  Vector beta(10, 0.0);
  beta[0] = 1.0;
  const Data d = linear_data(200, 10, beta, 4);
  Vector a(10, 0.0);
  a[0] = 1.0;
  const Matrix sigma = Matrix::identity(10);
  CiRequest req;
  req.sigma = &sigma;
  req.grid = GridSpec{1.0, 0.6, 1e-4};
  const ConfidenceInterval ci = confidence_interval(d.x, d.y, a, req);
  ASSERT_EQ(ci.status, CiStatus::Ok);
  EXPECT_TRUE(ci.contiguous);

  const SynthFeaturesKnown f = decompose_known(d.x, a, sigma);
  // Coefficients of Σl = A − B g and Σl² = C − 2D g + E g².
  double A = 0, B = 0, C = 0, D = 0, E = 0;
  for (std::size_t i = 0; i < 200; ++i) {
    const double z = f.z[i], y = d.y[i];
    A += z * y;
    B += z * z;
    C += z * z * y * y;
    D += z * z * z * y;
    E += z * z * z * z;
  }
  const double q = 1.959963984540054;
  // (A − Bg)² − q²(C − 2Dg + Eg²) = 0.
  const double qa = B * B - q * q * E, qb = -2 * A * B + 2 * q * q * D, qc = A * A - q * q * C;
  const double disc = std::sqrt(qb * qb - 4 * qa * qc);
  const double r1 = (-qb - disc) / (2 * qa), r2 = (-qb + disc) / (2 * qa);
  EXPECT_NEAR(ci.lower, std::min(r1, r2), 2e-4);
  EXPECT_NEAR(ci.upper, std::max(r1, r2), 2e-4);
}

TEST(ConfidenceInterval, SigmaArgumentMustMatchMethod) {
  const Data d = linear_data(20, 3, Vector{1, 0, 0}, 5);
  CiRequest req;  // KnownSigma without sigma
  EXPECT_THROW(confidence_interval(d.x, d.y, Vector{1, 0, 0}, req), Error);
}

TEST(ConfidenceInterval, UnknownSigmaCoversTruth) {
  Vector beta(8, 0.0);
  beta[1] = 2.0;
  const Data d = linear_data(150, 8, beta, 6);
  Vector a(8, 0.0);
  a[1] = 1.0;
  CiRequest req;
  req.method = Method::UnknownSigma;
  req.grid = GridSpec{2.0, 0.8, 0.02};
  const ConfidenceInterval ci = confidence_interval(d.x, d.y, a, req);
  ASSERT_EQ(ci.status, CiStatus::Ok);
  EXPECT_LT(ci.lower, 2.0);
  EXPECT_GT(ci.upper, 2.0);
  EXPECT_LT(ci.upper - ci.lower, 1.0);
}

TEST(PowerEnvelope, ReferenceValues) {
  EXPECT_NEAR(power_envelope(0.05, 0.0), 0.05, 1e-9);
  EXPECT_NEAR(power_envelope(0.05, 2.0), 0.5160052739761748, 1e-9);
  EXPECT_NEAR(power_envelope(0.05, -2.0), power_envelope(0.05, 2.0), 1e-15);
}

TEST(Loadings, Pairwise) {
  const Vector a = pairwise_loading(0, 3, 5);
  EXPECT_EQ(a, (Vector{1, 0, 0, -1, 0}));
  try {
    pairwise_loading(0, 5, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IndexOutOfRange);
  }
  EXPECT_THROW(pairwise_loading(2, 2, 5), Error);
}

TEST(Loadings, Group) {
  const std::vector<std::size_t> g{4, 1};
  EXPECT_EQ(group_loading(Vector{2, -1}, g, 6), (Vector{0, -1, 0, 0, 2, 0}));
  const std::vector<std::size_t> dup{1, 1};
  EXPECT_THROW(group_loading(Vector{1, 1}, dup, 6), Error);
  const std::vector<std::size_t> far{9};
  try {
    group_loading(Vector{1}, far, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IndexOutOfRange);
  }
}

TEST(Loadings, PowerDictionary) {
  const Matrix zeta(2, 2, {2, -1, 0.5, 3});
  const PowerDictionary dict = power_dictionary(zeta, 3);
  ASSERT_EQ(dict.x.cols(), 6u);
  EXPECT_EQ(dict.x(0, 0), 2.0);
  EXPECT_EQ(dict.x(0, 1), 4.0);
  EXPECT_EQ(dict.x(0, 2), 8.0);
  EXPECT_EQ(dict.x(0, 5), -1.0);
  EXPECT_EQ(dict.x(1, 4), 9.0);
  EXPECT_EQ(dict.loading_at(Vector{2, 3}), (Vector{2, 4, 8, 3, 9, 27}));
  EXPECT_THROW(power_dictionary(zeta, 0), Error);
}
