#pragma once

// Monte Carlo campaigns: design generators, parameter/loading regimes, the
// replication loop, and CSV/JSON reporting.
//
// Replication r draws everything from Rng(base_seed + r), so results are
// merged by replication index and never depend on worker scheduling.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "densetest/dantzig.hpp"
#include "densetest/error.hpp"
#include "densetest/inference.hpp"
#include "densetest/numerics.hpp"
#include "densetest/random.hpp"
#include "densetest/synthesize.hpp"

namespace densetest {

enum class Design { Toeplitz, EquiCorrelation, FanSongMixed };
enum class Sparsity { Sparse, Dense };
enum class MethodChoice { KnownSigma, UnknownSigma, Both };

/// How h_grid entries are read: as absolute offsets, as local-alternative
/// multipliers d (h = n^{-1/2}(aᵀΩa)^{1/2}·d with σ_ε = 1), or in units of
/// ‖a‖₂/√n.
enum class HScale { Absolute, LocalD, RootNOverNormA };

struct Regime {
  Sparsity beta = Sparsity::Sparse;
  Sparsity loading = Sparsity::Sparse;
};

// The mixed design's second mixture component is N(1, v) with v read as a variance.
inline constexpr double kFanSongMixtureVariance = 0.5;
inline constexpr std::size_t kFanSongCorrelatedBlock = 15;

struct SimConfig {
  Design design = Design::Toeplitz;
  Regime regime;
  std::size_t n = 100;
  std::size_t p = 150;
  std::size_t reps = 200;
  double alpha = 0.05;
  std::vector<double> h_grid{0.0};
  HScale h_scale = HScale::Absolute;
  MethodChoice method = MethodChoice::KnownSigma;
  std::uint64_t base_seed = 1;
  std::optional<Tuning> tuning;  // default_tuning(n, p) when absent
  std::size_t threads = 0;       // 0: hardware concurrency; DENSETEST_THREADS caps either way

  void validate() const {
    if (reps < 1) throw Error(ErrorKind::InvalidArgument, "reps must be >= 1");
    if (h_grid.empty()) throw Error(ErrorKind::InvalidArgument, "h_grid must be non-empty");
    validate_alpha(alpha);
    if (n < 2 || p < 2) throw Error(ErrorKind::InvalidArgument, "n and p must be >= 2");
    if (design == Design::FanSongMixed && p < 16) {
      throw Error(ErrorKind::InvalidArgument, "FanSongMixed design needs p >= 16");
    }
    if (tuning) tuning->validate();
  }
};

// ---------------------------------------------------------------------------
// Designs and regimes

inline Matrix population_covariance(Design design, std::size_t p) {
  Matrix s(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double gap = static_cast<double>(i > j ? i - j : j - i);
      switch (design) {
        case Design::Toeplitz: s(i, j) = std::pow(0.4, gap); break;
        case Design::EquiCorrelation: s(i, j) = i == j ? 1.0 : 0.4; break;
        case Design::FanSongMixed: break;
      }
    }
  }
  if (design == Design::FanSongMixed) {
    const std::size_t third = p / 3;
    const std::size_t two_thirds = 2 * p / 3;
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t idx = j + 1;
      if (idx <= kFanSongCorrelatedBlock) {
        for (std::size_t k = 0; k < std::min(p, kFanSongCorrelatedBlock); ++k) {
          s(j, k) = j == k ? 1.0 : 0.4;
        }
      } else if (idx <= third) {
        s(j, j) = 1.0;
      } else if (idx <= two_thirds) {
        s(j, j) = 2.0;  // Laplace(0, 1)
      } else {
        s(j, j) = 0.5 * 2.0 + 0.5 * (kFanSongMixtureVariance + 1.0);
      }
    }
  }
  return s;
}

/// Draws X for one replication. `sigma_factor` must be the Cholesky factor
/// of population_covariance(design, p) for the Gaussian designs.
inline Matrix gen_design(Design design, std::size_t n, std::size_t p, Rng& rng,
                         const LowerTriangular* sigma_factor = nullptr) {
  if (n < 2 || p < 2) throw Error(ErrorKind::InvalidArgument, "gen_design needs n, p >= 2");
  if (design != Design::FanSongMixed) {
    if (sigma_factor) {
      require_same(sigma_factor->dim(), p, "covariance factor dimension");
      return sample_gaussian_rows(*sigma_factor, n, rng);
    }
    return sample_gaussian_rows(cholesky(population_covariance(design, p)), n, rng);
  }
  if (p < 16) throw Error(ErrorKind::InvalidArgument, "FanSongMixed design needs p >= 16");
  // corr(x₁, x₂) = 1/(1 + c²) = 0.4
  const double c = std::sqrt(1.5);
  const double norm = std::sqrt(1.0 + c * c);
  const double mix_sd = std::sqrt(kFanSongMixtureVariance);
  const std::size_t third = p / 3;
  const std::size_t two_thirds = 2 * p / 3;
  Matrix x(n, p);
  for (std::size_t i = 0; i < n; ++i) {
    const double common = rng.normal();
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t idx = j + 1;
      double v;
      if (idx <= kFanSongCorrelatedBlock) {
        v = (common + c * rng.normal()) / norm;
      } else if (idx <= third) {
        v = rng.normal();
      } else if (idx <= two_thirds) {
        // Laplace(0, 1) by inverse CDF; u ∈ (−1/2, 1/2).
        double u = rng.uniform() - 0.5;
        if (u == -0.5) u = -0.5 + std::numeric_limits<double>::epsilon();
        v = -std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
      } else {
        const bool first = rng.uniform() < 0.5;
        v = first ? -1.0 + rng.normal() : 1.0 + mix_sd * rng.normal();
      }
      x(i, j) = v;
    }
  }
  return x;
}

struct RegimeVectors {
  Vector beta_star;
  Vector a;
};

inline RegimeVectors gen_regime(Regime regime, std::size_t p) {
  if (p < 2) throw Error(ErrorKind::InvalidArgument, "gen_regime needs p >= 2");
  RegimeVectors out{Vector(p, 0.0), Vector(p, 0.0)};
  if (regime.beta == Sparsity::Sparse) {
    out.beta_star[0] = 0.8;
    out.beta_star[1] = 0.8;
  } else {
    std::fill(out.beta_star.begin(), out.beta_star.end(), 3.0 / std::sqrt(static_cast<double>(p)));
  }
  if (regime.loading == Sparsity::Sparse) {
    out.a[1] = 1.0;
  } else {
    std::fill(out.a.begin(), out.a.end(), 1.0);
  }
  return out;
}

/// h_n = n^{-1/2}(aᵀΩa)^{1/2}σ_ε d.
inline double local_alternative_offset(const Matrix& sigma, std::span<const double> a,
                                       double sigma_eps, double d, std::size_t n) {
  const Vector omega_a = solve_spd(sigma, a);
  return std::sqrt(dot(a, omega_a)) * sigma_eps * d / std::sqrt(static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Campaign results

struct HRow {
  double h = 0.0;
  double rejection_rate = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_reps = 0;
  std::size_t n_errors = 0;
  std::size_t n_infeasible = 0;
  std::size_t n_rejections = 0;
};

struct RepError {
  std::size_t rep = 0;
  double h = 0.0;
  std::string message;
};

struct MethodResult {
  Method method = Method::KnownSigma;
  std::vector<HRow> rows;
  Vector null_statistics;  // decided replications at h = 0, in replication order
  std::optional<KsResult> ks;
  std::optional<double> feasibility_rate;  // unknown-covariance only
  std::vector<RepError> errors;

  double rejection_rate(double h) const {
    for (const auto& r : rows) {
      if (r.h == h) return r.rejection_rate;
    }
    throw Error(ErrorKind::InvalidArgument, "h not in grid");
  }
};

struct SimResult {
  std::vector<double> h_absolute;  // resolved offsets, aligned with config.h_grid
  std::vector<MethodResult> methods;
  double wall_time = 0.0;  // seconds; not serialized

  const MethodResult& of(Method m) const {
    for (const auto& r : methods) {
      if (r.method == m) return r;
    }
    throw Error(ErrorKind::InvalidArgument, "method not run in this campaign");
  }
};

/// Requested count (0: hardware concurrency), capped by DENSETEST_THREADS.
inline std::size_t resolve_thread_count(std::size_t requested) {
  std::size_t threads = requested;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("DENSETEST_THREADS")) {
    const auto cap = static_cast<std::size_t>(std::strtoul(env, nullptr, 10));
    if (cap > 0) threads = std::min(threads, cap);
  }
  return threads;
}

/// Converts the config's h_grid to absolute offsets.
inline std::vector<double> resolve_h_grid(const SimConfig& cfg) {
  const RegimeVectors rv = gen_regime(cfg.regime, cfg.p);
  double unit = 1.0;
  if (cfg.h_scale == HScale::LocalD) {
    unit = local_alternative_offset(population_covariance(cfg.design, cfg.p), rv.a, 1.0, 1.0, cfg.n);
  } else if (cfg.h_scale == HScale::RootNOverNormA) {
    unit = norm2(rv.a) / std::sqrt(static_cast<double>(cfg.n));
  }
  std::vector<double> out;
  out.reserve(cfg.h_grid.size());
  for (double h : cfg.h_grid) out.push_back(h * unit);
  return out;
}

namespace detail {

enum class Outcome : std::uint8_t { Accept, Reject, Infeasible, Error };

struct RepRecord {
  // [method][h]
  std::vector<std::vector<Outcome>> outcome;
  std::vector<std::vector<double>> statistic;
  std::vector<std::vector<std::string>> message;
};

}  // namespace detail

inline SimResult run_campaign(const SimConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const RegimeVectors rv = gen_regime(cfg.regime, cfg.p);
  const double truth = dot(rv.a, rv.beta_star);
  const std::vector<double> hs = resolve_h_grid(cfg);
  const Tuning tuning = cfg.tuning ? *cfg.tuning : default_tuning(cfg.n, cfg.p);

  std::vector<Method> methods;
  if (cfg.method != MethodChoice::UnknownSigma) methods.push_back(Method::KnownSigma);
  if (cfg.method != MethodChoice::KnownSigma) methods.push_back(Method::UnknownSigma);

  const Matrix sigma = population_covariance(cfg.design, cfg.p);
  const LowerTriangular sigma_factor = cholesky(sigma);
  Vector known_direction;
  if (cfg.method != MethodChoice::UnknownSigma) {
    known_direction = projection_direction(sigma_factor, rv.a);
  }
  const double crit = normal_quantile(1.0 - cfg.alpha / 2.0);

  std::vector<detail::RepRecord> records(cfg.reps);
  auto run_rep = [&](std::size_t r) {
    detail::RepRecord& rec = records[r];
    rec.outcome.assign(methods.size(), std::vector<detail::Outcome>(hs.size(), detail::Outcome::Error));
    rec.statistic.assign(methods.size(), std::vector<double>(hs.size(), 0.0));
    rec.message.assign(methods.size(), std::vector<std::string>(hs.size()));
    Rng rng(cfg.base_seed + r);
    const Matrix x = gen_design(cfg.design, cfg.n, cfg.p, rng, &sigma_factor);
    Vector y = multiply(x, rv.beta_star);
    for (double& v : y) v += rng.normal();

    for (std::size_t m = 0; m < methods.size(); ++m) {
      auto record = [&](std::size_t k, double stat) {
        rec.statistic[m][k] = stat;
        rec.outcome[m][k] =
            std::abs(stat) > crit ? detail::Outcome::Reject : detail::Outcome::Accept;
      };
      auto fail = [&](std::size_t k, const Error& e) {
        rec.outcome[m][k] = e.kind() == ErrorKind::InfeasibleEstimator ? detail::Outcome::Infeasible
                                                                      : detail::Outcome::Error;
        rec.message[m][k] = e.what();
      };
      if (methods[m] == Method::KnownSigma) {
        const Vector z = multiply(x, known_direction);
        for (std::size_t k = 0; k < hs.size(); ++k) {
          try {
            record(k, known_sigma_statistic(z, y, truth + hs[k]));
          } catch (const Error& e) {
            fail(k, e);
          }
        }
      } else {
        std::optional<UnknownSigmaTester> tester;
        try {
          tester.emplace(x, y, rv.a, tuning);
        } catch (const Error& e) {
          for (std::size_t k = 0; k < hs.size(); ++k) fail(k, e);
          continue;
        }
        for (std::size_t k = 0; k < hs.size(); ++k) {
          try {
            record(k, tester->test(truth + hs[k], cfg.alpha).statistic);
          } catch (const Error& e) {
            fail(k, e);
          }
        }
      }
    }
  };

  const std::size_t threads = std::min(resolve_thread_count(cfg.threads), cfg.reps);
  if (threads <= 1) {
    for (std::size_t r = 0; r < cfg.reps; ++r) run_rep(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < cfg.reps;) {
          try {
            run_rep(r);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  SimResult result;
  result.h_absolute = hs;
  std::size_t failed_reps = 0;
  for (const auto& rec : records) {
    bool any = false;
    for (const auto& per_method : rec.outcome) {
      for (auto o : per_method) any = any || o == detail::Outcome::Error;
    }
    failed_reps += any ? 1 : 0;
  }
  if (static_cast<double>(failed_reps) > 0.2 * static_cast<double>(cfg.reps)) {
    throw Error(ErrorKind::CampaignFailed, std::to_string(failed_reps) + " of " +
                                               std::to_string(cfg.reps) + " replications errored");
  }

  const auto zero_it = std::find(cfg.h_grid.begin(), cfg.h_grid.end(), 0.0);
  const bool has_zero = zero_it != cfg.h_grid.end();
  const auto zero_index = static_cast<std::size_t>(zero_it - cfg.h_grid.begin());

  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodResult mr;
    mr.method = methods[m];
    std::size_t fit_attempts = 0;
    std::size_t fit_ok = 0;
    for (std::size_t k = 0; k < hs.size(); ++k) {
      HRow row;
      row.h = hs[k];
      row.n_reps = cfg.reps;
      std::size_t decided = 0;
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        switch (records[r].outcome[m][k]) {
          case detail::Outcome::Reject: ++row.n_rejections; ++decided; break;
          case detail::Outcome::Accept: ++decided; break;
          case detail::Outcome::Infeasible: ++row.n_infeasible; break;
          case detail::Outcome::Error:
            ++row.n_errors;
            mr.errors.push_back({r, hs[k], records[r].message[m][k]});
            break;
        }
      }
      if (decided > 0) {
        row.rejection_rate = static_cast<double>(row.n_rejections) / static_cast<double>(decided);
      }
      if (!has_zero || zero_index == k) {
        fit_attempts += decided + row.n_infeasible;
        fit_ok += decided;
      }
      mr.rows.push_back(row);
    }
    if (has_zero) {
      for (std::size_t r = 0; r < cfg.reps; ++r) {
        const auto o = records[r].outcome[m][zero_index];
        if (o == detail::Outcome::Accept || o == detail::Outcome::Reject) {
          mr.null_statistics.push_back(records[r].statistic[m][zero_index]);
        }
      }
      if (mr.null_statistics.size() >= 10) mr.ks = ks_test_standard_normal(mr.null_statistics);
    }
    if (methods[m] == Method::UnknownSigma && fit_attempts > 0) {
      mr.feasibility_rate = static_cast<double>(fit_ok) / static_cast<double>(fit_attempts);
    }
    result.methods.push_back(std::move(mr));
  }
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string_view to_string(Design d) {
  switch (d) {
    case Design::Toeplitz: return "toeplitz";
    case Design::EquiCorrelation: return "equicorrelation";
    case Design::FanSongMixed: return "fansong";
  }
  return "?";
}
inline std::string_view to_string(Sparsity s) { return s == Sparsity::Sparse ? "sparse" : "dense"; }
inline std::string_view to_string(MethodChoice m) {
  switch (m) {
    case MethodChoice::KnownSigma: return "known";
    case MethodChoice::UnknownSigma: return "unknown";
    case MethodChoice::Both: return "both";
  }
  return "?";
}
inline std::string_view to_string(HScale s) {
  switch (s) {
    case HScale::Absolute: return "absolute";
    case HScale::LocalD: return "local_d";
    case HScale::RootNOverNormA: return "root_n_over_norm_a";
  }
  return "?";
}

namespace detail {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& text, const Enum (&values)[N], const char* field) {
  for (Enum v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(ErrorKind::InvalidArgument, std::string("unknown ") + field + " '" + text + "'");
}

}  // namespace detail

using ordered_json = nlohmann::ordered_json;

/// Reads a campaign config; absent fields keep SimConfig defaults.
inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  try {
    if (j.contains("design"))
      c.design = detail::parse_enum(j.at("design").get<std::string>(),
                                    {Design::Toeplitz, Design::EquiCorrelation, Design::FanSongMixed},
                                    "design");
    if (j.contains("beta"))
      c.regime.beta = detail::parse_enum(j.at("beta").get<std::string>(),
                                         {Sparsity::Sparse, Sparsity::Dense}, "beta regime");
    if (j.contains("loading"))
      c.regime.loading = detail::parse_enum(j.at("loading").get<std::string>(),
                                            {Sparsity::Sparse, Sparsity::Dense}, "loading regime");
    if (j.contains("n")) c.n = j.at("n").get<std::size_t>();
    if (j.contains("p")) c.p = j.at("p").get<std::size_t>();
    if (j.contains("reps")) c.reps = j.at("reps").get<std::size_t>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("h_grid")) c.h_grid = j.at("h_grid").get<std::vector<double>>();
    if (j.contains("h_scale"))
      c.h_scale = detail::parse_enum(j.at("h_scale").get<std::string>(),
                                     {HScale::Absolute, HScale::LocalD, HScale::RootNOverNormA},
                                     "h_scale");
    if (j.contains("method"))
      c.method = detail::parse_enum(j.at("method").get<std::string>(),
                                    {MethodChoice::KnownSigma, MethodChoice::UnknownSigma,
                                     MethodChoice::Both},
                                    "method");
    if (j.contains("seed")) c.base_seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<std::size_t>();
    if (j.contains("tuning")) {
      const auto& t = j.at("tuning");
      Tuning tu = default_tuning(c.n, c.p);
      if (t.contains("eta")) tu.eta = t.at("eta").get<double>();
      if (t.contains("lambda")) tu.lambda = t.at("lambda").get<double>();
      if (t.contains("rho0")) tu.rho0 = t.at("rho0").get<double>();
      c.tuning = tu;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("campaign config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Config echo. Thread count is omitted: it never changes results.
inline ordered_json to_json(const SimConfig& c) {
  const Tuning tu = c.tuning ? *c.tuning : default_tuning(c.n, c.p);
  ordered_json j;
  j["design"] = to_string(c.design);
  j["beta"] = to_string(c.regime.beta);
  j["loading"] = to_string(c.regime.loading);
  j["n"] = c.n;
  j["p"] = c.p;
  j["reps"] = c.reps;
  j["alpha"] = c.alpha;
  j["h_grid"] = c.h_grid;
  j["h_scale"] = to_string(c.h_scale);
  j["method"] = to_string(c.method);
  j["seed"] = c.base_seed;
  j["tuning"] = {{"eta", tu.eta}, {"lambda", tu.lambda}, {"rho0", tu.rho0}};
  return j;
}

inline ordered_json nullable(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

inline ordered_json to_json(const SimConfig& c, const SimResult& r) {
  ordered_json j;
  j["config"] = to_json(c);
  j["h_absolute"] = r.h_absolute;
  ordered_json methods = ordered_json::array();
  for (const auto& m : r.methods) {
    ordered_json mj;
    mj["method"] = to_string(m.method);
    ordered_json rows = ordered_json::array();
    for (const auto& row : m.rows) {
      ordered_json rj;
      rj["h"] = row.h;
      rj["rejection_rate"] = nullable(row.rejection_rate);
      rj["n_reps"] = row.n_reps;
      rj["n_errors"] = row.n_errors;
      rj["n_infeasible"] = row.n_infeasible;
      rj["n_rejections"] = row.n_rejections;
      rows.push_back(std::move(rj));
    }
    mj["rows"] = std::move(rows);
    mj["ks_statistic"] = m.ks ? ordered_json(m.ks->statistic) : ordered_json(nullptr);
    mj["ks_p_value"] = m.ks ? ordered_json(m.ks->p_value) : ordered_json(nullptr);
    mj["feasibility_rate"] = m.feasibility_rate ? ordered_json(*m.feasibility_rate) : ordered_json(nullptr);
    mj["null_statistics"] = m.null_statistics;
    ordered_json errs = ordered_json::array();
    for (const auto& e : m.errors) errs.push_back({{"rep", e.rep}, {"h", e.h}, {"message", e.message}});
    mj["errors"] = std::move(errs);
    methods.push_back(std::move(mj));
  }
  j["results"] = std::move(methods);
  return j;
}

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// CSV with header h,rejection_rate,n_reps,n_errors,n_infeasible,method.
inline std::string to_csv(const SimResult& r) {
  std::ostringstream os;
  os << "h,rejection_rate,n_reps,n_errors,n_infeasible,method\n";
  for (const auto& m : r.methods) {
    for (const auto& row : m.rows) {
      os << format_double(row.h) << ',' << format_double(row.rejection_rate) << ',' << row.n_reps
         << ',' << row.n_errors << ',' << row.n_infeasible << ',' << to_string(m.method) << '\n';
    }
  }
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::DataError, "cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace densetest
