#pragma once

// Command-line front end. run_cli is the whole program; tools/densetest.cpp
// only forwards argv.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 infeasible estimator.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "densetest/csv.hpp"
#include "densetest/error.hpp"
#include "densetest/inference.hpp"
#include "densetest/simulate.hpp"

namespace densetest {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitInfeasible = 3;

namespace cli_detail {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto v = detail::parse_number(detail::trim(cell));
    if (!v) throw UsageError(std::string(flag) + ": '" + cell + "' is not a number");
    out.push_back(*v);
  }
  if (out.empty()) throw UsageError(std::string(flag) + " is empty");
  return out;
}

inline std::vector<std::size_t> parse_indices(const std::string& text, const char* flag) {
  std::vector<std::size_t> out;
  for (double v : parse_list(text, flag)) {
    if (v < 1 || v != std::floor(v)) {
      throw UsageError(std::string(flag) + ": indices are 1-based positive integers");
    }
    out.push_back(static_cast<std::size_t>(v) - 1);
  }
  return out;
}

struct DataOptions {
  std::string data_path;
  std::optional<std::size_t> y_col;  // 1-based on the command line
  std::string a_inline;
  std::string a_pair;
  std::string a_group;
  std::string a_group_coef;
  std::string a_dict_point;
  std::size_t dict_degree = 4;
  double g0 = 0.0;
  double alpha = 0.05;
  std::string sigma_path;
  std::optional<double> eta;
  std::optional<double> lambda;
  std::optional<double> rho0;
  std::string output_path;
  std::uint64_t seed = 1;

  void attach(CLI::App& app) {
    app.add_option("--data", data_path, "CSV with features and response")->required();
    app.add_option("--y-col", y_col, "1-based response column (default: last)");
    app.add_option("--a", a_inline, "loading vector, comma-separated");
    app.add_option("--a-index-pair", a_pair, "pairwise loading k,j (1-based): beta_k - beta_j");
    app.add_option("--a-group", a_group, "group loading indices (1-based), comma-separated");
    app.add_option("--a-group-coef", a_group_coef, "group coefficients (default all ones)");
    app.add_option("--a-dict-point", a_dict_point,
                   "conditional-mean point; features are expanded into powers");
    app.add_option("--dict-degree", dict_degree, "power dictionary degree")->check(CLI::PositiveNumber);
    app.add_option("--g0", g0, "hypothesized value of a'beta");
    app.add_option("--alpha", alpha, "nominal level")->check(CLI::Range(0.0, 1.0));
    app.add_option("--sigma", sigma_path, "CSV with the known feature covariance");
    app.add_option("--eta", eta, "pi-estimator tuning");
    app.add_option("--lambda", lambda, "gamma-estimator tuning");
    app.add_option("--rho0", rho0, "lower bound for the noise ratio");
    app.add_option("--output", output_path, "JSON report path");
    app.add_option("--seed", seed, "seed (recorded in the report)");
  }
};

struct Problem {
  Matrix x;
  Vector y;
  Vector a;
  std::optional<Matrix> sigma;
  Tuning tuning;
};

inline Problem load_problem(const DataOptions& o) {
  const int forms = !o.a_inline.empty() + !o.a_pair.empty() + !o.a_group.empty() +
                    !o.a_dict_point.empty();
  if (forms != 1) {
    throw UsageError("give exactly one of --a, --a-index-pair, --a-group, --a-dict-point");
  }
  if (!(o.alpha > 0.0 && o.alpha < 1.0)) throw UsageError("--alpha must lie in (0,1)");
  std::optional<std::size_t> y_col;
  if (o.y_col) {
    if (*o.y_col < 1) throw UsageError("--y-col is 1-based");
    y_col = *o.y_col - 1;
  }
  Dataset d = read_csv_dataset(o.data_path, y_col);
  Problem pr;
  pr.y = std::move(d.y);
  if (!o.a_dict_point.empty()) {
    const PowerDictionary dict = power_dictionary(d.x, o.dict_degree);
    const Vector point = parse_list(o.a_dict_point, "--a-dict-point");
    if (point.size() != dict.raw_dim) {
      throw Error(ErrorKind::DimensionMismatch,
                  "dictionary point has length " + std::to_string(point.size()) +
                      " but the data has " + std::to_string(dict.raw_dim) + " feature columns");
    }
    pr.a = dict.loading_at(point);
    pr.x = dict.x;
  } else {
    pr.x = std::move(d.x);
    const std::size_t p = pr.x.cols();
    if (!o.a_inline.empty()) {
      pr.a = parse_list(o.a_inline, "--a");
    } else if (!o.a_pair.empty()) {
      const auto idx = parse_indices(o.a_pair, "--a-index-pair");
      if (idx.size() != 2) throw UsageError("--a-index-pair needs exactly two indices");
      pr.a = pairwise_loading(idx[0], idx[1], p);
    } else {
      const auto idx = parse_indices(o.a_group, "--a-group");
      const Vector coef =
          o.a_group_coef.empty() ? Vector(idx.size(), 1.0) : parse_list(o.a_group_coef, "--a-group-coef");
      pr.a = group_loading(coef, idx, p);
    }
  }
  if (pr.a.size() != pr.x.cols()) {
    throw Error(ErrorKind::DimensionMismatch,
                "loading has length " + std::to_string(pr.a.size()) + " but the data has " +
                    std::to_string(pr.x.cols()) + " feature columns");
  }
  if (!o.sigma_path.empty()) {
    Matrix s = read_csv(o.sigma_path).values;
    if (s.rows() != pr.x.cols() || s.cols() != pr.x.cols()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "covariance is " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()) +
                      " but the data has " + std::to_string(pr.x.cols()) + " feature columns");
    }
    pr.sigma = std::move(s);
  }
  pr.tuning = default_tuning(std::max<std::size_t>(pr.x.rows(), 2), std::max<std::size_t>(pr.x.cols(), 2));
  if (o.eta) pr.tuning.eta = *o.eta;
  if (o.lambda) pr.tuning.lambda = *o.lambda;
  if (o.rho0) pr.tuning.rho0 = *o.rho0;
  pr.tuning.validate();
  return pr;
}

inline ordered_json report_json(const TestReport& r, const Problem& pr, double g0,
                                std::uint64_t seed) {
  ordered_json j;
  j["method"] = to_string(r.method);
  j["n"] = pr.x.rows();
  j["p"] = pr.x.cols();
  j["g0"] = g0;
  j["alpha"] = r.alpha;
  j["statistic"] = r.statistic;
  j["p_value"] = r.p_value;
  j["reject"] = r.reject;
  j["seed"] = seed;
  j["loading"] = pr.a;
  if (r.diagnostics) {
    const DantzigFit& f = *r.diagnostics;
    j["diagnostics"] = {{"tuning", {{"eta", pr.tuning.eta},
                                    {"lambda", pr.tuning.lambda},
                                    {"rho0", pr.tuning.rho0}}},
                        {"rho_hat", f.rho_hat},
                        {"sigma_eps_hat", f.sigma_eps_hat},
                        {"sigma_u_hat", f.sigma_u_hat},
                        {"pi_l1", norm1(f.pi_hat)},
                        {"gamma_l1", norm1(f.gamma_hat)},
                        {"pi_feasible", f.pi_feasible},
                        {"gamma_feasible", f.gamma_feasible}};
  }
  return j;
}

inline void write_json(const std::string& path, const ordered_json& j) {
  if (!path.empty()) write_text_file(path, j.dump(2) + "\n");
}

inline int cmd_test(const DataOptions& o, std::ostream& out) {
  const Problem pr = load_problem(o);
  const Hypothesis hyp{pr.a, o.g0};
  const TestReport r = pr.sigma ? test_known_sigma(pr.x, pr.y, *pr.sigma, hyp, o.alpha)
                                : test_unknown_sigma(pr.x, pr.y, hyp, o.alpha, pr.tuning);
  out << "method: " << to_string(r.method) << "\n"
      << "statistic: " << format_double(r.statistic) << "\n"
      << "p_value: " << format_double(r.p_value) << "\n"
      << "decision: " << (r.reject ? "reject" : "do not reject") << " H0 at alpha = " << o.alpha
      << "\n";
  if (r.diagnostics) {
    out << "rho_hat: " << format_double(r.diagnostics->rho_hat) << "\n"
        << "sigma_eps_hat: " << format_double(r.diagnostics->sigma_eps_hat) << "\n"
        << "sigma_u_hat: " << format_double(r.diagnostics->sigma_u_hat) << "\n";
  }
  write_json(o.output_path, report_json(r, pr, o.g0, o.seed));
  return kExitOk;
}

struct GridOptions {
  std::optional<double> center;
  std::optional<double> half_width;
  std::optional<double> step;
};

inline int cmd_ci(const DataOptions& o, const GridOptions& g, std::ostream& out) {
  const Problem pr = load_problem(o);
  const int given = g.center.has_value() + g.half_width.has_value() + g.step.has_value();
  if (given != 0 && given != 3) {
    throw UsageError("give all of --grid-center, --grid-half-width, --grid-step, or none");
  }
  CiRequest req;
  req.alpha = o.alpha;
  req.method = pr.sigma ? Method::KnownSigma : Method::UnknownSigma;
  req.sigma = pr.sigma ? &*pr.sigma : nullptr;
  req.tuning = pr.tuning;
  if (given == 3) req.grid = GridSpec{*g.center, *g.half_width, *g.step};
  const ConfidenceInterval ci = confidence_interval(pr.x, pr.y, pr.a, req);

  ordered_json j;
  j["method"] = to_string(req.method);
  j["status"] = ci.status == CiStatus::Ok ? "Ok" : "EmptyAcceptanceRegion";
  j["level"] = ci.level;
  j["lower"] = ci.status == CiStatus::Ok ? ordered_json(ci.lower) : ordered_json(nullptr);
  j["upper"] = ci.status == CiStatus::Ok ? ordered_json(ci.upper) : ordered_json(nullptr);
  j["grid_resolution"] = ci.grid_resolution;
  j["contiguous"] = ci.contiguous;
  j["accepted_points"] = ci.accepted;
  j["undetermined_points"] = ci.undetermined;
  j["loading"] = pr.a;
  write_json(o.output_path, j);

  if (ci.status == CiStatus::EmptyAcceptanceRegion) {
    throw Error(ErrorKind::EmptyAcceptanceRegion, "every grid point was rejected; re-center the grid");
  }
  out << "level: " << ci.level << "\n"
      << "interval: [" << format_double(ci.lower) << ", " << format_double(ci.upper) << "]\n"
      << "contiguous: " << (ci.contiguous ? "yes" : "no") << "\n"
      << "undetermined_points: " << ci.undetermined << "\n";
  return kExitOk;
}

struct CampaignOptions {
  std::string config_path;
  std::string csv_path;
  std::string json_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "campaign config JSON")->required();
    app.add_option("--csv", csv_path, "CSV output path");
    app.add_option("--json", json_path, "JSON output path");
    app.add_option("--seed", seed, "override the config seed");
    app.add_option("--threads", threads, "worker threads (default all cores; DENSETEST_THREADS caps)");
  }

  SimConfig load() const {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorKind::DataError, "cannot read '" + config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::DataError, config_path + ": " + e.what());
    }
    SimConfig c;
    try {
      c = sim_config_from_json(j);
    } catch (const Error& e) {
      throw Error(ErrorKind::DataError, config_path + ": " + e.what());
    }
    if (seed) c.base_seed = *seed;
    if (threads) c.threads = *threads;
    return c;
  }
};

inline void print_summary(const SimResult& r, std::ostream& out) {
  for (const auto& m : r.methods) {
    out << to_string(m.method) << ":\n";
    for (const auto& row : m.rows) {
      out << "  h = " << format_double(row.h) << "  rejection_rate = "
          << format_double(row.rejection_rate) << "  errors = " << row.n_errors
          << "  infeasible = " << row.n_infeasible << "\n";
    }
    if (m.ks) {
      out << "  KS vs N(0,1): statistic = " << format_double(m.ks->statistic)
          << "  p_value = " << format_double(m.ks->p_value) << "\n";
    }
    if (m.feasibility_rate) out << "  feasibility_rate = " << format_double(*m.feasibility_rate) << "\n";
  }
}

inline int cmd_simulate(const CampaignOptions& o, bool null_check, std::ostream& out,
                        std::ostream& err) {
  SimConfig cfg = o.load();
  if (null_check) cfg.h_grid = {0.0};
  const SimResult r = run_campaign(cfg);
  if (!o.csv_path.empty()) write_text_file(o.csv_path, to_csv(r));
  if (!o.json_path.empty()) write_text_file(o.json_path, to_json(cfg, r).dump(2) + "\n");
  if (null_check) {
    for (const auto& m : r.methods) {
      out << to_string(m.method) << " KS p_value: "
          << (m.ks ? format_double(m.ks->p_value) : std::string("n/a")) << "\n";
    }
  } else {
    if (o.csv_path.empty() && o.json_path.empty()) out << to_csv(r);
    print_summary(r, out);
  }
  err << "wall time: " << r.wall_time << " s\n";
  return kExitOk;
}

}  // namespace cli_detail

inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  using namespace cli_detail;
  CLI::App app{"Linear-functional tests for high-dimensional linear models", "densetest"};
  app.require_subcommand(1);

  DataOptions test_opts;
  auto* test = app.add_subcommand("test", "test H0: a'beta = g0 on CSV data");
  test_opts.attach(*test);

  DataOptions ci_opts;
  GridOptions grid;
  auto* ci = app.add_subcommand("ci", "confidence interval for a'beta by test inversion");
  ci_opts.attach(*ci);
  ci->add_option("--grid-center", grid.center, "grid center");
  ci->add_option("--grid-half-width", grid.half_width, "grid half width");
  ci->add_option("--grid-step", grid.step, "grid step");

  CampaignOptions sim_opts;
  auto* sim = app.add_subcommand("simulate", "run a Monte Carlo campaign from a JSON config");
  sim_opts.attach(*sim);

  CampaignOptions null_opts;
  auto* null_check = app.add_subcommand("null-check", "campaign at h = 0 with a KS check");
  null_opts.attach(*null_check);

  std::vector<const char*> argv;
  argv.push_back("densetest");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (test->parsed()) return cmd_test(test_opts, out);
    if (ci->parsed()) return cmd_ci(ci_opts, grid, out);
    if (sim->parsed()) return cmd_simulate(sim_opts, false, out, err);
    if (null_check->parsed()) return cmd_simulate(null_opts, true, out, err);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::InfeasibleEstimator ? kExitInfeasible : kExitData;
  }
  return kExitUsage;
}

}  // namespace densetest
