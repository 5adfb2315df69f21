#pragma once

// Dense two-phase tableau simplex (largest-coefficient pricing with a
// Bland fallback, or pure Bland).
//
// Problems are stated over general bounded variables and mixed
// relations; solve_lp reduces them to  min c'x  s.t.  A x ≤ b, x ≥ 0  over
// shifted/split variables, rows equilibrated to unit max-norm, and runs
// phase 1 on artificial variables for rows whose right-hand side is negative.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "densetest/error.hpp"
#include "densetest/numerics.hpp"

namespace densetest {

enum class Relation { LessEqual, GreaterEqual, Equal };

struct LpConstraint {
  Vector row;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

struct VarBound {
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  static VarBound free() {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
};

struct LpProblem {
  std::size_t num_vars = 0;
  Vector objective;  // minimize objectiveᵀx
  std::vector<LpConstraint> constraints;
  std::vector<VarBound> bounds;  // one per variable

  explicit LpProblem(std::size_t n = 0) : num_vars(n), objective(n, 0.0), bounds(n) {}

  void add(Vector row, Relation rel, double rhs) {
    constraints.push_back({std::move(row), rel, rhs});
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
  }
  return "?";
}

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vector x;                     // populated when Optimal
  double objective_value = 0.0;  // populated when Optimal
  std::size_t pivots = 0;
};

enum class PivotRule {
  Bland,              // lowest-index entering column, always
  LargestCoefficient  // most negative reduced cost; Bland during degenerate stalls
};

struct LpOptions {
  PivotRule rule = PivotRule::LargestCoefficient;
  std::size_t stall_limit = 50;  // consecutive degenerate pivots before Bland takes over
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  std::size_t max_pivots = 0;  // 0 selects 50·(num_vars + num_constraints)
};

inline void validate(const LpProblem& lp) {
  require_same(lp.objective.size(), lp.num_vars, "LP objective length");
  require_same(lp.bounds.size(), lp.num_vars, "LP bound count");
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    require_same(lp.constraints[i].row.size(), lp.num_vars,
                 ("LP constraint row " + std::to_string(i)).c_str());
  }
  for (std::size_t j = 0; j < lp.num_vars; ++j) {
    if (lp.bounds[j].lower > lp.bounds[j].upper) {
      throw Error(ErrorKind::InvalidArgument,
                  "LP variable " + std::to_string(j) + " has lower > upper");
    }
    if (lp.bounds[j].lower == std::numeric_limits<double>::infinity() ||
        lp.bounds[j].upper == -std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::InvalidArgument,
                  "LP variable " + std::to_string(j) + " has an empty bound interval");
    }
  }
}

namespace detail {

// x_j = offset_j + sign_j·s[first_j] (− s[first_j + 1] when split).
struct VarMap {
  double offset = 0.0;
  double sign = 1.0;
  std::size_t first = 0;
  bool split = false;
};

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_(rows * cols, 0.0), rhs_(rows, 0.0), basis_(rows, 0) {}

  double* row(std::size_t i) { return a_.data() + i * cols_; }
  const double* row(std::size_t i) const { return a_.data() + i * cols_; }
  double& rhs(std::size_t i) { return rhs_[i]; }
  std::size_t& basis(std::size_t i) { return basis_[i]; }
  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  // Eliminates column q from every row but r and from the cost row, over
  // the first `width` columns.
  void pivot(std::size_t r, std::size_t q, std::size_t width, Vector& cost, double& cost_rhs) {
    double* pr = row(r);
    const double inv = 1.0 / pr[q];
    nz_.clear();
    for (std::size_t j = 0; j < width; ++j) {
      if (pr[j] != 0.0) {
        pr[j] *= inv;
        nz_.push_back(j);
      }
    }
    rhs_[r] *= inv;
    pr[q] = 1.0;
    const bool sparse = nz_.size() * 3 < width;
    auto eliminate = [&](double* target, double& target_rhs) {
      const double f = target[q];
      if (f == 0.0) return;
      if (sparse) {
        for (std::size_t j : nz_) target[j] -= f * pr[j];
      } else {
        for (std::size_t j = 0; j < width; ++j) target[j] -= f * pr[j];
      }
      target[q] = 0.0;
      target_rhs -= f * rhs_[r];
    };
    for (std::size_t i = 0; i < rows_; ++i) {
      if (i != r) eliminate(row(i), rhs_[i]);
    }
    eliminate(cost.data(), cost_rhs);
    basis_[r] = q;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> a_;
  std::vector<double> rhs_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> nz_;
};

enum class PhaseOutcome { Optimal, Unbounded };

// Entering column: Bland picks the lowest index with negative reduced cost;
// LargestCoefficient picks the most negative one until `stall_limit`
// consecutive degenerate pivots, then uses Bland until the objective moves
// again (Bland cannot cycle, so termination is preserved). Leaving row:
// minimum ratio, ties to the lowest-index basic variable.
inline PhaseOutcome run_phase(Tableau& t, Vector& cost, double& cost_rhs, std::size_t width,
                              const LpOptions& opt, std::size_t& pivots,
                              std::size_t max_pivots) {
  std::size_t degenerate_run = 0;
  for (;;) {
    const bool bland = opt.rule == PivotRule::Bland || degenerate_run >= opt.stall_limit;
    std::size_t q = width;
    double most_negative = -opt.optimality_tol;
    for (std::size_t j = 0; j < width; ++j) {
      if (cost[j] < most_negative) {
        q = j;
        if (bland) break;
        most_negative = cost[j];
      }
    }
    if (q == width) return PhaseOutcome::Optimal;

    std::size_t r = t.rows();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.rows(); ++i) {
      const double aiq = t.row(i)[q];
      if (aiq <= opt.pivot_tol) continue;
      const double ratio = std::max(t.rhs(i), 0.0) / aiq;
      const double tie = 1e-12 * (1.0 + std::abs(best));
      if (r == t.rows() || ratio < best - tie) {
        best = ratio;
        r = i;
      } else if (ratio <= best + tie && t.basis(i) < t.basis(r)) {
        best = std::min(best, ratio);
        r = i;
      }
    }
    if (r == t.rows()) return PhaseOutcome::Unbounded;
    if (++pivots > max_pivots) {
      throw Error(ErrorKind::IterationLimit,
                  "simplex exceeded " + std::to_string(max_pivots) + " pivots");
    }
    degenerate_run = best * std::abs(cost[q]) <= opt.optimality_tol ? degenerate_run + 1 : 0;
    t.pivot(r, q, width, cost, cost_rhs);
  }
}

}  // namespace detail

inline LpSolution solve_lp(const LpProblem& lp, const LpOptions& opt = {}) {
  validate(lp);
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t n = lp.num_vars;

  // Variable transformation to nonnegative standard-form columns.
  std::vector<detail::VarMap> map(n);
  std::size_t n_std = 0;
  struct UpperRow {
    std::size_t col;
    double bound;
  };
  std::vector<UpperRow> upper_rows;
  for (std::size_t j = 0; j < n; ++j) {
    const auto [lo, hi] = lp.bounds[j];
    auto& m = map[j];
    m.first = n_std;
    if (lo > -inf) {
      m.offset = lo;
      ++n_std;
      if (hi < inf) upper_rows.push_back({m.first, hi - lo});
    } else if (hi < inf) {
      m.offset = hi;
      m.sign = -1.0;
      ++n_std;
    } else {
      m.split = true;
      n_std += 2;
    }
  }

  // Rows as a·s ≤ b over standard columns.
  struct Row {
    Vector a;
    double b;
  };
  std::vector<Row> rows;
  rows.reserve(lp.constraints.size() * 2 + upper_rows.size());
  auto push_row = [&](const Vector& orig, double rhs, double dir) {
    Row r{Vector(n_std, 0.0), 0.0};
    double shift = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = dir * orig[j];
      if (v == 0.0) continue;
      const auto& m = map[j];
      shift += v * m.offset;
      r.a[m.first] += v * m.sign;
      if (m.split) r.a[m.first + 1] -= v;
    }
    r.b = dir * rhs - shift;
    rows.push_back(std::move(r));
  };
  for (const auto& c : lp.constraints) {
    if (c.relation == Relation::LessEqual || c.relation == Relation::Equal) push_row(c.row, c.rhs, 1.0);
    if (c.relation == Relation::GreaterEqual || c.relation == Relation::Equal)
      push_row(c.row, c.rhs, -1.0);
  }
  for (const auto& u : upper_rows) {
    Row r{Vector(n_std, 0.0), u.bound};
    r.a[u.col] = 1.0;
    rows.push_back(std::move(r));
  }

  // Equilibrate and drop empty rows.
  std::vector<Row> kept;
  kept.reserve(rows.size());
  for (auto& r : rows) {
    const double scale = norm_inf(r.a);
    if (scale == 0.0) {
      if (r.b < -opt.feasibility_tol) return {LpStatus::Infeasible, {}, 0.0, 0};
      continue;
    }
    for (double& v : r.a) v /= scale;
    r.b /= scale;
    kept.push_back(std::move(r));
  }

  const std::size_t m = kept.size();
  std::size_t n_art = 0;
  for (const auto& r : kept) n_art += r.b < 0.0 ? 1 : 0;

  const std::size_t slack0 = n_std;
  const std::size_t art0 = n_std + m;
  const std::size_t width_all = art0 + n_art;
  detail::Tableau t(m, width_all);
  {
    std::size_t next_art = art0;
    for (std::size_t i = 0; i < m; ++i) {
      double* ti = t.row(i);
      const bool negative = kept[i].b < 0.0;
      const double dir = negative ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n_std; ++j) ti[j] = dir * kept[i].a[j];
      ti[slack0 + i] = dir;
      t.rhs(i) = dir * kept[i].b;
      if (negative) {
        ti[next_art] = 1.0;
        t.basis(i) = next_art++;
      } else {
        t.basis(i) = slack0 + i;
      }
    }
  }

  const std::size_t max_pivots =
      opt.max_pivots ? opt.max_pivots : 50 * (n + lp.constraints.size());
  std::size_t pivots = 0;

  // Phase 1: minimize the sum of artificials.
  if (n_art > 0) {
    Vector cost(width_all, 0.0);
    double cost_rhs = 0.0;
    for (std::size_t j = art0; j < width_all; ++j) cost[j] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis(i) < art0) continue;
      const double* ti = t.row(i);
      for (std::size_t j = 0; j < width_all; ++j) cost[j] -= ti[j];
      cost_rhs -= t.rhs(i);
    }
    detail::run_phase(t, cost, cost_rhs, width_all, opt, pivots, max_pivots);
    double residual = 0.0;
    double rhs_scale = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis(i) >= art0) residual += std::max(t.rhs(i), 0.0);
      rhs_scale = std::max(rhs_scale, std::abs(kept[i].b));
    }
    if (residual > opt.feasibility_tol * rhs_scale) {
      return {LpStatus::Infeasible, {}, 0.0, pivots};
    }
    // Drive zero-level artificials out of the basis where possible.
    for (std::size_t i = 0; i < m; ++i) {
      if (t.basis(i) < art0) continue;
      const double* ti = t.row(i);
      std::size_t q = art0;
      for (std::size_t j = 0; j < art0; ++j) {
        if (std::abs(ti[j]) > opt.pivot_tol) {
          q = j;
          break;
        }
      }
      if (q < art0) {
        t.pivot(i, q, width_all, cost, cost_rhs);
        ++pivots;
      }
    }
  }

  // Phase 2 over structural and slack columns only.
  const std::size_t width = art0;
  Vector cost(width, 0.0);
  double cost_rhs = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double c = lp.objective[j];
    const auto& mj = map[j];
    cost[mj.first] += c * mj.sign;
    if (mj.split) cost[mj.first + 1] -= c;
  }
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t b = t.basis(i);
    if (b >= width) continue;
    const double cb = cost[b];
    if (cb == 0.0) continue;
    const double* ti = t.row(i);
    for (std::size_t j = 0; j < width; ++j) cost[j] -= cb * ti[j];
    cost_rhs -= cb * t.rhs(i);
  }
  if (detail::run_phase(t, cost, cost_rhs, width, opt, pivots, max_pivots) ==
      detail::PhaseOutcome::Unbounded) {
    return {LpStatus::Unbounded, {}, 0.0, pivots};
  }

  Vector s(n_std, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    if (t.basis(i) < n_std) s[t.basis(i)] = std::max(t.rhs(i), 0.0);
  }
  LpSolution sol;
  sol.status = LpStatus::Optimal;
  sol.pivots = pivots;
  sol.x.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto& mj = map[j];
    double v = mj.offset + mj.sign * s[mj.first];
    if (mj.split) v = s[mj.first] - s[mj.first + 1];
    sol.x[j] = std::clamp(v, lp.bounds[j].lower, lp.bounds[j].upper);  // undo shift roundoff
  }
  sol.objective_value = dot(lp.objective, sol.x);
  return sol;
}

/// Largest violation of any constraint or bound at x (0 when feasible).
inline double max_violation(const LpProblem& lp, std::span<const double> x) {
  double worst = 0.0;
  for (const auto& c : lp.constraints) {
    const double lhs = dot(c.row, x);
    switch (c.relation) {
      case Relation::LessEqual: worst = std::max(worst, lhs - c.rhs); break;
      case Relation::GreaterEqual: worst = std::max(worst, c.rhs - lhs); break;
      case Relation::Equal: worst = std::max(worst, std::abs(lhs - c.rhs)); break;
    }
  }
  for (std::size_t j = 0; j < lp.num_vars; ++j) {
    worst = std::max({worst, lp.bounds[j].lower - x[j], x[j] - lp.bounds[j].upper});
  }
  return worst;
}

}  // namespace densetest
