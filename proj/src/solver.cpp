#include "gcm/solver.hpp"

#include "simplex.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <queue>
#include <span>

namespace gcm {
namespace {

std::string resolve_backend(const SolverOptions& options) {
  std::string backend = options.backend;
  if (backend.empty()) {
    const char* env = std::getenv("GCMATCH_BACKEND");
    backend = env && *env ? env : "simplex";
  }
  const auto known = available_backends();
  if (std::find(known.begin(), known.end(), backend) == known.end()) {
    std::string names;
    for (const auto& n : known) names += (names.empty() ? "" : ", ") + n;
    throw InvalidArgumentError("unknown solver backend '" + backend +
                               "' (available: " + names + ")");
  }
  return backend;
}

struct CheckedProblem {
  const ConstraintSystem* sys;
  Eigen::VectorXd lower, upper;
};

CheckedProblem check_problem(const LpProblem& problem) {
  if (!problem.system)
    throw InvalidArgumentError("LpProblem.system is null");
  const ConstraintSystem& sys = *problem.system;
  if (problem.costs.size() != sys.col_count)
    throw InvalidArgumentError("cost vector has " +
                               std::to_string(problem.costs.size()) +
                               " entries for " +
                               std::to_string(sys.col_count) + " columns");
  if (!problem.costs.allFinite())
    throw InvalidArgumentError("cost vector has NaN or infinite entries");
  CheckedProblem cp;
  cp.sys = &sys;
  cp.lower = problem.lower.size() ? problem.lower
                                  : Eigen::VectorXd::Zero(sys.col_count);
  cp.upper = problem.upper.size() ? problem.upper
                                  : Eigen::VectorXd::Ones(sys.col_count);
  if (cp.lower.size() != sys.col_count || cp.upper.size() != sys.col_count)
    throw InvalidArgumentError("bound vectors do not match column count");
  for (std::int64_t j = 0; j < sys.col_count; ++j)
    if (cp.lower[j] > cp.upper[j] + 1e-12)
      throw InvalidArgumentError("lower bound exceeds upper bound at column " +
                                 std::to_string(j));
  return cp;
}

// Columns of a feasible 0/1 warm point, or empty when the hint is unusable
// under the current bounds.
std::vector<std::int64_t> usable_warm(const LpProblem& problem,
                                      const CheckedProblem& cp) {
  if (problem.warm_at_one.empty()) return {};
  if (std::getenv("GCMATCH_NO_WARM")) return {};
  Eigen::VectorXd x = Eigen::VectorXd::Zero(cp.sys->col_count);
  for (std::int64_t j : problem.warm_at_one) {
    if (j < 0 || j >= cp.sys->col_count) return {};
    if (cp.upper[j] < 1.0 - 1e-12) return {};
    x[j] = 1.0;
  }
  for (std::int64_t j = 0; j < cp.sys->col_count; ++j)
    if (x[j] < cp.lower[j] - 1e-12) return {};
  if (residual(*cp.sys, x).lpNorm<Eigen::Infinity>() > kFeasibilityTol)
    return {};
  return problem.warm_at_one;
}

detail::EngineParams engine_params(const SolverOptions& options) {
  detail::EngineParams ep;
  ep.max_iterations = options.max_iterations;
  ep.perturb = options.perturb_costs;
  ep.perturb_seed = options.seed;
  if (options.log) {
    std::ostream* log = options.log;
    ep.log = [log](const std::string& line) { *log << line << std::endl; };
  }
  if (const char* s = std::getenv("GCMATCH_LOG_EVERY"))
    ep.log_every = std::max<std::int64_t>(1, std::atoll(s));
  return ep;
}

void add_system_column(detail::BoundedSimplex& engine,
                       const ConstraintSystem& sys,
                       const Eigen::VectorXd& costs, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi, std::int64_t j,
                       std::vector<std::int32_t>& rbuf,
                       std::vector<double>& vbuf) {
  rbuf.clear();
  vbuf.clear();
  for (std::int64_t t = sys.col_ptr[j]; t < sys.col_ptr[j + 1]; ++t) {
    rbuf.push_back(sys.row_idx[t]);
    vbuf.push_back(double(sys.values[t]));
  }
  engine.add_column(std::span<const std::int32_t>(rbuf),
                    std::span<const double>(vbuf), costs[j], lo[j], hi[j]);
}

SolveStatus map_status(detail::EngineStatus st) {
  switch (st) {
    case detail::EngineStatus::Optimal: return SolveStatus::Optimal;
    case detail::EngineStatus::Infeasible: return SolveStatus::Infeasible;
    default: return SolveStatus::IterationLimit;
  }
}

void finish_solution(const LpProblem& problem, const ConstraintSystem& sys,
                     LpSolution& sol) {
  sol.objective = problem.costs.dot(sol.x);
  sol.max_fractionality = 0.0;
  for (std::int64_t j = 0; j < sol.x.size(); ++j) {
    const double f = std::abs(sol.x[j] - std::round(sol.x[j]));
    sol.max_fractionality = std::max(sol.max_fractionality, f);
  }
  sol.integral = sol.max_fractionality <= kIntegralityTol;
  sol.max_residual = residual(sys, sol.x).lpNorm<Eigen::Infinity>();
}

// With nonnegative costs, a feasible 0/1 warm point of zero cost is already
// an LP optimum; solving unperturbed lets the all-logical warm basis certify
// it without pivoting (zero duals price every column nonnegative).
bool warm_is_optimal(const LpProblem& problem,
                     const std::vector<std::int64_t>& warm) {
  if (warm.empty()) return false;
  if ((problem.costs.array() < 0.0).any()) return false;
  double c = 0.0;
  for (std::int64_t j : warm) c += problem.costs[j];
  return c <= 1e-12;
}

LpSolution solve_direct(const LpProblem& problem, const CheckedProblem& cp,
                        const SolverOptions& options) {
  const ConstraintSystem& sys = *cp.sys;
  detail::BoundedSimplex engine(std::int32_t(sys.row_count), sys.rhs());
  std::vector<std::int32_t> rbuf;
  std::vector<double> vbuf;
  for (std::int64_t j = 0; j < sys.col_count; ++j)
    add_system_column(engine, sys, problem.costs, cp.lower, cp.upper, j, rbuf,
                      vbuf);
  const std::vector<std::int64_t> warm = usable_warm(problem, cp);
  for (std::int64_t j : warm) engine.warm_at_upper(j);

  detail::EngineParams ep = engine_params(options);
  if (warm_is_optimal(problem, warm)) ep.perturb = false;
  const detail::EngineResult res = engine.solve(ep);
  LpSolution sol;
  sol.status = map_status(res.status);
  sol.iterations = res.iterations;
  sol.x = Eigen::VectorXd::Zero(sys.col_count);
  if (sol.status == SolveStatus::Optimal) {
    sol.x = engine.solution();
    finish_solution(problem, sys, sol);
  }
  return sol;
}

LpSolution solve_sifted(const LpProblem& problem, const CheckedProblem& cp,
                        const SolverOptions& options) {
  const ConstraintSystem& sys = *cp.sys;
  detail::BoundedSimplex engine(std::int32_t(sys.row_count), sys.rhs());
  std::vector<std::int32_t> rbuf;
  std::vector<double> vbuf;

  std::vector<char> active(sys.col_count, 0);
  // problem column of engine column i:
  std::vector<std::int64_t> pool;
  auto activate = [&](std::int64_t j) {
    if (active[j]) return;
    active[j] = 1;
    add_system_column(engine, sys, problem.costs, cp.lower, cp.upper, j, rbuf,
                      vbuf);
    pool.push_back(j);
  };

  // Seed: the warm point (if any), every column with nonzero lower bound,
  // and the cheapest handful of columns on each b=1 row so those rows can
  // be covered without phase-1 column hunting.
  const std::vector<std::int64_t> warm = usable_warm(problem, cp);
  {
    std::vector<std::vector<std::pair<double, std::int64_t>>> per_row(
        sys.rhs_rows.size());
    std::vector<std::int32_t> rhs_pos(sys.row_count, -1);
    for (std::size_t i = 0; i < sys.rhs_rows.size(); ++i)
      rhs_pos[sys.rhs_rows[i]] = std::int32_t(i);
    for (std::int64_t j = 0; j < sys.col_count; ++j)
      for (std::int64_t t = sys.col_ptr[j]; t < sys.col_ptr[j + 1]; ++t) {
        const std::int32_t p = rhs_pos[sys.row_idx[t]];
        if (p >= 0 && sys.values[t] > 0)
          per_row[p].emplace_back(problem.costs[j], j);
      }
    for (auto& cand : per_row) {
      const std::size_t keep = std::min<std::size_t>(cand.size(), 8);
      std::partial_sort(cand.begin(), cand.begin() + keep, cand.end());
      for (std::size_t i = 0; i < keep; ++i) activate(cand[i].second);
    }
  }
  for (std::int64_t j : warm) activate(j);
  for (std::int64_t j = 0; j < sys.col_count; ++j)
    if (cp.lower[j] > 0.0) activate(j);
  for (std::int64_t j : warm) {
    // engine index of j = its position in pool
    const auto it = std::find(pool.begin(), pool.end(), j);
    engine.warm_at_upper(it - pool.begin());
  }

  LpSolution sol;
  sol.x = Eigen::VectorXd::Zero(sys.col_count);
  detail::EngineParams ep = engine_params(options);
  if (warm_is_optimal(problem, warm)) ep.perturb = false;
  const int max_rounds = 400;
  for (int round = 0; round < max_rounds; ++round) {
    const detail::EngineResult res = engine.solve(ep);
    sol.iterations += res.iterations;
    if (res.status == detail::EngineStatus::IterationLimit ||
        res.status == detail::EngineStatus::Numerical) {
      sol.status = map_status(res.status);
      return sol;
    }
    // Price the inactive columns under the engine's certificate. When the
    // engine stopped infeasible the duals are phase-1 duals and structural
    // costs count as zero; a negative reduced cost then marks a column that
    // can still reduce infeasibility.
    const Eigen::VectorXd& y = engine.duals();
    const bool phase1 = engine.last_duals_are_phase1();
    std::vector<std::pair<double, std::int64_t>> violating;
    for (std::int64_t j = 0; j < sys.col_count; ++j) {
      if (active[j]) continue;
      double d = phase1 ? 0.0 : problem.costs[j];
      for (std::int64_t t = sys.col_ptr[j]; t < sys.col_ptr[j + 1]; ++t)
        d -= double(sys.values[t]) * y[sys.row_idx[t]];
      if (d < -1e-9) violating.emplace_back(d, j);
    }
    if (violating.empty()) {
      if (res.status == detail::EngineStatus::Infeasible) {
        sol.status = SolveStatus::Infeasible;
        return sol;
      }
      const Eigen::VectorXd xa = engine.solution();
      for (std::size_t i = 0; i < pool.size(); ++i) sol.x[pool[i]] = xa[i];
      sol.status = SolveStatus::Optimal;
      finish_solution(problem, sys, sol);
      if (options.log)
        *options.log << "sift rounds=" << round + 1
                     << " active_cols=" << pool.size() << '\n';
      return sol;
    }
    const std::size_t add = std::min<std::size_t>(violating.size(), 4096);
    std::partial_sort(violating.begin(), violating.begin() + add,
                      violating.end());
    for (std::size_t i = 0; i < add; ++i) activate(violating[i].second);
  }
  sol.status = SolveStatus::IterationLimit;
  return sol;
}

}  // namespace

std::string solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NodeLimit: return "node_limit";
  }
  return "?";
}

std::vector<std::string> available_backends() { return {"simplex"}; }

LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  resolve_backend(options);
  const CheckedProblem cp = check_problem(problem);
  const bool sift = options.sift_threshold >= 0 &&
                    cp.sys->col_count > options.sift_threshold;
  LpSolution sol = sift ? solve_sifted(problem, cp, options)
                        : solve_direct(problem, cp, options);
  sol.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  return sol;
}

LpSolution solve_ilp(const LpProblem& problem, const SolverOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  LpSolution root = solve_lp(problem, options);
  if (root.status != SolveStatus::Optimal || root.integral) return root;

  const CheckedProblem cp = check_problem(problem);
  struct Node {
    double bound;
    std::vector<std::pair<std::int64_t, int>> fixes;  // column -> 0/1
    bool operator<(const Node& other) const { return bound > other.bound; }
  };
  std::priority_queue<Node> open;
  open.push({root.objective, {}});
  LpSolution best;
  bool have_best = false;
  bool aborted = false;
  int nodes = 0;

  while (!open.empty() && nodes < options.node_limit) {
    Node node = open.top();
    open.pop();
    if (have_best && node.bound >= best.objective - 1e-9) continue;
    ++nodes;

    LpProblem sub = problem;
    sub.lower = cp.lower;
    sub.upper = cp.upper;
    bool warm_ok = true;
    for (const auto& [col, val] : node.fixes) {
      sub.lower[col] = val;
      sub.upper[col] = val;
      if (val == 0 && std::find(problem.warm_at_one.begin(),
                                problem.warm_at_one.end(),
                                col) != problem.warm_at_one.end())
        warm_ok = false;
    }
    if (!warm_ok) sub.warm_at_one.clear();
    LpSolution lp = solve_lp(sub, options);
    root.iterations += lp.iterations;
    if (lp.status == SolveStatus::Infeasible) continue;
    if (lp.status != SolveStatus::Optimal) {
      // Cannot trust this subtree; give up on proving optimality.
      aborted = true;
      break;
    }
    if (have_best && lp.objective >= best.objective - 1e-9) continue;
    if (lp.integral) {
      best = lp;
      have_best = true;
      continue;
    }
    std::int64_t branch = -1;
    double score = -1.0;
    for (std::int64_t j = 0; j < lp.x.size(); ++j) {
      const double f = std::abs(lp.x[j] - std::round(lp.x[j]));
      if (f > kIntegralityTol && f > score) {
        score = f;
        branch = j;
      }
    }
    for (int val : {0, 1}) {
      Node child{lp.objective, node.fixes};
      child.fixes.emplace_back(branch, val);
      open.push(child);
    }
  }

  LpSolution out = have_best ? best : root;
  out.bb_nodes = nodes;
  out.iterations = root.iterations;
  if (open.empty() && !aborted)
    // Tree fully explored: the incumbent is the integer optimum; no
    // incumbent means no integral point exists at all.
    out.status = have_best ? SolveStatus::Optimal : SolveStatus::Infeasible;
  else
    out.status = SolveStatus::NodeLimit;
  out.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  return out;
}

void export_mps(const LpProblem& problem, const std::filesystem::path& path) {
  const CheckedProblem cp = check_problem(problem);
  const ConstraintSystem& sys = *cp.sys;
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");

  auto field = [](const std::string& s) {
    std::string f = s;
    if (f.size() < 10) f.resize(10, ' ');
    return f;
  };
  char num[32];
  auto value = [&](double v) {
    std::snprintf(num, sizeof num, "%.12g", v);
    return std::string(num);
  };

  out << "NAME          GCMATCH\n";
  out << "ROWS\n";
  out << " N  COST\n";
  for (std::int64_t r = 0; r < sys.row_count; ++r)
    out << " E  R" << r << '\n';
  out << "COLUMNS\n";
  for (std::int64_t j = 0; j < sys.col_count; ++j) {
    const std::string col = "X" + std::to_string(j);
    if (problem.costs[j] != 0.0)
      out << "    " << field(col) << field("COST") << value(problem.costs[j])
          << '\n';
    for (std::int64_t t = sys.col_ptr[j]; t < sys.col_ptr[j + 1]; ++t)
      out << "    " << field(col) << field("R" + std::to_string(sys.row_idx[t]))
          << value(double(sys.values[t])) << '\n';
  }
  out << "RHS\n";
  for (std::int32_t r : sys.rhs_rows)
    out << "    " << field("RHS0") << field("R" + std::to_string(r)) << "1\n";
  out << "BOUNDS\n";
  for (std::int64_t j = 0; j < sys.col_count; ++j) {
    const std::string col = "X" + std::to_string(j);
    if (cp.lower[j] == cp.upper[j])
      out << " FX " << field("BND") << field(col) << value(cp.lower[j])
          << '\n';
    else {
      if (cp.lower[j] != 0.0)
        out << " LO " << field("BND") << field(col) << value(cp.lower[j])
            << '\n';
      out << " UP " << field("BND") << field(col) << value(cp.upper[j])
          << '\n';
    }
  }
  out << "ENDATA\n";
  if (!out) throw Error("write to " + path.string() + " failed");
}

}  // namespace gcm
