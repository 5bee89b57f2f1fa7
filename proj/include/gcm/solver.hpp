#pragma once

#include "gcm/hypergraph.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gcm {

// A variable is integral when it sits within this distance of 0 or 1.
constexpr double kIntegralityTol = 1e-5;
// Acceptable infinity-norm residual of H x = b for a solution.
constexpr double kFeasibilityTol = 1e-7;

// Linear program min c'x s.t. H x = b, lower <= x <= upper over the columns
// of a constraint system. Empty bound vectors mean [0, 1] everywhere.
// `warm_at_one` optionally names columns of a known feasible 0/1 point; the
// solver starts there when the hint checks out and ignores it otherwise.
struct LpProblem {
  const ConstraintSystem* system = nullptr;
  Eigen::VectorXd costs;
  Eigen::VectorXd lower, upper;
  std::vector<std::int64_t> warm_at_one;
};

enum class SolveStatus { Optimal, Infeasible, IterationLimit, NodeLimit };
std::string solve_status_name(SolveStatus status);

struct SolverOptions {
  // Empty picks the GCMATCH_BACKEND environment variable when set, else
  // "simplex" (the only backend compiled in; see available_backends()).
  std::string backend;
  std::int64_t max_iterations = -1;  // -1: scaled to problem size
  int node_limit = 1000;             // branch & bound
  bool perturb_costs = true;         // anti-degeneracy; removed before return
  std::uint64_t seed = 1;            // varies the perturbation pattern
  // Column generation kicks in above this column count; 0 forces it on.
  std::int64_t sift_threshold = 150000;
  std::ostream* log = nullptr;       // key=value progress lines
};

struct LpSolution {
  SolveStatus status = SolveStatus::IterationLimit;
  Eigen::VectorXd x;
  double objective = 0.0;
  bool integral = false;
  // Largest distance of any x_j from its nearest integer.
  double max_fractionality = 0.0;
  // Infinity norm of H x - b, recomputed from the input system.
  double max_residual = 0.0;
  std::int64_t iterations = 0;
  int bb_nodes = 0;
  double seconds = 0.0;
};

std::vector<std::string> available_backends();

// Solves the LP relaxation to proven optimality.
LpSolution solve_lp(const LpProblem& problem, const SolverOptions& options = {});

// solve_lp, then branch & bound on fractional variables when the relaxation
// is not integral. bb_nodes > 0 signals the fallback ran. NodeLimit means
// the node budget ran out before optimality was proven.
LpSolution solve_ilp(const LpProblem& problem,
                     const SolverOptions& options = {});

// Writes the problem as a fixed-format MPS file (all rows type E, binary
// bounds) for cross-checking with external solvers.
void export_mps(const LpProblem& problem, const std::filesystem::path& path);

}  // namespace gcm
