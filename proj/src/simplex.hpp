#pragma once

// Internal bounded-variable revised simplex engine. Not installed; the
// public entry points live in gcm/solver.hpp.
//
// Design notes:
//  - All variables carry finite bounds [lb, ub]; the constraint matrix holds
//    equalities A x = b only, which matches the systems this project builds
//    (0/±1 entries, b in {0,1}).
//  - One implicit logical variable per row backs both the crash basis and
//    phase 1. Its column is sigma_r * e_r where sigma_r is chosen at cold
//    start so the logical starts non-negative; phase 1 minimises the sum of
//    logicals, phase 2 pins them to zero.
//  - The basis inverse is a product-form eta file rebuilt by a Gauss-Jordan
//    factorisation with singleton-cascade pivot ordering, which is near
//    fill-free on the triangular-dominated bases these flow-style systems
//    produce. Updates append one eta per pivot; a bounded eta count and a
//    drift audit trigger refactorisation.
//  - Columns can be appended between solve() calls (column generation); the
//    engine resumes from its current basis.

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gcm::detail {

enum class EngineStatus {
  Optimal,
  Infeasible,
  IterationLimit,
  Numerical,
  // Internal to solve(): a failed refactor fell back to the all-logical
  // crash basis during phase 2, which is only phase-1 feasible.
  RestartPhase1,
};

struct EngineParams {
  std::int64_t max_iterations = -1;  // -1: scaled default
  bool perturb = true;
  std::uint64_t perturb_seed = 1;    // varies the perturbation pattern
  // Called every log_every iterations (and at phase switches) when set.
  std::function<void(const std::string&)> log;
  std::int64_t log_every = 20000;
};

struct EngineResult {
  EngineStatus status = EngineStatus::Optimal;
  double objective = 0.0;    // true structural costs
  std::int64_t iterations = 0;
  std::int64_t refactors = 0;
  double phase1_infeasibility = 0.0;
};

class BoundedSimplex {
 public:
  BoundedSimplex(std::int32_t rows, Eigen::VectorXd b);

  // Appends a structural column; returns its engine index (0-based among
  // structurals). Row indices must be strictly ascending.
  std::int64_t add_column(std::span<const std::int32_t> rows,
                          std::span<const double> vals, double cost,
                          double lb, double ub);

  std::int64_t column_count() const { return n_; }
  std::int32_t row_count() const { return m_; }

  void set_cost(std::int64_t col, double cost) { cost_[var_of_col(col)] = cost; }
  // Only valid between solves; forces a cold restart when the column is not
  // already sitting where the new bounds allow.
  void set_bounds(std::int64_t col, double lb, double ub);
  // Marks a structural column nonbasic at its upper bound before the first
  // solve; used to inject a known feasible 0/1 point into the crash basis.
  void warm_at_upper(std::int64_t col);

  EngineResult solve(const EngineParams& params);

  // Value of structural column j after solve().
  double value(std::int64_t col) const;
  Eigen::VectorXd solution() const;
  // Duals of the most recent optimality proof (phase-2 costs, or phase-1
  // costs when the engine stopped infeasible). Used to price columns that
  // are not yet part of the engine.
  const Eigen::VectorXd& duals() const { return duals_; }
  bool last_duals_are_phase1() const { return duals_phase1_; }

 private:
  enum class VStat : std::uint8_t { Lower, Upper, Basic };

  struct Eta {
    std::int32_t pivot;
    std::int64_t begin, end;  // range in eta_idx_/eta_val_
  };

  std::int64_t var_of_col(std::int64_t col) const { return m_ + col; }

  double var_cost(std::int64_t v) const;
  double var_lb(std::int64_t v) const;
  double var_ub(std::int64_t v) const;
  // Entries of variable v's column as (row, value) via callback.
  template <class F>
  void for_col(std::int64_t v, F&& f) const;

  void cold_start();
  void refactor();
  void recompute_basic_values();
  // Re-pins every nonbasic variable to the bound its status names (bounds can
  // move when perturbation toggles) and recomputes the basic values.
  void snap_nonbasic_to_bounds();
  void compute_duals_dense(Eigen::VectorXd& y) const;

  void ftran_setup(std::int64_t v);       // loads column into work_
  void ftran_apply();                     // applies eta file to work_
  void ftran_apply_from(std::size_t first_eta);
  void btran(Eigen::VectorXd& y) const;   // y <- (B^-T) y via eta file
  void append_eta_from_work(std::int32_t pivot_row);

  struct Candidate {
    std::int64_t var = -1;
    double reduced = 0.0;
  };
  Candidate price(const Eigen::VectorXd& y, bool bland) const;

  EngineStatus iterate(const EngineParams& params, std::int64_t& iters,
                       std::int64_t budget);

  // problem data -----------------------------------------------------------
  std::int32_t m_ = 0;
  std::int64_t n_ = 0;
  Eigen::VectorXd b_;
  std::vector<std::int64_t> col_ptr_{0};
  std::vector<std::int32_t> col_row_;
  std::vector<double> col_val_;
  std::vector<double> cost_;   // per variable (logicals first, then cols)
  std::vector<double> lb_, ub_;
  std::vector<double> perturb_;  // structural cost perturbation, phase 2 only
  std::vector<std::int8_t> sigma_;  // logical column signs

  // basis state -------------------------------------------------------------
  bool started_ = false;
  bool phase1_ = false;
  bool perturbed_ = false;        // cost perturbation active
  bool bound_perturbed_ = false;  // logical bound slack active
  bool crashed_ = false;          // refactor fell back to the crash basis
  std::uint64_t perturb_seed_ = 1;
  std::vector<std::int64_t> basis_;        // basic variable of each row
  std::vector<std::int32_t> pos_in_basis_; // row of basic var, -1 otherwise
  std::vector<VStat> vstat_;
  std::vector<double> xval_;               // nonbasic resting values
  Eigen::VectorXd xb_;                     // basic values by row
  std::vector<std::int64_t> warm_upper_;

  // eta file ----------------------------------------------------------------
  std::vector<Eta> etas_;
  std::vector<std::int32_t> eta_idx_;
  std::vector<double> eta_val_;
  std::int64_t updates_since_refactor_ = 0;
  std::int64_t basis_nnz_ = 0;
  std::int64_t refactor_nnz_ = 0;  // eta pool size right after refactor
  std::int64_t refactors_ = 0;

  // workspaces --------------------------------------------------------------
  Eigen::VectorXd work_;
  std::vector<std::int32_t> work_idx_;
  std::vector<std::int32_t> stamp_;
  std::int32_t generation_ = 0;
  mutable Eigen::VectorXd duals_;
  bool duals_phase1_ = false;
  mutable std::int64_t price_cursor_ = 0;
  Eigen::VectorXd devex_w_;    // devex reference weights, one per variable
  Eigen::VectorXd devex_rho_;  // scratch: row of B^-1 for weight updates
  bool use_devex_ = true;

  // pricing/ratio tolerances
  static constexpr double kDualTol = 1e-8;
  static constexpr double kPivotTol = 1e-9;
  static constexpr double kFeasTol = 1e-9;
  static constexpr double kZeroTol = 1e-13;
};

}  // namespace gcm::detail
