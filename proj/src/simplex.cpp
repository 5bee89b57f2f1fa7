#include "simplex.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

namespace gcm::detail {

BoundedSimplex::BoundedSimplex(std::int32_t rows, Eigen::VectorXd b)
    : m_(rows), b_(std::move(b)) {
  assert(b_.size() == m_);
  cost_.assign(m_, 0.0);
  lb_.assign(m_, 0.0);
  ub_.assign(m_, 0.0);
  sigma_.assign(m_, 1);
  vstat_.assign(m_, VStat::Lower);
  xval_.assign(m_, 0.0);
  pos_in_basis_.assign(m_, -1);
  basis_.resize(m_);
  xb_.setZero(m_);
  work_.setZero(m_);
  stamp_.assign(m_, 0);
}

std::int64_t BoundedSimplex::add_column(std::span<const std::int32_t> rows,
                                        std::span<const double> vals,
                                        double cost, double lb, double ub) {
  assert(rows.size() == vals.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    assert(rows[t] >= 0 && rows[t] < m_);
    assert(t == 0 || rows[t] > rows[t - 1]);
    col_row_.push_back(rows[t]);
    col_val_.push_back(vals[t]);
  }
  col_ptr_.push_back(std::int64_t(col_row_.size()));
  cost_.push_back(cost);
  lb_.push_back(lb);
  ub_.push_back(ub);
  vstat_.push_back(VStat::Lower);
  xval_.push_back(lb);
  pos_in_basis_.push_back(-1);
  return n_++;
}

void BoundedSimplex::set_bounds(std::int64_t col, double lb, double ub) {
  const std::int64_t v = var_of_col(col);
  lb_[v] = lb;
  ub_[v] = ub;
  if (pos_in_basis_[v] >= 0 || xval_[v] < lb || xval_[v] > ub)
    started_ = false;  // placement no longer valid; next solve restarts cold
  if (pos_in_basis_[v] < 0) xval_[v] = std::clamp(xval_[v], lb, ub);
}

void BoundedSimplex::warm_at_upper(std::int64_t col) {
  warm_upper_.push_back(col);
  started_ = false;
}

double BoundedSimplex::var_cost(std::int64_t v) const {
  if (v < m_) return phase1_ ? 1.0 : 0.0;
  if (phase1_) return 0.0;
  double c = cost_[v];
  if (perturbed_) {
    const std::uint64_t h =
        ((std::uint64_t(v) + perturb_seed_) * 2654435761ULL) % 8191ULL;
    c += 1e-7 * (1.0 + std::abs(c)) * double(h + 1) / 8192.0;
  }
  return c;
}

double BoundedSimplex::var_lb(std::int64_t v) const {
  if (v < m_) {
    // Phase-1 mirror of the var_ub headroom below: rows with b = 0 pin
    // their logical at zero from below, so entering columns that push one
    // negative are blocked at t = 0 and phase 1 stalls. A distinct tiny
    // downward slack per row turns those blocks into strictly positive
    // steps. Phase 2 keeps the exact lower bound: two-sided slack lets the
    // zero-cost logicals oscillate between bounds on dual noise and the
    // iteration never settles.
    if (phase1_ && bound_perturbed_) {
      const std::uint64_t h =
          ((std::uint64_t(v) * 2 + perturb_seed_) * 0x9E3779B97F4A7C15ULL) >>
          51;
      return -4e-9 * (1.0 + double(h) / 8192.0);
    }
    return 0.0;
  }
  return lb_[v];
}

double BoundedSimplex::var_ub(std::int64_t v) const {
  if (v < m_) {
    if (phase1_) return 1.5;
    // Anti-degeneracy slack: most rows have b = 0 and keep their logical
    // basic at exactly zero, so every ratio test ties at t = 0 and phase 2
    // stalls on degenerate pivots. A tiny deterministic per-row headroom
    // turns those ties into strictly positive steps; the cleanup pass
    // removes it and restores exact equality.
    if (bound_perturbed_) {
      const std::uint64_t h =
          ((std::uint64_t(v) * 2 + 1 + perturb_seed_) * 0x9E3779B97F4A7C15ULL) >>
          51;
      return 4e-9 * (1.0 + double(h) / 8192.0);
    }
    return 0.0;
  }
  return ub_[v];
}

void BoundedSimplex::snap_nonbasic_to_bounds() {
  for (std::int64_t v = 0; v < m_ + n_; ++v)
    if (pos_in_basis_[v] < 0)
      xval_[v] = vstat_[v] == VStat::Upper ? var_ub(v) : var_lb(v);
  recompute_basic_values();
}

template <class F>
void BoundedSimplex::for_col(std::int64_t v, F&& f) const {
  if (v < m_) {
    f(std::int32_t(v), double(sigma_[v]));
    return;
  }
  const std::int64_t c = v - m_;
  for (std::int64_t t = col_ptr_[c]; t < col_ptr_[c + 1]; ++t)
    f(col_row_[t], col_val_[t]);
}

void BoundedSimplex::cold_start() {
  for (std::int64_t v = m_; v < m_ + n_; ++v) {
    vstat_[v] = VStat::Lower;
    xval_[v] = lb_[v];
    pos_in_basis_[v] = -1;
  }
  for (std::int64_t col : warm_upper_) {
    const std::int64_t v = var_of_col(col);
    vstat_[v] = VStat::Upper;
    xval_[v] = ub_[v];
  }
  Eigen::VectorXd beff = b_;
  for (std::int64_t v = m_; v < m_ + n_; ++v)
    if (xval_[v] != 0.0)
      for_col(v, [&](std::int32_t r, double a) { beff[r] -= a * xval_[v]; });
  for (std::int32_t r = 0; r < m_; ++r) {
    sigma_[r] = beff[r] >= 0.0 ? 1 : -1;
    basis_[r] = r;
    pos_in_basis_[r] = r;
    vstat_[r] = VStat::Basic;
  }
  started_ = true;
  refactor();
}

void BoundedSimplex::recompute_basic_values() {
  Eigen::VectorXd beff = b_;
  for (std::int64_t v = 0; v < m_ + n_; ++v)
    if (pos_in_basis_[v] < 0 && xval_[v] != 0.0)
      for_col(v, [&](std::int32_t r, double a) { beff[r] -= a * xval_[v]; });
  // Dense FTRAN: xb = B^-1 beff.
  for (const Eta& e : etas_) {
    const double t = beff[e.pivot];
    if (t == 0.0) continue;
    beff[e.pivot] = 0.0;
    for (std::int64_t k = e.begin; k < e.end; ++k)
      beff[eta_idx_[k]] += t * eta_val_[k];
  }
  xb_ = beff;
}

void BoundedSimplex::ftran_setup(std::int64_t v) {
  for (std::int32_t i : work_idx_) work_[i] = 0.0;
  work_idx_.clear();
  ++generation_;
  for_col(v, [&](std::int32_t r, double a) {
    work_[r] = a;
    stamp_[r] = generation_;
    work_idx_.push_back(r);
  });
}

void BoundedSimplex::ftran_apply() { ftran_apply_from(0); }

void BoundedSimplex::ftran_apply_from(std::size_t first_eta) {
  for (std::size_t ei = first_eta; ei < etas_.size(); ++ei) {
    const Eta& e = etas_[ei];
    const double t = work_[e.pivot];
    if (t == 0.0) continue;
    work_[e.pivot] = 0.0;
    for (std::int64_t k = e.begin; k < e.end; ++k) {
      const std::int32_t i = eta_idx_[k];
      if (stamp_[i] != generation_) {
        stamp_[i] = generation_;
        work_idx_.push_back(i);
        work_[i] = 0.0;
      }
      work_[i] += t * eta_val_[k];
    }
  }
}

void BoundedSimplex::btran(Eigen::VectorXd& y) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = 0.0;
    for (std::int64_t k = it->begin; k < it->end; ++k)
      s += eta_val_[k] * y[eta_idx_[k]];
    y[it->pivot] = s;
  }
}

void BoundedSimplex::compute_duals_dense(Eigen::VectorXd& y) const {
  y.setZero(m_);
  for (std::int32_t r = 0; r < m_; ++r) y[r] = var_cost(basis_[r]);
  btran(y);
}

void BoundedSimplex::append_eta_from_work(std::int32_t pivot_row) {
  const double piv = work_[pivot_row];
  assert(std::abs(piv) > kZeroTol);
  const std::int64_t begin = std::int64_t(eta_idx_.size());
  bool identity = true;
  for (std::int32_t i : work_idx_) {
    const double a = work_[i];
    if (a == 0.0) continue;
    if (i == pivot_row) {
      eta_idx_.push_back(i);
      eta_val_.push_back(1.0 / piv);
      if (std::abs(piv - 1.0) > 0.0) identity = false;
    } else {
      eta_idx_.push_back(i);
      eta_val_.push_back(-a / piv);
      identity = false;
    }
  }
  if (identity) {  // column is exactly e_pivot; no transform needed
    eta_idx_.resize(begin);
    eta_val_.resize(begin);
    return;
  }
  etas_.push_back({pivot_row, begin, std::int64_t(eta_idx_.size())});
}

void BoundedSimplex::refactor() {
  etas_.clear();
  eta_idx_.clear();
  eta_val_.clear();
  updates_since_refactor_ = 0;
  ++refactors_;

  // Pattern of the basis: slot s holds variable basis_[s].
  const std::int32_t m = m_;
  std::vector<std::int32_t> col_count(m, 0), row_count(m, 0);
  std::vector<std::int64_t> col_start(m + 1, 0);
  std::int64_t nnz = 0;
  for (std::int32_t s = 0; s < m; ++s) {
    std::int32_t cnt = 0;
    for_col(basis_[s], [&](std::int32_t, double) { ++cnt; });
    col_count[s] = cnt;
    col_start[s + 1] = col_start[s] + cnt;
    nnz += cnt;
  }
  basis_nnz_ = nnz;
  std::vector<std::int32_t> col_rows(nnz);
  {
    std::vector<std::int64_t> fill = col_start;
    for (std::int32_t s = 0; s < m; ++s)
      for_col(basis_[s], [&](std::int32_t r, double) {
        col_rows[fill[s]++] = r;
        ++row_count[r];
      });
  }
  // Row -> slots adjacency.
  std::vector<std::int64_t> row_start(m + 1, 0);
  for (std::int32_t r = 0; r < m; ++r)
    row_start[r + 1] = row_start[r] + row_count[r];
  std::vector<std::int32_t> row_slots(nnz);
  {
    std::vector<std::int64_t> fill = row_start;
    for (std::int32_t s = 0; s < m; ++s)
      for (std::int64_t k = col_start[s]; k < col_start[s + 1]; ++k)
        row_slots[fill[col_rows[k]]++] = s;
  }

  // Singleton cascade on the pattern to fix a near fill-free pivot order.
  std::vector<char> col_active(m, 1), row_active(m, 1);
  std::vector<std::int32_t> acol = col_count, arow = row_count;
  std::vector<std::int32_t> col_stack, row_stack;
  for (std::int32_t s = 0; s < m; ++s)
    if (acol[s] == 1) col_stack.push_back(s);
  for (std::int32_t r = 0; r < m; ++r)
    if (arow[r] == 1) row_stack.push_back(r);

  // Two fill-free families: a row singleton pivots a row whose other entries
  // all sit in already-retired columns (lower-triangular part, processed in
  // retirement order), a column singleton pivots a column whose other entries
  // all sit in already-retired rows (upper-triangular part, processed in
  // *reverse* retirement order). Processed that way, each eta is just the
  // original column, so the eta file stays as sparse as the basis itself.
  std::vector<std::pair<std::int32_t, std::int32_t>> front, back;  // (slot, row)
  std::vector<char> reserved(m, 0);  // rows promised to the upper part
  auto retire = [&](std::int32_t s, std::int32_t r, bool col_single) {
    if (col_single) {
      back.emplace_back(s, r);
      reserved[r] = 1;
    } else {
      front.emplace_back(s, r);
    }
    col_active[s] = 0;
    row_active[r] = 0;
    for (std::int64_t k = col_start[s]; k < col_start[s + 1]; ++k) {
      const std::int32_t rr = col_rows[k];
      if (row_active[rr] && --arow[rr] == 1) row_stack.push_back(rr);
    }
    for (std::int64_t k = row_start[r]; k < row_start[r + 1]; ++k) {
      const std::int32_t ss = row_slots[k];
      if (col_active[ss] && --acol[ss] == 1) col_stack.push_back(ss);
    }
  };
  while (true) {
    if (!col_stack.empty()) {
      const std::int32_t s = col_stack.back();
      col_stack.pop_back();
      if (!col_active[s] || acol[s] != 1) continue;
      for (std::int64_t k = col_start[s]; k < col_start[s + 1]; ++k)
        if (row_active[col_rows[k]]) {
          retire(s, col_rows[k], /*col_single=*/true);
          break;
        }
    } else if (!row_stack.empty()) {
      const std::int32_t r = row_stack.back();
      row_stack.pop_back();
      if (!row_active[r] || arow[r] != 1) continue;
      for (std::int64_t k = row_start[r]; k < row_start[r + 1]; ++k)
        if (col_active[row_slots[k]]) {
          retire(row_slots[k], r, /*col_single=*/false);
          break;
        }
    } else {
      break;
    }
  }
  // Schedule: lower part forward, then the bump (columns the cascade could
  // not order, cheapest first, pivot row chosen numerically among rows not
  // reserved for the upper part), then the upper part reversed.
  std::vector<std::pair<std::int32_t, std::int32_t>> order;  // (slot, row)
  order.reserve(m);
  order.insert(order.end(), front.begin(), front.end());
  {
    std::vector<std::int32_t> bump;
    for (std::int32_t s = 0; s < m; ++s)
      if (col_active[s]) bump.push_back(s);
    std::sort(bump.begin(), bump.end(),
              [&](std::int32_t a, std::int32_t b) {
                return acol[a] != acol[b] ? acol[a] < acol[b] : a < b;
              });
    for (std::int32_t s : bump) order.emplace_back(s, -1);
  }
  order.insert(order.end(), back.rbegin(), back.rend());

  // Numeric pass. Triangular columns become plain Gauss-Jordan etas (no
  // fill). The bump is factored L*U instead: eliminating it with full
  // Gauss-Jordan would materialise the dense inverse of the bump block in
  // the eta file, which every later ftran/btran pays for. L multipliers are
  // emitted as unit-pivot etas as we go; the upper triangle is collected and
  // emitted afterwards as back-substitution etas in reverse pivot order.
  std::vector<char> pivoted(m, 0), bump_pivoted(m, 0);
  std::vector<std::int64_t> new_basis(m, -1);
  bool failed = false;

  const std::size_t bump_begin = front.size();
  const std::size_t bump_end = order.size() - back.size();
  std::vector<std::int32_t> u_pivot, u_rows;
  std::vector<std::int64_t> u_start(1, 0);
  std::vector<double> u_vals, u_diag;

  std::size_t bump_eta_begin = 0;  // first L eta; set when the bump starts

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (pos == bump_begin) bump_eta_begin = etas_.size();
    const auto [s, want] = order[pos];
    const std::int64_t v = basis_[s];
    if (want >= 0) reserved[want] = 0;
    if (pos < bump_begin || pos >= bump_end) {
      // Triangular column: by construction it has no entries in any pivot
      // row processed before it, so its transformed column is the column
      // itself — no ftran needed, and the designated pivot entry is the raw
      // matrix entry.
      ftran_setup(v);
      if (want < 0 || pivoted[want] || std::abs(work_[want]) <= 1e-8) {
        failed = true;
        break;
      }
      append_eta_from_work(want);
      pivoted[want] = true;
      new_basis[want] = v;
    } else {
      // Bump column: only the L etas emitted for earlier bump columns can
      // touch it, so the ftran skips everything before them.
      ftran_setup(v);
      ftran_apply_from(bump_eta_begin);
      std::int32_t r = -1;
      double best = 1e-10;
      for (std::int32_t i : work_idx_)
        if (!pivoted[i] && !reserved[i] && std::abs(work_[i]) > best) {
          best = std::abs(work_[i]);
          r = i;
        }
      if (r < 0) {
        failed = true;
        break;
      }
      const double piv = work_[r];
      const std::int64_t begin = std::int64_t(eta_idx_.size());
      eta_idx_.push_back(r);
      eta_val_.push_back(1.0);  // pivot value stays; it is U's diagonal
      for (std::int32_t i : work_idx_) {
        const double a = work_[i];
        if (a == 0.0 || i == r) continue;
        if (bump_pivoted[i]) {  // above an earlier bump pivot: U entry
          u_rows.push_back(i);
          u_vals.push_back(a);
        } else {  // below the pivot (or in a reserved row): L multiplier
          eta_idx_.push_back(i);
          eta_val_.push_back(-a / piv);
        }
      }
      if (std::int64_t(eta_idx_.size()) - begin > 1) {
        etas_.push_back({r, begin, std::int64_t(eta_idx_.size())});
      } else {  // no multipliers: the eta would be the identity
        eta_idx_.resize(begin);
        eta_val_.resize(begin);
      }
      u_pivot.push_back(r);
      u_diag.push_back(piv);
      u_start.push_back(std::int64_t(u_rows.size()));
      pivoted[r] = true;
      bump_pivoted[r] = true;
      new_basis[r] = v;
    }
  }
  if (!failed) {
    // Back-substitution sequence for the bump: clears the U entries. Columns
    // of the triangular parts have no entries in bump rows, so appending
    // these after their etas keeps every column mapped to its unit vector.
    for (std::int64_t j = std::int64_t(u_pivot.size()) - 1; j >= 0; --j) {
      const double d = u_diag[j];
      const std::int64_t b0 = u_start[j], b1 = u_start[j + 1];
      if (b1 == b0 && d == 1.0) continue;
      const std::int64_t begin = std::int64_t(eta_idx_.size());
      eta_idx_.push_back(u_pivot[j]);
      eta_val_.push_back(1.0 / d);
      for (std::int64_t t = b0; t < b1; ++t) {
        eta_idx_.push_back(u_rows[t]);
        eta_val_.push_back(-u_vals[t] / d);
      }
      etas_.push_back({u_pivot[j], begin, std::int64_t(eta_idx_.size())});
    }
  }

  if (failed) {
    // Singular basis (numerical trouble or bad warm data): fall back to the
    // all-logical crash basis; displaced structurals go to their lower bound
    // and phase 1 re-establishes feasibility.
    if (std::getenv("GCMATCH_DEBUG_REFACTOR"))
      std::fprintf(stderr, "refactor FAILED m=%d -> crash reset\n", m);
    crashed_ = true;
    etas_.clear();
    eta_idx_.clear();
    eta_val_.clear();
    for (std::int64_t v = m_; v < m_ + n_; ++v)
      if (pos_in_basis_[v] >= 0) {
        pos_in_basis_[v] = -1;
        vstat_[v] = VStat::Lower;
        xval_[v] = lb_[v];
      }
    Eigen::VectorXd beff = b_;
    for (std::int64_t v = m_; v < m_ + n_; ++v)
      if (xval_[v] != 0.0)
        for_col(v, [&](std::int32_t r, double a) { beff[r] -= a * xval_[v]; });
    for (std::int32_t r = 0; r < m; ++r) {
      sigma_[r] = beff[r] >= 0.0 ? 1 : -1;
      basis_[r] = r;
      pos_in_basis_[r] = r;
      vstat_[r] = VStat::Basic;
      if (sigma_[r] < 0) {  // non-identity logical column
        work_idx_.assign(1, r);
        work_[r] = -1.0;
        append_eta_from_work(r);
        work_[r] = 0.0;
        work_idx_.clear();
      }
    }
    basis_nnz_ = m;
    refactor_nnz_ = std::int64_t(eta_idx_.size());
    recompute_basic_values();
    return;
  }

  basis_ = new_basis;
  for (std::int64_t v = 0; v < m_ + n_; ++v) pos_in_basis_[v] = -1;
  for (std::int32_t r = 0; r < m; ++r) pos_in_basis_[basis_[r]] = r;
  refactor_nnz_ = std::int64_t(eta_idx_.size());
  recompute_basic_values();
  if (std::getenv("GCMATCH_DEBUG_REFACTOR"))
    std::fprintf(stderr,
                 "refactor m=%d basis_nnz=%lld lower=%zu bump=%zu upper=%zu "
                 "eta_nnz=%zu\n",
                 m, (long long)basis_nnz_, front.size(),
                 order.size() - front.size() - back.size(), back.size(),
                 eta_idx_.size());
}

BoundedSimplex::Candidate BoundedSimplex::price(const Eigen::VectorXd& y,
                                                bool bland) const {
  const std::int64_t total = m_ + n_;
  auto reduced = [&](std::int64_t v) {
    double d = var_cost(v);
    for_col(v, [&](std::int32_t r, double a) { d -= a * y[r]; });
    return d;
  };
  auto eligible = [&](std::int64_t v, double& d) {
    if (vstat_[v] == VStat::Basic) return false;
    if (var_ub(v) - var_lb(v) <= 0.0) return false;
    d = reduced(v);
    return vstat_[v] == VStat::Lower ? d < -kDualTol : d > kDualTol;
  };
  if (bland) {
    for (std::int64_t v = 0; v < total; ++v) {
      double d;
      if (eligible(v, d)) return {v, d};
    }
    return {};
  }
  // Devex: rank candidates by squared reduced cost over the reference
  // weight, a cheap steepest-edge estimate that avoids re-picking columns
  // whose direction barely moves the basic solution.
  const std::int64_t window = std::max<std::int64_t>(4096, total / 64);
  Candidate best;
  double best_score = 0.0;
  std::int64_t scanned = 0;
  std::int64_t v = price_cursor_ % total;
  while (scanned < total) {
    double d;
    if (eligible(v, d)) {
      const double score =
          use_devex_ ? d * d / devex_w_[v] : std::abs(d);
      if (best.var < 0 || score > best_score) {
        best = {v, d};
        best_score = score;
      }
    }
    ++scanned;
    if (++v == total) v = 0;
    if (best.var >= 0 && scanned >= window && scanned % window == 0) break;
  }
  price_cursor_ = v;
  return best;
}

EngineStatus BoundedSimplex::iterate(const EngineParams& params,
                                     std::int64_t& iters,
                                     std::int64_t budget) {
  Eigen::VectorXd y(m_);
  bool bland = false;
  std::int64_t degen_streak = 0;
  devex_w_.setConstant(m_ + n_, 1.0);  // fresh reference framework
  while (true) {
    if (iters >= budget) return EngineStatus::IterationLimit;
    // Refactoring is cheap (near fill-free), so rebuild as soon as the update
    // etas outweigh the factorization itself; every ftran/btran pays for the
    // whole file.
    if (updates_since_refactor_ >= 128 ||
        std::int64_t(eta_idx_.size()) - refactor_nnz_ > basis_nnz_ + m_)
      refactor();
    if (crashed_) {
      // The crash basis is only phase-1 feasible; phase 1 itself can just
      // keep going, phase 2 must be restarted by solve().
      crashed_ = false;
      if (!phase1_) return EngineStatus::RestartPhase1;
    }
    compute_duals_dense(y);
    const Candidate cand = price(y, bland);
    if (cand.var < 0) {
      duals_ = y;
      duals_phase1_ = phase1_;
      return EngineStatus::Optimal;
    }
    ++iters;
    const std::int64_t q = cand.var;
    const double sig = vstat_[q] == VStat::Lower ? 1.0 : -1.0;
    ftran_setup(q);
    ftran_apply();

    // Ratio test: how far can x_q move from its bound?
    const double span = var_ub(q) - var_lb(q);
    double tmin = span;
    for (std::int32_t r : work_idx_) {
      const double a = work_[r];
      if (std::abs(a) <= kPivotTol) continue;
      const std::int64_t vb = basis_[r];
      const double delta = -sig * a;
      double lim;
      if (delta < 0.0)
        lim = (xb_[r] - var_lb(vb)) / (-delta);
      else
        lim = (var_ub(vb) - xb_[r]) / delta;
      if (lim < 0.0) lim = 0.0;
      if (lim < tmin) tmin = lim;
    }
    std::int32_t leave_row = -1;
    if (tmin < span - 1e-12) {
      double best_mag = 0.0;
      std::int64_t best_var = std::numeric_limits<std::int64_t>::max();
      for (std::int32_t r : work_idx_) {
        const double a = work_[r];
        if (std::abs(a) <= kPivotTol) continue;
        const std::int64_t vb = basis_[r];
        const double delta = -sig * a;
        double lim;
        if (delta < 0.0)
          lim = (xb_[r] - var_lb(vb)) / (-delta);
        else
          lim = (var_ub(vb) - xb_[r]) / delta;
        if (lim < 0.0) lim = 0.0;
        if (lim > tmin + 1e-9) continue;
        if (bland) {
          if (vb < best_var) {
            best_var = vb;
            leave_row = r;
          }
        } else if (std::abs(a) > best_mag) {
          best_mag = std::abs(a);
          leave_row = r;
        }
      }
    }
    const double t = std::max(0.0, tmin);

    if (leave_row < 0) {
      // Bound flip: the entering variable crosses to its other bound.
      for (std::int32_t r : work_idx_) {
        const double a = work_[r];
        if (a == 0.0) continue;
        xb_[r] -= sig * t * a;
      }
      if (vstat_[q] == VStat::Lower) {
        vstat_[q] = VStat::Upper;
        xval_[q] = var_ub(q);
      } else {
        vstat_[q] = VStat::Lower;
        xval_[q] = var_lb(q);
      }
    } else {
      const double enter_val = xval_[q] + sig * t;
      const std::int64_t vleave = basis_[leave_row];
      const double a_leave = work_[leave_row];
      const double delta_leave = -sig * a_leave;

      // Devex weight update against the pre-pivot basis: every nonbasic
      // column picks up the (pivot-row coefficient)^2-scaled weight of the
      // entering column, and the leaving variable inherits the pivot's.
      if (use_devex_ && !bland) {
        devex_rho_.setZero(m_);
        devex_rho_[leave_row] = 1.0;
        btran(devex_rho_);
        const double wq = std::max(devex_w_[q], 1.0);
        const double piv2 = a_leave * a_leave;
        double wmax = 1.0;
        for (std::int64_t vv = 0; vv < m_ + n_; ++vv) {
          if (vstat_[vv] == VStat::Basic || vv == q) continue;
          double at = 0.0;
          for_col(vv, [&](std::int32_t r, double a) { at += a * devex_rho_[r]; });
          if (at == 0.0) continue;
          const double cand_w = (at * at / piv2) * wq;
          if (cand_w > devex_w_[vv]) devex_w_[vv] = cand_w;
          if (devex_w_[vv] > wmax) wmax = devex_w_[vv];
        }
        devex_w_[vleave] = std::max(wq / piv2, 1.0);
        if (wmax > 1e8) devex_w_.setConstant(1.0);
      }

      for (std::int32_t r : work_idx_) {
        if (r == leave_row) continue;
        const double a = work_[r];
        if (a == 0.0) continue;
        xb_[r] -= sig * t * a;
      }
      vstat_[vleave] = delta_leave < 0.0 ? VStat::Lower : VStat::Upper;
      xval_[vleave] = delta_leave < 0.0 ? var_lb(vleave) : var_ub(vleave);
      pos_in_basis_[vleave] = -1;
      basis_[leave_row] = q;
      pos_in_basis_[q] = std::int32_t(leave_row);
      vstat_[q] = VStat::Basic;
      xb_[leave_row] = enter_val;
      append_eta_from_work(leave_row);
      ++updates_since_refactor_;
    }

    if (t <= 1e-10) {
      if (++degen_streak > 2000 && !bland) bland = true;
    } else {
      degen_streak = 0;
      bland = false;
    }

    if (params.log && iters % params.log_every == 0) {
      double obj = 0.0, infeas = 0.0;
      for (std::int32_t r = 0; r < m_; ++r) {
        obj += var_cost(basis_[r]) * xb_[r];
        if (basis_[r] < m_) infeas += std::abs(xb_[r]);
      }
      for (std::int64_t vv = 0; vv < m_ + n_; ++vv)
        if (pos_in_basis_[vv] < 0 && xval_[vv] != 0.0) {
          obj += var_cost(vv) * xval_[vv];
          if (vv < m_) infeas += xval_[vv];
        }
      std::ostringstream msg;
      msg << "simplex iter=" << iters << " phase=" << (phase1_ ? 1 : 2)
          << " obj=" << obj << " logical_sum=" << infeas
          << " etas=" << etas_.size() << " refactors=" << refactors_;
      params.log(msg.str());
    }
  }
}

EngineResult BoundedSimplex::solve(const EngineParams& params) {
  EngineResult result;
  perturb_seed_ = params.perturb_seed;
  use_devex_ = !std::getenv("GCMATCH_NO_DEVEX");
  if (!started_) cold_start();
  const std::int64_t budget = params.max_iterations > 0
                                  ? params.max_iterations
                                  : std::max<std::int64_t>(
                                        200000, 20 * std::int64_t(m_));
  std::int64_t iters = 0;

  // Phase 1 when some logical carries flow.
  bool need_p1 = false;
  for (std::int32_t r = 0; r < m_ && !need_p1; ++r)
    if (basis_[r] < m_ && xb_[r] > 1e-9) need_p1 = true;
  for (std::int32_t v = 0; v < m_ && !need_p1; ++v)
    if (pos_in_basis_[v] < 0 && xval_[v] > 1e-9) need_p1 = true;

  if (need_p1) {
    phase1_ = true;
    perturbed_ = false;
    bound_perturbed_ = params.perturb;
    const EngineStatus st = iterate(params, iters, budget);
    if (st != EngineStatus::Optimal) {
      result.status = st;
      result.iterations = iters;
      result.refactors = refactors_;
      phase1_ = false;
      bound_perturbed_ = false;
      return result;
    }
    double infeas = 0.0;
    for (std::int32_t v = 0; v < m_; ++v) infeas += std::abs(value(v));
    result.phase1_infeasibility = infeas;
    // Perturbed bounds leave each logical within ~1e-8 of zero even at a
    // feasible optimum, so the threshold scales with the row count.
    if (infeas > 1e-7 + (bound_perturbed_ ? 2e-8 * double(m_) : 0.0)) {
      // duals_ already holds the phase-1 certificate from iterate().
      result.status = EngineStatus::Infeasible;
      result.iterations = iters;
      result.refactors = refactors_;
      phase1_ = false;
      bound_perturbed_ = false;
      return result;
    }
    phase1_ = false;
    for (std::int32_t v = 0; v < m_; ++v)
      if (pos_in_basis_[v] < 0) {
        vstat_[v] = VStat::Lower;
        xval_[v] = 0.0;
      }
  }

  perturbed_ = params.perturb;
  bound_perturbed_ = params.perturb;
  if (bound_perturbed_) snap_nonbasic_to_bounds();
  EngineStatus st = iterate(params, iters, budget);
  for (int attempt = 0; st == EngineStatus::RestartPhase1 && attempt < 3;
       ++attempt) {
    // A mid-phase-2 crash reset landed on the all-logical basis; rebuild
    // feasibility from there before resuming phase 2.
    phase1_ = true;
    const bool keep_costs = perturbed_;
    perturbed_ = false;
    st = iterate(params, iters, budget);
    phase1_ = false;
    perturbed_ = keep_costs;
    if (st != EngineStatus::Optimal) break;
    for (std::int32_t v = 0; v < m_; ++v)
      if (pos_in_basis_[v] < 0) {
        vstat_[v] = VStat::Lower;
        xval_[v] = var_lb(v);
      }
    snap_nonbasic_to_bounds();
    st = iterate(params, iters, budget);
  }
  if (st == EngineStatus::Optimal && (perturbed_ || bound_perturbed_)) {
    // Exact cleanup: drop both perturbations, re-pin the logicals to zero,
    // repair any leftover infeasibility, and certify with true costs.
    perturbed_ = false;
    bound_perturbed_ = false;
    snap_nonbasic_to_bounds();
    bool redo_p1 = false;
    for (std::int32_t r = 0; r < m_ && !redo_p1; ++r)
      if (basis_[r] < m_ && std::abs(xb_[r]) > 1e-9) redo_p1 = true;
    if (redo_p1) {
      phase1_ = true;
      st = iterate(params, iters, budget);
      phase1_ = false;
      if (st == EngineStatus::Optimal) {
        for (std::int32_t v = 0; v < m_; ++v)
          if (pos_in_basis_[v] < 0) {
            vstat_[v] = VStat::Lower;
            xval_[v] = 0.0;
          }
        recompute_basic_values();
        st = iterate(params, iters, budget);
      }
    } else {
      st = iterate(params, iters, budget);
    }
  }
  if (st == EngineStatus::RestartPhase1) st = EngineStatus::Numerical;
  perturbed_ = false;
  bound_perturbed_ = false;
  result.status = st;
  result.iterations = iters;
  result.refactors = refactors_;
  if (st == EngineStatus::Optimal) {
    double obj = 0.0;
    for (std::int64_t c = 0; c < n_; ++c) obj += cost_[m_ + c] * value(m_ + c);
    result.objective = obj;
  }
  return result;
}

double BoundedSimplex::value(std::int64_t v) const {
  return pos_in_basis_[v] >= 0 ? xb_[pos_in_basis_[v]] : xval_[v];
}

Eigen::VectorXd BoundedSimplex::solution() const {
  Eigen::VectorXd x(n_);
  for (std::int64_t c = 0; c < n_; ++c) x[c] = value(m_ + c);
  return x;
}

}  // namespace gcm::detail
