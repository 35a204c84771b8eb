#include <algorithm>
#include <cmath>
#include <utility>

#include "gridsynth/error.hpp"
#include "gridsynth/solver.hpp"

namespace gridsynth::solver {

int LinearProgram::add_variable(double cost, double lo, double hi) {
  if (lo > hi) {
    throw ValidationError("LP variable bounds inverted: lo > hi");
  }
  cost_.push_back(cost);
  lo_.push_back(lo);
  hi_.push_back(hi);
  return static_cast<int>(cost_.size()) - 1;
}

int LinearProgram::add_constraint(Constraint row) {
  if (row.cols.size() != row.coefs.size()) {
    throw ValidationError("LP constraint has mismatched column/coefficient counts");
  }
  for (int c : row.cols) {
    if (c < 0 || c >= num_variables()) {
      throw ValidationError("LP constraint references unknown variable");
    }
  }
  rows_.push_back(std::move(row));
  return static_cast<int>(rows_.size()) - 1;
}

void LinearProgram::set_bounds(int var, double lo, double hi) {
  if (lo > hi) {
    throw ValidationError("LP variable bounds inverted: lo > hi");
  }
  lo_[var] = lo;
  hi_[var] = hi;
}

const char* to_string(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "optimal";
    case LpStatus::kInfeasible:
      return "infeasible";
    case LpStatus::kUnbounded:
      return "unbounded";
    case LpStatus::kIterationLimit:
      return "iteration-limit";
  }
  return "unknown";
}

namespace {

// Dense bounded-variable tableau. Columns are laid out as
// [structural | slack | artificial]; every row i reads a_i x + s_i (+ art) = b_i.
class Tableau {
 public:
  Tableau(const LinearProgram& lp, const LpOptions& options)
      : opt_(options), m_(lp.num_constraints()), n_(lp.num_variables()) {
    build(lp);
  }

  LpResult run(const LinearProgram& lp) {
    LpResult result;
    // Phase 1: drive artificials to zero.
    if (num_art_ > 0) {
      std::vector<double> phase1(ncols_, 0.0);
      for (int k = 0; k < num_art_; ++k) phase1[n_ + m_ + k] = 1.0;
      set_objective(phase1);
      LpStatus st = iterate(result.iterations);
      if (st == LpStatus::kIterationLimit) {
        result.status = st;
        return result;
      }
      double infeas = 0.0;
      double worst = -1.0;
      for (int i = 0; i < m_; ++i) {
        if (basis_[i] >= n_ + m_) {
          infeas += beta_[i];
          if (beta_[i] > worst) {
            worst = beta_[i];
            result.worst_row = art_row_[basis_[i] - n_ - m_];
          }
        }
      }
      if (infeas > opt_.feasibility_tol * std::max(1.0, rhs_scale_)) {
        result.status = LpStatus::kInfeasible;
        return result;
      }
      result.worst_row = -1;
      drive_out_artificials();
      for (int k = 0; k < num_art_; ++k) {
        lo_[n_ + m_ + k] = 0.0;
        hi_[n_ + m_ + k] = 0.0;
      }
    }

    std::vector<double> phase2(ncols_, 0.0);
    for (int j = 0; j < n_; ++j) phase2[j] = lp.cost()[j];
    set_objective(phase2);
    LpStatus st = iterate(result.iterations);
    result.status = st;
    if (st != LpStatus::kOptimal) return result;

    extract(lp, phase2, result);
    return result;
  }

 private:
  double& at(int i, int j) { return tab_[static_cast<std::size_t>(i) * ncols_ + j]; }
  double at(int i, int j) const { return tab_[static_cast<std::size_t>(i) * ncols_ + j]; }

  void build(const LinearProgram& lp) {
    // Nonbasic starting values for structurals.
    std::vector<double> x0(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      double lo = lp.lower()[j];
      double hi = lp.upper()[j];
      if (std::isfinite(lo)) {
        x0[j] = lo;
      } else if (std::isfinite(hi)) {
        x0[j] = hi;
      }
    }

    std::vector<double> residual(m_);
    std::vector<double> slack_lo(m_), slack_hi(m_), slack_val(m_);
    std::vector<int> needs_art;
    rhs_scale_ = 0.0;
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp.rows()[i];
      double r = row.rhs;
      for (std::size_t k = 0; k < row.cols.size(); ++k) r -= row.coefs[k] * x0[row.cols[k]];
      residual[i] = r;
      rhs_scale_ = std::max(rhs_scale_, std::abs(row.rhs));
      switch (row.sense) {
        case Sense::kLessEqual:
          slack_lo[i] = 0.0;
          slack_hi[i] = kInf;
          break;
        case Sense::kGreaterEqual:
          slack_lo[i] = -kInf;
          slack_hi[i] = 0.0;
          break;
        case Sense::kEqual:
          slack_lo[i] = 0.0;
          slack_hi[i] = 0.0;
          break;
      }
      bool slack_ok = r >= slack_lo[i] - opt_.feasibility_tol && r <= slack_hi[i] + opt_.feasibility_tol;
      if (slack_ok) {
        slack_val[i] = std::clamp(r, slack_lo[i], slack_hi[i]);
      } else {
        slack_val[i] = r < slack_lo[i] ? slack_lo[i] : slack_hi[i];
        needs_art.push_back(i);
      }
    }

    num_art_ = static_cast<int>(needs_art.size());
    ncols_ = n_ + m_ + num_art_;
    tab_.assign(static_cast<std::size_t>(m_) * ncols_, 0.0);
    lo_.assign(ncols_, 0.0);
    hi_.assign(ncols_, 0.0);
    val_.assign(ncols_, 0.0);
    is_basic_.assign(ncols_, -1);
    basis_.assign(m_, -1);
    beta_.assign(m_, 0.0);
    art_row_ = needs_art;

    for (int j = 0; j < n_; ++j) {
      lo_[j] = lp.lower()[j];
      hi_[j] = lp.upper()[j];
      val_[j] = x0[j];
    }
    for (int i = 0; i < m_; ++i) {
      lo_[n_ + i] = slack_lo[i];
      hi_[n_ + i] = slack_hi[i];
      val_[n_ + i] = slack_val[i];
    }

    std::vector<double> row_sign(m_, 1.0);
    std::vector<int> art_of_row(m_, -1);
    for (int k = 0; k < num_art_; ++k) {
      int i = needs_art[k];
      art_of_row[i] = k;
      double gap = residual[i] - slack_val[i];
      row_sign[i] = gap >= 0.0 ? 1.0 : -1.0;
      lo_[n_ + m_ + k] = 0.0;
      hi_[n_ + m_ + k] = kInf;
    }

    for (int i = 0; i < m_; ++i) {
      const auto& row = lp.rows()[i];
      // Basic column of row i has coefficient row_sign[i]; scale the row so the
      // basic column becomes +1.
      double s = row_sign[i];
      for (std::size_t k = 0; k < row.cols.size(); ++k) at(i, row.cols[k]) += row.coefs[k] * s;
      at(i, n_ + i) = s;
      if (art_of_row[i] >= 0) {
        int col = n_ + m_ + art_of_row[i];
        at(i, col) = 1.0;  // sigma * sigma
        basis_[i] = col;
        beta_[i] = std::abs(residual[i] - slack_val[i]);
      } else {
        basis_[i] = n_ + i;
        beta_[i] = slack_val[i];
      }
      is_basic_[basis_[i]] = i;
    }
  }

  void set_objective(const std::vector<double>& c) {
    cost_ = c;
    d_.assign(ncols_, 0.0);
    for (int j = 0; j < ncols_; ++j) d_[j] = c[j];
    for (int i = 0; i < m_; ++i) {
      double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &tab_[static_cast<std::size_t>(i) * ncols_];
      for (int j = 0; j < ncols_; ++j) d_[j] -= cb * row[j];
    }
  }

  bool fixed(int j) const { return lo_[j] == hi_[j]; }

  // Returns direction (+1/-1) if column j is attractive, else 0.
  int attractive(int j) const {
    if (is_basic_[j] >= 0 || fixed(j)) return 0;
    double dj = d_[j];
    bool can_up = val_[j] < hi_[j];
    bool can_down = val_[j] > lo_[j];
    if (dj < -opt_.optimality_tol && can_up) return +1;
    if (dj > opt_.optimality_tol && can_down) return -1;
    return 0;
  }

  LpStatus iterate(int& iterations) {
    int degenerate_run = 0;
    std::vector<int> nz;
    nz.reserve(ncols_);
    while (true) {
      if (iterations >= opt_.max_iterations) return LpStatus::kIterationLimit;
      bool bland = degenerate_run >= opt_.degenerate_switch;

      int enter = -1;
      int dir = 0;
      double best = 0.0;
      for (int j = 0; j < ncols_; ++j) {
        int dj_dir = attractive(j);
        if (dj_dir == 0) continue;
        if (bland) {
          enter = j;
          dir = dj_dir;
          break;
        }
        double score = std::abs(d_[j]);
        if (score > best) {
          best = score;
          enter = j;
          dir = dj_dir;
        }
      }
      if (enter < 0) return LpStatus::kOptimal;

      // Ratio test.
      double t_max = hi_[enter] - lo_[enter];  // bound flip
      int leave_row = -1;
      double leave_alpha = 0.0;
      const double tie_tol = 1e-12;
      for (int i = 0; i < m_; ++i) {
        double a = at(i, enter);
        if (std::abs(a) <= opt_.pivot_tol) continue;
        double rate = -dir * a;  // d(beta_i)/dt
        int b = basis_[i];
        double t;
        if (rate < 0.0) {
          if (!std::isfinite(lo_[b])) continue;
          t = (beta_[i] - lo_[b]) / -rate;
        } else {
          if (!std::isfinite(hi_[b])) continue;
          t = (hi_[b] - beta_[i]) / rate;
        }
        if (t < 0.0) t = 0.0;
        bool take = false;
        if (t < t_max - tie_tol) {
          take = true;
        } else if (leave_row >= 0 && t <= t_max + tie_tol) {
          if (bland) {
            take = basis_[i] < basis_[leave_row];
          } else {
            take = std::abs(a) > std::abs(leave_alpha);
          }
        }
        if (take) {
          t_max = t;
          leave_row = i;
          leave_alpha = a;
        }
      }

      if (!std::isfinite(t_max)) return LpStatus::kUnbounded;
      ++iterations;
      degenerate_run = t_max <= 1e-12 ? degenerate_run + 1 : 0;

      for (int i = 0; i < m_; ++i) {
        double a = at(i, enter);
        if (a != 0.0) beta_[i] -= dir * a * t_max;
      }
      double entering_value = val_[enter] + dir * t_max;

      if (leave_row < 0) {
        // Bound flip, basis unchanged.
        val_[enter] = dir > 0 ? hi_[enter] : lo_[enter];
        continue;
      }

      int leaving = basis_[leave_row];
      double leaving_rate = -dir * leave_alpha;
      val_[leaving] = leaving_rate < 0.0 ? lo_[leaving] : hi_[leaving];
      is_basic_[leaving] = -1;
      pivot(leave_row, enter, nz);
      basis_[leave_row] = enter;
      is_basic_[enter] = leave_row;
      beta_[leave_row] = entering_value;
      val_[enter] = entering_value;
    }
  }

  void pivot(int r, int c, std::vector<int>& nz) {
    double* prow = &tab_[static_cast<std::size_t>(r) * ncols_];
    double inv = 1.0 / prow[c];
    nz.clear();
    for (int j = 0; j < ncols_; ++j) {
      if (prow[j] != 0.0) {
        prow[j] *= inv;
        nz.push_back(j);
      }
    }
    prow[c] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &tab_[static_cast<std::size_t>(i) * ncols_];
      double f = row[c];
      if (f == 0.0) continue;
      for (int j : nz) row[j] -= f * prow[j];
      row[c] = 0.0;
    }
    double f = d_[c];
    if (f != 0.0) {
      for (int j : nz) d_[j] -= f * prow[j];
      d_[c] = 0.0;
    }
  }

  void drive_out_artificials() {
    std::vector<int> nz;
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < n_ + m_) continue;
      int best = -1;
      double best_abs = opt_.pivot_tol * 1e3;
      for (int j = 0; j < n_ + m_; ++j) {
        if (is_basic_[j] >= 0) continue;
        double a = std::abs(at(i, j));
        if (a > best_abs) {
          best_abs = a;
          best = j;
        }
      }
      if (best < 0) continue;  // redundant row
      int art = basis_[i];
      double art_value = beta_[i];
      val_[art] = 0.0;
      is_basic_[art] = -1;
      // The entering column keeps its nonbasic value; the artificial leaves
      // at (numerically) zero, so other basics shift by a * art_value.
      double a = at(i, best);
      double step = art_value / a;
      for (int k = 0; k < m_; ++k) {
        if (k != i) beta_[k] -= at(k, best) * step;
      }
      double entering_value = val_[best] + step;
      pivot(i, best, nz);
      basis_[i] = best;
      is_basic_[best] = i;
      beta_[i] = entering_value;
      val_[best] = entering_value;
    }
  }

  void extract(const LinearProgram& lp, const std::vector<double>& cost, LpResult& result) const {
    result.x.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      result.x[j] = is_basic_[j] >= 0 ? beta_[is_basic_[j]] : val_[j];
    }
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += cost[j] * result.x[j];
    result.objective = obj;

    // y_i = c_B B^{-1} e_i, and B^{-1} e_i is the (sign-scaled) slack column.
    result.row_duals.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double y = 0.0;
      for (int k = 0; k < m_; ++k) {
        double cb = cost[basis_[k]];
        if (cb != 0.0) y += cb * at(k, n_ + i);
      }
      // Column n_+i was scaled by the row sign at build time; at(i0, n_+i)
      // carries that sign so y already refers to the unscaled row.
      result.row_duals[i] = y;
    }
    // Reduced costs and dual objective recomputed from the original data.
    result.reduced_costs.assign(n_, 0.0);
    for (int j = 0; j < n_; ++j) result.reduced_costs[j] = lp.cost()[j];
    double dual_obj = 0.0;
    for (int i = 0; i < m_; ++i) {
      const auto& row = lp.rows()[i];
      double y = result.row_duals[i];
      dual_obj += y * row.rhs;
      for (std::size_t k = 0; k < row.cols.size(); ++k) {
        result.reduced_costs[row.cols[k]] -= y * row.coefs[k];
      }
    }
    for (int j = 0; j < n_; ++j) {
      double d = result.reduced_costs[j];
      if (std::abs(d) <= opt_.optimality_tol) continue;
      double bound = d > 0.0 ? lp.lower()[j] : lp.upper()[j];
      if (std::isfinite(bound)) dual_obj += d * bound;
    }
    result.dual_objective = dual_obj;
  }

  LpOptions opt_;
  int m_;
  int n_;
  int num_art_ = 0;
  int ncols_ = 0;
  double rhs_scale_ = 0.0;
  std::vector<double> tab_;
  std::vector<double> lo_, hi_, val_;
  std::vector<double> beta_;
  std::vector<double> cost_;
  std::vector<double> d_;
  std::vector<int> basis_;
  std::vector<int> is_basic_;
  std::vector<int> art_row_;
};

}  // namespace

LpResult solve_lp(const LinearProgram& lp, const LpOptions& options) {
  Tableau tableau(lp, options);
  return tableau.run(lp);
}

}  // namespace gridsynth::solver
