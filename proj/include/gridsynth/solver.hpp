#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gridsynth::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Triplet {
  int row;
  int col;
  double value;
};

/// Square sparse matrix in coordinate form. Duplicate coordinates are summed
/// by compress().
class SparseMatrix {
 public:
  explicit SparseMatrix(int dim = 0) : dim_(dim) {}

  int dim() const { return dim_; }
  void add(int row, int col, double value);
  /// Sums duplicates, drops explicit zeros, sorts by (row, col).
  void compress();
  const std::vector<Triplet>& entries() const { return entries_; }
  std::vector<double> multiply(std::span<const double> x) const;

 private:
  int dim_;
  std::vector<Triplet> entries_;
};

/// Solves A x = b with a sparse LU factorization. Throws NumericalError when
/// the matrix is singular; the message names the failing pivot column.
std::vector<double> solve_linear(const SparseMatrix& a, std::span<const double> b);

enum class Sense { kLessEqual, kGreaterEqual, kEqual };

struct Constraint {
  std::vector<int> cols;
  std::vector<double> coefs;
  Sense sense = Sense::kLessEqual;
  double rhs = 0.0;
  std::string name;
};

/// minimize c'x subject to rows and lo <= x <= hi.
class LinearProgram {
 public:
  int add_variable(double cost, double lo = 0.0, double hi = kInf);
  int add_constraint(Constraint row);

  int num_variables() const { return static_cast<int>(cost_.size()); }
  int num_constraints() const { return static_cast<int>(rows_.size()); }

  const std::vector<double>& cost() const { return cost_; }
  const std::vector<double>& lower() const { return lo_; }
  const std::vector<double>& upper() const { return hi_; }
  const std::vector<Constraint>& rows() const { return rows_; }

  void set_cost(int var, double c) { cost_[var] = c; }
  void set_bounds(int var, double lo, double hi);
  void set_rhs(int row, double rhs) { rows_[row].rhs = rhs; }

 private:
  std::vector<double> cost_;
  std::vector<double> lo_;
  std::vector<double> hi_;
  std::vector<Constraint> rows_;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  /// Row duals y (sign convention: objective = sum y_i b_i + bound terms).
  std::vector<double> row_duals;
  /// Reduced costs d = c - A'y per structural variable.
  std::vector<double> reduced_costs;
  /// Dual objective; equals `objective` at optimality.
  double dual_objective = 0.0;
  int iterations = 0;
  /// On infeasibility, the row with the largest remaining violation.
  int worst_row = -1;
};

struct LpOptions {
  int max_iterations = 50000;
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-10;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  int degenerate_switch = 50;
};

/// Bounded-variable two-phase primal simplex on a dense tableau.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& options = {});

const char* to_string(LpStatus status);

}  // namespace gridsynth::solver
