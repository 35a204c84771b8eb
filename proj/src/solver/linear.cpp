#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <string>

#include "gridsynth/error.hpp"
#include "gridsynth/solver.hpp"

namespace gridsynth::solver {

void SparseMatrix::add(int row, int col, double value) {
  if (row < 0 || col < 0 || row >= dim_ || col >= dim_) {
    throw ValidationError("sparse matrix entry out of range");
  }
  if (!std::isfinite(value)) {
    throw NumericalError("non-finite sparse matrix entry at (" + std::to_string(row) + "," +
                         std::to_string(col) + ")");
  }
  entries_.push_back({row, col, value});
}

void SparseMatrix::compress() {
  std::sort(entries_.begin(), entries_.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<Triplet> merged;
  merged.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col) {
      merged.back().value += e.value;
    } else {
      merged.push_back(e);
    }
  }
  std::erase_if(merged, [](const Triplet& t) { return t.value == 0.0; });
  entries_ = std::move(merged);
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
  std::vector<double> y(dim_, 0.0);
  for (const auto& e : entries_) y[e.row] += e.value * x[e.col];
  return y;
}

std::vector<double> solve_linear(const SparseMatrix& a, std::span<const double> b) {
  const int n = a.dim();
  if (static_cast<int>(b.size()) != n) {
    throw ValidationError("solve_linear: right-hand side has wrong length");
  }
  if (n == 0) return {};

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(a.entries().size());
  for (const auto& e : a.entries()) trips.emplace_back(e.row, e.col, e.value);
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) {
    // SparseLU reports the failing column in its message ("... column k").
    throw NumericalError("singular matrix: " + lu.lastErrorMessage());
  }
  Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n);
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !x.allFinite()) {
    throw NumericalError("sparse solve failed");
  }
  // Guard against numerically singular factors that Eigen accepts.
  double bnorm = rhs.lpNorm<Eigen::Infinity>();
  double resid = (m * x - rhs).lpNorm<Eigen::Infinity>();
  if (resid > 1e-8 * (1.0 + bnorm)) {
    Eigen::VectorXd refined = x + lu.solve(rhs - m * x);
    double r2 = (m * refined - rhs).lpNorm<Eigen::Infinity>();
    if (r2 > 1e-8 * (1.0 + bnorm)) {
      throw NumericalError("singular matrix: residual " + std::to_string(r2) +
                           " exceeds tolerance after refinement");
    }
    x = refined;
  }
  return {x.data(), x.data() + n};
}

}  // namespace gridsynth::solver
