#pragma once

// Independent reference computations used by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "gridsynth/solver.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

/// Gaussian elimination with partial pivoting; nullopt when singular.
inline std::optional<std::vector<double>> dense_solve(Matrix a, std::vector<double> b, double tol = 1e-12) {
  const int n = static_cast<int>(b.size());
  for (int c = 0; c < n; ++c) {
    int p = c;
    for (int r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    }
    if (std::abs(a[p][c]) < tol) return std::nullopt;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (int r = c + 1; r < n; ++r) {
      double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (int k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (int r = n - 1; r >= 0; --r) {
    double s = b[r];
    for (int k = r + 1; k < n; ++k) s -= a[r][k] * x[k];
    x[r] = s / a[r][r];
  }
  return x;
}

/// Minimum objective over all basic feasible solutions of a box-bounded LP,
/// found by enumerating every choice of n active hyperplanes.
inline std::optional<double> vertex_enumeration(const gridsynth::solver::LinearProgram& lp, double tol = 1e-9) {
  using gridsynth::solver::Sense;
  const int n = lp.num_variables();
  struct Plane {
    std::vector<double> a;
    double b;
  };
  std::vector<Plane> forced, optional_planes;
  for (const auto& row : lp.rows()) {
    Plane p{std::vector<double>(n, 0.0), row.rhs};
    for (std::size_t k = 0; k < row.cols.size(); ++k) p.a[row.cols[k]] += row.coefs[k];
    (row.sense == Sense::kEqual ? forced : optional_planes).push_back(std::move(p));
  }
  for (int j = 0; j < n; ++j) {
    Plane lo{std::vector<double>(n, 0.0), lp.lower()[j]};
    lo.a[j] = 1.0;
    optional_planes.push_back(lo);
    Plane hi{std::vector<double>(n, 0.0), lp.upper()[j]};
    hi.a[j] = 1.0;
    optional_planes.push_back(hi);
  }
  auto feasible = [&](const std::vector<double>& x) {
    for (int j = 0; j < n; ++j) {
      if (x[j] < lp.lower()[j] - tol || x[j] > lp.upper()[j] + tol) return false;
    }
    for (const auto& row : lp.rows()) {
      double s = 0.0;
      for (std::size_t k = 0; k < row.cols.size(); ++k) s += row.coefs[k] * x[row.cols[k]];
      double scale = tol * std::max(1.0, std::abs(row.rhs));
      if (row.sense == Sense::kLessEqual && s > row.rhs + scale) return false;
      if (row.sense == Sense::kGreaterEqual && s < row.rhs - scale) return false;
      if (row.sense == Sense::kEqual && std::abs(s - row.rhs) > scale) return false;
    }
    return true;
  };
  const int need = n - static_cast<int>(forced.size());
  if (need < 0) return std::nullopt;
  std::optional<double> best;
  std::vector<int> pick;
  std::function<void(int)> rec = [&](int start) {
    if (static_cast<int>(pick.size()) == need) {
      Matrix a;
      std::vector<double> b;
      for (const auto& p : forced) {
        a.push_back(p.a);
        b.push_back(p.b);
      }
      for (int k : pick) {
        if (!std::isfinite(optional_planes[k].b)) return;
        a.push_back(optional_planes[k].a);
        b.push_back(optional_planes[k].b);
      }
      auto x = dense_solve(a, b, 1e-10);
      if (!x || !feasible(*x)) return;
      double obj = 0.0;
      for (int j = 0; j < n; ++j) obj += lp.cost()[j] * (*x)[j];
      if (!best || obj < *best) best = obj;
      return;
    }
    for (int k = start; k < static_cast<int>(optional_planes.size()); ++k) {
      pick.push_back(k);
      rec(k + 1);
      pick.pop_back();
    }
  };
  rec(0);
  return best;
}

/// Minimum-cost map of loads onto buses that covers every bus, by exhaustive
/// enumeration. Returns +inf when no covering map exists.
inline double brute_force_assignment(const Matrix& cost) {
  const int loads = static_cast<int>(cost.size());
  const int buses = loads == 0 ? 0 : static_cast<int>(cost[0].size());
  std::vector<int> pick(loads, 0);
  double best = std::numeric_limits<double>::infinity();
  std::function<void(int, double)> rec = [&](int i, double acc) {
    if (acc >= best) return;
    if (i == loads) {
      std::vector<bool> hit(buses, false);
      for (int p : pick) hit[p] = true;
      if (std::all_of(hit.begin(), hit.end(), [](bool h) { return h; })) best = acc;
      return;
    }
    for (int j = 0; j < buses; ++j) {
      pick[i] = j;
      rec(i + 1, acc + cost[i][j]);
    }
  };
  rec(0, 0.0);
  return best;
}

}  // namespace oracle
