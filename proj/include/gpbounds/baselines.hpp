#pragma once

// Reference interval-propagation methods. Both reduce over an index-ordered
// point set, so ties resolve to the earliest point.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpbounds/design.hpp"
#include "gpbounds/errors.hpp"
#include "gpbounds/models.hpp"

namespace gpbounds {

struct BaselineResult {
  double lower = 0.0;
  double upper = 0.0;
  Eigen::VectorXd lower_location;
  Eigen::VectorXd upper_location;
  std::uint64_t evaluations = 0;
};

/// Number of points on a tensor grid with `per_axis` values in each of r axes.
inline std::uint64_t tensor_grid_size(std::uint64_t per_axis, int r) {
  std::uint64_t total = 1;
  for (int i = 0; i < r; ++i) {
    if (total > UINT64_MAX / per_axis) throw BudgetGuardError("tensor grid size overflows");
    total *= per_axis;
  }
  return total;
}

inline std::uint64_t subinterval_evaluation_count(int r, int n) {
  return tensor_grid_size(static_cast<std::uint64_t>(n) + 1, r);
}

namespace detail {

/// Evaluates bb at every point of the per-axis value lists (last axis fastest).
inline BaselineResult scan_tensor_grid(const BlackBox& bb,
                                       const std::vector<std::vector<double>>& axes) {
  const int r = static_cast<int>(axes.size());
  std::uint64_t total = 1;
  for (const auto& a : axes) total *= a.size();
  BaselineResult res;
  std::vector<std::size_t> idx(r, 0);
  Eigen::VectorXd b(r);
  for (std::uint64_t count = 0; count < total; ++count) {
    for (int h = 0; h < r; ++h) b[h] = axes[h][idx[h]];
    const double w = bb(b);
    if (!std::isfinite(w)) throw EvaluationError("baseline: black box returned a non-finite value");
    if (count == 0 || w < res.lower) {
      res.lower = w;
      res.lower_location = b;
    }
    if (count == 0 || w > res.upper) {
      res.upper = w;
      res.upper_location = b;
    }
    for (int h = r - 1; h >= 0; --h) {
      if (++idx[h] < axes[h].size()) break;
      idx[h] = 0;
    }
  }
  res.evaluations = total;
  return res;
}

}  // namespace detail

/// Evaluates all 2^r vertices of the box.
inline BaselineResult vertex_method(const BlackBox& bb, const IntervalBox& box,
                                    int max_dimension = 20) {
  box.validate();
  if (box.dim() > max_dimension)
    throw BudgetGuardError("vertex_method: 2^" + std::to_string(box.dim()) +
                           " evaluations exceed the guard (r <= " + std::to_string(max_dimension) +
                           ")");
  std::vector<std::vector<double>> axes;
  for (int i = 0; i < box.dim(); ++i) axes.push_back({box.lower[i], box.upper[i]});
  return detail::scan_tensor_grid(bb, axes);
}

/// Full tensor grid of subinterval endpoints, n subintervals per variable.
inline BaselineResult subinterval_method(const BlackBox& bb, const IntervalBox& box, int n,
                                         std::uint64_t max_evaluations = 5'000'000) {
  box.validate();
  if (n < 1) throw InvalidArgument("subinterval_method: n must be >= 1");
  const auto count = subinterval_evaluation_count(box.dim(), n);
  if (count > max_evaluations)
    throw BudgetGuardError("subinterval_method: " + std::to_string(count) +
                           " evaluations exceed the guard of " + std::to_string(max_evaluations));
  std::vector<std::vector<double>> axes;
  for (int i = 0; i < box.dim(); ++i) axes.push_back(partition_1d(box.lower[i], box.upper[i], n + 1));
  return detail::scan_tensor_grid(bb, axes);
}

struct SweepRow {
  double delta = 0.0;
  IntervalBox box;
  BaselineResult vertex;
  BaselineResult subinterval;
  double lower_error_pct = 0.0;  // VM vs SM, signed
  double upper_error_pct = 0.0;
  bool coincide = false;  // SM optima sit within one grid cell of the VM vertices
};

/// Runs VM and SM on [k0 (1 - d), k0 (1 + d)] for each d.
inline std::vector<SweepRow> monotonicity_sweep(const BlackBox& bb, double k0,
                                                const std::vector<double>& deltas, int n = 300) {
  if (deltas.empty()) throw InvalidArgument("monotonicity_sweep: no deltas");
  std::vector<SweepRow> rows;
  for (double d : deltas) {
    if (!(d > 0.0 && d < 1.0))
      throw InvalidArgument("monotonicity_sweep: each delta must lie in (0, 1)");
    SweepRow row;
    row.delta = d;
    row.box = IntervalBox({k0 * (1.0 - d)}, {k0 * (1.0 + d)});
    row.vertex = vertex_method(bb, row.box);
    row.subinterval = subinterval_method(bb, row.box, n);
    row.lower_error_pct = 100.0 * (row.vertex.lower - row.subinterval.lower) / row.subinterval.lower;
    row.upper_error_pct = 100.0 * (row.vertex.upper - row.subinterval.upper) / row.subinterval.upper;
    const double cell = row.box.length(0) / n;
    row.coincide =
        std::abs(row.subinterval.lower_location[0] - row.vertex.lower_location[0]) <= cell * (1 + 1e-9) &&
        std::abs(row.subinterval.upper_location[0] - row.vertex.upper_location[0]) <= cell * (1 + 1e-9);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace gpbounds
