#pragma once

// Interval boxes, unit-hypercube scaling, Taguchi orthogonal arrays and
// candidate grids. Everything the GP touches lives in scaled coordinates.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "gpbounds/errors.hpp"
#include "gpbounds/low_discrepancy.hpp"

namespace gpbounds {

struct IntervalBox {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::string> names;  // optional, defaults to b1..br
  std::vector<std::string> units;  // optional

  IntervalBox() = default;
  IntervalBox(std::vector<double> lo, std::vector<double> hi)
      : lower(std::move(lo)), upper(std::move(hi)) {
    validate();
  }

  int dim() const { return static_cast<int>(lower.size()); }
  double length(int i) const { return upper[i] - lower[i]; }

  std::string name(int i) const {
    if (i < static_cast<int>(names.size()) && !names[i].empty()) return names[i];
    return "b" + std::to_string(i + 1);
  }

  void validate() const {
    if (lower.empty()) throw InvalidArgument("IntervalBox: at least one variable required");
    if (lower.size() != upper.size())
      throw InvalidArgument("IntervalBox: lower/upper length mismatch");
    for (int i = 0; i < dim(); ++i) {
      if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
        throw InvalidArgument("IntervalBox: non-finite endpoint for variable " + name(i));
      if (!(lower[i] < upper[i]))
        throw InvalidArgument("IntervalBox: lower must be < upper for variable " + name(i));
    }
  }
};

inline Eigen::VectorXd scale(const IntervalBox& box, const Eigen::VectorXd& physical) {
  if (physical.size() != box.dim()) throw InvalidArgument("scale: dimension mismatch");
  Eigen::VectorXd u(box.dim());
  for (int i = 0; i < box.dim(); ++i) u[i] = (physical[i] - box.lower[i]) / box.length(i);
  return u;
}

inline Eigen::VectorXd unscale(const IntervalBox& box, const Eigen::VectorXd& unit) {
  if (unit.size() != box.dim()) throw InvalidArgument("unscale: dimension mismatch");
  Eigen::VectorXd p(box.dim());
  for (int i = 0; i < box.dim(); ++i) p[i] = box.lower[i] + unit[i] * box.length(i);
  return p;
}

/// Row-wise scaling of an s x r matrix of physical points.
inline Eigen::MatrixXd scale_rows(const IntervalBox& box, const Eigen::MatrixXd& physical) {
  Eigen::MatrixXd out(physical.rows(), physical.cols());
  for (Eigen::Index j = 0; j < physical.rows(); ++j)
    out.row(j) = scale(box, physical.row(j).transpose()).transpose();
  return out;
}

inline Eigen::MatrixXd unscale_rows(const IntervalBox& box, const Eigen::MatrixXd& unit) {
  Eigen::MatrixXd out(unit.rows(), unit.cols());
  for (Eigen::Index j = 0; j < unit.rows(); ++j)
    out.row(j) = unscale(box, unit.row(j).transpose()).transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Orthogonal arrays

/// s x r matrix of level indices in [0, q-1].
struct DesignMatrix {
  Eigen::MatrixXi levels;
  int q = 0;

  int runs() const { return static_cast<int>(levels.rows()); }
  int factors() const { return static_cast<int>(levels.cols()); }
};

namespace detail {

// Level indices of the plate-cavity L8 and L9 designs, row for row.
inline Eigen::MatrixXi table_l8() {
  Eigen::MatrixXi m(8, 4);
  m << 0, 0, 0, 0,
       0, 0, 0, 1,
       0, 1, 1, 0,
       0, 1, 1, 1,
       1, 0, 1, 0,
       1, 0, 1, 1,
       1, 1, 0, 0,
       1, 1, 0, 1;
  return m;
}

// As printed: rows 1 and 3 carry column-3 levels 2 and 0, which differs
// from the textbook L9 and breaks pairwise balance of columns 2-3 and 3-4.
inline Eigen::MatrixXi table_l9() {
  Eigen::MatrixXi m(9, 4);
  m << 0, 0, 2, 0,
       0, 1, 1, 1,
       0, 2, 0, 2,
       1, 0, 1, 2,
       1, 1, 2, 0,
       1, 2, 0, 1,
       2, 0, 2, 1,
       2, 1, 0, 2,
       2, 2, 1, 0;
  return m;
}

// Rows (a, b, (a + b) mod q, (2a + b) mod q), a slowest. Matches the
// printed L16 and L25 tables. For q = 4 columns 2 and 4 are not pairwise
// balanced because 2 is not invertible mod 4.
inline Eigen::MatrixXi modular_array(int q) {
  Eigen::MatrixXi m(q * q, 4);
  for (int a = 0; a < q; ++a)
    for (int b = 0; b < q; ++b) {
      const int row = a * q + b;
      m(row, 0) = a;
      m(row, 1) = b;
      m(row, 2) = (a + b) % q;
      m(row, 3) = (2 * a + b) % q;
    }
  return m;
}

}  // namespace detail

inline const char* kSupportedDesigns =
    "supported designs: L8(2^4) q=2 r=4, L9(3^4) q=3 r=4, L16(4^4) q=4 r=4, "
    "L25(5^4) q=5 r=4, and 1-D ladders q>=2 r=1";

/// Taguchi array L_s(q^r). Only the embedded arrays and 1-D ladders exist.
inline DesignMatrix taguchi_array(int q, int r) {
  DesignMatrix d;
  d.q = q;
  if (r == 1 && q >= 2) {
    d.levels.resize(q, 1);
    for (int i = 0; i < q; ++i) d.levels(i, 0) = i;
    return d;
  }
  if (r == 4) {
    switch (q) {
      case 2: d.levels = detail::table_l8(); return d;
      case 3: d.levels = detail::table_l9(); return d;
      case 4: d.levels = detail::modular_array(4); return d;
      case 5: d.levels = detail::modular_array(5); return d;
      default: break;
    }
  }
  throw UnsupportedDesign("no Taguchi array for q=" + std::to_string(q) +
                          ", r=" + std::to_string(r) + "; " + kSupportedDesigns);
}

/// Full factorial q^r design. Cost grows as q^r; callers should warn.
inline DesignMatrix full_factorial(int q, int r) {
  if (q < 2 || r < 1) throw InvalidArgument("full_factorial: need q >= 2 and r >= 1");
  const double total = std::pow(static_cast<double>(q), r);
  if (total > 1e6) throw InvalidArgument("full_factorial: more than 1e6 runs requested");
  DesignMatrix d;
  d.q = q;
  const int s = static_cast<int>(total);
  d.levels.resize(s, r);
  for (int row = 0; row < s; ++row) {
    int rem = row;
    for (int h = r - 1; h >= 0; --h) {
      d.levels(row, h) = rem % q;
      rem /= q;
    }
  }
  return d;
}

/// Maps level indices to physical points. Without explicit values, level l
/// of q maps to lower + l/(q-1) * length.
inline Eigen::MatrixXd map_levels(
    const DesignMatrix& design, const IntervalBox& box,
    const std::optional<std::vector<std::vector<double>>>& level_values = std::nullopt) {
  box.validate();
  if (design.factors() != box.dim())
    throw InvalidArgument("map_levels: design has " + std::to_string(design.factors()) +
                          " columns but box has " + std::to_string(box.dim()) + " variables");
  if (design.q < 2) throw InvalidArgument("map_levels: q must be >= 2");
  if (level_values) {
    if (static_cast<int>(level_values->size()) != box.dim())
      throw InvalidArgument("map_levels: need one level list per variable");
    for (int i = 0; i < box.dim(); ++i) {
      const auto& lv = (*level_values)[i];
      if (static_cast<int>(lv.size()) != design.q)
        throw InvalidArgument("map_levels: variable " + box.name(i) + " needs " +
                              std::to_string(design.q) + " level values");
      for (double v : lv)
        if (v < box.lower[i] || v > box.upper[i])
          throw InvalidArgument("map_levels: level value outside interval of " + box.name(i));
    }
  }
  Eigen::MatrixXd pts(design.runs(), design.factors());
  for (int j = 0; j < design.runs(); ++j)
    for (int i = 0; i < design.factors(); ++i) {
      const int l = design.levels(j, i);
      if (l < 0 || l >= design.q) throw InvalidArgument("map_levels: level index out of range");
      pts(j, i) = level_values
                      ? (*level_values)[i][l]
                      : box.lower[i] + box.length(i) * static_cast<double>(l) / (design.q - 1);
    }
  return pts;
}

/// q equally spaced points on [lower, upper], endpoints included.
inline std::vector<double> partition_1d(double lower, double upper, int q) {
  if (q < 2) throw InvalidArgument("partition_1d: q must be >= 2");
  if (!(lower < upper)) throw InvalidArgument("partition_1d: lower must be < upper");
  std::vector<double> pts(q);
  for (int i = 0; i < q; ++i)
    pts[i] = (i == q - 1) ? upper : lower + (upper - lower) * static_cast<double>(i) / (q - 1);
  return pts;
}

// ---------------------------------------------------------------------------
// Candidate / test grids

struct LatticeGrid {
  int points_per_dim = 50;
};

struct LowDiscrepancyGrid {
  int count = 4096;
  std::uint64_t seed = 0;
};

using GridSpec = std::variant<LatticeGrid, LowDiscrepancyGrid>;

/// Lattice of 50 per axis for r <= 2, else 4096 seeded Halton points.
inline GridSpec default_grid_spec(int r, std::uint64_t seed) {
  if (r <= 2) return LatticeGrid{50};
  return LowDiscrepancyGrid{4096, seed};
}

/// Candidate points in scaled coordinates, one per row.
inline Eigen::MatrixXd test_grid(const IntervalBox& box, const GridSpec& spec) {
  box.validate();
  const int r = box.dim();
  if (const auto* lat = std::get_if<LatticeGrid>(&spec)) {
    const int n = lat->points_per_dim;
    if (n < 2) throw InvalidArgument("test_grid: lattice needs >= 2 points per dimension");
    const double total = std::pow(static_cast<double>(n), r);
    if (total > 2e7) throw InvalidArgument("test_grid: lattice too large");
    const auto count = static_cast<Eigen::Index>(total);
    Eigen::MatrixXd pts(count, r);
    for (Eigen::Index row = 0; row < count; ++row) {
      Eigen::Index rem = row;
      for (int h = r - 1; h >= 0; --h) {
        const auto l = rem % n;
        rem /= n;
        pts(row, h) = (l == n - 1) ? 1.0 : static_cast<double>(l) / (n - 1);
      }
    }
    return pts;
  }
  const auto& ld = std::get<LowDiscrepancyGrid>(spec);
  if (ld.count < 2) throw InvalidArgument("test_grid: need >= 2 low-discrepancy points");
  return halton_points(ld.count, r, ld.seed);
}

/// Design CSV: header of variable names, one physical row per run.
inline void write_design_csv(std::ostream& os, const IntervalBox& box,
                             const Eigen::MatrixXd& physical) {
  for (int i = 0; i < box.dim(); ++i) os << (i ? "," : "") << box.name(i);
  os << '\n';
  char buf[32];
  for (Eigen::Index j = 0; j < physical.rows(); ++j) {
    for (Eigen::Index i = 0; i < physical.cols(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", physical(j, i));
      os << (i ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace gpbounds
