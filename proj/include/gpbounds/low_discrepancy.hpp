#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "gpbounds/errors.hpp"

namespace gpbounds {

namespace detail {

inline constexpr std::array<int, 16> kHaltonPrimes = {2,  3,  5,  7,  11, 13, 17, 19,
                                                      23, 29, 31, 37, 41, 43, 47, 53};

inline double radical_inverse(std::uint64_t index, int base) {
  double result = 0.0;
  double f = 1.0 / base;
  while (index > 0) {
    result += f * static_cast<double>(index % base);
    index /= base;
    f /= base;
  }
  return result;
}

}  // namespace detail

/// Halton points in [0,1)^dim with a seeded Cranley-Patterson rotation.
/// The same (count, dim, seed) always yields the same rows.
inline Eigen::MatrixXd halton_points(int count, int dim, std::uint64_t seed) {
  if (dim < 1 || dim > static_cast<int>(detail::kHaltonPrimes.size()))
    throw InvalidArgument("halton_points: dimension must be in [1, 16]");
  if (count < 0) throw InvalidArgument("halton_points: negative count");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> shift(dim);
  for (auto& s : shift) s = unit(rng);

  Eigen::MatrixXd pts(count, dim);
  for (int i = 0; i < count; ++i) {
    for (int h = 0; h < dim; ++h) {
      double x = detail::radical_inverse(static_cast<std::uint64_t>(i) + 1,
                                         detail::kHaltonPrimes[h]) +
                 shift[h];
      if (x >= 1.0) x -= 1.0;
      pts(i, h) = x;
    }
  }
  return pts;
}

}  // namespace gpbounds
