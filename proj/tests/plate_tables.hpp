#pragma once

// Plate-cavity initial designs and level values, transcribed row by row,
// plus independent balance/orthogonality counters.

#include <array>
#include <map>
#include <set>
#include <vector>

#include "gpbounds/design.hpp"

namespace plate {

using gpbounds::DesignMatrix;
using gpbounds::IntervalBox;

inline const IntervalBox kPlate({280e-2, 700e8, 120e-2, 342.0}, {320e-2, 719e8, 122e-2, 346.0});

using Levels = std::vector<std::vector<double>>;

inline const Levels kL8Levels = {{280e-2, 320e-2}, {700e8, 719e8}, {120e-2, 122e-2}, {342.0, 346.0}};
inline const Levels kL9Levels = {{280e-2, 300e-2, 320e-2}, {700e8, 709.5e8, 719e8}, {120e-2, 121e-2, 122e-2},
                          {342.0, 344.0, 346.0}};
inline const Levels kL16Levels = {{280e-2, 290e-2, 310e-2, 320e-2},
                           {700e8, 706.33e8, 712.67e8, 719e8},
                           {120e-2, 120.67e-2, 121.33e-2, 122e-2},
                           {342.0, 343.3, 344.7, 346.0}};
inline const Levels kL25Levels = {{280e-2, 290e-2, 300e-2, 310e-2, 320e-2},
                           {700e8, 704.75e8, 709.5e8, 714.25e8, 719e8},
                           {120e-2, 120.5e-2, 121e-2, 121.5e-2, 122e-2},
                           {342.0, 343.0, 344.0, 345.0, 346.0}};

inline const std::vector<std::array<double, 4>> kD8 = {
    {280e-2, 700e8, 120e-2, 342.0}, {280e-2, 700e8, 120e-2, 346.0}, {280e-2, 719e8, 122e-2, 342.0},
    {280e-2, 719e8, 122e-2, 346.0}, {320e-2, 700e8, 122e-2, 342.0}, {320e-2, 700e8, 122e-2, 346.0},
    {320e-2, 719e8, 120e-2, 342.0}, {320e-2, 719e8, 120e-2, 346.0}};

inline const std::vector<std::array<double, 4>> kD9 = {
    {280e-2, 700e8, 122e-2, 342.0},   {280e-2, 709.5e8, 121e-2, 344.0}, {280e-2, 719e8, 120e-2, 346.0},
    {300e-2, 700e8, 121e-2, 346.0},   {300e-2, 709.5e8, 122e-2, 342.0}, {300e-2, 719e8, 120e-2, 344.0},
    {320e-2, 700e8, 122e-2, 344.0},   {320e-2, 709.5e8, 120e-2, 346.0}, {320e-2, 719e8, 121e-2, 342.0}};

inline const std::vector<std::array<double, 4>> kD16 = {
    {280e-2, 700e8, 120e-2, 342.0},       {280e-2, 706.33e8, 120.67e-2, 343.3},
    {280e-2, 712.67e8, 121.33e-2, 344.7}, {280e-2, 719e8, 122e-2, 346.0},
    {290e-2, 700e8, 120.67e-2, 344.7},    {290e-2, 706.33e8, 121.33e-2, 346.0},
    {290e-2, 712.67e8, 122e-2, 342.0},    {290e-2, 719e8, 120e-2, 343.3},
    {310e-2, 700e8, 121.33e-2, 342.0},    {310e-2, 706.33e8, 122e-2, 343.3},
    {310e-2, 712.67e8, 120e-2, 344.7},    {310e-2, 719e8, 120.67e-2, 346.0},
    {320e-2, 700e8, 122e-2, 344.7},       {320e-2, 706.33e8, 120e-2, 346.0},
    {320e-2, 712.67e8, 120.67e-2, 342.0}, {320e-2, 719e8, 121.33e-2, 343.3}};

inline const std::vector<std::array<double, 4>> kD25 = {
    {280e-2, 700e8, 120e-2, 342.0},      {280e-2, 704.75e8, 120.5e-2, 343.0},
    {280e-2, 709.5e8, 121e-2, 344.0},    {280e-2, 714.25e8, 121.5e-2, 345.0},
    {280e-2, 719e8, 122e-2, 346.0},      {290e-2, 700e8, 120.5e-2, 344.0},
    {290e-2, 704.75e8, 121e-2, 345.0},   {290e-2, 709.5e8, 121.5e-2, 346.0},
    {290e-2, 714.25e8, 122e-2, 342.0},   {290e-2, 719e8, 120e-2, 343.0},
    {300e-2, 700e8, 121e-2, 346.0},      {300e-2, 704.75e8, 121.5e-2, 342.0},
    {300e-2, 709.5e8, 122e-2, 343.0},    {300e-2, 714.25e8, 120e-2, 344.0},
    {300e-2, 719e8, 120.5e-2, 345.0},    {310e-2, 700e8, 121.5e-2, 343.0},
    {310e-2, 704.75e8, 122e-2, 344.0},   {310e-2, 709.5e8, 120e-2, 345.0},
    {310e-2, 714.25e8, 120.5e-2, 346.0}, {310e-2, 719e8, 121e-2, 342.0},
    {320e-2, 700e8, 122e-2, 345.0},      {320e-2, 704.75e8, 120e-2, 346.0},
    {320e-2, 709.5e8, 120.5e-2, 342.0},  {320e-2, 714.25e8, 121e-2, 343.0},
    {320e-2, 719e8, 121.5e-2, 344.0}};

inline bool balanced(const DesignMatrix& d) {
  for (int c = 0; c < d.factors(); ++c) {
    std::map<int, int> count;
    for (int j = 0; j < d.runs(); ++j) ++count[d.levels(j, c)];
    if (static_cast<int>(count.size()) != d.q) return false;
    for (auto [lvl, n] : count)
      if (n != d.runs() / d.q) return false;
  }
  return true;
}

inline bool pair_orthogonal(const DesignMatrix& d, int a, int b) {
  std::map<std::pair<int, int>, int> count;
  for (int j = 0; j < d.runs(); ++j) ++count[{d.levels(j, a), d.levels(j, b)}];
  if (static_cast<int>(count.size()) != d.q * d.q) return false;
  for (auto [k, n] : count)
    if (n != d.runs() / (d.q * d.q)) return false;
  return true;
}

inline std::set<std::pair<int, int>> non_orthogonal_pairs(const DesignMatrix& d) {
  std::set<std::pair<int, int>> out;
  for (int a = 0; a < d.factors(); ++a)
    for (int b = a + 1; b < d.factors(); ++b)
      if (!pair_orthogonal(d, a, b)) out.insert({a + 1, b + 1});
  return out;
}

}  // namespace plate
