#pragma once

#include "crossfit/oracle.hpp"
#include "crossfit/sim.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace crossfit::testing {

inline std::vector<Design> tiny_designs() {
  std::vector<Design> out;
  for (int g : {2, 3})
    for (int h : {2, 3})
      for (int m : {2, 3}) out.emplace_back(g, h, m);
  return out;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

// Raw table for a full grid with 1-based indices.
inline RawTable full_table(int g, int h, int m) {
  RawTable t;
  for (int i = 1; i <= g; ++i)
    for (int j = 1; j <= h; ++j)
      for (int k = 1; k <= m; ++k) {
        t.i.push_back(i);
        t.j.push_back(j);
        t.k.push_back(k);
        t.y.push_back(i + 10.0 * j + 100.0 * k);
      }
  return t;
}

inline double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) med = 0.5 * (med + *std::max_element(v.begin(), mid));
  return med;
}

}  // namespace crossfit::testing
