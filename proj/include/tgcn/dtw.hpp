#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "tgcn/dense_array.hpp"
#include "tgcn/speed_data.hpp"

namespace tgcn {

inline constexpr int kNoBand = -1;

// Monotone alignment between two series; index pairs are 1-based, from
// (1,1) to (n_x,n_y), with unit-bounded steps.
struct WarpingPath {
  std::vector<std::pair<int, int>> steps;
};

struct DtwResult {
  double distance = 0.0;
  WarpingPath path;
};

// Dynamic-time-warping distance with |x_i - y_j| point costs and the
// standard three-way recurrence. Backtracking tie-break prefers the
// diagonal, then the vertical (i-1,j), then the horizontal step, so paths
// are deterministic. `band` is an optional Sakoe-Chiba half-width; it must
// be at least |n_x - n_y| for a feasible path.
DtwResult dtw_distance(std::span<const double> x, std::span<const double> y,
                       int band = kNoBand);

// Symmetric n x n DTW distances with zero diagonal.
struct DistanceMatrix {
  std::int64_t n = 0;
  std::vector<double> values;  // row-major n*n

  double at(std::int64_t i, std::int64_t j) const { return values[static_cast<std::size_t>(i * n + j)]; }
  double& at(std::int64_t i, std::int64_t j) { return values[static_cast<std::size_t>(i * n + j)]; }
};

// Per-road mean daily profile, n x steps_per_day. A trailing partial day is
// dropped with a warning; fewer than one complete day is an error.
DenseArray mean_daily_profile(const SpeedMatrix& s);

// All unordered pairs distributed over OpenMP workers; each pair is computed
// once and written to both triangle slots, so output is identical for every
// worker count. A serial twin lives in tgcn::ref for tests and benchmarks.
DistanceMatrix all_pairs_dtw(const DenseArray& profiles, int band = kNoBand);

}  // namespace tgcn
