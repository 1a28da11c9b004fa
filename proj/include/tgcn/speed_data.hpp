#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgcn/dense_array.hpp"

namespace tgcn {

// T x n grid of observed speeds: rows are time steps, columns are roads.
struct SpeedMatrix {
  std::int64_t rows = 0;   // T
  std::int64_t cols = 0;   // n_roads
  int steps_per_day = 288;
  std::vector<double> values;  // row-major

  double at(std::int64_t r, std::int64_t c) const { return values[static_cast<std::size_t>(r * cols + c)]; }
  double& at(std::int64_t r, std::int64_t c) { return values[static_cast<std::size_t>(r * cols + c)]; }
};

// Loads a comma-separated speed file (row = time step, column = road).
// Ragged rows and non-numeric cells are reported with their line number.
SpeedMatrix load_speed_csv(const std::string& path, int steps_per_day,
                           bool skip_header = false);

struct SplitResult {
  SpeedMatrix train, val, test;
  std::int64_t val_offset = 0;   // global row index where val starts
  std::int64_t test_offset = 0;  // global row index where test starts
};

// Chronological 3-way split; row counts are floor(T*frac) for train and val,
// remainder for test. If min_segment_rows > 0, every segment must have at
// least that many rows (callers pass M+H so each split can host a window).
SplitResult chronological_split(const SpeedMatrix& s, double train_frac,
                                double val_frac,
                                std::int64_t min_segment_rows = 0);

// Z-score statistics. Global normalization keeps one mean/std pair;
// per-road keeps one pair per column.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stdev;

  bool per_road() const { return mean.size() > 1; }
  double mean_for(std::int64_t road) const { return per_road() ? mean[static_cast<std::size_t>(road)] : mean[0]; }
  double std_for(std::int64_t road) const { return per_road() ? stdev[static_cast<std::size_t>(road)] : stdev[0]; }
};

// Fit on the training segment only. Degenerate (constant) input clamps the
// std to 1e-8 and warns.
NormStats fit_zscore(const SpeedMatrix& train, bool per_road = false);
SpeedMatrix apply_zscore(const SpeedMatrix& s, const NormStats& stats);
SpeedMatrix invert_zscore(const SpeedMatrix& s, const NormStats& stats);

// Denormalizes a B x n prediction array (columns are roads).
DenseArray invert_zscore(const DenseArray& pred, const NormStats& stats);

// Supervised samples cut from one contiguous segment.
struct WindowSet {
  DenseArray inputs;          // B x M x n
  DenseArray targets_direct;  // B x n       (value at t+H)
  DenseArray targets_seq;     // B x H x n   (values at t+1 .. t+H)
  int M = 0;
  int H = 0;

  std::int64_t count() const { return inputs.ndim() ? inputs.dim(0) : 0; }
  std::int64_t n_roads() const { return inputs.ndim() ? inputs.dim(2) : 0; }
};

// B = T - M - H + 1 windows; sample b reads rows [b, b+M) and targets
// rows [b+M, b+M+H). Never reads outside the segment.
WindowSet make_windows(const SpeedMatrix& s, int M, int H);

}  // namespace tgcn
