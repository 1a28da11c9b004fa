#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tgcn/dense_array.hpp"
#include "tgcn/model.hpp"
#include "tgcn/speed_data.hpp"

namespace tgcn {

// MAE/MAPE/RMSE in original speed units, micro-averaged over all samples
// and roads. MAPE skips targets with |value| <= 1e-6 and reports how many
// entries were masked; when everything is masked it stays unset.
struct MetricReport {
  double mae = 0.0;
  std::optional<double> mape;  // percent
  double rmse = 0.0;
  int horizon_minutes = 0;
  std::int64_t n_samples = 0;
  std::int64_t mape_masked = 0;
  std::string mode = "direct";

  std::string table() const;     // aligned human-readable block
  std::string csv_line() const;  // one-line CSV (with header line)
};

MetricReport compute_metrics(const DenseArray& pred, const DenseArray& truth,
                             int horizon_minutes = 0);

// Seasonal baseline: each time-of-day slot is predicted by its uniform mean
// over the training rows. Returns one prediction row per test window, for
// the same targets a model evaluated with (M, H) sees. `test_offset` is the
// test segment's first global row index (the training segment starts at 0).
DenseArray historical_average(const SpeedMatrix& train, const SpeedMatrix& test,
                              std::int64_t test_offset, int M, int H);

enum class PredictMode { direct, recursive };

// Runs the model over the (normalized) test windows, denormalizes, and
// scores against the denormalized targets. Direct mode needs a model trained
// for the window horizon; recursive mode needs an H=1 model, rolled forward
// test.H steps and scored at the final step.
MetricReport evaluate(Model& model, const WindowSet& test,
                      const NormStats& stats, PredictMode mode,
                      int minutes_per_step = 5);

}  // namespace tgcn
