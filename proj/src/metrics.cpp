#include "tgcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "tgcn/errors.hpp"

namespace tgcn {

std::string MetricReport::table() const {
  char mape_buf[32];
  if (mape) {
    std::snprintf(mape_buf, sizeof(mape_buf), "%-8.4f", *mape);
  } else {
    std::snprintf(mape_buf, sizeof(mape_buf), "%-8s", "n/a");
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "mode      horizon  samples  MAE      MAPE(%%)  RMSE\n"
                "%-9s %4d min %8lld  %-8.4f %s %-8.4f",
                mode.c_str(), horizon_minutes,
                static_cast<long long>(n_samples), mae, mape_buf, rmse);
  return buf;
}

std::string MetricReport::csv_line() const {
  char mape_buf[40];
  if (mape) {
    std::snprintf(mape_buf, sizeof(mape_buf), "%.17g", *mape);
  } else {
    std::snprintf(mape_buf, sizeof(mape_buf), "nan");
  }
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%d,%lld,%.17g,%s,%.17g,%lld",
                mode.c_str(), horizon_minutes,
                static_cast<long long>(n_samples), mae, mape_buf, rmse,
                static_cast<long long>(mape_masked));
  return std::string("mode,horizon_minutes,n_samples,mae,mape,rmse,mape_masked\n") + buf;
}

MetricReport compute_metrics(const DenseArray& pred, const DenseArray& truth,
                             int horizon_minutes) {
  if (!pred.same_shape(truth)) {
    throw DataError("compute_metrics: shape mismatch " + pred.shape_str() +
                    " vs " + truth.shape_str());
  }
  MetricReport r;
  r.horizon_minutes = horizon_minutes;
  r.n_samples = pred.dim(0);

  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double pct_sum = 0.0;
  std::int64_t pct_count = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - truth[i];
    abs_sum += std::fabs(e);
    sq_sum += e * e;
    if (std::fabs(truth[i]) > 1e-6) {
      pct_sum += std::fabs(e) / std::fabs(truth[i]);
      ++pct_count;
    } else {
      ++r.mape_masked;
    }
  }
  const double count = static_cast<double>(pred.size());
  r.mae = abs_sum / count;
  r.rmse = std::sqrt(sq_sum / count);
  if (pct_count > 0) {
    r.mape = 100.0 * pct_sum / static_cast<double>(pct_count);
  }
  return r;
}

DenseArray historical_average(const SpeedMatrix& train, const SpeedMatrix& test,
                              std::int64_t test_offset, int M, int H) {
  const std::int64_t spd = train.steps_per_day;
  if (train.rows < spd) {
    throw DataError("historical_average: training segment shorter than one day");
  }
  if (test.rows < M + H) {
    throw DataError("historical_average: test segment cannot host a window");
  }
  const std::int64_t n = train.cols;

  // Uniform mean per (time-of-day, road) over all training rows.
  DenseArray slot_mean({spd, n});
  std::vector<std::int64_t> slot_count(static_cast<std::size_t>(spd), 0);
  for (std::int64_t r = 0; r < train.rows; ++r) {
    const std::int64_t s = r % spd;
    ++slot_count[static_cast<std::size_t>(s)];
    for (std::int64_t i = 0; i < n; ++i) slot_mean.at2(s, i) += train.at(r, i);
  }
  for (std::int64_t s = 0; s < spd; ++s) {
    if (slot_count[static_cast<std::size_t>(s)] == 0) {
      throw DataError("historical_average: empty time-of-day slot");
    }
    for (std::int64_t i = 0; i < n; ++i) {
      slot_mean.at2(s, i) /= static_cast<double>(slot_count[static_cast<std::size_t>(s)]);
    }
  }

  const std::int64_t windows = test.rows - M - H + 1;
  DenseArray pred({windows, n});
  for (std::int64_t b = 0; b < windows; ++b) {
    const std::int64_t target_slot = (test_offset + b + M + H - 1) % spd;
    for (std::int64_t i = 0; i < n; ++i) {
      pred.at2(b, i) = slot_mean.at2(target_slot, i);
    }
  }
  return pred;
}

MetricReport evaluate(Model& model, const WindowSet& test,
                      const NormStats& stats, PredictMode mode,
                      int minutes_per_step) {
  if (test.count() == 0) throw DataError("evaluate: empty window set");
  if (mode == PredictMode::direct && model.config().H != test.H) {
    throw ConfigError("evaluate: direct mode needs a model trained for H=" +
                      std::to_string(test.H) + ", checkpoint has H=" +
                      std::to_string(model.config().H));
  }
  if (mode == PredictMode::recursive && model.config().H != 1) {
    throw ConfigError("evaluate: recursive mode needs an H=1 model, checkpoint has H=" +
                      std::to_string(model.config().H));
  }

  const std::int64_t total = test.count();
  const std::int64_t n = test.n_roads();
  constexpr int kChunk = 50;
  DenseArray pred({total, n});
  for (std::int64_t b0 = 0; b0 < total; b0 += kChunk) {
    const std::int64_t b1 = std::min<std::int64_t>(b0 + kChunk, total);
    DenseArray chunk({b1 - b0, test.inputs.dim(1), n});
    std::memcpy(chunk.data(), test.inputs.data() + b0 * test.inputs.dim(1) * n,
                static_cast<std::size_t>(chunk.size()) * sizeof(double));
    DenseArray out;
    if (mode == PredictMode::direct) {
      out = predict_direct(model, chunk);
    } else {
      DenseArray roll = predict_recursive(model, chunk, test.H);  // B x H x n
      out = DenseArray({b1 - b0, n});
      for (std::int64_t b = 0; b < b1 - b0; ++b) {
        for (std::int64_t i = 0; i < n; ++i) {
          out.at2(b, i) = roll.at3(b, test.H - 1, i);
        }
      }
    }
    std::memcpy(pred.data() + b0 * n, out.data(),
                static_cast<std::size_t>(out.size()) * sizeof(double));
  }

  MetricReport r = compute_metrics(invert_zscore(pred, stats),
                                   invert_zscore(test.targets_direct, stats),
                                   test.H * minutes_per_step);
  r.mode = mode == PredictMode::direct ? "direct" : "recursive";
  return r;
}

}  // namespace tgcn
