#include "tgcn/speed_data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tgcn/errors.hpp"
#include "tgcn/log.hpp"

namespace tgcn {

namespace {

// Parses one CSV line of doubles; throws DataError naming the 1-based line.
void parse_row(const std::string& line, std::int64_t line_no,
               std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (true) {
    std::size_t comma = line.find(',', pos);
    std::string cell = line.substr(
        pos, comma == std::string::npos ? std::string::npos : comma - pos);
    // trim surrounding whitespace
    std::size_t b = cell.find_first_not_of(" \t\r");
    std::size_t e = cell.find_last_not_of(" \t\r");
    if (b == std::string::npos) {
      throw DataError("parse error at line " + std::to_string(line_no) +
                      ": empty cell");
    }
    cell = cell.substr(b, e - b + 1);
    try {
      std::size_t used = 0;
      double v = std::stod(cell, &used);
      if (used != cell.size()) throw std::invalid_argument(cell);
      if (!std::isfinite(v)) throw std::invalid_argument(cell);
      out.push_back(v);
    } catch (const std::exception&) {
      throw DataError("parse error at line " + std::to_string(line_no) +
                      ": non-numeric cell '" + cell + "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
}

}  // namespace

SpeedMatrix load_speed_csv(const std::string& path, int steps_per_day,
                           bool skip_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open speed file: " + path);
  if (steps_per_day < 1) throw ConfigError("steps_per_day must be positive");

  SpeedMatrix m;
  m.steps_per_day = steps_per_day;

  std::string line;
  std::int64_t line_no = 0;
  std::vector<double> row;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && skip_header) continue;
    if (line.empty() || line == "\r") continue;
    parse_row(line, line_no, row);
    if (m.cols == 0) {
      m.cols = static_cast<std::int64_t>(row.size());
    } else if (static_cast<std::int64_t>(row.size()) != m.cols) {
      throw DataError("ragged row at line " + std::to_string(line_no) +
                      ": expected " + std::to_string(m.cols) + " fields, got " +
                      std::to_string(row.size()));
    }
    m.values.insert(m.values.end(), row.begin(), row.end());
    ++m.rows;
  }
  if (m.rows == 0) throw DataError("empty speed file: " + path);
  if (m.rows < steps_per_day) {
    throw DataError("speed file has " + std::to_string(m.rows) +
                    " rows, fewer than one day (" +
                    std::to_string(steps_per_day) + " steps)");
  }
  info("loaded " + path + ": T=" + std::to_string(m.rows) +
       " n=" + std::to_string(m.cols));
  return m;
}

SplitResult chronological_split(const SpeedMatrix& s, double train_frac,
                                double val_frac,
                                std::int64_t min_segment_rows) {
  if (!(train_frac > 0.0 && train_frac < 1.0) ||
      !(val_frac > 0.0 && val_frac < 1.0) || train_frac + val_frac >= 1.0) {
    throw ConfigError("split fractions must lie in (0,1) with train+val < 1");
  }
  const std::int64_t n_train = static_cast<std::int64_t>(std::floor(static_cast<double>(s.rows) * train_frac));
  const std::int64_t n_val = static_cast<std::int64_t>(std::floor(static_cast<double>(s.rows) * val_frac));
  const std::int64_t n_test = s.rows - n_train - n_val;
  if (min_segment_rows > 0 &&
      (n_train < min_segment_rows || n_val < min_segment_rows ||
       n_test < min_segment_rows)) {
    throw DataError("split segment shorter than required " +
                    std::to_string(min_segment_rows) + " rows (train=" +
                    std::to_string(n_train) + " val=" + std::to_string(n_val) +
                    " test=" + std::to_string(n_test) + ")");
  }

  auto slice = [&](std::int64_t begin, std::int64_t count) {
    SpeedMatrix out;
    out.rows = count;
    out.cols = s.cols;
    out.steps_per_day = s.steps_per_day;
    out.values.assign(s.values.begin() + begin * s.cols,
                      s.values.begin() + (begin + count) * s.cols);
    return out;
  };

  SplitResult r;
  r.train = slice(0, n_train);
  r.val = slice(n_train, n_val);
  r.test = slice(n_train + n_val, n_test);
  r.val_offset = n_train;
  r.test_offset = n_train + n_val;
  return r;
}

NormStats fit_zscore(const SpeedMatrix& train, bool per_road) {
  if (train.rows == 0 || train.cols == 0) throw DataError("empty training matrix");
  constexpr double kMinStd = 1e-8;
  NormStats stats;
  const std::int64_t groups = per_road ? train.cols : 1;
  stats.mean.assign(static_cast<std::size_t>(groups), 0.0);
  stats.stdev.assign(static_cast<std::size_t>(groups), 0.0);

  for (std::int64_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::int64_t r = 0; r < train.rows; ++r) {
      if (per_road) {
        sum += train.at(r, g);
        ++count;
      } else {
        for (std::int64_t c = 0; c < train.cols; ++c) sum += train.at(r, c);
        count += train.cols;
      }
    }
    const double mean = sum / static_cast<double>(count);
    double varsum = 0.0;
    for (std::int64_t r = 0; r < train.rows; ++r) {
      if (per_road) {
        const double d = train.at(r, g) - mean;
        varsum += d * d;
      } else {
        for (std::int64_t c = 0; c < train.cols; ++c) {
          const double d = train.at(r, c) - mean;
          varsum += d * d;
        }
      }
    }
    double sd = std::sqrt(varsum / static_cast<double>(count));
    if (sd < kMinStd) {
      warn("constant training data: std clamped to 1e-8");
      sd = kMinStd;
    }
    stats.mean[static_cast<std::size_t>(g)] = mean;
    stats.stdev[static_cast<std::size_t>(g)] = sd;
  }
  return stats;
}

SpeedMatrix apply_zscore(const SpeedMatrix& s, const NormStats& stats) {
  SpeedMatrix out = s;
  for (std::int64_t r = 0; r < s.rows; ++r) {
    for (std::int64_t c = 0; c < s.cols; ++c) {
      out.at(r, c) = (s.at(r, c) - stats.mean_for(c)) / stats.std_for(c);
    }
  }
  return out;
}

SpeedMatrix invert_zscore(const SpeedMatrix& s, const NormStats& stats) {
  SpeedMatrix out = s;
  for (std::int64_t r = 0; r < s.rows; ++r) {
    for (std::int64_t c = 0; c < s.cols; ++c) {
      out.at(r, c) = s.at(r, c) * stats.std_for(c) + stats.mean_for(c);
    }
  }
  return out;
}

DenseArray invert_zscore(const DenseArray& pred, const NormStats& stats) {
  DenseArray out = pred;
  const std::int64_t n = pred.dim(pred.ndim() - 1);
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const std::int64_t road = i % n;
    out[i] = pred[i] * stats.std_for(road) + stats.mean_for(road);
  }
  return out;
}

WindowSet make_windows(const SpeedMatrix& s, int M, int H) {
  if (M < 1 || H < 1) throw ConfigError("window sizes require M >= 1 and H >= 1");
  if (s.rows < M + H) {
    throw DataError("segment of " + std::to_string(s.rows) +
                    " rows cannot host a window of M+H=" +
                    std::to_string(M + H) + " steps");
  }
  const std::int64_t B = s.rows - M - H + 1;
  const std::int64_t n = s.cols;

  WindowSet w;
  w.M = M;
  w.H = H;
  w.inputs = DenseArray({B, M, n});
  w.targets_direct = DenseArray({B, n});
  w.targets_seq = DenseArray({B, H, n});

  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t t = 0; t < M; ++t) {
      for (std::int64_t i = 0; i < n; ++i) {
        w.inputs.at3(b, t, i) = s.at(b + t, i);
      }
    }
    for (std::int64_t h = 0; h < H; ++h) {
      for (std::int64_t i = 0; i < n; ++i) {
        w.targets_seq.at3(b, h, i) = s.at(b + M + h, i);
      }
    }
    for (std::int64_t i = 0; i < n; ++i) {
      w.targets_direct.at2(b, i) = s.at(b + M + H - 1, i);
    }
  }
  return w;
}

}  // namespace tgcn
