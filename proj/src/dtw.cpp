#include "tgcn/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tgcn/errors.hpp"
#include "tgcn/log.hpp"

namespace tgcn {

DtwResult dtw_distance(std::span<const double> x, std::span<const double> y,
                       int band) {
  const std::int64_t nx = static_cast<std::int64_t>(x.size());
  const std::int64_t ny = static_cast<std::int64_t>(y.size());
  if (nx == 0 || ny == 0) throw DataError("dtw_distance: empty series");
  if (band != kNoBand && band < std::llabs(nx - ny)) {
    throw DataError("dtw_distance: band " + std::to_string(band) +
                    " < length difference " + std::to_string(std::llabs(nx - ny)) +
                    ", no feasible path");
  }

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto in_band = [&](std::int64_t i, std::int64_t j) {
    return band == kNoBand || std::llabs(i - j) <= band;
  };

  // Accumulated cost, 0-based storage of the 1-based recurrence.
  std::vector<double> acc(static_cast<std::size_t>(nx * ny), kInf);
  const auto a = [&](std::int64_t i, std::int64_t j) -> double& {
    return acc[static_cast<std::size_t>(i * ny + j)];
  };

  for (std::int64_t i = 0; i < nx; ++i) {
    for (std::int64_t j = 0; j < ny; ++j) {
      if (!in_band(i, j)) continue;
      const double cost = std::fabs(x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)]);
      if (i == 0 && j == 0) {
        a(i, j) = cost;
        continue;
      }
      const double diag = (i > 0 && j > 0) ? a(i - 1, j - 1) : kInf;
      const double vert = (i > 0) ? a(i - 1, j) : kInf;
      const double horz = (j > 0) ? a(i, j - 1) : kInf;
      a(i, j) = cost + std::min(diag, std::min(vert, horz));
    }
  }

  DtwResult r;
  r.distance = a(nx - 1, ny - 1);

  // Backtrack; ties prefer diagonal, then vertical, then horizontal.
  std::int64_t i = nx - 1;
  std::int64_t j = ny - 1;
  std::vector<std::pair<int, int>> rev;
  rev.emplace_back(static_cast<int>(i + 1), static_cast<int>(j + 1));
  while (i > 0 || j > 0) {
    const double diag = (i > 0 && j > 0) ? a(i - 1, j - 1) : kInf;
    const double vert = (i > 0) ? a(i - 1, j) : kInf;
    const double horz = (j > 0) ? a(i, j - 1) : kInf;
    const double best = std::min(diag, std::min(vert, horz));
    if (diag == best) {
      --i;
      --j;
    } else if (vert == best) {
      --i;
    } else {
      --j;
    }
    rev.emplace_back(static_cast<int>(i + 1), static_cast<int>(j + 1));
  }
  r.path.steps.assign(rev.rbegin(), rev.rend());
  return r;
}

DenseArray mean_daily_profile(const SpeedMatrix& s) {
  const std::int64_t spd = s.steps_per_day;
  const std::int64_t days = s.rows / spd;
  if (days < 1) {
    throw DataError("mean_daily_profile: fewer than one complete day (" +
                    std::to_string(s.rows) + " rows, " + std::to_string(spd) +
                    " steps per day)");
  }
  if (s.rows % spd != 0) {
    warn("mean_daily_profile: dropping trailing partial day (" +
         std::to_string(s.rows % spd) + " rows)");
  }

  DenseArray profile({s.cols, spd});
  for (std::int64_t road = 0; road < s.cols; ++road) {
    for (std::int64_t step = 0; step < spd; ++step) {
      double sum = 0.0;
      for (std::int64_t d = 0; d < days; ++d) {
        sum += s.at(d * spd + step, road);
      }
      profile.at2(road, step) = sum / static_cast<double>(days);
    }
  }
  return profile;
}

DistanceMatrix all_pairs_dtw(const DenseArray& profiles, int band) {
  const std::int64_t n = profiles.dim(0);
  const std::int64_t len = profiles.dim(1);
  if (n < 2) throw DataError("all_pairs_dtw: need at least 2 profiles");

  DistanceMatrix d;
  d.n = n;
  d.values.assign(static_cast<std::size_t>(n * n), 0.0);

  // Flatten the strict upper triangle; every pair owned by one iteration.
  const std::int64_t n_pairs = n * (n - 1) / 2;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t p = 0; p < n_pairs; ++p) {
    // invert p -> (i, j), i < j
    std::int64_t i = 0;
    std::int64_t rem = p;
    while (rem >= n - 1 - i) {
      rem -= n - 1 - i;
      ++i;
    }
    const std::int64_t j = i + 1 + rem;
    const double* pi = profiles.data() + i * len;
    const double* pj = profiles.data() + j * len;
    const double dist =
        dtw_distance({pi, static_cast<std::size_t>(len)},
                     {pj, static_cast<std::size_t>(len)}, band)
            .distance;
    d.at(i, j) = dist;
    d.at(j, i) = dist;
  }
  return d;
}

}  // namespace tgcn
