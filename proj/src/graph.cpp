#include "tgcn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "tgcn/errors.hpp"
#include "tgcn/log.hpp"
#include "tgcn/rng.hpp"

namespace tgcn {

std::vector<double> Adjacency::dense() const {
  std::vector<double> w(static_cast<std::size_t>(n * n), 0.0);
  for (const auto& e : edges) {
    w[static_cast<std::size_t>(e.i * n + e.j)] = e.w;
    w[static_cast<std::size_t>(e.j * n + e.i)] = e.w;
  }
  return w;
}

void CsrMatrix::apply(const double* x, double* y) const {
  for (std::int64_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (std::int64_t p = row_ptr[static_cast<std::size_t>(r)]; p < row_ptr[static_cast<std::size_t>(r + 1)]; ++p) {
      sum += val[static_cast<std::size_t>(p)] * x[col[static_cast<std::size_t>(p)]];
    }
    y[r] = sum;
  }
}

void CsrMatrix::apply_block(const double* x, double* y, std::int64_t cols) const {
  for (std::int64_t r = 0; r < n; ++r) {
    double* yr = y + r * cols;
    std::memset(yr, 0, static_cast<std::size_t>(cols) * sizeof(double));
    for (std::int64_t p = row_ptr[static_cast<std::size_t>(r)]; p < row_ptr[static_cast<std::size_t>(r + 1)]; ++p) {
      const double v = val[static_cast<std::size_t>(p)];
      const double* xc = x + col[static_cast<std::size_t>(p)] * cols;
      for (std::int64_t c = 0; c < cols; ++c) yr[c] += v * xc[c];
    }
  }
}

std::vector<double> CsrMatrix::dense() const {
  std::vector<double> out(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t p = row_ptr[static_cast<std::size_t>(r)]; p < row_ptr[static_cast<std::size_t>(r + 1)]; ++p) {
      out[static_cast<std::size_t>(r * n + col[static_cast<std::size_t>(p)])] = val[static_cast<std::size_t>(p)];
    }
  }
  return out;
}

Adjacency temporal_adjacency(const DistanceMatrix& d, double sparsity) {
  const std::int64_t n = d.n;
  if (n < 2) throw DataError("temporal_adjacency: need n >= 2");
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw ConfigError("temporal_adjacency: sparsity must lie in (0,1)");
  }
  const std::int64_t k = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(sparsity * static_cast<double>(n - 1))));

  // Directed top-k pass, then symmetrize with OR.
  std::vector<char> linked(static_cast<std::size_t>(n * n), 0);
  std::vector<std::int64_t> order(static_cast<std::size_t>(n - 1));
  bool tie_warned = false;
  for (std::int64_t i = 0; i < n; ++i) {
    std::int64_t m = 0;
    for (std::int64_t j = 0; j < n; ++j) {
      if (j != i) order[static_cast<std::size_t>(m++)] = j;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::int64_t a, std::int64_t b) {
                       if (d.at(i, a) != d.at(i, b)) return d.at(i, a) < d.at(i, b);
                       return a < b;
                     });
    if (!tie_warned && k < n - 1 &&
        d.at(i, order[static_cast<std::size_t>(k - 1)]) == d.at(i, order[static_cast<std::size_t>(k)])) {
      warn("temporal_adjacency: tied distances at the top-k boundary; "
           "breaking ties by ascending road index");
      tie_warned = true;
    }
    for (std::int64_t s = 0; s < k; ++s) {
      linked[static_cast<std::size_t>(i * n + order[static_cast<std::size_t>(s)])] = 1;
    }
  }

  Adjacency w;
  w.n = n;
  w.kind = GraphKind::temporal;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (linked[static_cast<std::size_t>(i * n + j)] || linked[static_cast<std::size_t>(j * n + i)]) {
        w.edges.push_back({i, j, 1.0});
      }
    }
  }
  return w;
}

Adjacency spatial_adjacency(const DenseArray& dist, double sigma2,
                            double epsilon) {
  if (dist.ndim() != 2 || dist.dim(0) != dist.dim(1)) {
    throw DataError("spatial_adjacency: distance matrix must be square");
  }
  if (!(sigma2 > 0.0)) throw ConfigError("spatial_adjacency: sigma2 must be > 0");
  if (epsilon < 0.0) throw ConfigError("spatial_adjacency: epsilon must be >= 0");
  const std::int64_t n = dist.dim(0);
  for (std::int64_t i = 0; i < n; ++i) {
    if (dist.at2(i, i) != 0.0) {
      throw DataError("spatial_adjacency: nonzero diagonal at row " + std::to_string(i));
    }
    for (std::int64_t j = i + 1; j < n; ++j) {
      if (dist.at2(i, j) != dist.at2(j, i)) {
        throw DataError("spatial_adjacency: asymmetric distances at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
      if (dist.at2(i, j) < 0.0) {
        throw DataError("spatial_adjacency: negative distance at (" +
                        std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  Adjacency w;
  w.n = n;
  w.kind = GraphKind::spatial;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double g = std::exp(-dist.at2(i, j) * dist.at2(i, j) / sigma2);
      if (g >= epsilon && g > 0.0) w.edges.push_back({i, j, g});
    }
  }
  return w;
}

namespace {

// Power iteration for the dominant eigenvalue of the normalized Laplacian.
double power_iteration_lambda_max(const CsrMatrix& lap) {
  const std::int64_t n = lap.n;
  RngStream rng(0x7067635f6c6d6178ULL, "power_iteration");
  std::vector<double> v(static_cast<std::size_t>(n));
  double vnorm = 0.0;
  for (auto& x : v) {
    x = rng.uniform(0.5, 1.5);
    vnorm += x * x;
  }
  vnorm = std::sqrt(vnorm);
  for (auto& x : v) x /= vnorm;
  std::vector<double> y(static_cast<std::size_t>(n));

  constexpr double kRelTol = 1e-6;
  constexpr int kMaxIter = 1000;
  for (int it = 0; it < kMaxIter; ++it) {
    lap.apply(v.data(), y.data());
    double norm = 0.0;
    double rayleigh = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      norm += y[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
      rayleigh += v[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(i)];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) break;  // start vector fell into the null space
    // Residual bound: some eigenvalue lies within ||Lv - rho v|| of the
    // Rayleigh quotient, and rho never exceeds lambda_max, so stopping on
    // the residual guarantees the stated relative accuracy.
    double residual = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      const double r = y[static_cast<std::size_t>(i)] - rayleigh * v[static_cast<std::size_t>(i)];
      residual += r * r;
    }
    residual = std::sqrt(residual);
    for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(i)] / norm;
    if (it > 0 && residual <= kRelTol * std::fabs(rayleigh)) {
      // rho + residual sits at or past lambda_max once the iterate is
      // dominated by the top eigenvector, keeping the rescaled spectrum
      // inside [-1, 1]; the theoretical bound 2 caps the overshoot.
      return std::min(2.0, rayleigh + residual);
    }
  }
  warn("scaled_laplacian: power iteration did not converge; using lambda_max = 2");
  return 2.0;
}

}  // namespace

ScaledLaplacian scaled_laplacian(const Adjacency& w) {
  const std::int64_t n = w.n;
  if (n < 1) throw DataError("scaled_laplacian: empty adjacency");
  for (const auto& e : w.edges) {
    if (e.w < 0.0) throw DataError("scaled_laplacian: negative weight");
    if (e.i == e.j) throw DataError("scaled_laplacian: self loop");
  }

  std::vector<double> degree(static_cast<std::size_t>(n), 0.0);
  for (const auto& e : w.edges) {
    degree[static_cast<std::size_t>(e.i)] += e.w;
    degree[static_cast<std::size_t>(e.j)] += e.w;
  }
  // Isolated nodes: treat D_ii as 1 so the normalization stays defined.
  std::vector<double> dinv_sqrt(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double d = degree[static_cast<std::size_t>(i)] > 0.0 ? degree[static_cast<std::size_t>(i)] : 1.0;
    dinv_sqrt[static_cast<std::size_t>(i)] = 1.0 / std::sqrt(d);
  }

  // L = I - D^{-1/2} W D^{-1/2}, assembled straight into CSR.
  std::vector<std::vector<std::pair<std::int64_t, double>>> rows(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)].emplace_back(i, 1.0);
  for (const auto& e : w.edges) {
    const double off = -dinv_sqrt[static_cast<std::size_t>(e.i)] * e.w * dinv_sqrt[static_cast<std::size_t>(e.j)];
    rows[static_cast<std::size_t>(e.i)].emplace_back(e.j, off);
    rows[static_cast<std::size_t>(e.j)].emplace_back(e.i, off);
  }

  CsrMatrix lap;
  lap.n = n;
  lap.row_ptr.assign(static_cast<std::size_t>(n + 1), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    auto& row = rows[static_cast<std::size_t>(i)];
    std::sort(row.begin(), row.end());
    lap.row_ptr[static_cast<std::size_t>(i + 1)] = lap.row_ptr[static_cast<std::size_t>(i)] + static_cast<std::int64_t>(row.size());
    for (const auto& [c, v] : row) {
      lap.col.push_back(c);
      lap.val.push_back(v);
    }
  }

  const double lambda_max = power_iteration_lambda_max(lap);

  // L~ = 2 L / lambda_max - I
  ScaledLaplacian lt;
  lt.lambda_max = lambda_max;
  lt.matrix = lap;
  const double scale = 2.0 / lambda_max;
  for (std::size_t p = 0; p < lt.matrix.val.size(); ++p) lt.matrix.val[p] *= scale;
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t p = lt.matrix.row_ptr[static_cast<std::size_t>(i)]; p < lt.matrix.row_ptr[static_cast<std::size_t>(i + 1)]; ++p) {
      if (lt.matrix.col[static_cast<std::size_t>(p)] == i) lt.matrix.val[static_cast<std::size_t>(p)] -= 1.0;
    }
  }
  return lt;
}

void cheb_apply_into(const ScaledLaplacian& lt, const double* x,
                     std::int64_t n, std::int64_t cols, int K, ChebBasis basis,
                     double* out) {
  const std::int64_t slice = n * cols;
  // P_0 = X
  std::memcpy(out, x, static_cast<std::size_t>(slice) * sizeof(double));
  if (K == 1) return;
  // P_1 = L~ X
  lt.matrix.apply_block(x, out + slice, cols);
  double* prev2 = out;          // P_{k-2}
  double* prev1 = out + slice;  // P_{k-1}
  for (int k = 2; k < K; ++k) {
    double* cur = out + static_cast<std::int64_t>(k) * slice;
    lt.matrix.apply_block(prev1, cur, cols);
    if (basis == ChebBasis::chebyshev) {
      // T_k = 2 L~ T_{k-1} - T_{k-2}
      for (std::int64_t i = 0; i < slice; ++i) cur[i] = 2.0 * cur[i] - prev2[i];
    }
    prev2 = prev1;
    prev1 = cur;
  }
}

DenseArray cheb_apply(const ScaledLaplacian& lt, const DenseArray& x, int K,
                      ChebBasis basis) {
  if (K < 1) throw ConfigError("cheb_apply: K must be >= 1");
  if (x.ndim() != 2 || x.dim(0) != lt.n()) {
    throw DataError("cheb_apply: X must be n x C with n = " + std::to_string(lt.n()));
  }
  const std::int64_t n = x.dim(0);
  const std::int64_t c = x.dim(1);
  DenseArray out({K, n, c});
  cheb_apply_into(lt, x.data(), n, c, K, basis, out.data());
  return out;
}

}  // namespace tgcn
