#include "tgcn/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tgcn/errors.hpp"

namespace tgcn::ref {

namespace {

double enumerate_paths(std::span<const double> x, std::span<const double> y,
                       std::size_t i, std::size_t j) {
  const double cost = std::fabs(x[i] - y[j]);
  if (i + 1 == x.size() && j + 1 == y.size()) return cost;
  double best = std::numeric_limits<double>::infinity();
  if (i + 1 < x.size() && j + 1 < y.size()) {
    best = std::min(best, enumerate_paths(x, y, i + 1, j + 1));
  }
  if (i + 1 < x.size()) best = std::min(best, enumerate_paths(x, y, i + 1, j));
  if (j + 1 < y.size()) best = std::min(best, enumerate_paths(x, y, i, j + 1));
  return cost + best;
}

}  // namespace

double dtw_oracle(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw DataError("dtw_oracle: empty series");
  if (x.size() + y.size() > 14) {
    throw DataError("dtw_oracle: series too long for exhaustive enumeration");
  }
  return enumerate_paths(x, y, 0, 0);
}

DistanceMatrix all_pairs_dtw_serial(const DenseArray& profiles, int band) {
  const std::int64_t n = profiles.dim(0);
  const std::int64_t len = profiles.dim(1);
  if (n < 2) throw DataError("all_pairs_dtw_serial: need at least 2 profiles");
  DistanceMatrix d;
  d.n = n;
  d.values.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double* pi = profiles.data() + i * len;
      const double* pj = profiles.data() + j * len;
      const double dist =
          dtw_distance({pi, static_cast<std::size_t>(len)},
                       {pj, static_cast<std::size_t>(len)}, band)
              .distance;
      d.at(i, j) = dist;
      d.at(j, i) = dist;
    }
  }
  return d;
}

void jacobi_eigh(const std::vector<double>& a_in, std::int64_t n,
                 std::vector<double>& w, std::vector<double>& v) {
  std::vector<double> a = a_in;
  v.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) v[static_cast<std::size_t>(i * n + i)] = 1.0;

  auto at = [&](std::vector<double>& m, std::int64_t r, std::int64_t c) -> double& {
    return m[static_cast<std::size_t>(r * n + c)];
  };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    }
    if (std::sqrt(off) < 1e-13) break;
    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (apq == 0.0) continue;
        const double app = at(a, p, p);
        const double aqq = at(a, q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::int64_t k = 0; k < n; ++k) {
          const double akp = at(a, k, p);
          const double akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double apk = at(a, p, k);
          const double aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (std::int64_t k = 0; k < n; ++k) {
          const double vkp = at(v, k, p);
          const double vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  // Sort eigenpairs ascending.
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](std::int64_t l, std::int64_t r) {
    return a[static_cast<std::size_t>(l * n + l)] < a[static_cast<std::size_t>(r * n + r)];
  });
  w.resize(static_cast<std::size_t>(n));
  std::vector<double> vs(static_cast<std::size_t>(n * n));
  for (std::int64_t c = 0; c < n; ++c) {
    const std::int64_t src = order[static_cast<std::size_t>(c)];
    w[static_cast<std::size_t>(c)] = a[static_cast<std::size_t>(src * n + src)];
    for (std::int64_t r = 0; r < n; ++r) {
      vs[static_cast<std::size_t>(r * n + c)] = v[static_cast<std::size_t>(r * n + src)];
    }
  }
  v = std::move(vs);
}

namespace {

std::vector<double> dense_normalized_laplacian(const Adjacency& w) {
  const std::int64_t n = w.n;
  std::vector<double> wd = w.dense();
  std::vector<double> deg(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) deg[static_cast<std::size_t>(i)] += wd[static_cast<std::size_t>(i * n + j)];
  }
  std::vector<double> lap(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double di = deg[static_cast<std::size_t>(i)] > 0.0 ? deg[static_cast<std::size_t>(i)] : 1.0;
    for (std::int64_t j = 0; j < n; ++j) {
      const double dj = deg[static_cast<std::size_t>(j)] > 0.0 ? deg[static_cast<std::size_t>(j)] : 1.0;
      lap[static_cast<std::size_t>(i * n + j)] =
          (i == j ? 1.0 : 0.0) - wd[static_cast<std::size_t>(i * n + j)] / std::sqrt(di * dj);
    }
  }
  return lap;
}

}  // namespace

std::vector<double> laplacian_spectrum(const Adjacency& w) {
  std::vector<double> eigenvalues, eigenvectors;
  jacobi_eigh(dense_normalized_laplacian(w), w.n, eigenvalues, eigenvectors);
  return eigenvalues;
}

double lambda_max_dense(const Adjacency& w) {
  const auto spectrum = laplacian_spectrum(w);
  return spectrum.back();
}

std::vector<double> spectral_filter_oracle(const Adjacency& w,
                                           std::span<const double> theta,
                                           std::span<const double> x,
                                           double lambda_max, ChebBasis basis) {
  const std::int64_t n = w.n;
  if (n > 64) throw DataError("spectral_filter_oracle: n must be <= 64");
  if (static_cast<std::int64_t>(x.size()) != n) {
    throw DataError("spectral_filter_oracle: signal length mismatch");
  }

  std::vector<double> eigenvalues, u;
  jacobi_eigh(dense_normalized_laplacian(w), n, eigenvalues, u);

  // Filter response per eigenvalue: sum_k theta_k P_k(lambda~).
  std::vector<double> response(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double lam = 2.0 * eigenvalues[static_cast<std::size_t>(i)] / lambda_max - 1.0;
    double pk_prev2 = 1.0;  // P_0
    double pk_prev1 = lam;  // P_1
    for (std::size_t k = 0; k < theta.size(); ++k) {
      double pk;
      if (k == 0) {
        pk = pk_prev2;
      } else if (k == 1) {
        pk = pk_prev1;
      } else {
        pk = basis == ChebBasis::chebyshev ? 2.0 * lam * pk_prev1 - pk_prev2
                                           : lam * pk_prev1;
        pk_prev2 = pk_prev1;
        pk_prev1 = pk;
      }
      response[static_cast<std::size_t>(i)] += theta[k] * pk;
    }
  }

  // U diag(response) U^T x
  std::vector<double> ut_x(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t r = 0; r < n; ++r) {
      ut_x[static_cast<std::size_t>(i)] += u[static_cast<std::size_t>(r * n + i)] * x[static_cast<std::size_t>(r)];
    }
  }
  for (std::int64_t i = 0; i < n; ++i) ut_x[static_cast<std::size_t>(i)] *= response[static_cast<std::size_t>(i)];
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t r = 0; r < n; ++r) {
    for (std::int64_t i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(r)] += u[static_cast<std::size_t>(r * n + i)] * ut_x[static_cast<std::size_t>(i)];
    }
  }
  return out;
}

DenseArray dense_cheb_stack(const ScaledLaplacian& lt, int K, ChebBasis basis) {
  const std::int64_t n = lt.n();
  DenseArray stack({K, n, n});
  std::vector<double> ldense = lt.matrix.dense();
  // P_0 = I
  for (std::int64_t i = 0; i < n; ++i) stack.at3(0, i, i) = 1.0;
  if (K == 1) return stack;
  // P_1 = L~
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < n; ++j) stack.at3(1, i, j) = ldense[static_cast<std::size_t>(i * n + j)];
  }
  for (int k = 2; k < K; ++k) {
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::int64_t m = 0; m < n; ++m) {
          acc += ldense[static_cast<std::size_t>(i * n + m)] * stack.at3(k - 1, m, j);
        }
        stack.at3(k, i, j) = basis == ChebBasis::chebyshev
                                 ? 2.0 * acc - stack.at3(k - 2, i, j)
                                 : acc;
      }
    }
  }
  return stack;
}

DenseArray gconv3d_preact_naive(const DenseArray& x, const ScaledLaplacian& lt,
                                const DenseArray& theta,
                                std::span<const double> bias, int kt, int korder,
                                ChebBasis basis) {
  const std::int64_t batch = x.dim(0);
  const std::int64_t t_in = x.dim(1);
  const std::int64_t n = x.dim(2);
  const std::int64_t c_in = x.dim(3);
  const std::int64_t c_raw = theta.dim(1);
  const std::int64_t t_out = t_in - kt + 1;

  const DenseArray poly = dense_cheb_stack(lt, korder, basis);

  DenseArray z({batch, t_out, n, c_raw});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < t_out; ++t) {
      for (std::int64_t vtx = 0; vtx < n; ++vtx) {
        for (std::int64_t c = 0; c < c_raw; ++c) {
          double acc = bias[static_cast<std::size_t>(c)];
          for (std::int64_t i = 0; i < c_in; ++i) {
            for (std::int64_t tp = 0; tp < kt; ++tp) {
              for (std::int64_t k = 0; k < korder; ++k) {
                // (P_k(L~) X[b, t+kt-1-tp])[vtx, i]
                double filtered = 0.0;
                for (std::int64_t u = 0; u < n; ++u) {
                  filtered += poly.at3(k, vtx, u) * x.at4(b, t + kt - 1 - tp, u, i);
                }
                acc += theta.at4(i, c, tp, k) * filtered;
              }
            }
          }
          z.at4(b, t, vtx, c) = acc;
        }
      }
    }
  }
  return z;
}

DenseArray layer_norm_naive(const DenseArray& x, const DenseArray& gamma,
                            const DenseArray& beta) {
  const std::int64_t batch = x.dim(0);
  const std::int64_t t_len = x.dim(1);
  const std::int64_t n = x.dim(2);
  const std::int64_t c = x.dim(3);
  const double count = static_cast<double>(n * c);

  DenseArray out = DenseArray::zeros_like(x);
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t t = 0; t < t_len; ++t) {
      double mean = 0.0;
      for (std::int64_t v = 0; v < n; ++v) {
        for (std::int64_t ch = 0; ch < c; ++ch) mean += x.at4(b, t, v, ch);
      }
      mean /= count;
      double var = 0.0;
      for (std::int64_t v = 0; v < n; ++v) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          const double d = x.at4(b, t, v, ch) - mean;
          var += d * d;
        }
      }
      var /= count;
      const double inv = 1.0 / std::sqrt(var + 1e-5);
      for (std::int64_t v = 0; v < n; ++v) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
          out.at4(b, t, v, ch) = gamma.at2(v, ch) * (x.at4(b, t, v, ch) - mean) * inv +
                                 beta.at2(v, ch);
        }
      }
    }
  }
  return out;
}

DenseArray shared_fc_naive(const DenseArray& x, std::span<const double> w,
                           double b0) {
  const std::int64_t batch = x.dim(0);
  const std::int64_t n = x.dim(1);
  const std::int64_t c = x.dim(2);
  DenseArray out({batch, n});
  for (std::int64_t b = 0; b < batch; ++b) {
    for (std::int64_t i = 0; i < n; ++i) {
      double acc = b0;
      for (std::int64_t ch = 0; ch < c; ++ch) acc += w[static_cast<std::size_t>(ch)] * x.at3(b, i, ch);
      out.at2(b, i) = acc;
    }
  }
  return out;
}

}  // namespace tgcn::ref
