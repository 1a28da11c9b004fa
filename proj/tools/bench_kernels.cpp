// Compares the OpenMP kernels against their serial reference twins at a few
// sizes: all-pairs DTW, the 3D graph convolution, and the inner GEMM.
// Usage: tgcn_bench [threads]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <memory>

#include "tgcn/dtw.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/nn.hpp"
#include "tgcn/parallel.hpp"
#include "tgcn/reference.hpp"
#include "tgcn/rng.hpp"

using namespace tgcn;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <class Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const double t0 = now_s();
    fn();
    best = std::min(best, now_s() - t0);
  }
  return best;
}

void bench_all_pairs_dtw(int threads) {
  const std::int64_t n = 48;
  const std::int64_t len = 288;
  RngStream rng(7, "bench_dtw");
  DenseArray profiles({n, len});
  for (std::int64_t i = 0; i < profiles.size(); ++i) profiles[i] = rng.uniform(0, 60);

  set_workers(1);
  const double serial = time_best_of(3, [&] { ref::all_pairs_dtw_serial(profiles); });
  const double omp1 = time_best_of(3, [&] { all_pairs_dtw(profiles); });
  set_workers(threads);
  const double ompn = time_best_of(3, [&] { all_pairs_dtw(profiles); });

  // Same bits regardless of path or worker count.
  set_workers(threads);
  const DistanceMatrix a = all_pairs_dtw(profiles);
  const DistanceMatrix b = ref::all_pairs_dtw_serial(profiles);
  bool identical = a.values == b.values;

  std::printf("all_pairs_dtw   n=%lld len=%lld   serial %.3fs | omp(1) %.3fs | omp(%d) %.3fs | x%.2f | bitwise %s\n",
              static_cast<long long>(n), static_cast<long long>(len), serial,
              omp1, threads, ompn, serial / ompn, identical ? "equal" : "DIFFER");
}

void bench_gconv(int threads) {
  const std::int64_t batch = 16, t_in = 12, n = 30, c_in = 32, c_out = 32;
  const int kt = 2, K = 3;

  RngStream rng(11, "bench_gconv");
  DenseArray x({batch, t_in, n, c_in});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

  DistanceMatrix d;
  d.n = n;
  d.values.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = rng.uniform(1, 9);
      d.at(i, j) = v;
      d.at(j, i) = v;
    }
  }
  auto lap = std::make_shared<ScaledLaplacian>(scaled_laplacian(temporal_adjacency(d, 0.1)));

  RngStream wrng(13, "bench_gconv_w");
  GConv3DLayer layer("bench.conv", c_in, c_out, kt, K, Activation::glu,
                     lap.get(), ChebBasis::chebyshev, wrng);

  const double naive = time_best_of(2, [&] {
    ref::gconv3d_preact_naive(x, *lap, layer.theta().value,
                              {layer.bias().value.data(),
                               static_cast<std::size_t>(layer.bias().value.size())},
                              kt, K, ChebBasis::chebyshev);
  });
  set_workers(1);
  const double omp1 = time_best_of(3, [&] { layer.forward(x); });
  set_workers(threads);
  const double ompn = time_best_of(3, [&] { layer.forward(x); });

  std::printf("gconv3d fwd     B=%lld T=%lld n=%lld C=%lld  naive %.3fs | omp(1) %.3fs | omp(%d) %.3fs | x%.2f vs naive\n",
              static_cast<long long>(batch), static_cast<long long>(t_in),
              static_cast<long long>(n), static_cast<long long>(c_in), naive,
              omp1, threads, ompn, naive / ompn);
}

void bench_gemm(int threads) {
  const std::int64_t rows = 15000, kdim = 384, cols = 128;
  RngStream rng(17, "bench_gemm");
  std::vector<double> a(static_cast<std::size_t>(rows * kdim));
  std::vector<double> b(static_cast<std::size_t>(kdim * cols));
  std::vector<double> c(static_cast<std::size_t>(rows * cols), 0.0);
  for (auto& v : a) v = rng.uniform();
  for (auto& v : b) v = rng.uniform();

  set_workers(1);
  const double t1 = time_best_of(3, [&] { gemm_accum(a.data(), b.data(), c.data(), rows, kdim, cols); });
  set_workers(threads);
  const double tn = time_best_of(3, [&] { gemm_accum(a.data(), b.data(), c.data(), rows, kdim, cols); });
  const double flops = 2.0 * static_cast<double>(rows) * static_cast<double>(kdim) * static_cast<double>(cols);
  std::printf("gemm            %lldx%lldx%lld   omp(1) %.3fs (%.2f GF/s) | omp(%d) %.3fs (%.2f GF/s)\n",
              static_cast<long long>(rows), static_cast<long long>(kdim),
              static_cast<long long>(cols), t1, flops / t1 / 1e9, threads, tn,
              flops / tn / 1e9);
}

}  // namespace

int main(int argc, char** argv) {
  const int threads = argc > 1 ? std::atoi(argv[1]) : max_workers();
  std::printf("kernel benchmarks, %d worker threads vs serial references\n", threads);
  bench_all_pairs_dtw(threads);
  bench_gconv(threads);
  bench_gemm(threads);
  return 0;
}
