#include <doctest.h>

#include <cmath>
#include <set>

#include "support/testutil.hpp"
#include "tgcn/errors.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/reference.hpp"
#include "tgcn/rng.hpp"

using namespace tgcn;
using tgcn::testsupport::random_connected_graph;

namespace {

DistanceMatrix dist_from(std::initializer_list<double> vals, std::int64_t n) {
  DistanceMatrix d;
  d.n = n;
  d.values = vals;
  return d;
}

std::set<std::pair<std::int64_t, std::int64_t>> edge_set(const Adjacency& a) {
  std::set<std::pair<std::int64_t, std::int64_t>> s;
  for (const auto& e : a.edges) s.insert({e.i, e.j});
  return s;
}

}  // namespace

TEST_CASE("temporal adjacency worked example n=3") {
  const DistanceMatrix d = dist_from({0, 1, 9, 1, 0, 9, 9, 9, 0}, 3);
  const Adjacency w = temporal_adjacency(d, 0.4);  // k = max(1, round(0.4*2)) = 1
  CHECK(edge_set(w) == std::set<std::pair<std::int64_t, std::int64_t>>{{0, 1}, {0, 2}});
  CHECK(w.kind == GraphKind::temporal);
  for (const auto& e : w.edges) CHECK(e.w == 1.0);
}

TEST_CASE("temporal adjacency tie-break on all-equal distances") {
  DistanceMatrix d;
  d.n = 4;
  d.values.assign(16, 1.0);
  for (std::int64_t i = 0; i < 4; ++i) d.at(i, i) = 0.0;
  const Adjacency w = temporal_adjacency(d, 0.3);  // k = 1, every row ties
  // each row picks its lowest-indexed other road: 0->1, 1->0, 2->0, 3->0
  CHECK(edge_set(w) == std::set<std::pair<std::int64_t, std::int64_t>>{{0, 1}, {0, 2}, {0, 3}});
}

TEST_CASE("temporal adjacency neighbor count at 5% sparsity") {
  // k = max(1, round(0.05 * (n-1))): 11 for n=228, 1 for n=30.
  CHECK(std::max<std::int64_t>(1, std::llround(0.05 * 227)) == 11);
  CHECK(std::max<std::int64_t>(1, std::llround(0.05 * 29)) == 1);

  RngStream rng(23, "knn_degree");
  const std::int64_t n = 40;
  DistanceMatrix d;
  d.n = n;
  d.values.assign(static_cast<std::size_t>(n * n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = i + 1; j < n; ++j) {
      const double v = rng.uniform(1.0, 100.0);
      d.at(i, j) = v;
      d.at(j, i) = v;
    }
  }
  const double sparsity = 0.1;
  const std::int64_t k = std::max<std::int64_t>(1, std::llround(sparsity * static_cast<double>(n - 1)));
  const Adjacency w = temporal_adjacency(d, sparsity);

  std::vector<std::int64_t> degree(static_cast<std::size_t>(n), 0);
  for (const auto& e : w.edges) {
    ++degree[static_cast<std::size_t>(e.i)];
    ++degree[static_cast<std::size_t>(e.j)];
  }
  std::int64_t total_directed = 0;
  for (const auto deg : degree) {
    CHECK(deg >= k);  // symmetrization only adds neighbors
    total_directed += deg;
  }
  // n*k directed picks bound the undirected edge count from both sides.
  CHECK(static_cast<std::int64_t>(w.edges.size()) >= n * k / 2);
  CHECK(static_cast<std::int64_t>(w.edges.size()) <= n * k);
  (void)total_directed;
}

TEST_CASE("temporal adjacency input validation") {
  CHECK_THROWS_AS(temporal_adjacency(dist_from({0}, 1), 0.05), DataError);
  CHECK_THROWS_AS(temporal_adjacency(dist_from({0, 1, 1, 0}, 2), 0.0), ConfigError);
  CHECK_THROWS_AS(temporal_adjacency(dist_from({0, 1, 1, 0}, 2), 1.0), ConfigError);
}

TEST_CASE("spatial adjacency kernel and threshold") {
  SUBCASE("zero distance gives weight 1") {
    DenseArray dist({2, 2});
    const Adjacency w = spatial_adjacency(dist, 1.0, 0.0);
    REQUIRE(w.edges.size() == 1);
    CHECK(w.edges[0].w == doctest::Approx(1.0));
    CHECK(w.kind == GraphKind::spatial);
  }
  SUBCASE("huge distance vanishes") {
    DenseArray dist({2, 2});
    dist.at2(0, 1) = dist.at2(1, 0) = 1e9;
    const Adjacency w = spatial_adjacency(dist, 1.0, 0.0);
    CHECK(w.edges.empty());
  }
  SUBCASE("edge below epsilon is dropped") {
    // choose d so exp(-d^2/sigma2) = 0.4 < epsilon = 0.5
    const double d01 = std::sqrt(-std::log(0.4));
    DenseArray dist({2, 2});
    dist.at2(0, 1) = dist.at2(1, 0) = d01;
    CHECK(spatial_adjacency(dist, 1.0, 0.5).edges.empty());
    const Adjacency kept = spatial_adjacency(dist, 1.0, 0.3);
    REQUIRE(kept.edges.size() == 1);
    CHECK(kept.edges[0].w == doctest::Approx(0.4));
  }
  SUBCASE("asymmetric distances are rejected") {
    DenseArray dist({2, 2});
    dist.at2(0, 1) = 1.0;
    dist.at2(1, 0) = 2.0;
    CHECK_THROWS_AS(spatial_adjacency(dist, 1.0, 0.0), DataError);
  }
}

TEST_CASE("scaled laplacian of the 2-node graph") {
  Adjacency w;
  w.n = 2;
  w.edges = {{0, 1, 1.0}};
  const ScaledLaplacian lt = scaled_laplacian(w);
  CHECK(lt.lambda_max == doctest::Approx(2.0).epsilon(1e-6));
  const auto dense = lt.matrix.dense();
  CHECK(dense[0] == doctest::Approx(0.0).epsilon(1e-5));
  CHECK(dense[1] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(dense[2] == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(dense[3] == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("edgeless graph hits the isolated-node rule") {
  Adjacency w;
  w.n = 2;
  const ScaledLaplacian lt = scaled_laplacian(w);
  // D_ii := 1 makes L = I, lambda_max = 1, so L~ = I.
  CHECK(lt.lambda_max == doctest::Approx(1.0).epsilon(1e-5));
  const auto dense = lt.matrix.dense();
  CHECK(dense[0] == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(dense[1] == doctest::Approx(0.0));
  CHECK(dense[3] == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("laplacian spectra on random connected graphs") {
  RngStream rng(31, "lap_spec");
  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(19));
    const Adjacency w = random_connected_graph(n, rng);
    const ScaledLaplacian lt = scaled_laplacian(w);

    // Spectrum of L in [0, 2], smallest eigenvalue 0 for connected graphs.
    const auto spectrum = ref::laplacian_spectrum(w);
    CHECK(spectrum.front() > -1e-8);
    CHECK(spectrum.front() < 1e-8);
    CHECK(spectrum.back() < 2.0 + 1e-8);

    // Power iteration agrees with the dense solver within 1e-4 relative.
    CHECK(testsupport::rel_err(lt.lambda_max, spectrum.back()) < 1e-4);

    // Rescaled spectrum sits inside [-1, 1] within 1e-6.
    std::vector<double> ldense = lt.matrix.dense();
    std::vector<double> eigs, vecs;
    ref::jacobi_eigh(ldense, n, eigs, vecs);
    CHECK(eigs.front() >= -1.0 - 1e-6);
    CHECK(eigs.back() <= 1.0 + 1e-6);
  }
}

TEST_CASE("scaled laplacian input validation") {
  Adjacency w;
  w.n = 2;
  w.edges = {{0, 1, -1.0}};
  CHECK_THROWS_AS(scaled_laplacian(w), DataError);
  w.edges = {{1, 1, 1.0}};
  CHECK_THROWS_AS(scaled_laplacian(w), DataError);
}

TEST_CASE("cheb_apply base cases") {
  Adjacency w;
  w.n = 2;
  w.edges = {{0, 1, 1.0}};
  const ScaledLaplacian lt = scaled_laplacian(w);

  DenseArray x({2, 1});
  x.at2(0, 0) = 1.0;
  x.at2(1, 0) = 0.0;

  SUBCASE("K=1 returns the input") {
    const DenseArray stack = cheb_apply(lt, x, 1);
    CHECK(stack.dim(0) == 1);
    CHECK(stack.at3(0, 0, 0) == 1.0);
    CHECK(stack.at3(0, 1, 0) == 0.0);
  }
  SUBCASE("K=2 applies L~ once") {
    const DenseArray stack = cheb_apply(lt, x, 2);
    CHECK(stack.at3(1, 0, 0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(stack.at3(1, 1, 0) == doctest::Approx(-1.0).epsilon(1e-9));
  }
}

TEST_CASE("chebyshev recursion matches dense polynomial evaluation") {
  RngStream rng(37, "cheb_dense");
  for (int trial = 0; trial < 20; ++trial) {
    const std::int64_t n = 3 + static_cast<std::int64_t>(rng.below(18));
    const Adjacency w = random_connected_graph(n, rng);
    const ScaledLaplacian lt = scaled_laplacian(w);
    DenseArray x({n, 2});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

    for (const ChebBasis basis : {ChebBasis::chebyshev, ChebBasis::power}) {
      const int K = 3 + static_cast<int>(rng.below(3));
      const DenseArray stack = cheb_apply(lt, x, K, basis);
      const DenseArray poly = ref::dense_cheb_stack(lt, K, basis);
      for (int k = 0; k < K; ++k) {
        for (std::int64_t v = 0; v < n; ++v) {
          for (std::int64_t c = 0; c < 2; ++c) {
            double expected = 0.0;
            for (std::int64_t u = 0; u < n; ++u) {
              expected += poly.at3(k, v, u) * x.at2(u, c);
            }
            CHECK(std::fabs(stack.at3(k, v, c) - expected) < 1e-10);
          }
        }
      }
    }
  }
}

TEST_CASE("power and chebyshev bases differ from order 2 on") {
  RngStream rng(41, "basis_diff");
  const Adjacency w = random_connected_graph(8, rng);
  const ScaledLaplacian lt = scaled_laplacian(w);
  DenseArray x({8, 1});
  for (std::int64_t i = 0; i < 8; ++i) x[i] = rng.normal();
  const DenseArray cheb = cheb_apply(lt, x, 3, ChebBasis::chebyshev);
  const DenseArray pow = cheb_apply(lt, x, 3, ChebBasis::power);
  // T_2 = 2 L~^2 - I vs plain L~^2: they cannot agree on a generic vector.
  double diff = 0.0;
  for (std::int64_t v = 0; v < 8; ++v) diff += std::fabs(cheb.at3(2, v, 0) - pow.at3(2, v, 0));
  CHECK(diff > 1e-6);
}

TEST_CASE("spectral filter oracle") {
  Adjacency two;
  two.n = 2;
  two.edges = {{0, 1, 1.0}};
  const ScaledLaplacian lt2 = scaled_laplacian(two);

  SUBCASE("identity filter returns x") {
    const std::vector<double> theta{1.0, 0.0, 0.0};
    const std::vector<double> x{0.3, -1.7};
    const auto out = ref::spectral_filter_oracle(two, theta, x, lt2.lambda_max);
    CHECK(out[0] == doctest::Approx(0.3).epsilon(1e-10));
    CHECK(out[1] == doctest::Approx(-1.7).epsilon(1e-10));
  }
  SUBCASE("first-order filter on the 2-node graph") {
    const std::vector<double> theta{0.0, 1.0};
    const std::vector<double> x{1.0, 0.0};
    const auto out = ref::spectral_filter_oracle(two, theta, x, lt2.lambda_max);
    CHECK(out[0] == doctest::Approx(0.0).epsilon(1e-8));
    CHECK(out[1] == doctest::Approx(-1.0).epsilon(1e-8));
  }
}

TEST_CASE("polynomial-space filtering matches the spectral oracle") {
  RngStream rng(43, "spectral_equiv");
  for (int trial = 0; trial < 30; ++trial) {
    const std::int64_t n = 3 + static_cast<std::int64_t>(rng.below(18));
    const Adjacency w = random_connected_graph(n, rng);
    const ScaledLaplacian lt = scaled_laplacian(w);
    const int K = 1 + static_cast<int>(rng.below(5));

    std::vector<double> theta(static_cast<std::size_t>(K));
    for (auto& t : theta) t = rng.normal();
    DenseArray x({n, 1});
    for (std::int64_t i = 0; i < n; ++i) x[i] = rng.normal();

    const DenseArray stack = cheb_apply(lt, x, K);
    const auto oracle = ref::spectral_filter_oracle(
        w, theta, {x.data(), static_cast<std::size_t>(n)}, lt.lambda_max);
    for (std::int64_t v = 0; v < n; ++v) {
      double mine = 0.0;
      for (int k = 0; k < K; ++k) mine += theta[static_cast<std::size_t>(k)] * stack.at3(k, v, 0);
      CHECK(std::fabs(mine - oracle[static_cast<std::size_t>(v)]) < 1e-8);
    }
  }
}
