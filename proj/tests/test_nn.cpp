#include <doctest.h>

#include <cmath>
#include <memory>

#include "support/testutil.hpp"
#include "tgcn/gradcheck.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/nn.hpp"
#include "tgcn/reference.hpp"
#include "tgcn/rng.hpp"

using namespace tgcn;
using tgcn::testsupport::max_abs_diff;
using tgcn::testsupport::random_connected_graph;

namespace {

std::shared_ptr<ScaledLaplacian> small_graph(std::int64_t n, std::uint64_t seed) {
  RngStream rng(seed, "nn_graph");
  return std::make_shared<ScaledLaplacian>(scaled_laplacian(random_connected_graph(n, rng)));
}

std::shared_ptr<ScaledLaplacian> path_graph(std::int64_t n) {
  Adjacency adj;
  adj.n = n;
  for (std::int64_t i = 0; i + 1 < n; ++i) adj.edges.push_back({i, i + 1, 1.0});
  return std::make_shared<ScaledLaplacian>(scaled_laplacian(adj));
}

DenseArray random_input(std::vector<std::int64_t> shape, RngStream& rng) {
  DenseArray x(std::move(shape));
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TEST_CASE("gconv identity configuration passes the input through") {
  RngStream rng(1, "identity");
  GConv3DLayer layer("id", 1, 1, 1, 1, Activation::glu, nullptr,
                     ChebBasis::chebyshev, rng);
  // G channel copies the input, H channel saturates the gate.
  layer.theta().value.fill(0.0);
  layer.theta().value.at4(0, 0, 0, 0) = 1.0;  // G weight
  layer.bias().value[0] = 0.0;
  layer.bias().value[1] = 30.0;  // sigma(30) ~ 1

  DenseArray x = random_input({2, 3, 4, 1}, rng);
  const DenseArray out = layer.forward(x);
  REQUIRE(out.same_shape(x));
  CHECK(max_abs_diff(out, x) < 1e-11);
}

TEST_CASE("valid convolution shortens the time axis by K_t - 1") {
  RngStream rng(2, "shapes");
  GConv3DLayer layer("s", 1, 3, 2, 1, Activation::glu, nullptr,
                     ChebBasis::chebyshev, rng);
  const DenseArray out = layer.forward(random_input({1, 2, 2, 1}, rng));
  CHECK(out.dim(0) == 1);
  CHECK(out.dim(1) == 1);
  CHECK(out.dim(2) == 2);
  CHECK(out.dim(3) == 3);

  CHECK_THROWS_AS(layer.forward(DenseArray({1, 1, 2, 1})), DataError);
}

TEST_CASE("gconv pre-activation matches the literal nested-loop reference") {
  RngStream rng(3, "oracle");
  for (int trial = 0; trial < 50; ++trial) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(4));
    const std::int64_t c_in = 1 + static_cast<std::int64_t>(rng.below(3));
    const std::int64_t c_out = 1 + static_cast<std::int64_t>(rng.below(3));
    const int kt = 1 + static_cast<int>(rng.below(2));
    const int K = 1 + static_cast<int>(rng.below(3));
    const std::int64_t batch = 1 + static_cast<std::int64_t>(rng.below(3));
    const std::int64_t t_in = kt + static_cast<std::int64_t>(rng.below(3));

    auto lap = small_graph(n, 100 + static_cast<std::uint64_t>(trial));
    GConv3DLayer layer("o", c_in, c_out, kt, K, Activation::linear, lap.get(),
                       ChebBasis::chebyshev, rng);
    DenseArray x = random_input({batch, t_in, n, c_in}, rng);

    const DenseArray mine = layer.forward(x);
    const DenseArray naive = ref::gconv3d_preact_naive(
        x, *lap, layer.theta().value,
        {layer.bias().value.data(), static_cast<std::size_t>(layer.c_raw())},
        kt, K, ChebBasis::chebyshev);
    REQUIRE(mine.same_shape(naive));
    CHECK(max_abs_diff(mine, naive) < 1e-12);
  }
}

TEST_CASE("GLU output gates the linear half") {
  RngStream rng(4, "glu");
  const std::int64_t n = 3;
  auto lap = small_graph(n, 5);
  GConv3DLayer glu("glu", 2, 2, 2, 2, Activation::glu, lap.get(),
                   ChebBasis::chebyshev, rng);
  DenseArray x = random_input({2, 4, n, 2}, rng);
  const DenseArray out = glu.forward(x);
  const DenseArray z = ref::gconv3d_preact_naive(
      x, *lap, glu.theta().value,
      {glu.bias().value.data(), static_cast<std::size_t>(glu.c_raw())}, 2, 2,
      ChebBasis::chebyshev);
  for (std::int64_t b = 0; b < out.dim(0); ++b) {
    for (std::int64_t t = 0; t < out.dim(1); ++t) {
      for (std::int64_t v = 0; v < n; ++v) {
        for (std::int64_t c = 0; c < 2; ++c) {
          const double g = z.at4(b, t, v, c);
          const double h = z.at4(b, t, v, 2 + c);
          CHECK(out.at4(b, t, v, c) == doctest::Approx(g * sigmoid(h)).epsilon(1e-12));
          // sigmoid in (0,1) bounds the output by |G|
          CHECK(std::fabs(out.at4(b, t, v, c)) <= std::fabs(g));
        }
      }
    }
  }
}

TEST_CASE("temporal convolution is the K=1 graph convolution") {
  RngStream rng_a(6, "tconv");
  RngStream rng_b(6, "tconv");
  auto lap = small_graph(4, 6);
  GConv3DLayer with_graph("a", 2, 3, 2, 1, Activation::glu, lap.get(),
                          ChebBasis::chebyshev, rng_a);
  GConv3DLayer temporal("b", 2, 3, 2, 1, Activation::glu, nullptr,
                        ChebBasis::chebyshev, rng_b);
  RngStream rng(7, "tconv_x");
  DenseArray x = random_input({2, 5, 4, 2}, rng);
  const DenseArray ya = with_graph.forward(x);
  const DenseArray yb = temporal.forward(x);
  REQUIRE(ya.same_shape(yb));
  for (std::int64_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
}

TEST_CASE("layer norm") {
  SUBCASE("constant slice collapses to beta") {
    LayerNormLayer ln("ln", 2, 3);
    ln.beta().value.fill(0.25);
    DenseArray x({1, 1, 2, 3});
    x.fill(7.0);
    const DenseArray out = ln.forward(x);
    for (std::int64_t i = 0; i < out.size(); ++i) {
      CHECK(out[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("unit gamma, zero beta standardizes each slice") {
    RngStream rng(8, "ln");
    LayerNormLayer ln("ln", 4, 3);
    DenseArray x = random_input({2, 2, 4, 3}, rng);
    const DenseArray out = ln.forward(x);
    for (std::int64_t bt = 0; bt < 4; ++bt) {
      double mean = 0.0, var = 0.0;
      for (std::int64_t e = 0; e < 12; ++e) mean += out[bt * 12 + e];
      mean /= 12.0;
      for (std::int64_t e = 0; e < 12; ++e) {
        var += (out[bt * 12 + e] - mean) * (out[bt * 12 + e] - mean);
      }
      var /= 12.0;
      CHECK(std::fabs(mean) < 1e-12);
      CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps=1e-5 shrinks it
    }
  }
  SUBCASE("matches the two-pass reference") {
    RngStream rng(9, "ln_ref");
    LayerNormLayer ln("ln", 3, 2);
    for (std::int64_t i = 0; i < ln.gamma().value.size(); ++i) {
      ln.gamma().value[i] = rng.uniform(0.5, 1.5);
      ln.beta().value[i] = rng.normal();
    }
    DenseArray x = random_input({3, 2, 3, 2}, rng);
    const DenseArray mine = ln.forward(x);
    const DenseArray naive = ref::layer_norm_naive(x, ln.gamma().value, ln.beta().value);
    CHECK(max_abs_diff(mine, naive) < 1e-12);
  }
}

TEST_CASE("shared fully-connected readout") {
  RngStream rng(10, "fc");
  SharedFCLayer fc("fc", 3, rng);

  SUBCASE("one-hot weight extracts a channel") {
    fc.weight().value.fill(0.0);
    fc.weight().value[1] = 1.0;
    fc.bias().value[0] = 0.0;
    DenseArray x = random_input({2, 4, 3}, rng);
    const DenseArray out = fc.forward(x);
    for (std::int64_t b = 0; b < 2; ++b) {
      for (std::int64_t v = 0; v < 4; ++v) {
        CHECK(out.at2(b, v) == x.at3(b, v, 1));
      }
    }
  }
  SUBCASE("zero input yields the bias") {
    fc.bias().value[0] = -2.5;
    DenseArray x({2, 4, 3});
    const DenseArray out = fc.forward(x);
    for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == -2.5);
  }
  SUBCASE("matches the naive loop") {
    DenseArray x = random_input({3, 5, 3}, rng);
    const DenseArray mine = fc.forward(x);
    const DenseArray naive = ref::shared_fc_naive(
        x, {fc.weight().value.data(), 3}, fc.bias().value[0]);
    CHECK(max_abs_diff(mine, naive) < 1e-12);
  }
}

TEST_CASE("combined loss values and gradient") {
  SUBCASE("zero residual") {
    DenseArray p({2, 3});
    p.fill(1.5);
    DenseArray grad;
    CHECK(combined_loss(p, p, &grad) == 0.0);
    for (std::int64_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == 0.0);  // sign(0) := 0
  }
  SUBCASE("single element with residual 2") {
    DenseArray p({1, 1}), t({1, 1});
    p[0] = 2.0;
    t[0] = 0.0;
    DenseArray grad;
    CHECK(combined_loss(p, t, &grad) == doctest::Approx(4.0));  // 0.5*4 + 2
    CHECK(grad[0] == doctest::Approx(3.0));                     // e + sign(e)
  }
  SUBCASE("batch mean of per-sample losses") {
    DenseArray p({2, 1}), t({2, 1});
    p.at2(0, 0) = 2.0;  // loss 4
    p.at2(1, 0) = 0.0;  // loss 0
    CHECK(combined_loss(p, t, nullptr) == doctest::Approx(2.0));
  }
}

TEST_CASE("backward before forward is rejected") {
  RngStream rng(11, "order");
  GConv3DLayer layer("l", 1, 1, 1, 1, Activation::glu, nullptr,
                     ChebBasis::chebyshev, rng);
  DenseArray g({1, 1, 2, 1});
  CHECK_THROWS_AS(layer.backward(g, true), std::logic_error);
}

TEST_CASE("toy-model gradients pass finite differences") {
  const GradCheckReport report = run_gradcheck(9001);
  CHECK(report.passed);
  CHECK(report.entries.size() >= 6);
  for (const auto& e : report.entries) CHECK(e.max_rel_err < 1e-4);
}

TEST_CASE("input gradients pass finite differences on a single layer") {
  RngStream rng(12, "input_fd");
  auto lap = small_graph(3, 12);
  GConv3DLayer layer("l", 2, 2, 2, 3, Activation::glu, lap.get(),
                     ChebBasis::chebyshev, rng);
  DenseArray x = random_input({2, 3, 3, 2}, rng);
  DenseArray target = random_input({2, 2, 3, 2}, rng);

  auto loss_of = [&](const DenseArray& input) {
    const DenseArray out = layer.forward(input);
    double acc = 0.0;
    for (std::int64_t i = 0; i < out.size(); ++i) {
      acc += 0.5 * (out[i] - target[i]) * (out[i] - target[i]);
    }
    return acc;
  };

  const DenseArray out = layer.forward(x);
  DenseArray grad_out = DenseArray::zeros_like(out);
  for (std::int64_t i = 0; i < out.size(); ++i) grad_out[i] = out[i] - target[i];
  const DenseArray dx = layer.backward(grad_out, true);

  constexpr double h = 1e-6;
  for (std::int64_t i = 0; i < x.size(); i += 3) {  // sample every third element
    const double keep = x[i];
    x[i] = keep + h;
    const double up = loss_of(x);
    x[i] = keep - h;
    const double down = loss_of(x);
    x[i] = keep;
    const double fd = (up - down) / (2.0 * h);
    CHECK(testsupport::rel_err(fd, dx[i]) < 1e-4);
  }
}

TEST_CASE("doubling a G-channel weight doubles its quadratic gradient term") {
  // Identity-gate configuration keeps the model linear in theta_G.
  RngStream rng(13, "linearity");
  DenseArray x = random_input({1, 1, 4, 1}, rng);
  DenseArray target({1, 4});  // zeros

  auto grad_at = [&](double theta_g) {
    RngStream r2(13, "linearity_layer");
    GConv3DLayer layer("lin", 1, 1, 1, 1, Activation::glu, nullptr,
                       ChebBasis::chebyshev, r2);
    layer.theta().value.fill(0.0);
    layer.theta().value.at4(0, 0, 0, 0) = theta_g;
    layer.bias().value[0] = 0.0;
    layer.bias().value[1] = 30.0;  // saturated gate
    const DenseArray out4 = layer.forward(x);
    DenseArray pred({1, 4});
    for (std::int64_t v = 0; v < 4; ++v) pred.at2(0, v) = out4.at4(0, 0, v, 0);
    DenseArray grad;
    combined_loss(pred, target, &grad);
    DenseArray grad4({1, 1, 4, 1});
    for (std::int64_t v = 0; v < 4; ++v) grad4.at4(0, 0, v, 0) = grad.at2(0, v);
    layer.backward(grad4, false);
    return layer.theta().grad.at4(0, 0, 0, 0);
  };

  const double theta = 0.7;
  const double g1 = grad_at(theta);
  const double g2 = grad_at(2.0 * theta);
  double sum_sq = 0.0;
  for (std::int64_t v = 0; v < 4; ++v) sum_sq += x[v] * x[v];
  const double s = sigmoid(30.0);
  // combined loss adds a theta-independent L1 part; the difference isolates
  // the quadratic term theta * s^2 * sum(x^2).
  CHECK(g2 - g1 == doctest::Approx(theta * s * s * sum_sq).epsilon(1e-9));
}

TEST_CASE("receptive fields are exact") {
  RngStream rng(14, "rf");
  SUBCASE("time: outputs ignore steps outside their window") {
    GConv3DLayer layer("t", 1, 2, 2, 1, Activation::glu, nullptr,
                       ChebBasis::chebyshev, rng);
    DenseArray x = random_input({1, 5, 3, 1}, rng);
    const DenseArray base = layer.forward(x);
    // output t=0 reads input steps {0,1}; perturb step 3
    DenseArray x2 = x;
    x2.at4(0, 3, 1, 0) += 10.0;
    const DenseArray bumped = layer.forward(x2);
    for (std::int64_t v = 0; v < 3; ++v) {
      for (std::int64_t c = 0; c < 2; ++c) {
        CHECK(bumped.at4(0, 0, v, c) == base.at4(0, 0, v, c));  // bitwise
      }
    }
  }
  SUBCASE("graph: K=3 reaches exactly 2 hops on a path graph") {
    auto lap = path_graph(6);
    GConv3DLayer layer("g", 1, 1, 1, 3, Activation::glu, lap.get(),
                       ChebBasis::chebyshev, rng);
    DenseArray x = random_input({1, 1, 6, 1}, rng);
    const DenseArray base = layer.forward(x);
    DenseArray x2 = x;
    x2.at4(0, 0, 5, 0) += 4.0;  // perturb node 5
    const DenseArray bumped = layer.forward(x2);
    // nodes 0..2 are > 2 hops from node 5: unchanged exactly
    for (std::int64_t v = 0; v <= 2; ++v) {
      CHECK(bumped.at4(0, 0, v, 0) == base.at4(0, 0, v, 0));
    }
    // node 4 is 1 hop away: must change
    CHECK(bumped.at4(0, 0, 4, 0) != base.at4(0, 0, 4, 0));
  }
  SUBCASE("node isolation with K=1 and no graph term") {
    GConv3DLayer layer("n", 1, 2, 2, 1, Activation::glu, nullptr,
                       ChebBasis::chebyshev, rng);
    DenseArray x = random_input({1, 4, 5, 1}, rng);
    const DenseArray base = layer.forward(x);
    DenseArray x2 = x;
    for (std::int64_t t = 0; t < 4; ++t) x2.at4(0, t, 2, 0) += 1.0;  // node 2 everywhere
    const DenseArray bumped = layer.forward(x2);
    for (std::int64_t t = 0; t < base.dim(1); ++t) {
      for (std::int64_t v = 0; v < 5; ++v) {
        if (v == 2) continue;
        for (std::int64_t c = 0; c < 2; ++c) {
          CHECK(bumped.at4(0, t, v, c) == base.at4(0, t, v, c));
        }
      }
    }
  }
}

TEST_CASE("conv block composes convs, layer norm, and the identity skip") {
  RngStream rng_block(21, "block");
  RngStream rng_manual(21, "block");
  auto lap = small_graph(4, 21);
  const std::int64_t c_in = 2, channels = 5;
  GConvBlock block("b", 4, c_in, channels, 2, 2, 2, lap.get(),
                   ChebBasis::chebyshev, rng_block);
  // same draw sequence gives identical weights for the manual composition
  GConv3DLayer conv1("b.conv1", c_in, channels, 2, 2, Activation::glu,
                     lap.get(), ChebBasis::chebyshev, rng_manual);
  GConv3DLayer conv2("b.conv2", channels, channels, 2, 2, Activation::glu,
                     lap.get(), ChebBasis::chebyshev, rng_manual);
  LayerNormLayer norm("b.norm", 4, channels);

  RngStream rng(22, "block_x");
  DenseArray x = random_input({2, 6, 4, c_in}, rng);
  const DenseArray out = block.forward(x);
  DenseArray manual = norm.forward(conv2.forward(conv1.forward(x)));
  // add the input at each output's newest step, zero-padded over channels
  const std::int64_t t_out = manual.dim(1);
  const std::int64_t dt = 6 - t_out;
  for (std::int64_t b = 0; b < 2; ++b) {
    for (std::int64_t t = 0; t < t_out; ++t) {
      for (std::int64_t v = 0; v < 4; ++v) {
        for (std::int64_t cc = 0; cc < c_in; ++cc) {
          manual.at4(b, t, v, cc) += x.at4(b, t + dt, v, cc);
        }
      }
    }
  }
  REQUIRE(out.same_shape(manual));
  for (std::int64_t i = 0; i < out.size(); ++i) CHECK(out[i] == manual[i]);
}

TEST_CASE("a stack of L layers removes L*(K_t-1) time steps") {
  RngStream rng(15, "stacking");
  auto lap = small_graph(4, 15);
  const int kt = 3;
  GConv3DLayer l1("s1", 1, 2, kt, 2, Activation::glu, lap.get(), ChebBasis::chebyshev, rng);
  GConv3DLayer l2("s2", 2, 2, kt, 2, Activation::glu, lap.get(), ChebBasis::chebyshev, rng);
  GConv3DLayer l3("s3", 2, 2, kt, 2, Activation::glu, lap.get(), ChebBasis::chebyshev, rng);
  DenseArray x = random_input({1, 10, 4, 1}, rng);
  const DenseArray out = l3.forward(l2.forward(l1.forward(x)));
  CHECK(out.dim(1) == 10 - 3 * (kt - 1));
}

TEST_CASE("adam update") {
  SUBCASE("zero gradient is a fixed point") {
    Param p("p", {3});
    p.value.fill(1.0);
    Param* ptr = &p;
    adam_update({&ptr, 1}, 1, AdamConfig{});
    for (std::int64_t i = 0; i < 3; ++i) CHECK(p.value[i] == 1.0);
  }
  SUBCASE("unit gradient at t=1 steps by about -lr") {
    Param p("p", {1});
    p.grad[0] = 1.0;
    Param* ptr = &p;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_update({&ptr, 1}, 1, cfg);
    CHECK(p.value[0] == doctest::Approx(-0.01).epsilon(1e-7));
  }
  SUBCASE("deterministic across identical runs") {
    auto run = [] {
      RngStream rng(77, "adam_det");
      Param p("p", {8});
      for (std::int64_t i = 0; i < 8; ++i) p.value[i] = rng.normal();
      Param* ptr = &p;
      for (int t = 1; t <= 5; ++t) {
        for (std::int64_t i = 0; i < 8; ++i) p.grad[i] = rng.normal();
        adam_update({&ptr, 1}, t, AdamConfig{});
      }
      std::vector<double> out(p.value.data(), p.value.data() + 8);
      return out;
    };
    CHECK(run() == run());
  }
}
