#include "tgcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "tgcn/errors.hpp"
#include "tgcn/model.hpp"
#include "tgcn/nn.hpp"
#include "tgcn/rng.hpp"

namespace tgcn {

std::string GradCheckReport::format() const {
  std::string out = "parameter                      max_rel_err   status\n";
  char line[128];
  for (const auto& e : entries) {
    std::snprintf(line, sizeof(line), "%-30s %11.3e   %s\n", e.param.c_str(),
                  e.max_rel_err, e.passed ? "pass" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof(line), "gradient check: %s (threshold %.1e)\n",
                passed ? "PASS" : "FAIL", threshold);
  out += line;
  return out;
}

GradCheckReport run_gradcheck(std::uint64_t seed,
                              const std::string& corrupt_param) {
  // Toy instance small enough for exhaustive per-element differencing.
  TGCNConfig cfg;
  cfg.n_blocks = 1;
  cfg.layers_per_block = 2;
  cfg.channels = 4;
  cfg.K = 3;
  cfg.K_t = 2;
  cfg.M = 6;
  cfg.H = 1;

  const std::int64_t n = 4;
  Adjacency adj;
  adj.n = n;
  adj.kind = GraphKind::temporal;
  adj.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {0, 2, 1.0}};
  auto lap = std::make_shared<ScaledLaplacian>(scaled_laplacian(adj));

  Model model(cfg, lap, n, seed);

  RngStream data_rng(seed, "gradcheck_data");
  const std::int64_t batch = 3;
  DenseArray x({batch, cfg.M, n, 1});
  for (std::int64_t i = 0; i < x.size(); ++i) x[i] = data_rng.normal();
  DenseArray target({batch, n});
  for (std::int64_t i = 0; i < target.size(); ++i) target[i] = data_rng.normal();

  auto loss_at = [&]() {
    DenseArray pred = model.forward(x);
    return combined_loss(pred, target, nullptr);
  };

  // Analytic pass.
  std::vector<Param*> params = model.params();
  for (Param* p : params) p->zero_grad();
  DenseArray pred = model.forward(x);
  DenseArray grad;
  combined_loss(pred, target, &grad);
  model.backward(grad);

  bool corrupt_found = corrupt_param.empty();
  for (Param* p : params) {
    if (p->name == corrupt_param) {
      p->grad[0] += 1e-2;
      corrupt_found = true;
    }
  }
  if (!corrupt_found) {
    throw ConfigError("gradcheck: no parameter named '" + corrupt_param + "'");
  }

  GradCheckReport report;
  constexpr double kStep = 1e-5;
  for (Param* p : params) {
    GradCheckReport::Entry entry;
    entry.param = p->name;
    for (std::int64_t i = 0; i < p->value.size(); ++i) {
      const double keep = p->value[i];
      p->value[i] = keep + kStep;
      const double up = loss_at();
      p->value[i] = keep - kStep;
      const double down = loss_at();
      p->value[i] = keep;
      const double fd = (up - down) / (2.0 * kStep);
      const double an = p->grad[i];
      const double rel = std::fabs(an - fd) /
                         std::max({std::fabs(an), std::fabs(fd), 1e-6});
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
    }
    entry.passed = entry.max_rel_err < report.threshold;
    report.entries.push_back(entry);
  }
  report.passed = true;
  for (const auto& e : report.entries) report.passed = report.passed && e.passed;
  return report;
}

}  // namespace tgcn
