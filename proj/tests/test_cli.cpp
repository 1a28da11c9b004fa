#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "support/synthetic.hpp"
#include "tgcn/config.hpp"
#include "tgcn/io.hpp"

using namespace tgcn;
namespace fs = std::filesystem;

namespace {

#ifndef TGCN_CLI_PATH
#error "TGCN_CLI_PATH must point at the tgcn binary"
#endif

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TGCN_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

struct CliFixture {
  fs::path dir;

  CliFixture() {
    dir = fs::path("./cli_scratch");
    fs::remove_all(dir);
    fs::create_directories(dir);

    testsupport::SyntheticSpec spec;
    spec.n_roads = 8;
    spec.days = 3;
    spec.steps_per_day = 48;
    spec.seed = 99;
    const SpeedMatrix data = testsupport::generate_planted_clusters(spec);
    std::ofstream csv(dir / "data.csv");
    for (std::int64_t t = 0; t < data.rows; ++t) {
      for (std::int64_t i = 0; i < data.cols; ++i) {
        if (i) csv << ',';
        csv << data.at(t, i);
      }
      csv << '\n';
    }
  }

  ~CliFixture() { fs::remove_all(dir); }

  std::string write_config(const std::string& name, const std::string& extra) {
    const fs::path p = dir / name;
    std::ofstream out(p);
    out << "data = " << (dir / "data.csv").string() << "\n"
        << "steps_per_day = 48\n"
        << "n_blocks = 1\n"
        << "channels = 6\n"
        << "M = 8\n"
        << "H = 2\n"
        << "epochs = 2\n"
        << "batch_size = 16\n"
        << "seed = 12\n"
        << "workers = 1\n"
        << "output = " << (dir / "out").string() << "\n"
        << extra;
    return p.string();
  }
};

}  // namespace

TEST_CASE("cli pipeline: build-graph, train, evaluate, predict") {
  CliFixture fx;
  const std::string cfg = fx.write_config("run.cfg", "");
  const std::string out = (fx.dir / "out").string();

  REQUIRE(run_cli("build-graph --config " + cfg) == 0);
  CHECK(fs::exists(out + "/graph.csv"));
  CHECK(fs::exists(out + "/dtw_distances.csv"));
  CHECK(fs::exists(out + "/build_graph.log"));
  CHECK(fs::exists(out + "/resolved_config.cfg"));

  REQUIRE(run_cli("train --config " + cfg + " --graph " + out + "/graph.csv") == 0);
  CHECK(fs::exists(out + "/checkpoint.tgcn"));
  CHECK(fs::exists(out + "/history.csv"));
  CHECK(fs::exists(out + "/norm_stats.txt"));

  REQUIRE(run_cli("evaluate --config " + cfg + " --checkpoint " + out +
                  "/checkpoint.tgcn --graph " + out + "/graph.csv") == 0);
  CHECK(fs::exists(out + "/metrics.csv"));

  REQUIRE(run_cli("predict --config " + cfg + " --checkpoint " + out +
                  "/checkpoint.tgcn --graph " + out + "/graph.csv") == 0);
  CHECK(fs::exists(out + "/predictions.csv"));

  // history has one row per epoch plus the header
  std::ifstream hist(out + "/history.csv");
  std::string line;
  int rows = 0;
  while (std::getline(hist, line)) ++rows;
  CHECK(rows == 3);

  // the resolved config is itself a valid config that reproduces itself
  const ExperimentConfig echoed = load_config(out + "/resolved_config.cfg");
  CHECK(echoed.serialize() == load_config(cfg).serialize());
}

TEST_CASE("cli exit codes") {
  CliFixture fx;
  SUBCASE("usage errors exit 1") {
    CHECK(run_cli("train") == 1);                      // missing required flags
    CHECK(run_cli("no-such-command") == 1);
    const std::string bad = fx.write_config("bad.cfg", "unknown_key = 1\n");
    CHECK(run_cli("build-graph --config " + bad) == 1);
  }
  SUBCASE("data errors exit 2") {
    const std::string cfg = fx.write_config("missing.cfg", "data = ./does_not_exist.csv\n");
    CHECK(run_cli("build-graph --config " + cfg) == 2);
  }
  SUBCASE("spatial kind without a distance file exits 1") {
    const std::string cfg = fx.write_config("spatial.cfg", "graph_kind = spatial\n");
    CHECK(run_cli("build-graph --config " + cfg) == 1);
  }
  SUBCASE("gradcheck passes, corrupted gradcheck exits 3") {
    CHECK(run_cli("gradcheck") == 0);
    CHECK(run_cli("gradcheck --corrupt block1.conv1.theta") == 3);
  }
}

TEST_CASE("cli rejects a graph whose size disagrees with the data") {
  CliFixture fx;
  const std::string cfg = fx.write_config("mismatch.cfg", "");
  // graph over 5 nodes, data has 8 roads
  Adjacency small;
  small.n = 5;
  small.kind = GraphKind::temporal;
  small.edges = {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}};
  const std::string gpath = (fx.dir / "small_graph.csv").string();
  save_adjacency(gpath, small);
  CHECK(run_cli("train --config " + cfg + " --graph " + gpath) == 2);
}

TEST_CASE("reruns with one seed are byte-identical") {
  CliFixture fx;
  const std::string cfg = fx.write_config("det.cfg", "");
  const std::string out = (fx.dir / "out").string();

  REQUIRE(run_cli("build-graph --config " + cfg) == 0);
  const auto first = fingerprint_file(out + "/graph.csv");
  REQUIRE(run_cli("build-graph --config " + cfg) == 0);
  CHECK(fingerprint_file(out + "/graph.csv") == first);
}

TEST_CASE("evaluate horizon contracts") {
  CliFixture fx;
  const std::string cfg = fx.write_config("hz.cfg", "");
  const std::string out = (fx.dir / "out").string();
  REQUIRE(run_cli("build-graph --config " + cfg) == 0);
  REQUIRE(run_cli("train --config " + cfg + " --graph " + out + "/graph.csv") == 0);

  // H=2 checkpoint evaluated directly at H=3 must fail the horizon check.
  const std::string h3 = fx.write_config("hz3.cfg", "H = 3\n");
  CHECK(run_cli("evaluate --config " + h3 + " --checkpoint " + out +
                "/checkpoint.tgcn --graph " + out + "/graph.csv") == 1);
  // recursive mode needs an H=1 checkpoint; H=2 is rejected too
  CHECK(run_cli("evaluate --config " + h3 + " --checkpoint " + out +
                "/checkpoint.tgcn --graph " + out + "/graph.csv --mode recursive") == 1);

  // an H=1 model evaluated recursively at H=3 works
  const std::string h1 = fx.write_config("hz1.cfg", "H = 1\noutput = " +
                                                        (fx.dir / "out1").string() + "\n");
  const std::string out1 = (fx.dir / "out1").string();
  REQUIRE(run_cli("build-graph --config " + h1) == 0);
  REQUIRE(run_cli("train --config " + h1 + " --graph " + out1 + "/graph.csv") == 0);
  const std::string h1_req3 =
      fx.write_config("hz13.cfg", "H = 3\noutput = " + (fx.dir / "out1").string() + "\n");
  CHECK(run_cli("evaluate --config " + h1_req3 + " --checkpoint " + out1 +
                "/checkpoint.tgcn --graph " + out1 + "/graph.csv --mode recursive") == 0);
}
