// Command-line front door: build-graph, train, evaluate, predict, gradcheck.
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 verification
// failure.

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "tgcn/checkpoint.hpp"
#include "tgcn/config.hpp"
#include "tgcn/errors.hpp"
#include "tgcn/gradcheck.hpp"
#include "tgcn/io.hpp"
#include "tgcn/log.hpp"
#include "tgcn/metrics.hpp"
#include "tgcn/model.hpp"
#include "tgcn/parallel.hpp"

namespace fs = std::filesystem;
using namespace tgcn;

namespace {

struct CommonArgs {
  std::string config_path;
  int workers = -1;           // -1: take from config
  long long seed = -1;        // -1: take from config
  std::string output;         // empty: take from config
  bool header = false;        // --header: skip one CSV header line
};

ExperimentConfig resolve_config(const CommonArgs& args, bool config_required) {
  ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = load_config(args.config_path);
  } else if (config_required) {
    throw ConfigError("--config is required for this command");
  }
  if (args.workers >= 0) cfg.workers = args.workers;
  if (args.seed >= 0) cfg.train.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.output.empty()) cfg.output = args.output;
  if (args.header) cfg.header = true;
  set_workers(cfg.workers);
  return cfg;
}

fs::path prepare_output(const ExperimentConfig& cfg) {
  fs::path dir(cfg.output);
  fs::create_directories(dir);
  // Every run records the exact configuration it resolved to; the echo is
  // itself a valid config file.
  write_text_file((dir / "resolved_config.cfg").string(), cfg.serialize());
  return dir;
}

struct LoadedData {
  SplitResult split;
  NormStats stats;
  std::int64_t n_roads = 0;
};

LoadedData load_and_split(const ExperimentConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("config: 'data' path is required");
  LoadedData out;
  const SpeedMatrix all = load_speed_csv(cfg.data, cfg.steps_per_day, cfg.header);
  out.n_roads = all.cols;
  out.split = chronological_split(all, cfg.train_frac, cfg.val_frac,
                                  cfg.model.M + cfg.model.H);
  out.stats = fit_zscore(out.split.train, cfg.normalization == "per_road");
  return out;
}

std::shared_ptr<const ScaledLaplacian> laplacian_from_file(
    const std::string& graph_path, std::int64_t expect_n) {
  const Adjacency adj = load_adjacency(graph_path);
  if (expect_n > 0 && adj.n != expect_n) {
    throw DataError("graph file has n=" + std::to_string(adj.n) +
                    " roads but data has n=" + std::to_string(expect_n));
  }
  return std::make_shared<const ScaledLaplacian>(scaled_laplacian(adj));
}

int cmd_build_graph(const CommonArgs& args) {
  const ExperimentConfig cfg = resolve_config(args, true);
  const fs::path dir = prepare_output(cfg);

  Adjacency adj;
  if (cfg.graph_kind == "temporal") {
    const SpeedMatrix all = load_speed_csv(cfg.data, cfg.steps_per_day, cfg.header);
    const SplitResult split = chronological_split(all, cfg.train_frac, cfg.val_frac);
    const DenseArray profiles = mean_daily_profile(split.train);
    const DistanceMatrix d = all_pairs_dtw(profiles, cfg.band);
    save_distance_matrix((dir / "dtw_distances.csv").string(), d);
    adj = temporal_adjacency(d, cfg.sparsity);
  } else {
    if (cfg.road_dist.empty()) {
      throw ConfigError("graph_kind=spatial requires a road_dist file");
    }
    if (!(cfg.sigma2 > 0.0) || cfg.epsilon < 0.0) {
      throw ConfigError("graph_kind=spatial requires sigma2 > 0 and epsilon >= 0");
    }
    adj = spatial_adjacency(load_matrix_csv(cfg.road_dist), cfg.sigma2, cfg.epsilon);
  }
  save_adjacency((dir / "graph.csv").string(), adj);

  const double realized =
      2.0 * static_cast<double>(adj.edges.size()) /
      (static_cast<double>(adj.n) * static_cast<double>(adj.n - 1));
  char log[256];
  std::snprintf(log, sizeof(log),
                "kind=%s n=%lld edges=%zu realized_sparsity=%.6f\n",
                cfg.graph_kind.c_str(), static_cast<long long>(adj.n),
                adj.edges.size(), realized);
  write_text_file((dir / "build_graph.log").string(), log);
  std::printf("%s", log);
  std::printf("graph written to %s\n", (dir / "graph.csv").c_str());
  return 0;
}

int cmd_train(const CommonArgs& args, const std::string& graph_path) {
  const ExperimentConfig cfg = resolve_config(args, true);
  const fs::path dir = prepare_output(cfg);

  const LoadedData data = load_and_split(cfg);
  auto lap = laplacian_from_file(graph_path, data.n_roads);

  const WindowSet train_w =
      make_windows(apply_zscore(data.split.train, data.stats), cfg.model.M, cfg.model.H);
  const WindowSet val_w =
      make_windows(apply_zscore(data.split.val, data.stats), cfg.model.M, cfg.model.H);

  Model model(cfg.model, lap, data.n_roads, cfg.train.seed);
  const FitResult result = fit(model, train_w, val_w, cfg.train, data.stats);

  save_history_csv((dir / "history.csv").string(), result.history);
  save_norm_stats((dir / "norm_stats.txt").string(), data.stats);
  const Checkpoint ckpt =
      make_checkpoint(model, data.stats, fingerprint_file(graph_path));
  save_checkpoint((dir / "checkpoint.tgcn").string(), ckpt);

  std::printf("trained %d epochs; best epoch %d, validation MAE %.6f\n",
              cfg.train.epochs, result.best_epoch, result.best_val_mae);
  std::printf("checkpoint written to %s\n", (dir / "checkpoint.tgcn").c_str());
  return 0;
}

WindowSet windows_for_split(const ExperimentConfig& cfg, const LoadedData& data,
                            const NormStats& stats, const std::string& split) {
  const SpeedMatrix& segment =
      split == "val" ? data.split.val
                     : (split == "train" ? data.split.train : data.split.test);
  return make_windows(apply_zscore(segment, stats), cfg.model.M, cfg.model.H);
}

int cmd_evaluate(const CommonArgs& args, const std::string& ckpt_path,
                 const std::string& graph_path, const std::string& mode,
                 const std::string& split) {
  const ExperimentConfig cfg = resolve_config(args, true);
  const fs::path dir = prepare_output(cfg);

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (fingerprint_file(graph_path) != ckpt.graph_fingerprint) {
    warn("graph file fingerprint differs from the one the checkpoint was trained on");
  }
  auto lap = laplacian_from_file(graph_path, ckpt.n_roads);
  Model model(ckpt.config, lap, ckpt.n_roads, cfg.train.seed);
  restore_params(model, ckpt);

  LoadedData data = load_and_split(cfg);
  if (data.n_roads != ckpt.n_roads) {
    throw DataError("data has n=" + std::to_string(data.n_roads) +
                    " roads but checkpoint was trained with n=" +
                    std::to_string(ckpt.n_roads));
  }
  const WindowSet w = windows_for_split(cfg, data, ckpt.stats, split);

  const PredictMode pm =
      mode == "recursive" ? PredictMode::recursive : PredictMode::direct;
  const MetricReport report = evaluate(model, w, ckpt.stats, pm);
  write_text_file((dir / "metrics.csv").string(), report.csv_line() + "\n");
  std::printf("%s split, %s\n%s\n", split.c_str(), mode.c_str(),
              report.table().c_str());
  return 0;
}

int cmd_predict(const CommonArgs& args, const std::string& ckpt_path,
                const std::string& graph_path, const std::string& mode,
                const std::string& split) {
  const ExperimentConfig cfg = resolve_config(args, true);
  const fs::path dir = prepare_output(cfg);

  const Checkpoint ckpt = load_checkpoint(ckpt_path);
  if (fingerprint_file(graph_path) != ckpt.graph_fingerprint) {
    warn("graph file fingerprint differs from the one the checkpoint was trained on");
  }
  auto lap = laplacian_from_file(graph_path, ckpt.n_roads);
  Model model(ckpt.config, lap, ckpt.n_roads, cfg.train.seed);
  restore_params(model, ckpt);

  LoadedData data = load_and_split(cfg);
  const WindowSet w = windows_for_split(cfg, data, ckpt.stats, split);

  DenseArray pred({w.count(), w.n_roads()});
  if (mode == "recursive") {
    if (ckpt.config.H != 1) {
      throw ConfigError("predict: recursive mode needs an H=1 checkpoint");
    }
    DenseArray roll = predict_recursive(model, w.inputs, w.H);
    for (std::int64_t b = 0; b < w.count(); ++b) {
      for (std::int64_t i = 0; i < w.n_roads(); ++i) {
        pred.at2(b, i) = roll.at3(b, w.H - 1, i);
      }
    }
  } else {
    if (ckpt.config.H != w.H) {
      throw ConfigError("predict: checkpoint horizon H=" +
                        std::to_string(ckpt.config.H) + " != requested H=" +
                        std::to_string(w.H));
    }
    pred = predict_direct(model, w.inputs);
  }
  save_predictions_csv((dir / "predictions.csv").string(),
                       invert_zscore(pred, ckpt.stats));
  std::printf("predictions written to %s\n", (dir / "predictions.csv").c_str());
  return 0;
}

int cmd_gradcheck(const CommonArgs& args, const std::string& corrupt) {
  const ExperimentConfig cfg = resolve_config(args, false);
  const GradCheckReport report = run_gradcheck(cfg.train.seed, corrupt);
  std::printf("%s", report.format().c_str());
  if (!report.passed) {
    throw VerifyError("gradient check failed");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D temporal graph convolution traffic forecasting toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string graph_path, ckpt_path, corrupt;
  std::string mode = "direct";
  std::string split = "test";

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* opt = sub->add_option("--config", common.config_path, "key=value config file");
    if (config_required) opt->required();
    sub->add_option("--workers", common.workers, "worker threads (0 = auto)");
    sub->add_option("--seed", common.seed, "override the config seed");
    sub->add_option("--output", common.output, "override the output directory");
    sub->add_flag("--header", common.header, "skip one header line in the speed CSV");
  };

  auto* build = app.add_subcommand("build-graph", "build the road graph");
  add_common(build, true);

  auto* train = app.add_subcommand("train", "train a forecasting model");
  add_common(train, true);
  train->add_option("--graph", graph_path, "edge-list graph file")->required();

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", ckpt_path)->required();
  eval->add_option("--graph", graph_path)->required();
  eval->add_option("--mode", mode)->check(CLI::IsMember({"direct", "recursive"}));
  eval->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));

  auto* predict = app.add_subcommand("predict", "write model predictions");
  add_common(predict, true);
  predict->add_option("--checkpoint", ckpt_path)->required();
  predict->add_option("--graph", graph_path)->required();
  predict->add_option("--mode", mode)->check(CLI::IsMember({"direct", "recursive"}));
  predict->add_option("--split", split)->check(CLI::IsMember({"train", "val", "test"}));

  auto* gradcheck = app.add_subcommand("gradcheck", "verify gradients by finite differences");
  add_common(gradcheck, false);
  gradcheck->add_option("--corrupt", corrupt)->group("");  // test hook, hidden

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (build->parsed()) return cmd_build_graph(common);
    if (train->parsed()) return cmd_train(common, graph_path);
    if (eval->parsed()) return cmd_evaluate(common, ckpt_path, graph_path, mode, split);
    if (predict->parsed()) return cmd_predict(common, ckpt_path, graph_path, mode, split);
    if (gradcheck->parsed()) return cmd_gradcheck(common, corrupt);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const VerifyError& e) {
    std::fprintf(stderr, "verification failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
