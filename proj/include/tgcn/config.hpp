#pragma once

#include <cstdint>
#include <string>

#include "tgcn/model.hpp"

namespace tgcn {

// One flat key=value file drives every command. Unknown keys are rejected;
// each run echoes the fully resolved config next to its outputs, and the
// echo parses back to the identical configuration.
struct ExperimentConfig {
  // data
  std::string data;
  bool header = false;
  int steps_per_day = 288;
  double train_frac = 0.7;
  double val_frac = 0.1;
  std::string normalization = "global";  // global | per_road

  // graph
  std::string graph_kind = "temporal";  // temporal | spatial
  double sparsity = 0.05;
  double sigma2 = 0.0;    // spatial only; 0 means unset
  double epsilon = -1.0;  // spatial only; negative means unset
  int band = -1;          // Sakoe-Chiba half-width; negative means none
  std::string road_dist;  // spatial only: n x n distance CSV

  // architecture + training
  TGCNConfig model;
  TrainConfig train;

  // execution
  int workers = 0;  // 0 = OpenMP default
  std::string output = "out";

  std::string serialize() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace tgcn
