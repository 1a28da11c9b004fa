#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tgcn/model.hpp"
#include "tgcn/speed_data.hpp"

namespace tgcn {

// Binary model snapshot: architecture, normalization stats, the parameter
// manifest (names + shapes in registration order), the flat 64-bit payload,
// and a fingerprint of the graph file the model was trained against.
// Loading a mismatched format version is a hard error; a mismatched graph
// fingerprint is the caller's business (the CLI warns).
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  TGCNConfig config;
  std::int64_t n_roads = 0;
  NormStats stats;
  std::uint64_t graph_fingerprint = 0;
  std::vector<std::pair<std::string, std::vector<std::int64_t>>> manifest;
  std::vector<double> payload;
};

Checkpoint make_checkpoint(Model& model, const NormStats& stats,
                           std::uint64_t graph_fingerprint);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies the payload into a freshly built model; manifest must match the
// model's registration order exactly.
void restore_params(Model& model, const Checkpoint& ckpt);

}  // namespace tgcn
