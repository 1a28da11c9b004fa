#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tgcn/dense_array.hpp"
#include "tgcn/dtw.hpp"
#include "tgcn/graph.hpp"
#include "tgcn/model.hpp"
#include "tgcn/speed_data.hpp"

namespace tgcn {

// Full n x n matrix, one CSV row per road.
void save_distance_matrix(const std::string& path, const DistanceMatrix& d);
DistanceMatrix load_distance_matrix(const std::string& path);

// Edge list with a "# n=<n> kind=<temporal|spatial>" header and one
// "i,j,weight" line per upper-triangle edge; symmetric closure on load.
void save_adjacency(const std::string& path, const Adjacency& w);
Adjacency load_adjacency(const std::string& path);

// Two-line "mean=...\nstd=..." file; per-road stats hold comma-separated lists.
void save_norm_stats(const std::string& path, const NormStats& stats);
NormStats load_norm_stats(const std::string& path);

void save_history_csv(const std::string& path, const std::vector<EpochStats>& history);

// B x n matrix of denormalized predictions.
void save_predictions_csv(const std::string& path, const DenseArray& pred);

// Generic numeric CSV -> 2-d array (used for road-distance inputs).
DenseArray load_matrix_csv(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);

// FNV-1a over the file bytes; the checkpoint stores this for the graph file.
std::uint64_t fingerprint_file(const std::string& path);

}  // namespace tgcn
