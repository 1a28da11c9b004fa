#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tgcn/nn.hpp"
#include "tgcn/speed_data.hpp"

namespace tgcn {

enum class OutputBlockKind { gconv, temporal };

struct TGCNConfig {
  int n_blocks = 4;
  int layers_per_block = 2;
  int channels = 64;
  int K = 3;
  int K_t = 2;
  int M = 12;
  int H = 3;
  OutputBlockKind output_block = OutputBlockKind::gconv;
  ChebBasis basis = ChebBasis::chebyshev;

  // Time steps left when the conv blocks have consumed their share.
  int remaining_time() const {
    return M - n_blocks * layers_per_block * (K_t - 1);
  }
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 50;
  double lr = 1e-2;
  double lr_decay = 0.7;
  int decay_every = 3;
  std::uint64_t seed = 42;
};

// The assembled network: n_blocks x [gconv -> gconv -> layer norm], then an
// output block that collapses the remaining time axis with one sigmoid conv,
// then a weight-shared per-node readout.
class Model {
 public:
  Model(const TGCNConfig& config, std::shared_ptr<const ScaledLaplacian> lap,
        std::int64_t n_roads, std::uint64_t seed);

  // X is B x M x n or B x M x n x 1, normalized units; returns B x n.
  DenseArray forward(const DenseArray& x);
  // Propagates the loss gradient (B x n) back through every layer.
  void backward(const DenseArray& grad_pred);

  // Registration order is fixed by construction and recorded in checkpoints.
  std::vector<Param*> params();

  // Time-axis length after the input, each block, and the output block;
  // defaults give 12 -> 10 -> 8 -> 6 -> 4 -> 1.
  std::vector<int> time_lengths() const;

  const TGCNConfig& config() const { return config_; }
  std::int64_t n_roads() const { return n_; }
  const ScaledLaplacian& laplacian() const { return *lap_; }

 private:
  TGCNConfig config_;
  std::shared_ptr<const ScaledLaplacian> lap_;
  std::int64_t n_ = 0;
  std::vector<std::unique_ptr<Layer>> stack_;  // conv blocks + output conv
  std::unique_ptr<SharedFCLayer> readout_;
  bool have_forward_ = false;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_mae = 0.0;  // denormalized
};

struct FitResult {
  std::vector<EpochStats> history;
  double best_val_mae = 0.0;
  int best_epoch = 0;
};

// Seeded-shuffle minibatch training with the staircase learning-rate decay
// lr0 * decay^floor((epoch-1)/decay_every). The best-validation parameters
// (by denormalized MAE) are restored into the model before returning.
FitResult fit(Model& model, const WindowSet& train, const WindowSet& val,
              const TrainConfig& tc, const NormStats& stats);

// One forward pass of a model trained for its configured horizon.
DenseArray predict_direct(Model& model, const DenseArray& x);

// Rolls a 1-step model forward `horizon` times, dropping the oldest input
// step and appending each prediction; returns B x horizon x n. When
// `window_trace` is given, the input window of every iteration is recorded.
DenseArray predict_recursive(Model& model, const DenseArray& x, int horizon,
                             std::vector<DenseArray>* window_trace = nullptr);

}  // namespace tgcn
