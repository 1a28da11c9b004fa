#include "tgcn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <stdexcept>

#include "tgcn/errors.hpp"

namespace tgcn {

Model::Model(const TGCNConfig& config, std::shared_ptr<const ScaledLaplacian> lap,
             std::int64_t n_roads, std::uint64_t seed)
    : config_(config), lap_(std::move(lap)), n_(n_roads) {
  if (config_.n_blocks < 1 || config_.layers_per_block < 1 ||
      config_.channels < 1 || config_.K < 1 || config_.K_t < 1 ||
      config_.M < 1 || config_.H < 1) {
    throw ConfigError("model: all architecture sizes must be positive");
  }
  const int remaining = config_.remaining_time();
  if (remaining < 1) {
    throw ConfigError(
        "model: conv blocks consume the whole time axis; M - "
        "n_blocks*layers_per_block*(K_t-1) = " +
        std::to_string(remaining) + ", deficit " + std::to_string(1 - remaining));
  }
  if (lap_ != nullptr && lap_->n() != n_) {
    throw DataError("model: Laplacian is " + std::to_string(lap_->n()) +
                    " nodes, data has " + std::to_string(n_));
  }

  RngStream init_rng(seed, "init");
  std::int64_t c_in = 1;
  for (int b = 0; b < config_.n_blocks; ++b) {
    stack_.push_back(std::make_unique<GConvBlock>(
        "block" + std::to_string(b + 1), n_, c_in, config_.channels,
        config_.layers_per_block, config_.K_t, config_.K, lap_.get(),
        config_.basis, init_rng));
    c_in = config_.channels;
  }
  // Output block: one conv with K_t spanning the whole remaining time axis,
  // sigmoid-activated, collapsing T to 1.
  const int out_korder = config_.output_block == OutputBlockKind::gconv ? config_.K : 1;
  stack_.push_back(std::make_unique<GConv3DLayer>(
      "output.conv", c_in, config_.channels, remaining, out_korder,
      Activation::sigmoid, lap_.get(), config_.basis, init_rng));
  readout_ = std::make_unique<SharedFCLayer>("output.fc", config_.channels,
                                             init_rng);
  // Near-zero readout: the network starts at the mean predictor instead of
  // unlearning init noise, which keeps the first hot-lr epochs stable.
  for (std::int64_t i = 0; i < readout_->weight().value.size(); ++i) {
    readout_->weight().value[i] *= 0.01;
  }
}

DenseArray Model::forward(const DenseArray& x) {
  DenseArray h;
  if (x.ndim() == 3) {
    h = DenseArray({x.dim(0), x.dim(1), x.dim(2), 1});
    std::memcpy(h.data(), x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
  } else if (x.ndim() == 4 && x.dim(3) == 1) {
    h = x;
  } else {
    throw DataError("model: input must be B x M x n (x 1)");
  }
  if (h.dim(1) != config_.M) {
    throw DataError("model: window length " + std::to_string(h.dim(1)) +
                    " != configured M=" + std::to_string(config_.M));
  }
  if (h.dim(2) != n_) {
    throw DataError("model: node axis " + std::to_string(h.dim(2)) +
                    " != configured n=" + std::to_string(n_));
  }

  for (auto& layer : stack_) h = layer->forward(h);
  // h is B x 1 x n x C here; squeeze the time axis for the readout.
  DenseArray squeezed({h.dim(0), h.dim(2), h.dim(3)});
  std::memcpy(squeezed.data(), h.data(), static_cast<std::size_t>(h.size()) * sizeof(double));
  have_forward_ = true;
  return readout_->forward(squeezed);
}

void Model::backward(const DenseArray& grad_pred) {
  if (!have_forward_) throw std::logic_error("model: backward before forward");
  DenseArray g = readout_->backward(grad_pred, true);
  DenseArray g4({g.dim(0), 1, g.dim(1), g.dim(2)});
  std::memcpy(g4.data(), g.data(), static_cast<std::size_t>(g.size()) * sizeof(double));
  g = std::move(g4);
  for (std::size_t i = stack_.size(); i-- > 0;) {
    const bool need_input = i > 0;
    g = stack_[i]->backward(g, need_input);
  }
  have_forward_ = false;
}

std::vector<Param*> Model::params() {
  std::vector<Param*> out;
  for (auto& layer : stack_) layer->collect_params(out);
  readout_->collect_params(out);
  return out;
}

std::vector<int> Model::time_lengths() const {
  std::vector<int> lengths{config_.M};
  int t = config_.M;
  for (int b = 0; b < config_.n_blocks; ++b) {
    t -= config_.layers_per_block * (config_.K_t - 1);
    lengths.push_back(t);
  }
  lengths.push_back(1);  // output block collapses the rest
  return lengths;
}

namespace {

DenseArray gather_batch(const DenseArray& src, std::span<const std::int64_t> idx) {
  std::vector<std::int64_t> shape = src.shape();
  shape[0] = static_cast<std::int64_t>(idx.size());
  DenseArray out(shape);
  const std::int64_t sample = src.size() / src.dim(0);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::memcpy(out.data() + static_cast<std::int64_t>(i) * sample,
                src.data() + idx[i] * sample,
                static_cast<std::size_t>(sample) * sizeof(double));
  }
  return out;
}

// Forward a window set through the model in fixed-size chunks; predictions
// land in sample order, so the chunk size never changes the result.
DenseArray forward_all(Model& model, const WindowSet& ws, int chunk) {
  const std::int64_t total = ws.count();
  const std::int64_t n = ws.n_roads();
  DenseArray preds({total, n});
  std::vector<std::int64_t> idx;
  for (std::int64_t b0 = 0; b0 < total; b0 += chunk) {
    const std::int64_t b1 = std::min<std::int64_t>(b0 + chunk, total);
    idx.clear();
    for (std::int64_t b = b0; b < b1; ++b) idx.push_back(b);
    DenseArray out = model.forward(gather_batch(ws.inputs, idx));
    std::memcpy(preds.data() + b0 * n, out.data(),
                static_cast<std::size_t>(out.size()) * sizeof(double));
  }
  return preds;
}

double mae_denorm(const DenseArray& pred, const DenseArray& target,
                  const NormStats& stats) {
  const DenseArray p = invert_zscore(pred, stats);
  const DenseArray t = invert_zscore(target, stats);
  double acc = 0.0;
  for (std::int64_t i = 0; i < p.size(); ++i) acc += std::fabs(p[i] - t[i]);
  return acc / static_cast<double>(p.size());
}

}  // namespace

FitResult fit(Model& model, const WindowSet& train, const WindowSet& val,
              const TrainConfig& tc, const NormStats& stats) {
  if (train.count() == 0 || val.count() == 0) {
    throw DataError("fit: empty window set");
  }
  if (train.H != model.config().H) {
    throw ConfigError("fit: windows built for H=" + std::to_string(train.H) +
                      " but model expects H=" + std::to_string(model.config().H));
  }
  if (tc.epochs < 1 || tc.batch_size < 1) {
    throw ConfigError("fit: epochs and batch_size must be positive");
  }
  if (!(tc.lr > 0.0) || !(tc.lr_decay > 0.0 && tc.lr_decay <= 1.0)) {
    throw ConfigError("fit: lr must be > 0 and lr_decay in (0,1]");
  }

  RngStream shuffle_rng(tc.seed, "shuffle");
  std::vector<Param*> params = model.params();

  FitResult result;
  result.best_val_mae = std::numeric_limits<double>::infinity();
  std::vector<DenseArray> best_values;

  std::vector<std::int64_t> order(static_cast<std::size_t>(train.count()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::int64_t>(i);

  int step = 0;
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    const double lr =
        tc.lr * std::pow(tc.lr_decay, (epoch - 1) / tc.decay_every);
    shuffle_rng.shuffle(order);

    double loss_sum = 0.0;
    DenseArray grad;
    for (std::int64_t b0 = 0; b0 < train.count(); b0 += tc.batch_size) {
      const std::int64_t b1 = std::min<std::int64_t>(b0 + tc.batch_size, train.count());
      const std::span<const std::int64_t> idx(order.data() + b0,
                                              static_cast<std::size_t>(b1 - b0));
      DenseArray inputs = gather_batch(train.inputs, idx);
      DenseArray targets = gather_batch(train.targets_direct, idx);

      DenseArray pred = model.forward(inputs);
      const double loss = combined_loss(pred, targets, &grad);
      loss_sum += loss * static_cast<double>(b1 - b0);

      for (Param* p : params) p->zero_grad();
      model.backward(grad);
      AdamConfig ac;
      ac.lr = lr;
      adam_update(params, ++step, ac);
    }

    // Validation pass with the epoch's parameters.
    DenseArray val_pred = forward_all(model, val, tc.batch_size);
    const double val_loss = combined_loss(val_pred, val.targets_direct, nullptr);
    const double val_mae = mae_denorm(val_pred, val.targets_direct, stats);

    EpochStats es;
    es.epoch = epoch;
    es.lr = lr;
    es.train_loss = loss_sum / static_cast<double>(train.count());
    es.val_loss = val_loss;
    es.val_mae = val_mae;
    result.history.push_back(es);

    if (val_mae < result.best_val_mae) {
      result.best_val_mae = val_mae;
      result.best_epoch = epoch;
      best_values.clear();
      for (Param* p : params) best_values.push_back(p->value);
    }
  }

  if (best_values.empty()) {
    throw VerifyError("fit: validation MAE never became finite; training diverged");
  }
  // Leave the model holding the best-validation parameters.
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = best_values[i];
  }
  return result;
}

DenseArray predict_direct(Model& model, const DenseArray& x) {
  return model.forward(x);
}

DenseArray predict_recursive(Model& model, const DenseArray& x, int horizon,
                             std::vector<DenseArray>* window_trace) {
  if (horizon < 1) throw ConfigError("predict_recursive: horizon must be >= 1");
  if (model.config().H != 1) {
    throw ConfigError("predict_recursive: model was trained for H=" +
                      std::to_string(model.config().H) + ", need H=1");
  }
  DenseArray window;
  if (x.ndim() == 3) {
    window = x;
  } else if (x.ndim() == 4 && x.dim(3) == 1) {
    window = DenseArray({x.dim(0), x.dim(1), x.dim(2)});
    std::memcpy(window.data(), x.data(), static_cast<std::size_t>(x.size()) * sizeof(double));
  } else {
    throw DataError("predict_recursive: input must be B x M x n (x 1)");
  }

  const std::int64_t batch = window.dim(0);
  const std::int64_t m = window.dim(1);
  const std::int64_t n = window.dim(2);
  DenseArray out({batch, horizon, n});

  for (int h = 0; h < horizon; ++h) {
    if (window_trace != nullptr) window_trace->push_back(window);
    DenseArray pred = model.forward(window);  // B x n
    for (std::int64_t b = 0; b < batch; ++b) {
      for (std::int64_t i = 0; i < n; ++i) out.at3(b, h, i) = pred.at2(b, i);
    }
    // Slide: drop the oldest step, append the prediction as the newest.
    DenseArray next({batch, m, n});
    for (std::int64_t b = 0; b < batch; ++b) {
      std::memcpy(next.data() + (b * m) * n, window.data() + (b * m + 1) * n,
                  static_cast<std::size_t>((m - 1) * n) * sizeof(double));
      std::memcpy(next.data() + (b * m + m - 1) * n, pred.data() + b * n,
                  static_cast<std::size_t>(n) * sizeof(double));
    }
    window = std::move(next);
  }
  return out;
}

}  // namespace tgcn
