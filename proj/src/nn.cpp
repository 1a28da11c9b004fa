#include "tgcn/nn.hpp"

#include <omp.h>

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "tgcn/errors.hpp"

namespace tgcn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void ensure_shape(DenseArray& a, const std::vector<std::int64_t>& shape) {
  if (a.shape() != shape) a = DenseArray(shape);
}

}  // namespace

void glorot_init(Param& p, std::int64_t fan_in, std::int64_t fan_out,
                 RngStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::int64_t i = 0; i < p.value.size(); ++i) {
    p.value[i] = rng.uniform(-a, a);
  }
}

void gemm_accum(const double* a, const double* b, double* c, std::int64_t rows,
                std::int64_t kdim, std::int64_t cols) {
  // Two output rows per iteration so each loaded B row feeds two FMAs.
#pragma omp parallel for schedule(static)
  for (std::int64_t r0 = 0; r0 < rows; r0 += 2) {
    if (r0 + 2 <= rows) {
      const double* a0 = a + (r0 + 0) * kdim;
      const double* a1 = a + (r0 + 1) * kdim;
      double* c0 = c + (r0 + 0) * cols;
      double* c1 = c + (r0 + 1) * cols;
      for (std::int64_t k = 0; k < kdim; ++k) {
        const double v0 = a0[k];
        const double v1 = a1[k];
        const double* bk = b + k * cols;
        for (std::int64_t j = 0; j < cols; ++j) {
          c0[j] += v0 * bk[j];
          c1[j] += v1 * bk[j];
        }
      }
    } else {
      const double* ar = a + r0 * kdim;
      double* cr = c + r0 * cols;
      for (std::int64_t k = 0; k < kdim; ++k) {
        const double av = ar[k];
        const double* bk = b + k * cols;
        for (std::int64_t j = 0; j < cols; ++j) cr[j] += av * bk[j];
      }
    }
  }
}

void gemm_at_b_accum(const double* a, const double* b, double* c,
                     std::int64_t rows, std::int64_t kdim, std::int64_t cols) {
  // Workers own disjoint slices of the kdim axis; rows stream in panels so
  // the C block is touched once per panel instead of once per row. Each C
  // entry still accumulates over rows in ascending order for every worker
  // count and panel size.
  constexpr std::int64_t kPanel = 32;
  constexpr std::int64_t kMaxCols = 256;
  if (cols > kMaxCols) {
    for (std::int64_t j0 = 0; j0 < cols; j0 += kMaxCols) {
      // fall back to per-column-chunk recursion for very wide outputs
      const std::int64_t jw = std::min(kMaxCols, cols - j0);
      std::vector<double> bc(static_cast<std::size_t>(rows * jw));
      for (std::int64_t r = 0; r < rows; ++r) {
        std::memcpy(bc.data() + r * jw, b + r * cols + j0,
                    static_cast<std::size_t>(jw) * sizeof(double));
      }
      std::vector<double> cc(static_cast<std::size_t>(kdim * jw), 0.0);
      gemm_at_b_accum(a, bc.data(), cc.data(), rows, kdim, jw);
      for (std::int64_t f = 0; f < kdim; ++f) {
        for (std::int64_t j = 0; j < jw; ++j) c[f * cols + j0 + j] += cc[static_cast<std::size_t>(f * jw + j)];
      }
    }
    return;
  }
#pragma omp parallel
  {
    const int nth = omp_get_num_threads();
    const int tid = omp_get_thread_num();
    const std::int64_t f0 = kdim * tid / nth;
    const std::int64_t f1 = kdim * (tid + 1) / nth;
    double acc[kMaxCols];
    for (std::int64_t r0 = 0; r0 < rows; r0 += kPanel) {
      const std::int64_t r1 = std::min(r0 + kPanel, rows);
      for (std::int64_t f = f0; f < f1; ++f) {
        for (std::int64_t j = 0; j < cols; ++j) acc[j] = 0.0;
        for (std::int64_t r = r0; r < r1; ++r) {
          const double av = a[r * kdim + f];
          const double* br = b + r * cols;
          for (std::int64_t j = 0; j < cols; ++j) acc[j] += av * br[j];
        }
        double* cf = c + f * cols;
        for (std::int64_t j = 0; j < cols; ++j) cf[j] += acc[j];
      }
    }
  }
}


// ---------------------------------------------------------------------------
// GConv3DLayer

GConv3DLayer::GConv3DLayer(std::string name, std::int64_t c_in,
                           std::int64_t c_out, int kt, int korder,
                           Activation act, const ScaledLaplacian* lap,
                           ChebBasis basis, RngStream& rng)
    : name_(std::move(name)),
      c_in_(c_in),
      c_out_(c_out),
      c_raw_(act == Activation::glu ? 2 * c_out : c_out),
      kt_(kt),
      korder_(korder),
      act_(act),
      lap_(lap),
      basis_(basis) {
  if (kt_ < 1 || korder_ < 1) throw ConfigError(name_ + ": K_t and K must be >= 1");
  if (korder_ > 1 && lap_ == nullptr) {
    throw ConfigError(name_ + ": graph filter of order > 1 needs a Laplacian");
  }
  theta_ = Param(name_ + ".theta", {c_in_, c_raw_, kt_, korder_});
  bias_ = Param(name_ + ".bias", {c_raw_});
  glorot_init(theta_, c_in_ * kt_ * korder_, c_raw_ * kt_ * korder_, rng);
}

DenseArray GConv3DLayer::forward(const DenseArray& x) {
  if (x.ndim() != 4) throw DataError(name_ + ": input must be B x T x n x C");
  const std::int64_t batch = x.dim(0);
  const std::int64_t t_in = x.dim(1);
  const std::int64_t n = x.dim(2);
  if (x.dim(3) != c_in_) {
    throw DataError(name_ + ": channel axis is " + std::to_string(x.dim(3)) +
                    ", expected " + std::to_string(c_in_));
  }
  if (lap_ != nullptr && n != lap_->n()) {
    throw DataError(name_ + ": node axis is " + std::to_string(n) +
                    ", expected " + std::to_string(lap_->n()));
  }
  if (t_in < kt_) {
    throw DataError(name_ + ": time axis " + std::to_string(t_in) +
                    " shorter than kernel K_t=" + std::to_string(kt_));
  }
  const std::int64_t t_out = t_in - kt_ + 1;
  in_shape_ = x.shape();

  // Graph-filtered stack Ych[b,t,k,v,i] = (P_k(L~) X[b,t])[v,i].
  ensure_shape(ych_, {batch, t_in, korder_, n, c_in_});
  const std::int64_t slice = n * c_in_;
  if (korder_ == 1 || lap_ == nullptr) {
    std::memcpy(ych_.data(), x.data(),
                static_cast<std::size_t>(x.size()) * sizeof(double));
  } else {
#pragma omp parallel for schedule(static)
    for (std::int64_t bt = 0; bt < batch * t_in; ++bt) {
      cheb_apply_into(*lap_, x.data() + bt * slice, n, c_in_, korder_, basis_,
                      ych_.data() + bt * korder_ * slice);
    }
  }

  // im2col: rows (b, t_out, v) x features (t', k, i); kept for backward.
  const std::int64_t rows = batch * t_out * n;
  const std::int64_t kdim = static_cast<std::int64_t>(kt_) * korder_ * c_in_;
  ensure_shape(acol_, {rows, kdim});
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const std::int64_t v = r % n;
    const std::int64_t bt = r / n;
    const std::int64_t t = bt % t_out;
    const std::int64_t b = bt / t_out;
    double* dst = acol_.data() + r * kdim;
    for (std::int64_t tp = 0; tp < kt_; ++tp) {
      const std::int64_t ts = t + kt_ - 1 - tp;
      for (std::int64_t k = 0; k < korder_; ++k) {
        const double* src =
            ych_.data() + (((b * t_in + ts) * korder_ + k) * n + v) * c_in_;
        std::memcpy(dst + (tp * korder_ + k) * c_in_, src,
                    static_cast<std::size_t>(c_in_) * sizeof(double));
      }
    }
  }

  // Pack theta[i, c, t', k] into the GEMM weight layout [(t',k,i), c].
  DenseArray wmat({kdim, c_raw_});
  for (std::int64_t i = 0; i < c_in_; ++i) {
    for (std::int64_t c = 0; c < c_raw_; ++c) {
      for (std::int64_t tp = 0; tp < kt_; ++tp) {
        for (std::int64_t k = 0; k < korder_; ++k) {
          wmat.at2((tp * korder_ + k) * c_in_ + i, c) = theta_.value.at4(i, c, tp, k);
        }
      }
    }
  }

  ensure_shape(z_, {batch, t_out, n, c_raw_});
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    double* zr = z_.data() + r * c_raw_;
    for (std::int64_t c = 0; c < c_raw_; ++c) zr[c] = bias_.value[c];
  }
  gemm_accum(acol_.data(), wmat.data(), z_.data(), rows, kdim, c_raw_);

  DenseArray out({batch, t_out, n, c_out_});
  if (act_ == Activation::glu) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* zr = z_.data() + r * c_raw_;
      double* outr = out.data() + r * c_out_;
      for (std::int64_t c = 0; c < c_out_; ++c) {
        outr[c] = zr[c] * sigmoid(zr[c_out_ + c]);
      }
    }
  } else if (act_ == Activation::sigmoid) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* zr = z_.data() + r * c_raw_;
      double* outr = out.data() + r * c_out_;
      for (std::int64_t c = 0; c < c_out_; ++c) outr[c] = sigmoid(zr[c]);
    }
  } else {
    std::memcpy(out.data(), z_.data(),
                static_cast<std::size_t>(out.size()) * sizeof(double));
  }
  have_forward_ = true;
  check_finite(out, name_.c_str());
  return out;
}

DenseArray GConv3DLayer::backward(const DenseArray& grad_out,
                                  bool need_input_grad) {
  if (!have_forward_) throw std::logic_error(name_ + ": backward before forward");
  const std::int64_t batch = in_shape_[0];
  const std::int64_t t_in = in_shape_[1];
  const std::int64_t n = in_shape_[2];
  const std::int64_t t_out = t_in - kt_ + 1;
  const std::int64_t rows = batch * t_out * n;
  const std::int64_t kdim = static_cast<std::int64_t>(kt_) * korder_ * c_in_;

  // Activation backward into dZ.
  ensure_shape(dz_, {batch, t_out, n, c_raw_});
  DenseArray& dz = dz_;
  if (act_ == Activation::glu) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* zr = z_.data() + r * c_raw_;
      const double* gr = grad_out.data() + r * c_out_;
      double* dzr = dz.data() + r * c_raw_;
      for (std::int64_t c = 0; c < c_out_; ++c) {
        const double s = sigmoid(zr[c_out_ + c]);
        dzr[c] = gr[c] * s;
        dzr[c_out_ + c] = gr[c] * zr[c] * s * (1.0 - s);
      }
    }
  } else if (act_ == Activation::sigmoid) {
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* zr = z_.data() + r * c_raw_;
      const double* gr = grad_out.data() + r * c_out_;
      double* dzr = dz.data() + r * c_raw_;
      for (std::int64_t c = 0; c < c_out_; ++c) {
        const double s = sigmoid(zr[c]);
        dzr[c] = gr[c] * s * (1.0 - s);
      }
    }
  } else {
    std::memcpy(dz.data(), grad_out.data(),
                static_cast<std::size_t>(dz.size()) * sizeof(double));
  }

  // Bias gradient: serial over rows, fixed order.
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* dzr = dz.data() + r * c_raw_;
    for (std::int64_t c = 0; c < c_raw_; ++c) bias_.grad[c] += dzr[c];
  }

  // dW = A^T dZ (A kept from the forward pass), scattered into theta.
  DenseArray dwmat({kdim, c_raw_});
  gemm_at_b_accum(acol_.data(), dz.data(), dwmat.data(), rows, kdim, c_raw_);
  for (std::int64_t i = 0; i < c_in_; ++i) {
    for (std::int64_t c = 0; c < c_raw_; ++c) {
      for (std::int64_t tp = 0; tp < kt_; ++tp) {
        for (std::int64_t k = 0; k < korder_; ++k) {
          theta_.grad.at4(i, c, tp, k) += dwmat.at2((tp * korder_ + k) * c_in_ + i, c);
        }
      }
    }
  }

  have_forward_ = false;
  if (!need_input_grad) return DenseArray();

  // dA = dZ W^T, with W^T packed once so the product runs in AXPY form.
  DenseArray wmat_t({c_raw_, kdim});
  for (std::int64_t i = 0; i < c_in_; ++i) {
    for (std::int64_t c = 0; c < c_raw_; ++c) {
      for (std::int64_t tp = 0; tp < kt_; ++tp) {
        for (std::int64_t k = 0; k < korder_; ++k) {
          wmat_t.at2(c, (tp * korder_ + k) * c_in_ + i) = theta_.value.at4(i, c, tp, k);
        }
      }
    }
  }
  ensure_shape(dacol_, {rows, kdim});
  dacol_.fill(0.0);
  gemm_accum(dz.data(), wmat_t.data(), dacol_.data(), rows, c_raw_, kdim);
  DenseArray& dacol = dacol_;

  // col2im gather: dYch[b,ts,k,v,i] sums the taps that read that slot.
  ensure_shape(dych_, {batch, t_in, korder_, n, c_in_});
  DenseArray& dych = dych_;
#pragma omp parallel for schedule(static)
  for (std::int64_t bt = 0; bt < batch * t_in; ++bt) {
    const std::int64_t ts = bt % t_in;
    const std::int64_t b = bt / t_in;
    for (std::int64_t k = 0; k < korder_; ++k) {
      for (std::int64_t v = 0; v < n; ++v) {
        double* dst = dych.data() + (((b * t_in + ts) * korder_ + k) * n + v) * c_in_;
        bool wrote = false;
        for (std::int64_t tp = 0; tp < kt_; ++tp) {
          const std::int64_t t = ts - kt_ + 1 + tp;
          if (t < 0 || t >= t_out) continue;
          const std::int64_t r = (b * t_out + t) * n + v;
          const double* src = dacol.data() + r * kdim + (tp * korder_ + k) * c_in_;
          if (!wrote) {
            std::memcpy(dst, src, static_cast<std::size_t>(c_in_) * sizeof(double));
            wrote = true;
          } else {
            for (std::int64_t i = 0; i < c_in_; ++i) dst[i] += src[i];
          }
        }
        if (!wrote) {
          std::memset(dst, 0, static_cast<std::size_t>(c_in_) * sizeof(double));
        }
      }
    }
  }

  // Adjoint of the graph filtering: dX[b,t] = sum_k P_k(L~) dYch[b,t,k]
  // (P_k is symmetric, so it is its own transpose).
  DenseArray dx({batch, t_in, n, c_in_});
  const std::int64_t slice = n * c_in_;
  if (korder_ == 1 || lap_ == nullptr) {
    std::memcpy(dx.data(), dych.data(),
                static_cast<std::size_t>(dx.size()) * sizeof(double));
  } else {
    std::vector<double> scratch(
        static_cast<std::size_t>(omp_get_max_threads()) * 3 *
        static_cast<std::size_t>(slice));
#pragma omp parallel for schedule(static)
    for (std::int64_t bt = 0; bt < batch * t_in; ++bt) {
      double* work = scratch.data() +
                     static_cast<std::size_t>(omp_get_thread_num()) * 3 *
                         static_cast<std::size_t>(slice);
      double* dxs = dx.data() + bt * slice;
      for (std::int64_t k = 0; k < korder_; ++k) {
        const double* g = dych.data() + (bt * korder_ + k) * slice;
        if (k == 0) {
          for (std::int64_t e = 0; e < slice; ++e) dxs[e] += g[e];
          continue;
        }
        // p = P_k(L~) g by running the recursion on g.
        double* prev2 = work;              // P_{k-2} g
        double* prev1 = work + slice;      // P_{k-1} g
        double* cur = work + 2 * slice;
        std::memcpy(prev2, g, static_cast<std::size_t>(slice) * sizeof(double));
        lap_->matrix.apply_block(g, prev1, c_in_);
        for (std::int64_t kk = 2; kk <= k; ++kk) {
          lap_->matrix.apply_block(prev1, cur, c_in_);
          if (basis_ == ChebBasis::chebyshev) {
            for (std::int64_t e = 0; e < slice; ++e) cur[e] = 2.0 * cur[e] - prev2[e];
          }
          std::swap(prev2, prev1);
          std::swap(prev1, cur);
        }
        for (std::int64_t e = 0; e < slice; ++e) dxs[e] += prev1[e];
      }
    }
  }
  return dx;
}

void GConv3DLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&theta_);
  out.push_back(&bias_);
}

// ---------------------------------------------------------------------------
// GConvBlock

GConvBlock::GConvBlock(std::string name, std::int64_t n, std::int64_t c_in,
                       std::int64_t channels, int layers, int kt, int korder,
                       const ScaledLaplacian* lap, ChebBasis basis,
                       RngStream& rng)
    : name_(std::move(name)), c_in_(c_in), channels_(channels) {
  std::int64_t c = c_in;
  for (int l = 0; l < layers; ++l) {
    convs_.push_back(std::make_unique<GConv3DLayer>(
        name_ + ".conv" + std::to_string(l + 1), c, channels, kt, korder,
        Activation::glu, lap, basis, rng));
    c = channels;
  }
  norm_ = std::make_unique<LayerNormLayer>(name_ + ".norm", n, channels);
}

DenseArray GConvBlock::forward(const DenseArray& x) {
  in_shape_ = x.shape();
  DenseArray h = x;
  for (auto& conv : convs_) h = conv->forward(h);
  h = norm_->forward(h);

  // Skip past the normalization: input at each output's newest covered
  // step, channels zero-padded, added to the normalized conv branch.
  const std::int64_t t_in = x.dim(1);
  const std::int64_t t_out = h.dim(1);
  const std::int64_t dt = t_in - t_out;
  const std::int64_t n = h.dim(2);
  const std::int64_t c_copy = std::min(c_in_, channels_);
#pragma omp parallel for schedule(static)
  for (std::int64_t bt = 0; bt < h.dim(0) * t_out; ++bt) {
    const std::int64_t b = bt / t_out;
    const std::int64_t t = bt % t_out;
    for (std::int64_t v = 0; v < n; ++v) {
      double* hr = h.data() + ((bt * n) + v) * channels_;
      const double* xr = x.data() + (((b * t_in) + t + dt) * n + v) * c_in_;
      for (std::int64_t cc = 0; cc < c_copy; ++cc) hr[cc] += xr[cc];
    }
  }
  return h;
}

DenseArray GConvBlock::backward(const DenseArray& grad_out,
                                bool need_input_grad) {
  DenseArray g = norm_->backward(grad_out, true);
  const std::int64_t t_out = grad_out.dim(1);
  const std::int64_t n = grad_out.dim(2);
  const std::int64_t t_in = in_shape_[1];
  const std::int64_t dt = t_in - t_out;
  const std::int64_t c_copy = std::min(c_in_, channels_);

  DenseArray dskip;
  if (need_input_grad) {
    dskip = DenseArray(in_shape_);
#pragma omp parallel for schedule(static)
    for (std::int64_t bt = 0; bt < grad_out.dim(0) * t_out; ++bt) {
      const std::int64_t b = bt / t_out;
      const std::int64_t t = bt % t_out;
      for (std::int64_t v = 0; v < n; ++v) {
        const double* gr = grad_out.data() + ((bt * n) + v) * channels_;
        double* dr = dskip.data() + (((b * t_in) + t + dt) * n + v) * c_in_;
        for (std::int64_t cc = 0; cc < c_copy; ++cc) dr[cc] += gr[cc];
      }
    }
  }

  for (std::size_t l = convs_.size(); l-- > 0;) {
    const bool need = need_input_grad || l > 0;
    g = convs_[l]->backward(g, need);
  }
  if (!need_input_grad) return DenseArray();
  for (std::int64_t i = 0; i < g.size(); ++i) g[i] += dskip[i];
  return g;
}

void GConvBlock::collect_params(std::vector<Param*>& out) {
  for (auto& conv : convs_) conv->collect_params(out);
  norm_->collect_params(out);
}

// ---------------------------------------------------------------------------
// LayerNormLayer

LayerNormLayer::LayerNormLayer(std::string name, std::int64_t n,
                               std::int64_t channels)
    : name_(std::move(name)), n_(n), c_(channels) {
  if (n_ * c_ < 2) throw ConfigError(name_ + ": needs at least 2 normalized elements");
  gamma_ = Param(name_ + ".gamma", {n_, c_});
  beta_ = Param(name_ + ".beta", {n_, c_});
  gamma_.value.fill(1.0);
}

DenseArray LayerNormLayer::forward(const DenseArray& x) {
  if (x.ndim() != 4 || x.dim(2) != n_ || x.dim(3) != c_) {
    throw DataError(name_ + ": input must be B x T x " + std::to_string(n_) +
                    " x " + std::to_string(c_));
  }
  const std::int64_t batch = x.dim(0);
  const std::int64_t t_len = x.dim(1);
  const std::int64_t slice = n_ * c_;
  const double count = static_cast<double>(slice);

  ensure_shape(xhat_, x.shape());
  ensure_shape(inv_std_, {batch, t_len});
  DenseArray out = DenseArray::zeros_like(x);

#pragma omp parallel for schedule(static)
  for (std::int64_t bt = 0; bt < batch * t_len; ++bt) {
    const double* xs = x.data() + bt * slice;
    double* xh = xhat_.data() + bt * slice;
    double* os = out.data() + bt * slice;
    double mean = 0.0;
    for (std::int64_t e = 0; e < slice; ++e) mean += xs[e];
    mean /= count;
    double var = 0.0;
    for (std::int64_t e = 0; e < slice; ++e) {
      const double d = xs[e] - mean;
      var += d * d;
    }
    var /= count;
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    inv_std_[bt] = inv;
    for (std::int64_t e = 0; e < slice; ++e) {
      xh[e] = (xs[e] - mean) * inv;
      os[e] = gamma_.value[e] * xh[e] + beta_.value[e];
    }
  }
  have_forward_ = true;
  check_finite(out, name_.c_str());
  return out;
}

DenseArray LayerNormLayer::backward(const DenseArray& grad_out,
                                    bool need_input_grad) {
  if (!have_forward_) throw std::logic_error(name_ + ": backward before forward");
  const std::int64_t batch = grad_out.dim(0);
  const std::int64_t t_len = grad_out.dim(1);
  const std::int64_t slice = n_ * c_;
  const double count = static_cast<double>(slice);

  // Parameter gradients: workers own node rows; (b,t) scanned in order.
#pragma omp parallel for schedule(static)
  for (std::int64_t v = 0; v < n_; ++v) {
    double* dg = gamma_.grad.data() + v * c_;
    double* db = beta_.grad.data() + v * c_;
    for (std::int64_t bt = 0; bt < batch * t_len; ++bt) {
      const double* g = grad_out.data() + bt * slice + v * c_;
      const double* xh = xhat_.data() + bt * slice + v * c_;
      for (std::int64_t ch = 0; ch < c_; ++ch) {
        dg[ch] += g[ch] * xh[ch];
        db[ch] += g[ch];
      }
    }
  }

  have_forward_ = false;
  if (!need_input_grad) return DenseArray();

  DenseArray dx({batch, t_len, n_, c_});
#pragma omp parallel for schedule(static)
  for (std::int64_t bt = 0; bt < batch * t_len; ++bt) {
    const double* g = grad_out.data() + bt * slice;
    const double* xh = xhat_.data() + bt * slice;
    double* dxs = dx.data() + bt * slice;
    const double inv = inv_std_[bt];
    double mean_gg = 0.0;
    double mean_gx = 0.0;
    for (std::int64_t e = 0; e < slice; ++e) {
      const double gg = g[e] * gamma_.value[e];
      mean_gg += gg;
      mean_gx += gg * xh[e];
    }
    mean_gg /= count;
    mean_gx /= count;
    for (std::int64_t e = 0; e < slice; ++e) {
      const double gg = g[e] * gamma_.value[e];
      dxs[e] = inv * (gg - mean_gg - xh[e] * mean_gx);
    }
  }
  return dx;
}

void LayerNormLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

// ---------------------------------------------------------------------------
// SharedFCLayer

SharedFCLayer::SharedFCLayer(std::string name, std::int64_t channels,
                             RngStream& rng)
    : name_(std::move(name)), c_(channels) {
  w_ = Param(name_ + ".w", {c_});
  b_ = Param(name_ + ".b", {1});
  glorot_init(w_, c_, 1, rng);
}

DenseArray SharedFCLayer::forward(const DenseArray& x) {
  if (x.ndim() != 3 || x.dim(2) != c_) {
    throw DataError(name_ + ": input must be B x n x " + std::to_string(c_));
  }
  input_ = x;
  const std::int64_t batch = x.dim(0);
  const std::int64_t n = x.dim(1);
  DenseArray out({batch, n});
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < batch * n; ++r) {
    const double* xr = x.data() + r * c_;
    double acc = b_.value[0];
    for (std::int64_t ch = 0; ch < c_; ++ch) acc += w_.value[ch] * xr[ch];
    out[r] = acc;
  }
  have_forward_ = true;
  check_finite(out, name_.c_str());
  return out;
}

DenseArray SharedFCLayer::backward(const DenseArray& grad_out,
                                   bool need_input_grad) {
  if (!have_forward_) throw std::logic_error(name_ + ": backward before forward");
  const std::int64_t batch = input_.dim(0);
  const std::int64_t n = input_.dim(1);
  const std::int64_t rows = batch * n;

  // dw[c] = sum_r grad[r] X[r,c]; serial over rows per channel slice.
#pragma omp parallel
  {
    const int nth = omp_get_num_threads();
    const int tid = omp_get_thread_num();
    const std::int64_t c0 = c_ * tid / nth;
    const std::int64_t c1 = c_ * (tid + 1) / nth;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double g = grad_out[r];
      const double* xr = input_.data() + r * c_;
      for (std::int64_t ch = c0; ch < c1; ++ch) w_.grad[ch] += g * xr[ch];
    }
  }
  for (std::int64_t r = 0; r < rows; ++r) b_.grad[0] += grad_out[r];

  have_forward_ = false;
  if (!need_input_grad) return DenseArray();

  DenseArray dx({batch, n, c_});
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const double g = grad_out[r];
    double* dxr = dx.data() + r * c_;
    for (std::int64_t ch = 0; ch < c_; ++ch) dxr[ch] = g * w_.value[ch];
  }
  return dx;
}

void SharedFCLayer::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

// ---------------------------------------------------------------------------

double combined_loss(const DenseArray& pred, const DenseArray& target,
                     DenseArray* grad) {
  if (!pred.same_shape(target)) {
    throw DataError("combined_loss: prediction shape " + pred.shape_str() +
                    " != target shape " + target.shape_str());
  }
  const std::int64_t batch = pred.dim(0);
  const double inv_b = 1.0 / static_cast<double>(batch);
  if (grad != nullptr) ensure_shape(*grad, pred.shape());

  double total = 0.0;
  for (std::int64_t e = 0; e < pred.size(); ++e) {
    const double err = pred[e] - target[e];
    total += 0.5 * err * err + std::fabs(err);
    if (grad != nullptr) {
      const double sgn = err > 0.0 ? 1.0 : (err < 0.0 ? -1.0 : 0.0);
      (*grad)[e] = (err + sgn) * inv_b;
    }
  }
  return total * inv_b;
}

void adam_update(std::span<Param* const> params, int t, const AdamConfig& cfg) {
  if (t < 1) throw ConfigError("adam_update: step count is 1-based");
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (Param* p : params) {
    const std::int64_t sz = p->value.size();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < sz; ++i) {
      const double g = p->grad[i];
      p->m[i] = cfg.beta1 * p->m[i] + (1.0 - cfg.beta1) * g;
      p->v[i] = cfg.beta2 * p->v[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->v[i] / bc2;
      p->value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace tgcn
