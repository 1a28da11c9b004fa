#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tgcn/dense_array.hpp"
#include "tgcn/dtw.hpp"
#include "tgcn/graph.hpp"

// Serial reference implementations and independent oracles. Everything here
// trades speed for obviousness: exhaustive enumeration, dense linear algebra
// and literal nested loops. Tests pin the production kernels against these;
// the bench tool reports the speed gap. Nothing in this namespace runs on a
// hot path.
namespace tgcn::ref {

// Minimum summed point distance over ALL monotone warping paths, found by
// exhaustive enumeration. Feasible only for n_x + n_y <= 14.
double dtw_oracle(std::span<const double> x, std::span<const double> y);

// Serial twin of all_pairs_dtw.
DistanceMatrix all_pairs_dtw_serial(const DenseArray& profiles,
                                    int band = kNoBand);

// Cyclic Jacobi eigendecomposition of a dense symmetric matrix:
// A = V diag(w) V^T with V orthonormal, eigenvalues ascending.
void jacobi_eigh(const std::vector<double>& a, std::int64_t n,
                 std::vector<double>& w, std::vector<double>& v);

// Eigenvalues of the normalized Laplacian of W from the dense solver.
std::vector<double> laplacian_spectrum(const Adjacency& w);
double lambda_max_dense(const Adjacency& w);

// Spectral-domain filter evaluation U diag(sum_k theta_k P_k(lambda~_i)) U^T x
// from the dense eigendecomposition of L. The rescale uses the supplied
// lambda_max so the comparison targets the identical polynomial; n <= 64.
std::vector<double> spectral_filter_oracle(const Adjacency& w,
                                           std::span<const double> theta,
                                           std::span<const double> x,
                                           double lambda_max,
                                           ChebBasis basis = ChebBasis::chebyshev);

// Dense K x n x n stack of the filter polynomials P_k(L~).
DenseArray dense_cheb_stack(const ScaledLaplacian& lt, int K, ChebBasis basis);

// Literal nested-loop evaluation of the 3D graph convolution pre-activation
//   Z[b,t,v,c] = sum_i sum_t' sum_k theta[i,c,t',k] (P_k(L~) X[b,t+K_t-1-t'])[v,i] + bias[c]
// with dense polynomial matrices. theta has shape C_i x C_raw x K_t x K.
DenseArray gconv3d_preact_naive(const DenseArray& x, const ScaledLaplacian& lt,
                                const DenseArray& theta,
                                std::span<const double> bias, int kt, int korder,
                                ChebBasis basis);

// Two-pass per-slice mean/variance normalization, the layer_norm reference.
DenseArray layer_norm_naive(const DenseArray& x, const DenseArray& gamma,
                            const DenseArray& beta);

// out[b,i] = sum_c w[c] X[b,i,c] + b0, by plain loops.
DenseArray shared_fc_naive(const DenseArray& x, std::span<const double> w,
                           double b0);

}  // namespace tgcn::ref
