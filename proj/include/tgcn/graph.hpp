#pragma once

#include <cstdint>
#include <vector>

#include "tgcn/dense_array.hpp"
#include "tgcn/dtw.hpp"

namespace tgcn {

enum class GraphKind { temporal, spatial };

// Symmetric adjacency stored as an upper-triangle edge list (i < j).
// Temporal graphs are binary; spatial graphs carry Gaussian-kernel weights.
struct Adjacency {
  struct Edge {
    std::int64_t i, j;
    double w;
  };

  std::int64_t n = 0;
  GraphKind kind = GraphKind::temporal;
  std::vector<Edge> edges;  // sorted by (i, j), i < j

  std::vector<double> dense() const;  // n*n row-major, for small-n oracles
};

// Compressed sparse rows; used for the scaled Laplacian.
struct CsrMatrix {
  std::int64_t n = 0;
  std::vector<std::int64_t> row_ptr;  // n+1
  std::vector<std::int64_t> col;
  std::vector<double> val;

  // y = A x
  void apply(const double* x, double* y) const;
  // Y = A X for X with `cols` columns, row-major n x cols
  void apply_block(const double* x, double* y, std::int64_t cols) const;
  std::vector<double> dense() const;
};

// L~ = 2L/lambda_max - I with L = I - D^{-1/2} W D^{-1/2}; spectrum in [-1,1].
struct ScaledLaplacian {
  CsrMatrix matrix;
  double lambda_max = 2.0;

  std::int64_t n() const { return matrix.n; }
};

// Binary kNN-style graph from DTW distances: each road links to its
// k = max(1, round(sparsity*(n-1))) nearest roads, ties broken by ascending
// index, then the edge set is symmetrized (W_ji := 1 wherever W_ij = 1).
Adjacency temporal_adjacency(const DistanceMatrix& d, double sparsity = 0.05);

// Thresholded Gaussian kernel over physical road distances:
// W_ij = exp(-dist_ij^2 / sigma2) kept when >= epsilon.
Adjacency spatial_adjacency(const DenseArray& dist, double sigma2,
                            double epsilon);

// lambda_max comes from power iteration on L (relative tolerance 1e-6,
// at most 1000 iterations); non-convergence falls back to the spectral
// bound 2 with a warning. Isolated nodes use D_ii = 1 so D^{-1/2} stays
// finite.
ScaledLaplacian scaled_laplacian(const Adjacency& w);

enum class ChebBasis { chebyshev, power };

// Stack [P_0(L~)X, ..., P_{K-1}(L~)X] for X of shape n x C, returned as
// K x n x C. Chebyshev basis uses T_k = 2 L~ T_{k-1} - T_{k-2}; the power
// basis keeps the literal matrix powers. Only sparse matrix-block products
// are formed; dense polynomial matrices never materialize.
DenseArray cheb_apply(const ScaledLaplacian& lt, const DenseArray& x, int K,
                      ChebBasis basis = ChebBasis::chebyshev);

// In-place stack variant used by the conv kernels: writes P_k(L~) X into
// out + k*n*cols for k = 0..K-1.
void cheb_apply_into(const ScaledLaplacian& lt, const double* x,
                     std::int64_t n, std::int64_t cols, int K, ChebBasis basis,
                     double* out);

}  // namespace tgcn
