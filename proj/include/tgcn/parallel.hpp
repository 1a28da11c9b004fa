#pragma once

#include <omp.h>

namespace tgcn {

// Worker count for all OpenMP kernels. 0 means the OpenMP default.
// Every parallel loop in the library assigns each output element to exactly
// one thread and reduces in a fixed serial order, so results are
// bit-identical for every worker count.
inline void set_workers(int n) {
  if (n > 0) omp_set_num_threads(n);
}

inline int max_workers() { return omp_get_max_threads(); }

}  // namespace tgcn
