#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tgcn {

// Central finite-difference verification of the analytic gradients on a toy
// model (n=4, M=6, one block, 4 channels). Every parameter element is
// perturbed by +-1e-5 and compared at the 1e-4 relative threshold.
// `corrupt_param`, when non-empty, injects an error into that parameter's
// analytic gradient so the failure path stays honest.
struct GradCheckReport {
  struct Entry {
    std::string param;
    double max_rel_err = 0.0;
    bool passed = false;
  };
  std::vector<Entry> entries;
  double threshold = 1e-4;
  bool passed = false;

  std::string format() const;
};

GradCheckReport run_gradcheck(std::uint64_t seed,
                              const std::string& corrupt_param = "");

}  // namespace tgcn
