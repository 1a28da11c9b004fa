#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "tgcn/errors.hpp"

namespace tgcn {

// Row-major n-d array of doubles. The workhorse container for activations,
// gradients and windowed samples; kernels index the flat buffer directly.
class DenseArray {
 public:
  DenseArray() = default;

  explicit DenseArray(std::vector<std::int64_t> shape)
      : shape_(std::move(shape)),
        data_(static_cast<std::size_t>(count(shape_)), 0.0) {}

  static DenseArray zeros_like(const DenseArray& other) {
    return DenseArray(other.shape_);
  }

  const std::vector<std::int64_t>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  std::int64_t dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

  double& at2(std::int64_t i, std::int64_t j) {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  double at2(std::int64_t i, std::int64_t j) const {
    return data_[static_cast<std::size_t>(i * shape_[1] + j)];
  }
  double& at3(std::int64_t i, std::int64_t j, std::int64_t k) {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double at3(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return data_[static_cast<std::size_t>((i * shape_[1] + j) * shape_[2] + k)];
  }
  double& at4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) {
    return data_[static_cast<std::size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }
  double at4(std::int64_t i, std::int64_t j, std::int64_t k, std::int64_t l) const {
    return data_[static_cast<std::size_t>(
        ((i * shape_[1] + j) * shape_[2] + k) * shape_[3] + l)];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool same_shape(const DenseArray& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(shape_[i]);
    }
    return s + ")";
  }

  static std::int64_t count(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

// NaN/Inf tripwire for debug builds; call sites name the producing op.
inline void check_finite(const DenseArray& a, const char* op) {
#ifndef NDEBUG
  for (std::int64_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) {
      throw VerifyError(std::string("non-finite value produced by ") + op);
    }
  }
#else
  (void)a;
  (void)op;
#endif
}

}  // namespace tgcn
