#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lflane/error.hpp"

namespace lflane::nn {

using shape_t = std::vector<std::size_t>;

inline std::size_t shape_size(const shape_t& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const shape_t& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

// Dense row-major array of doubles.
class tensor {
 public:
  tensor() = default;
  explicit tensor(shape_t shape, double fill = 0.0) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}
  tensor(shape_t shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw data_error("tensor: data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }

  const shape_t& shape() const { return shape_; }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 4D accessor (n, c, y, x).
  double& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
    return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  tensor reshaped(shape_t s) const { return tensor(std::move(s), data_); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const tensor&) const = default;

 private:
  shape_t shape_;
  std::vector<double> data_;
};

inline void require_shape(const tensor& t, const shape_t& expected, const char* what) {
  if (t.shape() != expected)
    throw data_error(std::string(what) + ": expected shape " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
}

inline void add_into(tensor& dst, const tensor& src) {
  if (dst.shape() != src.shape()) throw data_error("add_into: shape mismatch");
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace lflane::nn
