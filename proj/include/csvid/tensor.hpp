#pragma once

#include <cassert>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "csvid/error.hpp"

namespace csvid {

// Dense real-valued tensor, rank 1..5, row-major with the last axis fastest.
// All numerical work in the project runs in 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    require(shape.size() >= 1 && shape.size() <= 5, errc::invalid_argument,
            "tensor rank must be in [1,5]");
    std::size_t n = 1;
    for (std::size_t e : shape) {
      require(e >= 1, errc::invalid_argument, "tensor extents must be >= 1");
      n *= e;
    }
    require(n == data.size(), errc::invalid_argument, "tensor shape/data size mismatch");
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = 1;
    for (std::size_t e : s) n *= e;
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
  }

  std::size_t rank() const { return shape.size(); }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Unchecked indexed access; callers are responsible for rank.
  double& operator()(std::size_t i) { return data[i]; }
  double operator()(std::size_t i) const { return data[i]; }

  double& operator()(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data[((i * shape[1] + j) * shape[2] + k) * shape[3] + l];
  }

  double& operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l, std::size_t m) {
    return data[(((i * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l,
                    std::size_t m) const {
    return data[(((i * shape[1] + j) * shape[2] + k) * shape[3] + l) * shape[4] + m];
  }
};

}  // namespace csvid
