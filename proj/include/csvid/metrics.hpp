#pragma once

#include <cmath>
#include <limits>

#include "csvid/tensor.hpp"

namespace csvid {

inline double mse(const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), errc::invalid_argument, "mse: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a.data[i] - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

// Peak signal-to-noise ratio in dB. Identical inputs return +infinity,
// the distinguished exact-reconstruction marker used by the privacy report.
inline double psnr(const Tensor& a, const Tensor& b, double peak) {
  require(peak > 0.0, errc::invalid_argument, "psnr: peak must be positive");
  double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

}  // namespace csvid
