#pragma once

#include <cmath>
#include <vector>

#include "csvid/convnet.hpp"

namespace csvid {

// ADAM moment estimates, one pair per parameter tensor.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Tensor> m, v;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    s.m.reserve(p.tensors.size());
    s.v.reserve(p.tensors.size());
    for (const auto& t : p.tensors) {
      s.m.push_back(Tensor::zeros(t.shape));
      s.v.push_back(Tensor::zeros(t.shape));
    }
    return s;
  }
};

// Standard bias-corrected ADAM update. Returns false and leaves parameters
// and state untouched when any gradient is non-finite.
inline bool adam_step(ModelParams& params, const std::vector<Tensor>& grads, AdamState& state,
                      double lr) {
  require(grads.size() == params.tensors.size(), errc::invalid_argument,
          "adam_step: gradient/parameter count mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    require(grads[i].shape == params.tensors[i].shape, errc::invalid_argument,
            "adam_step: gradient shape mismatch");
    for (double g : grads[i].data)
      if (!std::isfinite(g)) return false;
  }

  state.step += 1;
  double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    double* p = params.tensors[i].data.data();
    double* m = state.m[i].data.data();
    double* v = state.v[i].data.data();
    const double* g = grads[i].data.data();
    std::size_t n = grads[i].size();
    for (std::size_t j = 0; j < n; ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
  return true;
}

}  // namespace csvid
