#pragma once

#include "emlab/graph.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace emlab {

// Adam with bias correction. Moment tensors are allocated on first use and
// must keep matching the parameter shapes thereafter.
struct AdamState {
  int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

inline void adam_step(ParamStore& params, const std::vector<Tensor>& grads, AdamState& st,
                      double lr) {
  if (static_cast<int>(grads.size()) != params.size())
    throw std::invalid_argument("adam_step: gradient count does not match parameter count");
  if (st.m.empty()) {
    for (int i = 0; i < params.size(); ++i) {
      st.m.push_back(Tensor::zeros(params.value(i).shape));
      st.v.push_back(Tensor::zeros(params.value(i).shape));
    }
  }
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const float b1 = static_cast<float>(st.beta1), b2 = static_cast<float>(st.beta2);
  const float one_b1 = static_cast<float>(1.0 - st.beta1), one_b2 = static_cast<float>(1.0 - st.beta2);
  const float scale = static_cast<float>(lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(st.eps);
  for (int i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    const Tensor& g = grads[static_cast<size_t>(i)];
    check_same_shape(p, g, "adam_step");
    check_same_shape(p, st.m[static_cast<size_t>(i)], "adam_step");
    float* pv = p.v.data();
    float* mv = st.m[static_cast<size_t>(i)].v.data();
    float* vv = st.v[static_cast<size_t>(i)].v.data();
    const float* gv = g.v.data();
    const int64_t n = p.numel();
    for (int64_t k = 0; k < n; ++k) {
      mv[k] = b1 * mv[k] + one_b1 * gv[k];
      vv[k] = b2 * vv[k] + one_b2 * gv[k] * gv[k];
      pv[k] -= scale * mv[k] / (std::sqrt(vv[k]) * inv_sqrt_bc2 + eps);
    }
  }
}

/// Cosine annealing from lr0 down to `floor` over `total_steps`. Evaluated at
/// integer steps; non-increasing and exactly `floor` at the end.
inline double cosine_lr(double lr0, double floor, int64_t step, int64_t total_steps) {
  if (total_steps <= 0) return lr0;
  if (step >= total_steps) return floor;
  if (step < 0) step = 0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  return floor + 0.5 * (lr0 - floor) * (1.0 + std::cos(3.141592653589793 * t));
}

}  // namespace emlab
