#pragma once

// Adaptive-moment optimizer with bias correction and a linear learning-rate
// warmup. A zero gradient with zero state leaves a parameter bit-identical;
// parameters excluded by the update mask are untouched entirely (used to
// freeze everything except the time heads in stage 2).

#include <cmath>
#include <functional>
#include <vector>

#include "sadiar/tensor.hpp"

namespace sadiar::num {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long warmup_steps = 500;  // lr ramps linearly from lr/warmup to lr
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long step = 0;

  void reset_schedule() { step = 0; }  // restart warmup (moments retained)

  void ensure(const std::vector<Tensor<T>>& params) {
    if (m.size() == params.size()) return;
    if (!m.empty())
      throw InternalError("adam: parameter list changed size mid-run");
    m.resize(params.size());
    v.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
      m[i].assign(params[i].size(), T(0));
      v[i].assign(params[i].size(), T(0));
    }
  }
};

// One update over params[i].grad. update_mask(i) == false skips params[i]
// (value, moments and all).
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state,
               const AdamConfig& cfg,
               const std::function<bool(size_t)>& update_mask = {}) {
  state.ensure(params);
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double warm =
      cfg.warmup_steps > 0
          ? std::min(1.0, t / static_cast<double>(cfg.warmup_steps))
          : 1.0;
  const double lr_t = cfg.lr * warm;
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    if (update_mask && !update_mask(i)) continue;
    Tensor<T>& p = params[i];
    if (!p.grad) throw InternalError("adam: parameter missing gradient");
    std::vector<T>& m = state.m[i];
    std::vector<T>& v = state.v[i];
    const long n = p.size();
    T* pv = p.ptr();
    const T* g = p.gptr();
    for (long j = 0; j < n; ++j) {
      const double gj = static_cast<double>(g[j]);
      const double mj = cfg.beta1 * double(m[j]) + (1.0 - cfg.beta1) * gj;
      const double vj = cfg.beta2 * double(v[j]) + (1.0 - cfg.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double mhat = mj / bc1;
      const double vhat = vj / bc2;
      pv[j] = static_cast<T>(double(pv[j]) -
                             lr_t * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace sadiar::num
