#pragma once

#include <cmath>
#include <vector>

#include "salmask/tensor.hpp"

namespace salmask {

// Adam with L2 weight decay folded into the gradient (0.9 momentum, 1e-4
// weight decay, lr 0.001 by default).
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;

  std::vector<std::vector<Real>> m, v;
  int64_t t = 0;

  void init(const std::vector<std::vector<Real>*>& params) {
    m.clear();
    v.clear();
    for (const auto* p : params) {
      m.emplace_back(p->size(), 0.0);
      v.emplace_back(p->size(), 0.0);
    }
    t = 0;
  }

  // lr_scale implements schedule steps (e.g. the x1/5 decay late in training).
  void step(const std::vector<std::vector<Real>*>& params,
            const std::vector<std::vector<Real>*>& grads, double lr_scale = 1.0) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    const double alpha = lr * lr_scale;
    for (size_t a = 0; a < params.size(); ++a) {
      auto& p = *params[a];
      const auto& g = *grads[a];
      auto& ma = m[a];
      auto& va = v[a];
      for (size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + weight_decay * p[i];
        ma[i] = beta1 * ma[i] + (1.0 - beta1) * gi;
        va[i] = beta2 * va[i] + (1.0 - beta2) * gi * gi;
        const double mhat = ma[i] / bc1;
        const double vhat = va[i] / bc2;
        p[i] -= alpha * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }
};

}  // namespace salmask
