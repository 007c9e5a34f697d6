#pragma once

#include <vector>

#include "refine/nn/layers.hpp"

namespace refine::nn {

// SGD with classical momentum and decoupled-by-convention weight decay
// folded into the gradient (v = mu*v + g + wd*p; p -= lr*v).
class Sgd {
 public:
  Sgd(std::vector<ParamView> params, float lr, float momentum, float weight_decay)
      : params_(std::move(params)), lr_(lr), momentum_(momentum), weight_decay_(weight_decay) {
    for (const auto& p : params_) {
      velocity_.emplace_back(p.grad ? p.value->size() : 0, 0.0f);
    }
  }

  void set_lr(float lr) { lr_ = lr; }
  float lr() const { return lr_; }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = params_[i];
      if (!p.grad || p.buffer) continue;
      auto& vel = velocity_[i];
      for (std::size_t j = 0; j < p.value->size(); ++j) {
        const float g = (*p.grad)[j] + weight_decay_ * (*p.value)[j];
        vel[j] = momentum_ * vel[j] + g;
        (*p.value)[j] -= lr_ * vel[j];
      }
    }
  }

  void zero_grad() { zero_grads(params_); }

 private:
  std::vector<ParamView> params_;
  std::vector<std::vector<float>> velocity_;
  float lr_, momentum_, weight_decay_;
};

}  // namespace refine::nn
