#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/core/tensor.hpp"

namespace refine::nn {

using EMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

// A named view onto one parameter (or buffer) of a layer. Buffers
// (batch-norm running statistics) are serialized but not optimized.
struct ParamView {
  std::string name;
  std::vector<float>* value = nullptr;
  std::vector<float>* grad = nullptr;  // null for buffers
  bool buffer = false;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  // dy has the shape of the last forward's output. When want_input_grad is
  // false the returned tensor is empty; when want_param_grads is false the
  // layer's parameter gradients are left untouched.
  virtual Tensor backward(const Tensor& dy, bool want_input_grad, bool want_param_grads) = 0;
  virtual void collect(std::vector<ParamView>& out, const std::string& prefix) {}
};

inline void zero_grads(std::vector<ParamView>& params) {
  for (auto& p : params) {
    if (p.grad) std::fill(p.grad->begin(), p.grad->end(), 0.0f);
  }
}

// ---------------------------------------------------------------------------

class Conv2d : public Layer {
 public:
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int pad, Rng& rng)
      : in_ch_(in_ch), out_ch_(out_ch), k_(ksize), stride_(stride), pad_(pad) {
    weight_.resize(static_cast<std::size_t>(out_ch) * in_ch * k_ * k_);
    bias_.resize(out_ch, 0.0f);
    dweight_.resize(weight_.size(), 0.0f);
    dbias_.resize(out_ch, 0.0f);
    // He initialization.
    const double std = std::sqrt(2.0 / (in_ch * k_ * k_));
    for (auto& x : weight_) x = static_cast<float>(rng.gaussian(0.0, std));
  }

  Tensor forward(const Tensor& x, bool) override {
    x_ = x;
    oh_ = (x.h + 2 * pad_ - k_) / stride_ + 1;
    ow_ = (x.w + 2 * pad_ - k_) / stride_ + 1;
    Tensor y(x.n, out_ch_, oh_, ow_);
    const int ckk = in_ch_ * k_ * k_;
    col_.assign(static_cast<std::size_t>(ckk) * oh_ * ow_, 0.0f);
    ECMap wm(weight_.data(), out_ch_, ckk);
    for (int s = 0; s < x.n; ++s) {
      im2col(x.sample(s), x.h, x.w);
      ECMap cm(col_.data(), ckk, oh_ * ow_);
      EMap ym(y.sample(s), out_ch_, oh_ * ow_);
      ym.noalias() = wm * cm;
      for (int oc = 0; oc < out_ch_; ++oc) ym.row(oc).array() += bias_[oc];
    }
    return y;
  }

  Tensor backward(const Tensor& dy, bool want_input_grad, bool want_param_grads) override {
    const int ckk = in_ch_ * k_ * k_;
    Tensor dx;
    if (want_input_grad) dx = Tensor(x_.n, in_ch_, x_.h, x_.w);
    ECMap wm(weight_.data(), out_ch_, ckk);
    EMap dwm(dweight_.data(), out_ch_, ckk);
    std::vector<float> dcol(static_cast<std::size_t>(ckk) * oh_ * ow_);
    for (int s = 0; s < x_.n; ++s) {
      ECMap dym(dy.sample(s), out_ch_, oh_ * ow_);
      if (want_param_grads) {
        im2col(x_.sample(s), x_.h, x_.w);
        ECMap cm(col_.data(), ckk, oh_ * ow_);
        dwm.noalias() += dym * cm.transpose();
        // Fixed-order accumulation: Eigen's redux peels to the buffer's
        // alignment boundary, so its summation order (and the rounded result)
        // would vary with the heap address of dy.
        for (int oc = 0; oc < out_ch_; ++oc) {
          const float* row = dy.sample(s) + static_cast<std::size_t>(oc) * oh_ * ow_;
          float acc = 0.0f;
          for (int i = 0; i < oh_ * ow_; ++i) acc += row[i];
          dbias_[oc] += acc;
        }
      }
      if (want_input_grad) {
        EMap dcm(dcol.data(), ckk, oh_ * ow_);
        dcm.noalias() = wm.transpose() * dym;
        col2im(dcol.data(), dx.sample(s), x_.h, x_.w);
      }
    }
    return dx;
  }

  void collect(std::vector<ParamView>& out, const std::string& prefix) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_, false});
    out.push_back({prefix + ".bias", &bias_, &dbias_, false});
  }

 private:
  void im2col(const float* x, int h, int w) {
    const int hw = oh_ * ow_;
    float* col = col_.data();
    for (int ic = 0; ic < in_ch_; ++ic) {
      const float* plane = x + static_cast<std::size_t>(ic) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          float* dst = col + ((static_cast<std::size_t>(ic) * k_ + ky) * k_ + kx) * hw;
          for (int oy = 0; oy < oh_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) {
              std::fill(dst + oy * ow_, dst + (oy + 1) * ow_, 0.0f);
              continue;
            }
            for (int ox = 0; ox < ow_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              dst[oy * ow_ + ox] = (ix < 0 || ix >= w) ? 0.0f : plane[iy * w + ix];
            }
          }
        }
      }
    }
  }

  void col2im(const float* dcol, float* dx, int h, int w) {
    const int hw = oh_ * ow_;
    for (int ic = 0; ic < in_ch_; ++ic) {
      float* plane = dx + static_cast<std::size_t>(ic) * h * w;
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const float* src = dcol + ((static_cast<std::size_t>(ic) * k_ + ky) * k_ + kx) * hw;
          for (int oy = 0; oy < oh_; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow_; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) plane[iy * w + ix] += src[oy * ow_ + ox];
            }
          }
        }
      }
    }
  }

  int in_ch_, out_ch_, k_, stride_, pad_;
  int oh_ = 0, ow_ = 0;
  std::vector<float> weight_, bias_, dweight_, dbias_;
  std::vector<float> col_;
  Tensor x_;
};

// ---------------------------------------------------------------------------

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f)
      : ch_(channels), momentum_(momentum), eps_(eps) {
    gamma_.assign(ch_, 1.0f);
    beta_.assign(ch_, 0.0f);
    dgamma_.assign(ch_, 0.0f);
    dbeta_.assign(ch_, 0.0f);
    running_mean_.assign(ch_, 0.0f);
    running_var_.assign(ch_, 1.0f);
  }

  Tensor forward(const Tensor& x, bool train) override {
    train_ = train;
    const int hw = x.h * x.w;
    const std::size_t count = static_cast<std::size_t>(x.n) * hw;
    Tensor y(x.n, x.c, x.h, x.w);
    xhat_ = Tensor(x.n, x.c, x.h, x.w);
    invstd_.assign(ch_, 0.0f);
    mean_.assign(ch_, 0.0f);
    for (int c = 0; c < ch_; ++c) {
      double mean, var;
      if (train) {
        double sum = 0.0, sq = 0.0;
        for (int s = 0; s < x.n; ++s) {
          const float* p = x.sample(s) + static_cast<std::size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) {
            sum += p[i];
            sq += static_cast<double>(p[i]) * p[i];
          }
        }
        mean = sum / count;
        var = sq / count - mean * mean;
        if (var < 0.0) var = 0.0;
        running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * static_cast<float>(mean);
        // Unbiased variance in the running buffer, biased in the batch pass.
        const double unbiased = count > 1 ? var * count / (count - 1.0) : var;
        running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * static_cast<float>(unbiased);
      } else {
        mean = running_mean_[c];
        var = running_var_[c];
      }
      const float istd = static_cast<float>(1.0 / std::sqrt(var + eps_));
      mean_[c] = static_cast<float>(mean);
      invstd_[c] = istd;
      for (int s = 0; s < x.n; ++s) {
        const float* p = x.sample(s) + static_cast<std::size_t>(c) * hw;
        float* xh = xhat_.sample(s) + static_cast<std::size_t>(c) * hw;
        float* yo = y.sample(s) + static_cast<std::size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) {
          xh[i] = (p[i] - mean_[c]) * istd;
          yo[i] = gamma_[c] * xh[i] + beta_[c];
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy, bool want_input_grad, bool want_param_grads) override {
    const int hw = dy.h * dy.w;
    const std::size_t count = static_cast<std::size_t>(dy.n) * hw;
    Tensor dx;
    if (want_input_grad) dx = Tensor(dy.n, dy.c, dy.h, dy.w);
    for (int c = 0; c < ch_; ++c) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int s = 0; s < dy.n; ++s) {
        const float* d = dy.sample(s) + static_cast<std::size_t>(c) * hw;
        const float* xh = xhat_.sample(s) + static_cast<std::size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) {
          sum_dy += d[i];
          sum_dy_xhat += static_cast<double>(d[i]) * xh[i];
        }
      }
      if (want_param_grads) {
        dgamma_[c] += static_cast<float>(sum_dy_xhat);
        dbeta_[c] += static_cast<float>(sum_dy);
      }
      if (!want_input_grad) continue;
      const float g = gamma_[c] * invstd_[c];
      if (train_) {
        const float m_dy = static_cast<float>(sum_dy / count);
        const float m_dy_xhat = static_cast<float>(sum_dy_xhat / count);
        for (int s = 0; s < dy.n; ++s) {
          const float* d = dy.sample(s) + static_cast<std::size_t>(c) * hw;
          const float* xh = xhat_.sample(s) + static_cast<std::size_t>(c) * hw;
          float* o = dx.sample(s) + static_cast<std::size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) o[i] = g * (d[i] - m_dy - xh[i] * m_dy_xhat);
        }
      } else {
        // Eval-mode statistics are constants.
        for (int s = 0; s < dy.n; ++s) {
          const float* d = dy.sample(s) + static_cast<std::size_t>(c) * hw;
          float* o = dx.sample(s) + static_cast<std::size_t>(c) * hw;
          for (int i = 0; i < hw; ++i) o[i] = g * d[i];
        }
      }
    }
    return dx;
  }

  void collect(std::vector<ParamView>& out, const std::string& prefix) override {
    out.push_back({prefix + ".gamma", &gamma_, &dgamma_, false});
    out.push_back({prefix + ".beta", &beta_, &dbeta_, false});
    out.push_back({prefix + ".running_mean", &running_mean_, nullptr, true});
    out.push_back({prefix + ".running_var", &running_var_, nullptr, true});
  }

 private:
  int ch_;
  float momentum_, eps_;
  bool train_ = false;
  std::vector<float> gamma_, beta_, dgamma_, dbeta_, running_mean_, running_var_;
  std::vector<float> mean_, invstd_;
  Tensor xhat_;
};

// ---------------------------------------------------------------------------

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    y_ = x;
    for (auto& v : y_.v) v = v > 0.0f ? v : 0.0f;
    return y_;
  }
  Tensor backward(const Tensor& dy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) {
      if (y_.v[i] <= 0.0f) dx.v[i] = 0.0f;
    }
    return dx;
  }

 private:
  Tensor y_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    y_ = x;
    for (auto& v : y_.v) v = 1.0f / (1.0f + std::exp(-v));
    return y_;
  }
  Tensor backward(const Tensor& dy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= y_.v[i] * (1.0f - y_.v[i]);
    return dx;
  }

 private:
  Tensor y_;
};

// ---------------------------------------------------------------------------

class Linear : public Layer {
 public:
  Linear(int in_dim, int out_dim, Rng& rng) : in_(in_dim), out_(out_dim) {
    weight_.resize(static_cast<std::size_t>(out_) * in_);
    bias_.assign(out_, 0.0f);
    dweight_.assign(weight_.size(), 0.0f);
    dbias_.assign(out_, 0.0f);
    const double std = std::sqrt(2.0 / in_);
    for (auto& x : weight_) x = static_cast<float>(rng.gaussian(0.0, std));
  }

  // Input is (n, in, 1, 1); output (n, out, 1, 1).
  Tensor forward(const Tensor& x, bool) override {
    x_ = x;
    Tensor y(x.n, out_, 1, 1);
    ECMap xm(x.v.data(), x.n, in_);
    ECMap wm(weight_.data(), out_, in_);
    EMap ym(y.v.data(), x.n, out_);
    ym.noalias() = xm * wm.transpose();
    for (int s = 0; s < x.n; ++s) {
      for (int o = 0; o < out_; ++o) ym(s, o) += bias_[o];
    }
    return y;
  }

  Tensor backward(const Tensor& dy, bool want_input_grad, bool want_param_grads) override {
    ECMap dym(dy.v.data(), dy.n, out_);
    if (want_param_grads) {
      ECMap xm(x_.v.data(), x_.n, in_);
      EMap dwm(dweight_.data(), out_, in_);
      dwm.noalias() += dym.transpose() * xm;
      // Fixed-order accumulation; see the matching note in Conv2d::backward.
      for (int s = 0; s < dy.n; ++s) {
        const float* row = dy.v.data() + static_cast<std::size_t>(s) * out_;
        for (int o = 0; o < out_; ++o) dbias_[o] += row[o];
      }
    }
    if (!want_input_grad) return {};
    Tensor dx(x_.n, in_, 1, 1);
    ECMap wm(weight_.data(), out_, in_);
    EMap dxm(dx.v.data(), x_.n, in_);
    dxm.noalias() = dym * wm;
    return dx;
  }

  void collect(std::vector<ParamView>& out, const std::string& prefix) override {
    out.push_back({prefix + ".weight", &weight_, &dweight_, false});
    out.push_back({prefix + ".bias", &bias_, &dbias_, false});
  }

 private:
  int in_, out_;
  std::vector<float> weight_, bias_, dweight_, dbias_;
  Tensor x_;
};

// ---------------------------------------------------------------------------

class GlobalAvgPool : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    n_ = x.n;
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const int hw = x.h * x.w;
    for (int s = 0; s < x.n; ++s) {
      for (int c = 0; c < x.c; ++c) {
        const float* p = x.sample(s) + static_cast<std::size_t>(c) * hw;
        double sum = 0.0;
        for (int i = 0; i < hw; ++i) sum += p[i];
        y.at(s, c, 0, 0) = static_cast<float>(sum / hw);
      }
    }
    return y;
  }
  Tensor backward(const Tensor& dy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor dx(n_, c_, h_, w_);
    const int hw = h_ * w_;
    for (int s = 0; s < n_; ++s) {
      for (int c = 0; c < c_; ++c) {
        const float g = dy.at(s, c, 0, 0) / hw;
        float* p = dx.sample(s) + static_cast<std::size_t>(c) * hw;
        for (int i = 0; i < hw; ++i) p[i] = g;
      }
    }
    return dx;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// Nearest-neighbor 2x upsampling.
class Upsample2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    n_ = x.n;
    c_ = x.c;
    h_ = x.h;
    w_ = x.w;
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int s = 0; s < x.n; ++s) {
      for (int c = 0; c < x.c; ++c) {
        for (int iy = 0; iy < x.h; ++iy) {
          for (int ix = 0; ix < x.w; ++ix) {
            const float v = x.at(s, c, iy, ix);
            y.at(s, c, 2 * iy, 2 * ix) = v;
            y.at(s, c, 2 * iy, 2 * ix + 1) = v;
            y.at(s, c, 2 * iy + 1, 2 * ix) = v;
            y.at(s, c, 2 * iy + 1, 2 * ix + 1) = v;
          }
        }
      }
    }
    return y;
  }
  Tensor backward(const Tensor& dy, bool want_input_grad, bool) override {
    if (!want_input_grad) return {};
    Tensor dx(n_, c_, h_, w_);
    for (int s = 0; s < n_; ++s) {
      for (int c = 0; c < c_; ++c) {
        for (int iy = 0; iy < h_; ++iy) {
          for (int ix = 0; ix < w_; ++ix) {
            dx.at(s, c, iy, ix) = dy.at(s, c, 2 * iy, 2 * ix) + dy.at(s, c, 2 * iy, 2 * ix + 1) +
                                  dy.at(s, c, 2 * iy + 1, 2 * ix) +
                                  dy.at(s, c, 2 * iy + 1, 2 * ix + 1);
          }
        }
      }
    }
    return dx;
  }

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
};

// ---------------------------------------------------------------------------

// Softmax over the channel axis of an (n, k, 1, 1) logits tensor.
inline Matrix softmax(const Tensor& logits) {
  Matrix p(logits.n, logits.c);
  for (int s = 0; s < logits.n; ++s) {
    const float* z = logits.sample(s);
    float mx = z[0];
    for (int k = 1; k < logits.c; ++k) mx = std::max(mx, z[k]);
    double sum = 0.0;
    for (int k = 0; k < logits.c; ++k) {
      const double e = std::exp(static_cast<double>(z[k]) - mx);
      p.at(s, k) = static_cast<float>(e);
      sum += e;
    }
    for (int k = 0; k < logits.c; ++k) p.at(s, k) = static_cast<float>(p.at(s, k) / sum);
  }
  return p;
}

// Gradient of a loss through softmax: dz_j = sum_k dp_k * p_k * (delta_kj - p_j).
inline Tensor softmax_backward(const Matrix& probs, const Matrix& dprobs) {
  Tensor dz(probs.rows, probs.cols, 1, 1);
  for (int s = 0; s < probs.rows; ++s) {
    double dot = 0.0;
    for (int k = 0; k < probs.cols; ++k) dot += static_cast<double>(dprobs.at(s, k)) * probs.at(s, k);
    for (int j = 0; j < probs.cols; ++j) {
      dz.at(s, j, 0, 0) = probs.at(s, j) * (dprobs.at(s, j) - static_cast<float>(dot));
    }
  }
  return dz;
}

}  // namespace refine::nn
