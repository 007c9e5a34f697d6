#pragma once

#include <memory>
#include <string>
#include <vector>

#include "refine/nn/layers.hpp"

namespace refine {

// U-shaped image-to-image network: two-level encoder, bottleneck, nearest
// upsampling with a skip concatenation, sigmoid-bounded output. Input height
// and width must be even.
class TransformNet {
 public:
  TransformNet(int channels, int width, std::uint64_t init_seed)
      : channels_(channels), width_(width) {
    Rng rng(init_seed ^ 0x7ea725f0c0ffee11ULL);
    enc1_ = std::make_unique<nn::Conv2d>(channels, width, 3, 1, 1, rng);
    enc1_bn_ = std::make_unique<nn::BatchNorm2d>(width);
    enc2_ = std::make_unique<nn::Conv2d>(width, 2 * width, 3, 2, 1, rng);
    enc2_bn_ = std::make_unique<nn::BatchNorm2d>(2 * width);
    mid_ = std::make_unique<nn::Conv2d>(2 * width, 2 * width, 3, 1, 1, rng);
    mid_bn_ = std::make_unique<nn::BatchNorm2d>(2 * width);
    dec_ = std::make_unique<nn::Conv2d>(3 * width, width, 3, 1, 1, rng);
    dec_bn_ = std::make_unique<nn::BatchNorm2d>(width);
    out_ = std::make_unique<nn::Conv2d>(width, channels, 3, 1, 1, rng);
  }

  int channels() const { return channels_; }
  int width() const { return width_; }

  Tensor forward(const Tensor& x, bool train) {
    if (x.c != channels_) throw ArgumentError("transform input channel mismatch");
    if (x.h % 2 != 0 || x.w % 2 != 0) throw ArgumentError("transform input dims must be even");
    e1_ = relu1_.forward(enc1_bn_->forward(enc1_->forward(x, train), train), train);
    Tensor e2 = relu2_.forward(enc2_bn_->forward(enc2_->forward(e1_, train), train), train);
    Tensor m = relu3_.forward(mid_bn_->forward(mid_->forward(e2, train), train), train);
    Tensor up = up_.forward(m, train);
    Tensor cat = concat_channels(up, e1_);
    Tensor d = relu4_.forward(dec_bn_->forward(dec_->forward(cat, train), train), train);
    // Gated residual over the input in logit space: with the gate at its
    // initial value the module is a near-identity map (exact for pixels in
    // [eps, 1-eps]), so it only departs from pass-through as far as the
    // training objective pushes it. The gate is itself trainable: objectives
    // that need to move images far from the input learn to switch the skip
    // off, while objectives satisfied by the input keep it. Its effective
    // value is clamped to [0,1]; the gradient is zero once the gate reaches
    // the bottom (it latches off), while above the top the clamp is
    // straight-through so momentum transients past 1 can still be pulled
    // back. The raw parameter is scaled so the gate settles within the first
    // epochs instead of dragging partial skip values through the whole run.
    Tensor pre = out_->forward(d, train);
    skip_x_ = x;
    const float g_raw = kGateScale * gate_[0];
    gate_eff_ = std::min(std::max(g_raw, 0.0f), 1.0f);
    gate_open_ = g_raw > 0.0f;
    skip_logit_ = Tensor(x.n, x.c, x.h, x.w);
    for (std::size_t i = 0; i < pre.v.size(); ++i) {
      const float p = std::min(std::max(x.v[i], kSkipEps), 1.0f - kSkipEps);
      skip_logit_.v[i] = std::log(p / (1.0f - p));
      pre.v[i] += gate_eff_ * skip_logit_.v[i];
    }
    return sig_.forward(pre, train);
  }

  // Returns d(loss)/d(input); parameter gradients accumulate when requested.
  Tensor backward(const Tensor& dy, bool want_input_grad, bool want_param_grads) {
    Tensor d = sig_.backward(dy, true, want_param_grads);
    if (want_param_grads && gate_open_) {
      float acc = 0.0f;
      for (std::size_t i = 0; i < d.v.size(); ++i) acc += d.v[i] * skip_logit_.v[i];
      dgate_[0] += kGateScale * acc;
    }
    Tensor dskip_x;
    if (want_input_grad) {
      dskip_x = Tensor(d.n, d.c, d.h, d.w);
      for (std::size_t i = 0; i < d.v.size(); ++i) {
        const float p = std::min(std::max(skip_x_.v[i], kSkipEps), 1.0f - kSkipEps);
        // d(logit(p))/dp, zero outside the clamp range.
        const bool clamped = skip_x_.v[i] < kSkipEps || skip_x_.v[i] > 1.0f - kSkipEps;
        dskip_x.v[i] = clamped ? 0.0f : gate_eff_ * d.v[i] / (p * (1.0f - p));
      }
    }
    d = out_->backward(d, true, want_param_grads);
    d = relu4_.backward(d, true, want_param_grads);
    d = dec_bn_->backward(d, true, want_param_grads);
    Tensor dcat = dec_->backward(d, true, want_param_grads);
    Tensor dup, dskip;
    split_channels(dcat, 2 * width_, dup, dskip);
    Tensor dm = up_.backward(dup, true, want_param_grads);
    dm = relu3_.backward(dm, true, want_param_grads);
    dm = mid_bn_->backward(dm, true, want_param_grads);
    dm = mid_->backward(dm, true, want_param_grads);
    dm = relu2_.backward(dm, true, want_param_grads);
    dm = enc2_bn_->backward(dm, true, want_param_grads);
    Tensor de1 = enc2_->backward(dm, true, want_param_grads);
    de1 += dskip;
    de1 = relu1_.backward(de1, true, want_param_grads);
    de1 = enc1_bn_->backward(de1, true, want_param_grads);
    Tensor dx = enc1_->backward(de1, want_input_grad, want_param_grads);
    if (want_input_grad) dx += dskip_x;
    return dx;
  }

  std::vector<nn::ParamView> params() {
    std::vector<nn::ParamView> out;
    enc1_->collect(out, "enc1");
    enc1_bn_->collect(out, "enc1_bn");
    enc2_->collect(out, "enc2");
    enc2_bn_->collect(out, "enc2_bn");
    mid_->collect(out, "mid");
    mid_bn_->collect(out, "mid_bn");
    dec_->collect(out, "dec");
    dec_bn_->collect(out, "dec_bn");
    out_->collect(out, "out");
    out.push_back({"skip.gate", &gate_, &dgate_, false});
    return out;
  }

 private:
  static Tensor concat_channels(const Tensor& a, const Tensor& b) {
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    const std::size_t sa = a.sample_size(), sb = b.sample_size();
    for (int s = 0; s < a.n; ++s) {
      std::copy(a.sample(s), a.sample(s) + sa, out.sample(s));
      std::copy(b.sample(s), b.sample(s) + sb, out.sample(s) + sa);
    }
    return out;
  }

  static void split_channels(const Tensor& d, int first_c, Tensor& da, Tensor& db) {
    da = Tensor(d.n, first_c, d.h, d.w);
    db = Tensor(d.n, d.c - first_c, d.h, d.w);
    const std::size_t sa = da.sample_size(), sb = db.sample_size();
    for (int s = 0; s < d.n; ++s) {
      std::copy(d.sample(s), d.sample(s) + sa, da.sample(s));
      std::copy(d.sample(s) + sa, d.sample(s) + sa + sb, db.sample(s));
    }
  }

  static constexpr float kSkipEps = 0.02f;
  static constexpr float kGateScale = 4.0f;

  int channels_, width_;
  std::unique_ptr<nn::Conv2d> enc1_, enc2_, mid_, dec_, out_;
  std::unique_ptr<nn::BatchNorm2d> enc1_bn_, enc2_bn_, mid_bn_, dec_bn_;
  nn::ReLU relu1_, relu2_, relu3_, relu4_;
  nn::Upsample2x up_;
  nn::Sigmoid sig_;
  Tensor e1_, skip_x_, skip_logit_;
  // Raw parameter; effective gate is clamp(kGateScale * gate_[0], 0, 1),
  // initialized just inside the open interval so the gate starts trainable.
  std::vector<float> gate_{0.995f / kGateScale}, dgate_{0.0f};
  float gate_eff_ = 1.0f;
  bool gate_open_ = false;
};

}  // namespace refine
