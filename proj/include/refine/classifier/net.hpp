#pragma once

#include <memory>
#include <string>
#include <vector>

#include "refine/nn/layers.hpp"

namespace refine {

// A K-class network exposing logits, penultimate features, and a backward
// pass that can produce input gradients with or without parameter gradients.
class ClassifierNet {
 public:
  virtual ~ClassifierNet() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dlogits, bool want_input_grad, bool want_param_grads) = 0;
  // Pre-FC representation of the most recent forward, shape (n, feature_dim, 1, 1).
  virtual const Tensor& last_features() const = 0;
  virtual int feature_dim() const = 0;
  virtual std::vector<nn::ParamView> params() = 0;
};

namespace detail {

// conv-bn-relu unit.
struct ConvUnit {
  nn::Conv2d conv;
  nn::BatchNorm2d bn;
  nn::ReLU relu;

  ConvUnit(int in_ch, int out_ch, int k, int stride, int pad, Rng& rng)
      : conv(in_ch, out_ch, k, stride, pad, rng), bn(out_ch) {}

  Tensor forward(const Tensor& x, bool train) {
    return relu.forward(bn.forward(conv.forward(x, train), train), train);
  }
  Tensor backward(const Tensor& dy, bool want_input, bool want_params) {
    Tensor d = relu.backward(dy, true, want_params);
    d = bn.backward(d, true, want_params);
    return conv.backward(d, want_input, want_params);
  }
  void collect(std::vector<nn::ParamView>& out, const std::string& prefix) {
    conv.collect(out, prefix + ".conv");
    bn.collect(out, prefix + ".bn");
  }
};

// Basic residual block: two 3x3 convs, projection shortcut on shape change.
struct ResidualBlock {
  nn::Conv2d conv1;
  nn::BatchNorm2d bn1;
  nn::ReLU relu1;
  nn::Conv2d conv2;
  nn::BatchNorm2d bn2;
  nn::ReLU relu2;
  std::unique_ptr<nn::Conv2d> proj;
  std::unique_ptr<nn::BatchNorm2d> proj_bn;

  ResidualBlock(int in_ch, int out_ch, int stride, Rng& rng)
      : conv1(in_ch, out_ch, 3, stride, 1, rng),
        bn1(out_ch),
        conv2(out_ch, out_ch, 3, 1, 1, rng),
        bn2(out_ch) {
    if (stride != 1 || in_ch != out_ch) {
      proj = std::make_unique<nn::Conv2d>(in_ch, out_ch, 1, stride, 0, rng);
      proj_bn = std::make_unique<nn::BatchNorm2d>(out_ch);
    }
  }

  Tensor forward(const Tensor& x, bool train) {
    Tensor y = relu1.forward(bn1.forward(conv1.forward(x, train), train), train);
    y = bn2.forward(conv2.forward(y, train), train);
    Tensor skip = proj ? proj_bn->forward(proj->forward(x, train), train) : x;
    y += skip;
    return relu2.forward(y, train);
  }

  Tensor backward(const Tensor& dy, bool want_input, bool want_params) {
    Tensor d = relu2.backward(dy, true, want_params);
    // d splits into the conv branch and the shortcut.
    Tensor db = bn2.backward(d, true, want_params);
    db = conv2.backward(db, true, want_params);
    db = relu1.backward(db, true, want_params);
    db = bn1.backward(db, true, want_params);
    Tensor dx_branch = conv1.backward(db, want_input, want_params);
    if (proj) {
      Tensor ds = proj_bn->backward(d, true, want_params);
      ds = proj->backward(ds, want_input, want_params);
      if (!want_input) return {};
      ds += dx_branch;
      return ds;
    }
    if (!want_input) return {};
    dx_branch += d;
    return dx_branch;
  }

  void collect(std::vector<nn::ParamView>& out, const std::string& prefix) {
    conv1.collect(out, prefix + ".conv1");
    bn1.collect(out, prefix + ".bn1");
    conv2.collect(out, prefix + ".conv2");
    bn2.collect(out, prefix + ".bn2");
    if (proj) {
      proj->collect(out, prefix + ".proj");
      proj_bn->collect(out, prefix + ".proj_bn");
    }
  }
};

}  // namespace detail

// Small residual network for 32x32-class inputs: stem + three stages
// (width, 2*width, 4*width), global average pooling, linear head.
class ResNetSmall : public ClassifierNet {
 public:
  ResNetSmall(int in_ch, int num_classes, int width, Rng& rng)
      : stem_(in_ch, width, 3, 1, 1, rng),
        block1_(width, width, 1, rng),
        block2_(width, 2 * width, 2, rng),
        block3_(2 * width, 4 * width, 2, rng),
        fc_(4 * width, num_classes, rng),
        feature_dim_(4 * width) {}

  Tensor forward(const Tensor& x, bool train) override {
    Tensor y = stem_.forward(x, train);
    y = block1_.forward(y, train);
    y = block2_.forward(y, train);
    y = block3_.forward(y, train);
    features_ = gap_.forward(y, train);
    return fc_.forward(features_, train);
  }

  Tensor backward(const Tensor& dlogits, bool want_input, bool want_params) override {
    Tensor d = fc_.backward(dlogits, true, want_params);
    d = gap_.backward(d, true, want_params);
    d = block3_.backward(d, true, want_params);
    d = block2_.backward(d, true, want_params);
    d = block1_.backward(d, true, want_params);
    return stem_.backward(d, want_input, want_params);
  }

  const Tensor& last_features() const override { return features_; }
  int feature_dim() const override { return feature_dim_; }

  std::vector<nn::ParamView> params() override {
    std::vector<nn::ParamView> out;
    stem_.collect(out, "stem");
    block1_.collect(out, "block1");
    block2_.collect(out, "block2");
    block3_.collect(out, "block3");
    fc_.collect(out, "fc");
    return out;
  }

 private:
  detail::ConvUnit stem_;
  detail::ResidualBlock block1_, block2_, block3_;
  nn::GlobalAvgPool gap_;
  nn::Linear fc_;
  Tensor features_;
  int feature_dim_;
};

// Plain convolutional alternative (no residual connections).
class ConvNet : public ClassifierNet {
 public:
  ConvNet(int in_ch, int num_classes, int width, Rng& rng)
      : u1_(in_ch, width, 3, 1, 1, rng),
        u2_(width, 2 * width, 3, 2, 1, rng),
        u3_(2 * width, 4 * width, 3, 2, 1, rng),
        fc_(4 * width, num_classes, rng),
        feature_dim_(4 * width) {}

  Tensor forward(const Tensor& x, bool train) override {
    Tensor y = u1_.forward(x, train);
    y = u2_.forward(y, train);
    y = u3_.forward(y, train);
    features_ = gap_.forward(y, train);
    return fc_.forward(features_, train);
  }

  Tensor backward(const Tensor& dlogits, bool want_input, bool want_params) override {
    Tensor d = fc_.backward(dlogits, true, want_params);
    d = gap_.backward(d, true, want_params);
    d = u3_.backward(d, true, want_params);
    d = u2_.backward(d, true, want_params);
    return u1_.backward(d, want_input, want_params);
  }

  const Tensor& last_features() const override { return features_; }
  int feature_dim() const override { return feature_dim_; }

  std::vector<nn::ParamView> params() override {
    std::vector<nn::ParamView> out;
    u1_.collect(out, "u1");
    u2_.collect(out, "u2");
    u3_.collect(out, "u3");
    fc_.collect(out, "fc");
    return out;
  }

 private:
  detail::ConvUnit u1_, u2_, u3_;
  nn::GlobalAvgPool gap_;
  nn::Linear fc_;
  Tensor features_;
  int feature_dim_;
};

inline std::unique_ptr<ClassifierNet> make_classifier_net(const std::string& arch, int in_ch,
                                                          int num_classes, int width, Rng& rng) {
  if (arch == "resnet_small") return std::make_unique<ResNetSmall>(in_ch, num_classes, width, rng);
  if (arch == "convnet") return std::make_unique<ConvNet>(in_ch, num_classes, width, rng);
  throw ConfigError("unknown classifier architecture: " + arch);
}

}  // namespace refine
