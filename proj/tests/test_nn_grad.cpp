#include <catch2/catch_amalgamated.hpp>

#include <refine/classifier/classifier.hpp>
#include <refine/nn/layers.hpp>
#include <refine/refine/transform.hpp>

using namespace refine;

namespace {

// Scalar probe loss: dot(y, w) for a fixed random w, so dL/dy = w.
struct Probe {
  Tensor w;
  explicit Probe(const Tensor& shape_like, Rng& rng) : w(shape_like) {
    for (auto& v : w.v) v = static_cast<float>(rng.gaussian(0.0, 1.0));
  }
  double loss(const Tensor& y) const {
    double s = 0.0;
    for (std::size_t i = 0; i < y.v.size(); ++i) s += static_cast<double>(y.v[i]) * w.v[i];
    return s;
  }
};

Tensor random_input(int n, int c, int h, int w, Rng& rng, double lo = 0.05, double hi = 0.95) {
  Tensor x(n, c, h, w);
  for (auto& v : x.v) v = static_cast<float>(rng.uniform(lo, hi));
  return x;
}

double rel_err(double fd, double an) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 0.05});
}

// Central-difference check of both input and parameter gradients of a layer.
void check_layer(nn::Layer& layer, Tensor x, bool train, double tol = 2e-2) {
  Rng rng(99);
  Tensor y = layer.forward(x, train);
  Probe probe(y, rng);
  std::vector<nn::ParamView> params;
  layer.collect(params, "p");
  nn::zero_grads(params);
  layer.forward(x, train);  // refresh caches (probe construction consumed none)
  Tensor dx = layer.backward(probe.w, true, true);

  const double eps = 1e-2;
  // Input gradient, a scattering of positions.
  for (std::size_t i = 0; i < x.v.size(); i += std::max<std::size_t>(1, x.v.size() / 17)) {
    const float keep = x.v[i];
    x.v[i] = keep + static_cast<float>(eps);
    const double up = probe.loss(layer.forward(x, train));
    x.v[i] = keep - static_cast<float>(eps);
    const double dn = probe.loss(layer.forward(x, train));
    x.v[i] = keep;
    const double fd = (up - dn) / (2 * eps);
    INFO("input index " << i);
    REQUIRE(rel_err(fd, dx.v[i]) < tol);
  }
  // Parameter gradients.
  for (auto& p : params) {
    if (!p.grad) continue;
    for (std::size_t i = 0; i < p.value->size(); i += std::max<std::size_t>(1, p.value->size() / 7)) {
      const float keep = (*p.value)[i];
      (*p.value)[i] = keep + static_cast<float>(eps);
      const double up = probe.loss(layer.forward(x, train));
      (*p.value)[i] = keep - static_cast<float>(eps);
      const double dn = probe.loss(layer.forward(x, train));
      (*p.value)[i] = keep;
      const double fd = (up - dn) / (2 * eps);
      INFO(p.name << " index " << i);
      REQUIRE(rel_err(fd, (*p.grad)[i]) < tol);
    }
  }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(5);
  nn::Conv2d conv(2, 3, 3, 1, 1, rng);
  check_layer(conv, random_input(2, 2, 6, 6, rng), false);
}

TEST_CASE("strided conv2d gradients match finite differences") {
  Rng rng(6);
  nn::Conv2d conv(2, 4, 3, 2, 1, rng);
  check_layer(conv, random_input(2, 2, 8, 8, rng), false);
}

TEST_CASE("batchnorm gradients match finite differences in train mode") {
  Rng rng(7);
  nn::BatchNorm2d bn(3);
  check_layer(bn, random_input(3, 3, 4, 4, rng), true, 3e-2);
}

TEST_CASE("batchnorm gradients match finite differences in eval mode") {
  Rng rng(8);
  nn::BatchNorm2d bn(3);
  // Populate running statistics first.
  bn.forward(random_input(4, 3, 4, 4, rng), true);
  check_layer(bn, random_input(2, 3, 4, 4, rng), false);
}

TEST_CASE("linear gradients match finite differences") {
  Rng rng(9);
  nn::Linear fc(6, 4, rng);
  check_layer(fc, random_input(3, 6, 1, 1, rng), false);
}

TEST_CASE("sigmoid, pooling and upsampling gradients match finite differences") {
  Rng rng(10);
  nn::Sigmoid sig;
  check_layer(sig, random_input(2, 2, 4, 4, rng, -2.0, 2.0), false);
  nn::GlobalAvgPool gap;
  check_layer(gap, random_input(2, 3, 4, 4, rng), false);
  nn::Upsample2x up;
  check_layer(up, random_input(2, 2, 3, 3, rng), false);
}

TEST_CASE("relu gradient matches finite differences away from the kink") {
  Rng rng(11);
  nn::ReLU relu;
  Tensor x = random_input(2, 2, 4, 4, rng, -1.0, 1.0);
  for (auto& v : x.v) {
    if (std::abs(v) < 0.1f) v = v < 0 ? -0.1f : 0.1f;  // keep FD off the kink
  }
  check_layer(relu, x, false);
}

TEST_CASE("softmax backward matches finite differences") {
  Rng rng(12);
  Tensor logits = random_input(3, 5, 1, 1, rng, -2.0, 2.0);
  Matrix probs = nn::softmax(logits);
  Matrix dprobs(3, 5);
  for (auto& v : dprobs.v) v = static_cast<float>(rng.gaussian(0.0, 1.0));
  Tensor dz = nn::softmax_backward(probs, dprobs);

  auto loss = [&](const Tensor& z) {
    Matrix p = nn::softmax(z);
    double s = 0.0;
    for (int i = 0; i < p.rows; ++i) {
      for (int k = 0; k < p.cols; ++k) s += static_cast<double>(dprobs.at(i, k)) * p.at(i, k);
    }
    return s;
  };
  const double eps = 1e-3;
  for (std::size_t i = 0; i < logits.v.size(); ++i) {
    const float keep = logits.v[i];
    logits.v[i] = keep + static_cast<float>(eps);
    const double up = loss(logits);
    logits.v[i] = keep - static_cast<float>(eps);
    const double dn = loss(logits);
    logits.v[i] = keep;
    REQUIRE(rel_err((up - dn) / (2 * eps), dz.v[i]) < 2e-2);
  }
}

TEST_CASE("full classifier parameter gradients match finite differences") {
  Rng rng(13);
  Classifier model("resnet_small", 4, 3, 8, 8, 2, 31);
  Tensor x = random_input(2, 3, 8, 8, rng);
  Tensor y = model.net().forward(x, false);
  Probe probe(y, rng);
  std::vector<nn::ParamView> params = model.net().params();
  nn::zero_grads(params);
  model.net().forward(x, false);
  model.net().backward(probe.w, false, true);

  auto fd_at = [&](std::vector<float>& vals, std::size_t i, double eps) {
    const float keep = vals[i];
    vals[i] = keep + static_cast<float>(eps);
    const double up = probe.loss(model.net().forward(x, false));
    vals[i] = keep - static_cast<float>(eps);
    const double dn = probe.loss(model.net().forward(x, false));
    vals[i] = keep;
    return (up - dn) / (2 * eps);
  };
  int checked = 0;
  for (auto& p : params) {
    if (!p.grad || checked >= 24) continue;
    for (std::size_t i : {std::size_t{0}, p.value->size() / 2}) {
      const double fd1 = fd_at(*p.value, i, 2e-2);
      const double fd = fd_at(*p.value, i, 1e-2);
      // Probe only where the net is locally smooth (away from relu kinks).
      if (rel_err(fd1, fd) > 5e-3) continue;
      INFO(p.name << "[" << i << "] fd=" << fd << " an=" << (*p.grad)[i]);
      REQUIRE(rel_err(fd, (*p.grad)[i]) < 3e-2);
      checked++;
    }
  }
  REQUIRE(checked >= 10);
}

TEST_CASE("transform network parameter gradients match finite differences") {
  Rng rng(14);
  TransformNet t(3, 2, 41);
  Tensor x = random_input(2, 3, 8, 8, rng);
  Tensor y = t.forward(x, false);
  Probe probe(y, rng);
  std::vector<nn::ParamView> params = t.params();
  nn::zero_grads(params);
  t.forward(x, false);
  t.backward(probe.w, false, true);

  auto fd_at = [&](std::vector<float>& vals, std::size_t i, double eps) {
    const float keep = vals[i];
    vals[i] = keep + static_cast<float>(eps);
    const double up = probe.loss(t.forward(x, false));
    vals[i] = keep - static_cast<float>(eps);
    const double dn = probe.loss(t.forward(x, false));
    vals[i] = keep;
    return (up - dn) / (2 * eps);
  };
  int checked = 0;
  for (auto& p : params) {
    if (!p.grad) continue;
    for (std::size_t i : {std::size_t{0}, p.value->size() / 3}) {
      const double fd1 = fd_at(*p.value, i, 2e-2);
      const double fd = fd_at(*p.value, i, 1e-2);
      if (rel_err(fd1, fd) > 5e-3) continue;  // skip relu kink neighborhoods
      INFO(p.name << "[" << i << "] fd=" << fd << " an=" << (*p.grad)[i]);
      REQUIRE(rel_err(fd, (*p.grad)[i]) < 3e-2);
      checked++;
    }
  }
  REQUIRE(checked >= 10);
}
