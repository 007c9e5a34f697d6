#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "refine/classifier/classifier.hpp"
#include "refine/nn/sgd.hpp"

namespace refine {

struct TrainConfig {
  int epochs = 40;
  int batch_size = 128;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> decay_epochs = {100, 130};  // 1-based epoch indices
  double decay_factor = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw ArgumentError("epochs must be nonnegative");
    if (batch_size <= 0 || lr <= 0.0 || momentum < 0.0 || weight_decay < 0.0) {
      throw ArgumentError("train config values must be positive");
    }
    for (int e : decay_epochs) {
      if (e <= 0) throw ArgumentError("decay epochs must be positive");
    }
  }

  double lr_at_epoch(int epoch_1based) const {
    double out = lr;
    for (int e : decay_epochs) {
      if (epoch_1based >= e) out *= decay_factor;
    }
    return out;
  }
};

using EpochLogger = std::function<void(int epoch, double loss)>;

// Mean cross-entropy over logits with integer targets; writes dlogits scaled
// by 1/N when dlogits is non-null.
inline double cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                            Tensor* dlogits = nullptr) {
  Matrix probs = nn::softmax(logits);
  const int n = probs.rows, k = probs.cols;
  double loss = 0.0;
  if (dlogits) *dlogits = Tensor(n, k, 1, 1);
  for (int i = 0; i < n; ++i) {
    const double p = std::max(static_cast<double>(probs.at(i, targets[i])), 1e-12);
    loss -= std::log(p);
    if (dlogits) {
      for (int j = 0; j < k; ++j) {
        dlogits->at(i, j, 0, 0) = (probs.at(i, j) - (j == targets[i] ? 1.0f : 0.0f)) / n;
      }
    }
  }
  return loss / n;
}

namespace detail {

// One SGD pass over (images, labels); shared by the clean and poisoned trainers.
inline void train_epochs(Classifier& model, const std::vector<Image>& images,
                         const std::vector<int>& labels, const TrainConfig& cfg,
                         const EpochLogger& log) {
  nn::Sgd opt(model.net().params(), static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum),
              static_cast<float>(cfg.weight_decay));
  Rng rng(cfg.seed);
  const std::size_t n = images.size();
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(static_cast<float>(cfg.lr_at_epoch(epoch)));
    std::vector<int> order = rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      Tensor x(static_cast<int>(e - b), images[0].c, images[0].h, images[0].w);
      std::vector<int> y(e - b);
      for (std::size_t i = b; i < e; ++i) {
        const Image& im = images[order[i]];
        std::copy(im.pix.begin(), im.pix.end(), x.sample(static_cast<int>(i - b)));
        y[i - b] = labels[order[i]];
      }
      Tensor logits = model.net().forward(x, /*train=*/true);
      Tensor dlogits;
      loss_sum += cross_entropy(logits, y, &dlogits);
      batches++;
      opt.zero_grad();
      model.net().backward(dlogits, /*want_input_grad=*/false, /*want_param_grads=*/true);
      opt.step();
    }
    if (log) log(epoch, batches ? loss_sum / batches : 0.0);
  }
}

}  // namespace detail

template <typename Dataset>  // LabeledDataset or PoisonedDataset
Classifier train_classifier(const Dataset& data, const TrainConfig& cfg, const std::string& arch,
                            int width, const EpochLogger& log = {}) {
  cfg.validate();
  if (data.images.empty()) throw ArgumentError("training data is empty");
  const Image& first = data.images.front();
  Classifier model(arch, data.num_classes, first.c, first.h, first.w, width, cfg.seed);
  detail::train_epochs(model, data.images, data.labels, cfg, log);
  return model;
}

// Continue training an existing model in place (used by the adaptive trainer).
template <typename Dataset>
void train_classifier_inplace(Classifier& model, const Dataset& data, const TrainConfig& cfg,
                              const EpochLogger& log = {}) {
  cfg.validate();
  if (data.images.empty()) throw ArgumentError("training data is empty");
  detail::train_epochs(model, data.images, data.labels, cfg, log);
}

}  // namespace refine
