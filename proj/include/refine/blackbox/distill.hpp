#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "refine/blackbox/oracle.hpp"
#include "refine/classifier/train.hpp"
#include "refine/refine/train.hpp"

namespace refine {

struct DistillConfig {
  std::string arch = "resnet_small";
  int width = 8;
  int in_c = 3, in_h = 32, in_w = 32;
  TrainConfig train;  // lr / schedule for the surrogate
  // Distill/defend rounds. With one round the surrogate only matches the
  // oracle on the natural pool, so it can disagree arbitrarily on the
  // off-manifold images the trained transform emits. Additional rounds query
  // the oracle on those transformed images, refit the surrogate on the
  // augmented set, and retrain the transform.
  int rounds = 1;

  void validate() const {
    if (in_c <= 0 || in_h <= 0 || in_w <= 0 || width <= 0) {
      throw ArgumentError("distill input dims and width must be positive");
    }
    if (rounds < 1) throw ArgumentError("distillation needs at least one round");
    train.validate();
  }
};

// Mean squared error between probability vectors, averaged over samples and
// summed over classes; writes d(loss)/d(probs) when dprobs is non-null.
inline double mse_probs(const Matrix& probs, const Matrix& targets, Matrix* dprobs = nullptr) {
  if (probs.rows != targets.rows || probs.cols != targets.cols) {
    throw ArgumentError("probability matrix shapes differ");
  }
  if (dprobs) *dprobs = Matrix(probs.rows, probs.cols);
  double loss = 0.0;
  for (int i = 0; i < probs.rows; ++i) {
    for (int k = 0; k < probs.cols; ++k) {
      const double diff = probs.at(i, k) - targets.at(i, k);
      loss += diff * diff;
      if (dprobs) dprobs->at(i, k) = static_cast<float>(2.0 * diff / probs.rows);
    }
  }
  return loss / probs.rows;
}

// Fits a surrogate by regressing on pre-queried probability vectors.
inline Classifier fit_surrogate(const std::vector<Image>& images, const Matrix& targets, int k,
                                const DistillConfig& cfg, const EpochLogger& log = {}) {
  cfg.validate();
  if (images.empty()) throw ArgumentError("distillation pool is empty");
  if (targets.rows != static_cast<int>(images.size()) || targets.cols != k) {
    throw ArgumentError("distillation target matrix shape mismatch");
  }
  Classifier surrogate(cfg.arch, k, cfg.in_c, cfg.in_h, cfg.in_w, cfg.width, cfg.train.seed);
  nn::Sgd opt(surrogate.net().params(), static_cast<float>(cfg.train.lr),
              static_cast<float>(cfg.train.momentum), static_cast<float>(cfg.train.weight_decay));
  Rng rng(cfg.train.seed);
  const int k2 = k;
  (void)k2;
  const std::size_t n = images.size();

  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    opt.set_lr(static_cast<float>(cfg.train.lr_at_epoch(epoch)));
    std::vector<int> order = rng.permutation(n);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.train.batch_size) {
      const std::size_t e = std::min(n, b + cfg.train.batch_size);
      Tensor x(static_cast<int>(e - b), cfg.in_c, cfg.in_h, cfg.in_w);
      Matrix t(static_cast<int>(e - b), k);
      for (std::size_t i = b; i < e; ++i) {
        const Image& im = data.images[order[i]];
        std::copy(im.pix.begin(), im.pix.end(), x.sample(static_cast<int>(i - b)));
        std::copy(targets.row(order[i]), targets.row(order[i]) + k,
                  t.row(static_cast<int>(i - b)));
      }
      Tensor logits = surrogate.net().forward(x, /*train=*/true);
      Matrix probs = nn::softmax(logits);
      Matrix dprobs;
      loss_sum += mse_probs(probs, t, &dprobs);
      batches++;
      Tensor dlogits = nn::softmax_backward(probs, dprobs);
      opt.zero_grad();
      surrogate.net().backward(dlogits, /*want_input_grad=*/false, /*want_param_grads=*/true);
      opt.step();
    }
    if (log) log(epoch, batches ? loss_sum / batches : 0.0);
  }
  return surrogate;
}

// ---------------------------------------------------------------------------

// Deployed black-box composition: the transform and mapping live locally, the
// scores still come from the remote model.
struct BlackboxDefended {
  std::shared_ptr<TransformNet> transform;
  ScoreOracle* oracle = nullptr;
  OutputMapping mapping;

  std::vector<int> predict(const std::vector<Image>& images, int batch = 256) const {
    if (!transform || !oracle) throw ConfigError("black-box defense is incomplete");
    std::vector<int> labels(images.size());
    for (std::size_t b = 0; b < images.size(); b += batch) {
      const std::size_t e = std::min(images.size(), b + batch);
      Tensor tx = transform->forward(to_tensor(images, b, e), /*train=*/false);
      std::vector<Image> transformed;
      transformed.reserve(e - b);
      for (int i = 0; i < tx.n; ++i) transformed.push_back(image_from_tensor(tx, i));
      Matrix p = apply_mapping(oracle->query(transformed), mapping);
      for (int i = 0; i < p.rows; ++i) {
        int best = 0;
        for (int k = 1; k < p.cols; ++k) {
          if (p.at(i, k) > p.at(i, best)) best = k;
        }
        labels[b + i] = best;
      }
    }
    return labels;
  }
};

struct BlackboxResult {
  std::shared_ptr<Classifier> surrogate;
  std::shared_ptr<TransformNet> transform;
  OutputMapping mapping;

  BlackboxDefended deploy(ScoreOracle& oracle) const {
    return BlackboxDefended{transform, &oracle, mapping};
  }
};

// Query-only defense pipeline: distill a surrogate from the oracle, train the
// transformation module against the frozen surrogate (pseudo-labels taken
// from the oracle itself), then deploy the transform and mapping in front of
// the oracle.
inline BlackboxResult blackbox_defend(ScoreOracle& oracle, const UnlabeledDataset& pool,
                                      const DistillConfig& distill_cfg, const RefineConfig& cfg,
                                      const EpochLogger& distill_log = {},
                                      const RefineLogger& refine_log = {}) {
  BlackboxResult out;
  out.surrogate = std::make_shared<Classifier>(distill_surrogate(oracle, pool, distill_cfg,
                                                                 distill_log));
  out.mapping = make_output_mapping(oracle.num_classes(), cfg.seed);
  const std::vector<int> oracle_pseudo = oracle.query_labels(pool.images);
  out.transform = std::make_shared<TransformNet>(
      train_refine(*out.surrogate, pool, out.mapping, cfg, refine_log, &oracle_pseudo));
  return out;
}

}  // namespace refine
