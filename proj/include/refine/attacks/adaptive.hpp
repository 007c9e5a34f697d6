#pragma once

#include <functional>
#include <vector>

#include "refine/attacks/poison.hpp"
#include "refine/classifier/train.hpp"
#include "refine/refine/train.hpp"

namespace refine {

struct AdaptiveConfig {
  double gamma = 1.0;         // weight on the simulated-defense term
  TrainConfig train;          // classifier schedule
  RefineConfig sim;           // simulated defense; keep sim.epochs small
  std::size_t sim_subset = 512;  // unlabeled samples for the simulated defense
  std::uint64_t seed = 1;

  void validate() const {
    if (gamma < 0.0) throw ArgumentError("gamma must be nonnegative");
    if (sim_subset < 2) throw ArgumentError("simulated-defense subset must hold >= 2 samples");
    train.validate();
    sim.validate();
  }
};

struct AdaptiveEpochStats {
  int epoch = 0;
  double backdoor = 0.0;  // plain poisoned-data cross-entropy
  double defense = 0.0;   // simulated-defense objective
  double total = 0.0;     // backdoor + gamma * defense
};

using AdaptiveLogger = std::function<void(const AdaptiveEpochStats&)>;

struct AdaptiveResult {
  Classifier model;
  std::vector<AdaptiveEpochStats> log;
};

// Trains a backdoored classifier that also minimizes the defender's objective
// against a simulated defense. Each epoch the simulation is refreshed: a fresh
// fixed-point-free mapping is drawn and a transformation module is briefly
// re-optimized against the current classifier; the classifier then descends
// on ce(poisoned) + gamma * defense_loss with the simulation frozen.
inline AdaptiveResult train_adaptive_backdoor(const LabeledDataset& clean, const PoisonPlan& plan,
                                              const AdaptiveConfig& cfg, const std::string& arch,
                                              int width, const AdaptiveLogger& log = {}) {
  cfg.validate();
  PoisonedDataset poisoned = build_poisoned_dataset(clean, plan, cfg.seed);
  const std::size_t n = poisoned.size();
  if (n == 0) throw ArgumentError("training data is empty");
  const Image& first = poisoned.images.front();

  AdaptiveResult result{
      Classifier(arch, poisoned.num_classes, first.c, first.h, first.w, width, cfg.train.seed), {}};
  Classifier& model = result.model;

  nn::Sgd opt(model.net().params(), static_cast<float>(cfg.train.lr),
              static_cast<float>(cfg.train.momentum), static_cast<float>(cfg.train.weight_decay));
  Rng rng(cfg.train.seed);
  Rng sim_rng(cfg.seed ^ 0xada9717eULL);

  // Fixed unlabeled pool the attacker hands to its simulated defender.
  UnlabeledDataset sim_pool;
  {
    std::vector<int> order = sim_rng.permutation(n);
    const std::size_t m = std::min(cfg.sim_subset, n);
    for (std::size_t i = 0; i < m; ++i) sim_pool.images.push_back(poisoned.images[order[i]]);
  }

  std::vector<nn::ParamView> params = model.net().params();

  RefineLossOptions lopt;
  lopt.lambda = cfg.sim.lambda;
  lopt.tau = cfg.sim.tau;
  lopt.normalize_embeddings = cfg.sim.normalize_embeddings;
  lopt.transform_train_mode = false;  // simulation is frozen during the classifier step
  lopt.grads_into_classifier = true;

  for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
    opt.set_lr(static_cast<float>(cfg.train.lr_at_epoch(epoch)));

    // Refresh the simulated defense against the current classifier.
    OutputMapping mapping;
    std::unique_ptr<TransformNet> transform;
    if (cfg.gamma > 0.0) {
      RefineConfig sim = cfg.sim;
      sim.seed = sim_rng.next_u64();
      mapping = make_output_mapping(model.num_classes(), sim.seed);
      transform = std::make_unique<TransformNet>(train_refine(model, sim_pool, mapping, sim));
    }

    AdaptiveEpochStats stats;
    stats.epoch = epoch;
    std::vector<int> order = rng.permutation(n);
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.train.batch_size) {
      const std::size_t e = std::min(n, b + cfg.train.batch_size);
      if (cfg.gamma > 0.0 && e - b < 2) continue;  // defense term needs a pair
      Tensor x(static_cast<int>(e - b), first.c, first.h, first.w);
      std::vector<int> y(e - b);
      for (std::size_t i = b; i < e; ++i) {
        const Image& im = poisoned.images[order[i]];
        std::copy(im.pix.begin(), im.pix.end(), x.sample(static_cast<int>(i - b)));
        y[i - b] = poisoned.labels[order[i]];
      }

      opt.zero_grad();
      double defense_term = 0.0;
      if (cfg.gamma > 0.0) {
        RefineLossResult res = refine_loss(model, mapping, *transform, x, lopt);
        defense_term = res.total;
        for (auto& p : params) {
          if (!p.grad) continue;
          for (auto& g : *p.grad) g *= static_cast<float>(cfg.gamma);
        }
      }
      Tensor logits = model.net().forward(x, /*train=*/true);
      Tensor dlogits;
      const double backdoor_term = cross_entropy(logits, y, &dlogits);
      model.net().backward(dlogits, /*want_input_grad=*/false, /*want_param_grads=*/true);
      opt.step();

      stats.backdoor += backdoor_term;
      stats.defense += defense_term;
      stats.total += backdoor_term + cfg.gamma * defense_term;
      batches++;
    }
    if (batches) {
      stats.backdoor /= batches;
      stats.defense /= batches;
      stats.total /= batches;
    }
    result.log.push_back(stats);
    if (log) log(stats);
  }
  return result;
}

}  // namespace refine
