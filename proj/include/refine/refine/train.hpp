#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "refine/data/types.hpp"
#include "refine/io/serialize.hpp"
#include "refine/nn/sgd.hpp"
#include "refine/refine/losses.hpp"

namespace refine {

struct RefineConfig {
  double lambda = 0.5;
  double tau = 0.1;
  bool normalize_embeddings = true;
  int epochs = 60;
  int batch_size = 128;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> decay_epochs = {100, 130};
  double decay_factor = 0.8;
  int transform_width = 16;
  std::uint64_t seed = 1;

  void validate() const {
    if (tau <= 0.0) throw ArgumentError("tau must be positive");
    if (lambda < 0.0) throw ArgumentError("lambda must be nonnegative");
    if (epochs < 0 || batch_size <= 0 || lr <= 0.0 || transform_width <= 0) {
      throw ArgumentError("refine config values must be positive");
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

struct RefineEpochStats {
  int epoch = 0;
  double total = 0.0, ce = 0.0, sup = 0.0;
};

using RefineLogger = std::function<void(const RefineEpochStats&)>;

// Optimizes the transformation module against the frozen model: per batch,
// transform, score, remap, pseudo-label, and step on the combined loss.
// Only the transform parameters move. When `fixed_pseudo` is given (one label
// per dataset image, e.g. from an external oracle) it replaces the model's
// own argmax pseudo-labels.
inline TransformNet train_refine(Classifier& model, const UnlabeledDataset& data,
                                 const OutputMapping& mapping, const RefineConfig& cfg,
                                 const RefineLogger& log = {},
                                 const std::vector<int>* fixed_pseudo = nullptr) {
  cfg.validate();
  if (data.images.empty()) throw ArgumentError("unlabeled dataset is empty");
  if (fixed_pseudo && fixed_pseudo->size() != data.images.size()) {
    throw ArgumentError("fixed pseudo-label count does not match dataset size");
  }
  if (!mapping.identity && !mapping.is_derangement()) {
    throw ConfigError("output mapping must be a derangement (or explicit identity)");
  }
  if (mapping.size() != model.num_classes()) {
    throw ConfigError("mapping size does not match model classes");
  }

  TransformNet transform(model.input_channels(), cfg.transform_width, cfg.seed);
  nn::Sgd opt(transform.params(), static_cast<float>(cfg.lr), static_cast<float>(cfg.momentum),
              static_cast<float>(cfg.weight_decay));
  Rng rng(cfg.seed);
  const std::size_t n = data.images.size();

  RefineLossOptions lopt;
  lopt.lambda = cfg.lambda;
  lopt.tau = cfg.tau;
  lopt.normalize_embeddings = cfg.normalize_embeddings;
  lopt.transform_train_mode = true;
  lopt.grads_into_transform = true;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    opt.set_lr(static_cast<float>(cfg.lr_at_epoch(epoch)));
    std::vector<int> order = rng.permutation(n);
    RefineEpochStats stats;
    stats.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += cfg.batch_size) {
      const std::size_t e = std::min(n, b + cfg.batch_size);
      if (e - b < 2) continue;  // supcon needs at least two samples
      Tensor x(static_cast<int>(e - b), model.input_channels(), model.input_height(),
               model.input_width());
      std::vector<int> batch_pseudo(fixed_pseudo ? e - b : 0);
      for (std::size_t i = b; i < e; ++i) {
        const Image& im = data.images[order[i]];
        std::copy(im.pix.begin(), im.pix.end(), x.sample(static_cast<int>(i - b)));
        if (fixed_pseudo) batch_pseudo[i - b] = (*fixed_pseudo)[order[i]];
      }
      opt.zero_grad();
      RefineLossResult res =
          fixed_pseudo
              ? refine_loss_with_pseudo(model, mapping, transform, x, std::move(batch_pseudo), lopt)
              : refine_loss(model, mapping, transform, x, lopt);
      opt.step();
      stats.total += res.total;
      stats.ce += res.ce;
      stats.sup += res.sup;
      batches++;
    }
    if (batches) {
      stats.total /= batches;
      stats.ce /= batches;
      stats.sup /= batches;
    }
    if (log) log(stats);
  }
  return transform;
}

// Applies the trained transform in inference mode; outputs stay in [0,1].
inline Tensor transform_batch(TransformNet& transform, const Tensor& batch) {
  return transform.forward(batch, /*train=*/false);
}

// ---------------------------------------------------------------------------

// The deployed composition: transform, frozen model, label remapping.
struct DefendedModel {
  std::shared_ptr<TransformNet> transform;
  std::shared_ptr<Classifier> model;
  OutputMapping mapping;

  void validate() const {
    if (!transform || !model) throw ConfigError("defended model is incomplete");
    if (transform->channels() != model->input_channels()) {
      throw ConfigError("transform channels do not match model input");
    }
    if (mapping.size() != model->num_classes()) {
      throw ConfigError("mapping size does not match model classes");
    }
  }

  Matrix predict_probs(const Tensor& batch) const {
    validate();
    Tensor transformed = transform->forward(batch, /*train=*/false);
    return apply_mapping(model->predict_probs(transformed), mapping);
  }
};

inline std::vector<int> defended_predict(const DefendedModel& defended,
                                         const std::vector<Image>& images, int batch = 256,
                                         Matrix* probs_out = nullptr) {
  defended.validate();
  std::vector<int> labels(images.size());
  if (probs_out) *probs_out = Matrix(static_cast<int>(images.size()), defended.mapping.size());
  for (std::size_t b = 0; b < images.size(); b += batch) {
    const std::size_t e = std::min(images.size(), b + batch);
    Matrix p = defended.predict_probs(to_tensor(images, b, e));
    for (int i = 0; i < p.rows; ++i) {
      int best = 0;
      for (int k = 1; k < p.cols; ++k) {
        if (p.at(i, k) > p.at(i, best)) best = k;
      }
      labels[b + i] = best;
      if (probs_out) {
        std::copy(p.row(i), p.row(i) + p.cols, probs_out->row(static_cast<int>(b + i)));
      }
    }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Defense checkpoint: the permutation travels with the transform parameters
// so inference never depends on the mapping seed.

constexpr const char* kDefenseMagic = "RFNDEF1";
constexpr std::uint32_t kDefenseVersion = 1;

inline void save_defense(const std::string& path, TransformNet& transform,
                         const OutputMapping& mapping, const std::string& config_echo) {
  std::filesystem::create_directories(std::filesystem::path(path).parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write defense checkpoint: " + path);
  out.write(kDefenseMagic, 8);
  io::write_u32(out, kDefenseVersion);
  io::write_u32(out, static_cast<std::uint32_t>(mapping.size()));
  io::write_u32(out, mapping.identity ? 1 : 0);
  for (int p : mapping.perm) io::write_u32(out, static_cast<std::uint32_t>(p));
  io::write_u32(out, static_cast<std::uint32_t>(transform.channels()));
  io::write_u32(out, static_cast<std::uint32_t>(transform.width()));
  io::write_string(out, config_echo);
  io::write_params(out, transform.params());
}

struct LoadedDefense {
  std::shared_ptr<TransformNet> transform;
  OutputMapping mapping;
  std::string config_echo;
};

inline LoadedDefense load_defense(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DependencyError("missing defense checkpoint: " + path);
  char magic[8] = {};
  in.read(magic, 8);
  if (std::string(magic, 7) != kDefenseMagic) throw IngestionError("bad defense magic in " + path);
  const std::uint32_t version = io::read_u32(in);
  if (version != kDefenseVersion) {
    throw IngestionError("unsupported defense checkpoint version " + std::to_string(version));
  }
  LoadedDefense out;
  const int k = static_cast<int>(io::read_u32(in));
  out.mapping.identity = io::read_u32(in) != 0;
  out.mapping.perm.resize(k);
  for (int i = 0; i < k; ++i) out.mapping.perm[i] = static_cast<int>(io::read_u32(in));
  const int channels = static_cast<int>(io::read_u32(in));
  const int width = static_cast<int>(io::read_u32(in));
  out.config_echo = io::read_string(in);
  out.transform = std::make_shared<TransformNet>(channels, width, 0);
  io::read_params(in, out.transform->params());
  return out;
}

}  // namespace refine
