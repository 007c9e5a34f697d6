#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "refine/attacks/adaptive.hpp"
#include "refine/blackbox/distill.hpp"
#include "refine/data/dataset.hpp"
#include "refine/data/synth.hpp"

namespace refine {

using nlohmann::json;

namespace detail {

// Rejects unknown keys so config typos fail loudly, naming every offender.
inline void check_keys(const json& obj, const std::string& where,
                       const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError("'" + where + "' must be a JSON object");
  std::vector<std::string> bad;
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.count(key)) bad.push_back(key);
  }
  if (!bad.empty()) {
    std::string msg = "unknown keys under '" + where + "':";
    for (const auto& k : bad) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
}

template <typename T>
void maybe(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

}  // namespace detail

struct DataConfig {
  std::string kind = "synthetic";  // "synthetic" or "archive"
  DatasetDescriptor archive;
  SynthConfig synth;
  int samples_per_class = 200;
  int test_per_class = 60;
  std::uint64_t seed = 7;
};

struct AttackConfig {
  std::string variant = "patch";
  int target_label = 0;
  double poison_rate = 0.1;
  int patch_size = 3;
  double blend_ratio = 0.1;
  double angle_degrees = 16.0;
  std::uint64_t trigger_seed = 11;

  TriggerSpec build_trigger(int channels, int h, int w) const {
    TriggerSpec t;
    t.variant = trigger_variant_from_string(variant);
    switch (t.variant) {
      case TriggerVariant::Patch:
        t.patch_pattern = make_random_patch(patch_size, channels, trigger_seed);
        break;
      case TriggerVariant::Blend:
        t.blend_pattern = make_default_blend_pattern(channels, h, w);
        t.blend_ratio = blend_ratio;
        break;
      case TriggerVariant::Rotation:
        t.angle_degrees = angle_degrees;
        break;
    }
    return t;
  }

  PoisonPlan build_plan(int channels, int h, int w) const {
    PoisonPlan plan;
    plan.trigger = build_trigger(channels, h, w);
    plan.target_label = target_label;
    plan.poison_rate = poison_rate;
    return plan;
  }
};

struct DefenseConfig {
  RefineConfig refine;
  double unlabeled_fraction = 0.25;
  bool no_hrf = false;  // ablation: identity mapping instead of a derangement
  bool no_scl = false;  // ablation: drop the contrastive term (lambda = 0)
};

struct BlackboxConfig {
  DistillConfig distill;
  double pool_fraction = 0.25;
};

struct ExperimentConfig {
  DataConfig data;
  AttackConfig attack;
  TrainConfig train;
  DefenseConfig defense;
  AdaptiveConfig adaptive;
  BlackboxConfig blackbox;
  std::vector<int> pad_sizes = {0, 2, 4, 6};
  std::string arch = "resnet_small";
  int width = 8;
  std::uint64_t seed = 1;
  std::string outdir = "out";
};

namespace detail {

inline void parse_train(const json& j, const std::string& where, TrainConfig& cfg) {
  check_keys(j, where,
             {"epochs", "batch_size", "lr", "momentum", "weight_decay", "decay_epochs",
              "decay_factor", "seed"});
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "lr", cfg.lr);
  maybe(j, "momentum", cfg.momentum);
  maybe(j, "weight_decay", cfg.weight_decay);
  maybe(j, "decay_epochs", cfg.decay_epochs);
  maybe(j, "decay_factor", cfg.decay_factor);
  maybe(j, "seed", cfg.seed);
}

inline void parse_refine(const json& j, const std::string& where, RefineConfig& cfg) {
  check_keys(j, where,
             {"lambda", "tau", "normalize_embeddings", "epochs", "batch_size", "lr", "momentum",
              "weight_decay", "decay_epochs", "decay_factor", "transform_width", "seed"});
  maybe(j, "lambda", cfg.lambda);
  maybe(j, "tau", cfg.tau);
  maybe(j, "normalize_embeddings", cfg.normalize_embeddings);
  maybe(j, "epochs", cfg.epochs);
  maybe(j, "batch_size", cfg.batch_size);
  maybe(j, "lr", cfg.lr);
  maybe(j, "momentum", cfg.momentum);
  maybe(j, "weight_decay", cfg.weight_decay);
  maybe(j, "decay_epochs", cfg.decay_epochs);
  maybe(j, "decay_factor", cfg.decay_factor);
  maybe(j, "transform_width", cfg.transform_width);
  maybe(j, "seed", cfg.seed);
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const json& j) {
  using detail::check_keys;
  using detail::maybe;
  ExperimentConfig cfg;
  check_keys(j, "<root>",
             {"data", "attack", "train", "defense", "adaptive", "blackbox", "pad_sizes", "arch",
              "width", "seed", "outdir"});

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data",
               {"kind", "root", "format", "train_split", "test_split", "channels", "height",
                "width", "num_classes", "samples_per_class", "test_per_class", "seed",
                "blobs_per_class", "position_jitter", "color_jitter", "pixel_noise"});
    maybe(d, "kind", cfg.data.kind);
    if (cfg.data.kind != "synthetic" && cfg.data.kind != "archive") {
      throw ConfigError("data.kind must be 'synthetic' or 'archive'");
    }
    maybe(d, "root", cfg.data.archive.root);
    maybe(d, "format", cfg.data.archive.format);
    maybe(d, "train_split", cfg.data.archive.train_split);
    maybe(d, "test_split", cfg.data.archive.test_split);
    maybe(d, "channels", cfg.data.archive.channels);
    maybe(d, "height", cfg.data.archive.height);
    maybe(d, "width", cfg.data.archive.width);
    maybe(d, "num_classes", cfg.data.archive.num_classes);
    maybe(d, "samples_per_class", cfg.data.samples_per_class);
    maybe(d, "test_per_class", cfg.data.test_per_class);
    maybe(d, "seed", cfg.data.seed);
    maybe(d, "num_classes", cfg.data.synth.num_classes);
    maybe(d, "height", cfg.data.synth.height);
    maybe(d, "width", cfg.data.synth.width);
    maybe(d, "blobs_per_class", cfg.data.synth.blobs_per_class);
    maybe(d, "position_jitter", cfg.data.synth.position_jitter);
    maybe(d, "color_jitter", cfg.data.synth.color_jitter);
    maybe(d, "pixel_noise", cfg.data.synth.pixel_noise);
  }

  if (j.contains("attack")) {
    const json& a = j.at("attack");
    check_keys(a, "attack",
               {"variant", "target_label", "poison_rate", "patch_size", "blend_ratio",
                "angle_degrees", "trigger_seed"});
    maybe(a, "variant", cfg.attack.variant);
    trigger_variant_from_string(cfg.attack.variant);  // validates
    maybe(a, "target_label", cfg.attack.target_label);
    maybe(a, "poison_rate", cfg.attack.poison_rate);
    maybe(a, "patch_size", cfg.attack.patch_size);
    maybe(a, "blend_ratio", cfg.attack.blend_ratio);
    maybe(a, "angle_degrees", cfg.attack.angle_degrees);
    maybe(a, "trigger_seed", cfg.attack.trigger_seed);
  }

  if (j.contains("train")) detail::parse_train(j.at("train"), "train", cfg.train);

  if (j.contains("defense")) {
    const json& d = j.at("defense");
    check_keys(d, "defense",
               {"lambda", "tau", "normalize_embeddings", "epochs", "batch_size", "lr", "momentum",
                "weight_decay", "decay_epochs", "decay_factor", "transform_width", "seed",
                "unlabeled_fraction", "no_hrf", "no_scl"});
    json r = d;
    r.erase("unlabeled_fraction");
    r.erase("no_hrf");
    r.erase("no_scl");
    detail::parse_refine(r, "defense", cfg.defense.refine);
    maybe(d, "unlabeled_fraction", cfg.defense.unlabeled_fraction);
    maybe(d, "no_hrf", cfg.defense.no_hrf);
    maybe(d, "no_scl", cfg.defense.no_scl);
  }

  if (j.contains("adaptive")) {
    const json& a = j.at("adaptive");
    check_keys(a, "adaptive", {"gamma", "sim_subset", "train", "sim", "seed"});
    maybe(a, "gamma", cfg.adaptive.gamma);
    maybe(a, "sim_subset", cfg.adaptive.sim_subset);
    maybe(a, "seed", cfg.adaptive.seed);
    if (a.contains("train")) detail::parse_train(a.at("train"), "adaptive.train", cfg.adaptive.train);
    if (a.contains("sim")) detail::parse_refine(a.at("sim"), "adaptive.sim", cfg.adaptive.sim);
  }

  if (j.contains("blackbox")) {
    const json& b = j.at("blackbox");
    check_keys(b, "blackbox", {"arch", "width", "pool_fraction", "train"});
    maybe(b, "arch", cfg.blackbox.distill.arch);
    maybe(b, "width", cfg.blackbox.distill.width);
    maybe(b, "pool_fraction", cfg.blackbox.pool_fraction);
    if (b.contains("train")) {
      detail::parse_train(b.at("train"), "blackbox.train", cfg.blackbox.distill.train);
    }
  }

  maybe(j, "pad_sizes", cfg.pad_sizes);
  maybe(j, "arch", cfg.arch);
  maybe(j, "width", cfg.width);
  maybe(j, "seed", cfg.seed);
  maybe(j, "outdir", cfg.outdir);

  cfg.train.validate();
  cfg.defense.refine.validate();
  if (cfg.defense.unlabeled_fraction <= 0.0 || cfg.defense.unlabeled_fraction > 1.0) {
    throw ConfigError("defense.unlabeled_fraction must be in (0,1]");
  }
  for (int s : cfg.pad_sizes) {
    if (s < 0) throw ConfigError("pad_sizes entries must be nonnegative");
  }
  if (cfg.width <= 0) throw ConfigError("width must be positive");
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in " + path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

// Canonical serialization: every effective value, in a fixed key order, so two
// configs hash equal exactly when they run the same experiment.
inline json experiment_config_echo(const ExperimentConfig& cfg) {
  json train_j = {{"epochs", cfg.train.epochs},
                  {"batch_size", cfg.train.batch_size},
                  {"lr", cfg.train.lr},
                  {"momentum", cfg.train.momentum},
                  {"weight_decay", cfg.train.weight_decay},
                  {"decay_epochs", cfg.train.decay_epochs},
                  {"decay_factor", cfg.train.decay_factor},
                  {"seed", cfg.train.seed}};
  auto refine_j = [](const RefineConfig& r) {
    return json{{"lambda", r.lambda},
                {"tau", r.tau},
                {"normalize_embeddings", r.normalize_embeddings},
                {"epochs", r.epochs},
                {"batch_size", r.batch_size},
                {"lr", r.lr},
                {"momentum", r.momentum},
                {"weight_decay", r.weight_decay},
                {"decay_epochs", r.decay_epochs},
                {"decay_factor", r.decay_factor},
                {"transform_width", r.transform_width},
                {"seed", r.seed}};
  };
  auto train_echo = [](const TrainConfig& t) {
    return json{{"epochs", t.epochs},       {"batch_size", t.batch_size},
                {"lr", t.lr},               {"momentum", t.momentum},
                {"weight_decay", t.weight_decay}, {"decay_epochs", t.decay_epochs},
                {"decay_factor", t.decay_factor}, {"seed", t.seed}};
  };
  return json{
      {"data",
       {{"kind", cfg.data.kind},
        {"root", cfg.data.archive.root},
        {"format", cfg.data.archive.format},
        {"num_classes", cfg.data.synth.num_classes},
        {"height", cfg.data.synth.height},
        {"width", cfg.data.synth.width},
        {"samples_per_class", cfg.data.samples_per_class},
        {"test_per_class", cfg.data.test_per_class},
        {"seed", cfg.data.seed}}},
      {"attack",
       {{"variant", cfg.attack.variant},
        {"target_label", cfg.attack.target_label},
        {"poison_rate", cfg.attack.poison_rate},
        {"patch_size", cfg.attack.patch_size},
        {"blend_ratio", cfg.attack.blend_ratio},
        {"angle_degrees", cfg.attack.angle_degrees},
        {"trigger_seed", cfg.attack.trigger_seed}}},
      {"train", train_j},
      {"defense",
       {{"refine", refine_j(cfg.defense.refine)},
        {"unlabeled_fraction", cfg.defense.unlabeled_fraction},
        {"no_hrf", cfg.defense.no_hrf},
        {"no_scl", cfg.defense.no_scl}}},
      {"adaptive",
       {{"gamma", cfg.adaptive.gamma},
        {"sim_subset", cfg.adaptive.sim_subset},
        {"seed", cfg.adaptive.seed},
        {"train", train_echo(cfg.adaptive.train)},
        {"sim", refine_j(cfg.adaptive.sim)}}},
      {"blackbox",
       {{"arch", cfg.blackbox.distill.arch},
        {"width", cfg.blackbox.distill.width},
        {"pool_fraction", cfg.blackbox.pool_fraction},
        {"train", train_echo(cfg.blackbox.distill.train)}}},
      {"pad_sizes", cfg.pad_sizes},
      {"arch", cfg.arch},
      {"width", cfg.width},
      {"seed", cfg.seed},
      {"outdir", cfg.outdir}};
}

// FNV-1a over the canonical echo; stable across runs and platforms.
inline std::string experiment_config_hash(const ExperimentConfig& cfg) {
  const std::string s = experiment_config_echo(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace refine
