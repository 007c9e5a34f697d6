#pragma once

#include <cmath>
#include <fstream>
#include <iostream>

#include "refine/attacks/trigger.hpp"
#include "refine/data/dataset.hpp"

namespace refine {

struct PoisonPlan {
  TriggerSpec trigger;
  int target_label = 0;
  double poison_rate = 0.1;

  void validate(int num_classes) const {
    if (target_label < 0 || target_label >= num_classes) {
      throw ArgumentError("target label outside [0,K)");
    }
    if (poison_rate < 0.0 || poison_rate > 1.0) throw ArgumentError("poison rate outside [0,1]");
  }
};

struct PoisonedDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  std::vector<char> poisoned;
  int num_classes = 0;
  PoisonPlan plan;

  std::size_t size() const { return images.size(); }
  std::size_t poisoned_count() const {
    std::size_t n = 0;
    for (char f : poisoned) n += f != 0;
    return n;
  }
};

// Injects the trigger into a seeded random ceil(rate*N) subset and relabels it
// to the target label; the remaining samples are untouched.
inline PoisonedDataset build_poisoned_dataset(const LabeledDataset& clean, const PoisonPlan& plan,
                                              std::uint64_t seed) {
  plan.validate(clean.num_classes);
  const std::size_t n = clean.size();
  const std::size_t m = static_cast<std::size_t>(std::ceil(plan.poison_rate * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<int> order = rng.permutation(n);
  std::vector<char> flag(n, 0);
  for (std::size_t i = 0; i < m; ++i) flag[order[i]] = 1;

  PoisonedDataset out;
  out.num_classes = clean.num_classes;
  out.plan = plan;
  out.images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (flag[i]) {
      out.images.push_back(inject_trigger(clean.images[i], plan.trigger));
      out.labels.push_back(plan.target_label);
    } else {
      out.images.push_back(clean.images[i]);
      out.labels.push_back(clean.labels[i]);
    }
    out.poisoned.push_back(flag[i]);
  }
  return out;
}

// Triggered copy of the test set for ASR evaluation. Samples whose true label
// already equals the target are excluded; true labels are kept for bookkeeping.
inline LabeledDataset poison_test_set(const LabeledDataset& clean_test, const PoisonPlan& plan) {
  plan.validate(clean_test.num_classes);
  LabeledDataset out;
  out.num_classes = clean_test.num_classes;
  out.class_names = clean_test.class_names;
  for (std::size_t i = 0; i < clean_test.size(); ++i) {
    if (clean_test.labels[i] == plan.target_label) continue;
    out.images.push_back(inject_trigger(clean_test.images[i], plan.trigger));
    out.labels.push_back(clean_test.labels[i]);
  }
  if (out.images.empty()) {
    std::cerr << "warning: triggered test set is empty (all samples carry the target label)\n";
  }
  return out;
}

// Exports the poisoned split like a clean one, plus a sidecar poison-flag index.
inline void export_poisoned_dataset(const PoisonedDataset& data, const std::string& root,
                                    const std::string& split) {
  LabeledDataset as_labeled;
  as_labeled.images = data.images;
  as_labeled.labels = data.labels;
  as_labeled.num_classes = data.num_classes;
  save_dataset_cifar(as_labeled, root, split);
  std::ofstream idx(fs::path(root) / (split + ".poison_index"));
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.poisoned[i]) idx << i << "\n";
  }
}

}  // namespace refine
