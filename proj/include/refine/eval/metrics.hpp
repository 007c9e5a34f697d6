#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "refine/core/tensor.hpp"
#include "refine/data/types.hpp"

namespace refine {

using PredictFn = std::function<std::vector<int>(const std::vector<Image>&)>;

struct MetricsReport {
  double ba = 0.0;
  double asr = 0.0;
  std::size_t benign_count = 0;
  std::size_t triggered_count = 0;
  std::string config_echo;
};

inline double benign_accuracy(const PredictFn& predict, const LabeledDataset& test) {
  if (test.images.empty()) throw ArgumentError("benign_accuracy on empty test set");
  const std::vector<int> pred = predict(test.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == test.labels[i];
  return static_cast<double>(correct) / pred.size();
}

// Fraction of triggered samples classified as the attacker's target.
inline double attack_success_rate(const PredictFn& predict, const LabeledDataset& triggered_test,
                                  int target_label) {
  if (triggered_test.images.empty()) {
    throw ArgumentError(
        "attack_success_rate on empty triggered set "
        "(all test samples may carry the target label)");
  }
  const std::vector<int> pred = predict(triggered_test.images);
  std::size_t hits = 0;
  for (int p : pred) hits += p == target_label;
  return static_cast<double>(hits) / pred.size();
}

// ---------------------------------------------------------------------------

struct FeatureCloud {
  Matrix features;  // n x dim
  std::string tag;

  int count() const { return features.rows; }
  int dim() const { return features.cols; }
};

inline FeatureCloud make_cloud(Matrix features, std::string tag = {}) {
  if (features.rows < 1) throw ArgumentError("feature cloud needs at least one sample");
  return FeatureCloud{std::move(features), std::move(tag)};
}

// Euclidean distance between the two clouds' mean vectors.
inline double centroid_shift(const FeatureCloud& before, const FeatureCloud& after) {
  if (before.dim() != after.dim()) throw ArgumentError("feature width mismatch");
  double dist2 = 0.0;
  for (int j = 0; j < before.dim(); ++j) {
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < before.count(); ++i) mb += before.features.at(i, j);
    for (int i = 0; i < after.count(); ++i) ma += after.features.at(i, j);
    mb /= before.count();
    ma /= after.count();
    dist2 += (ma - mb) * (ma - mb);
  }
  return std::sqrt(dist2);
}

}  // namespace refine
