#pragma once

#include <cmath>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/eval/assignment.hpp"
#include "refine/eval/metrics.hpp"

namespace refine {

constexpr int kW1MaxSamples = 512;

// Exact first Wasserstein distance between two empirical clouds under
// Euclidean ground cost. Unequal cloud sizes are reconciled by seeded
// subsampling of the larger side; the result is then (1/n) times the optimal
// matching cost. Quadratic memory and cubic time, hence the sample cap.
inline double w1_empirical(const FeatureCloud& a, const FeatureCloud& b, std::uint64_t seed = 1) {
  if (a.dim() != b.dim()) throw ArgumentError("cloud dimensions differ");
  if (a.count() < 1 || b.count() < 1) throw ArgumentError("empty cloud");
  const int n = std::min(a.count(), b.count());
  if (n > kW1MaxSamples) {
    throw ArgumentError("cloud too large for exact matching (cap " +
                        std::to_string(kW1MaxSamples) + "); subsample before calling");
  }
  Rng rng(seed);
  auto pick = [&](const FeatureCloud& c) {
    if (c.count() == n) {
      std::vector<int> idx(n);
      for (int i = 0; i < n; ++i) idx[i] = i;
      return idx;
    }
    std::vector<int> idx = rng.permutation(static_cast<std::size_t>(c.count()));
    idx.resize(n);
    return idx;
  };
  const std::vector<int> ia = pick(a);
  const std::vector<int> ib = pick(b);

  const int d = a.dim();
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double diff = a.features.at(ia[i], k) - b.features.at(ib[j], k);
        s += diff * diff;
      }
      cost[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
    }
  }
  return solve_assignment(cost, n) / n;
}

// Bound check for the distributional-shift guarantee: the accuracy drop on the
// left, 2*alpha*sqrt(K)*W1 on the right (alpha = 1 for probability outputs).
struct ShiftBoundDiagnostics {
  double lhs = 0.0;   // |acc_before - acc_after|
  double w1 = 0.0;    // exact empirical W1 between feature clouds
  double bound = 0.0; // 2*sqrt(K)*w1
  double ratio = 0.0; // lhs / bound; valid only when ratio_defined
  bool ratio_defined = false;
};

inline ShiftBoundDiagnostics shift_bound_diagnostics(double acc_before, double acc_after,
                                                     int num_classes, const FeatureCloud& before,
                                                     const FeatureCloud& after,
                                                     std::uint64_t seed = 1) {
  if (num_classes < 1) throw ArgumentError("num_classes must be positive");
  if (before.count() < 2 || after.count() < 2) {
    throw ArgumentError("diagnostics need at least two samples per cloud");
  }
  ShiftBoundDiagnostics d;
  d.lhs = std::abs(acc_before - acc_after);
  d.w1 = w1_empirical(before, after, seed);
  d.bound = 2.0 * std::sqrt(static_cast<double>(num_classes)) * d.w1;
  if (d.bound > 0.0) {
    d.ratio = d.lhs / d.bound;
    d.ratio_defined = true;
  }
  return d;
}

}  // namespace refine
