#pragma once

#include <cstdint>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/core/tensor.hpp"

namespace refine {

// Fixed-point-free label permutation: model class l~ is reported as perm[l~].
// The identity variant exists only for the mapping-bypass ablation.
struct OutputMapping {
  std::vector<int> perm;
  std::uint64_t seed = 0;
  bool identity = false;

  int size() const { return static_cast<int>(perm.size()); }

  bool is_derangement() const {
    for (int i = 0; i < size(); ++i) {
      if (perm[i] == i) return false;
    }
    return is_bijection();
  }

  bool is_bijection() const {
    std::vector<char> seen(perm.size(), 0);
    for (int p : perm) {
      if (p < 0 || p >= size() || seen[p]) return false;
      seen[p] = 1;
    }
    return true;
  }

  OutputMapping inverse() const {
    OutputMapping inv;
    inv.perm.resize(perm.size());
    inv.seed = seed;
    inv.identity = identity;
    for (int i = 0; i < size(); ++i) inv.perm[perm[i]] = i;
    return inv;
  }
};

// Uniform-at-random derangement via rejection sampling of uniform shuffles.
inline OutputMapping make_output_mapping(int num_classes, std::uint64_t seed) {
  if (num_classes < 2) throw ArgumentError("no derangement exists for K < 2");
  Rng rng(seed);
  OutputMapping m;
  m.seed = seed;
  for (;;) {
    m.perm = rng.permutation(num_classes);
    bool fixed_point = false;
    for (int i = 0; i < num_classes; ++i) {
      if (m.perm[i] == i) {
        fixed_point = true;
        break;
      }
    }
    if (!fixed_point) return m;
  }
}

inline OutputMapping make_identity_mapping(int num_classes) {
  OutputMapping m;
  m.identity = true;
  m.perm.resize(num_classes);
  for (int i = 0; i < num_classes; ++i) m.perm[i] = i;
  return m;
}

// Pure index permutation of a score vector: out[perm[l]] = scores[l].
inline std::vector<float> apply_mapping(const std::vector<float>& scores, const OutputMapping& m) {
  if (static_cast<int>(scores.size()) != m.size()) {
    throw ArgumentError("score length does not match mapping size");
  }
  std::vector<float> out(scores.size());
  for (int l = 0; l < m.size(); ++l) out[m.perm[l]] = scores[l];
  return out;
}

inline Matrix apply_mapping(const Matrix& scores, const OutputMapping& m) {
  if (scores.cols != m.size()) throw ArgumentError("score width does not match mapping size");
  Matrix out(scores.rows, scores.cols);
  for (int i = 0; i < scores.rows; ++i) {
    for (int l = 0; l < m.size(); ++l) out.at(i, m.perm[l]) = scores.at(i, l);
  }
  return out;
}

}  // namespace refine
