#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/data/types.hpp"

namespace refine {

// Synthetic desk-scale image classification data. Each class is a fixed
// arrangement of colored Gaussian blobs; samples jitter the blob positions,
// colors, and background, then add pixel noise. The classes are separable by
// a small convnet but not by any single pixel.
struct SynthConfig {
  int num_classes = 10;
  int height = 32, width = 32;
  int blobs_per_class = 3;
  double position_jitter = 2.5;  // pixels
  double color_jitter = 0.08;
  double pixel_noise = 0.04;
};

namespace detail {

struct Blob {
  double cy, cx, sigma;
  float color[3];
};

inline std::vector<Blob> class_blobs(const SynthConfig& cfg, int label, std::uint64_t seed) {
  Rng rng(seed * 1000003ULL + static_cast<std::uint64_t>(label));
  std::vector<Blob> blobs;
  for (int b = 0; b < cfg.blobs_per_class; ++b) {
    Blob blob;
    // Keep blob centers away from the border so patch triggers stay distinct.
    blob.cy = rng.uniform(6.0, cfg.height - 7.0);
    blob.cx = rng.uniform(6.0, cfg.width - 7.0);
    blob.sigma = rng.uniform(2.5, 4.5);
    for (int c = 0; c < 3; ++c) blob.color[c] = static_cast<float>(rng.uniform(-0.9, 0.9));
    blobs.push_back(blob);
  }
  return blobs;
}

}  // namespace detail

inline Image synth_sample(const SynthConfig& cfg, const std::vector<detail::Blob>& blobs, Rng& rng) {
  Image im(3, cfg.height, cfg.width);
  const float bg = static_cast<float>(rng.uniform(0.35, 0.65));
  for (auto& p : im.pix) p = bg;
  for (const auto& blob : blobs) {
    const double cy = blob.cy + rng.gaussian(0.0, cfg.position_jitter);
    const double cx = blob.cx + rng.gaussian(0.0, cfg.position_jitter);
    float col[3];
    for (int c = 0; c < 3; ++c) {
      col[c] = blob.color[c] + static_cast<float>(rng.gaussian(0.0, cfg.color_jitter));
    }
    const double inv2s2 = 1.0 / (2.0 * blob.sigma * blob.sigma);
    for (int y = 0; y < cfg.height; ++y) {
      for (int x = 0; x < cfg.width; ++x) {
        const double d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
        const float g = static_cast<float>(std::exp(-d2 * inv2s2));
        for (int c = 0; c < 3; ++c) im.at(c, y, x) += col[c] * g;
      }
    }
  }
  for (auto& p : im.pix) p += static_cast<float>(rng.gaussian(0.0, cfg.pixel_noise));
  im.clamp01();
  return im;
}

// `class_seed` fixes the class definitions (blob layouts); `sample_seed`
// drives the per-sample noise, so train and test splits share classes but not
// samples.
inline LabeledDataset make_synthetic(const SynthConfig& cfg, int samples_per_class,
                                     std::uint64_t class_seed, std::uint64_t sample_seed) {
  LabeledDataset out;
  out.num_classes = cfg.num_classes;
  Rng rng(sample_seed);
  for (int label = 0; label < cfg.num_classes; ++label) {
    out.class_names.push_back("class_" + std::to_string(label));
    const auto blobs = detail::class_blobs(cfg, label, class_seed);
    for (int i = 0; i < samples_per_class; ++i) {
      out.images.push_back(synth_sample(cfg, blobs, rng));
      out.labels.push_back(label);
    }
  }
  // Interleave classes so sequential batches are mixed even without shuffling.
  Rng order_rng(sample_seed ^ 0xabcdef12345ULL);
  std::vector<int> order = order_rng.permutation(out.size());
  LabeledDataset shuffled;
  shuffled.num_classes = out.num_classes;
  shuffled.class_names = out.class_names;
  for (int idx : order) {
    shuffled.images.push_back(std::move(out.images[idx]));
    shuffled.labels.push_back(out.labels[idx]);
  }
  return shuffled;
}

inline LabeledDataset make_synthetic(const SynthConfig& cfg, int samples_per_class,
                                     std::uint64_t seed) {
  return make_synthetic(cfg, samples_per_class, seed, seed);
}

}  // namespace refine
