#pragma once

#include "refine/core/rng.hpp"
#include "refine/data/imageops.hpp"

namespace refine {

struct ShrinkPadConfig {
  int pad_size = 4;
  std::uint64_t seed = 1;
};

// Shrink-and-pad transformation baseline: bilinear downscale by 2*S pixels,
// zero-pad back to the original size at a random offset. Placement is random
// per call; seed the generator per run for reproducibility.
class ShrinkPad {
 public:
  explicit ShrinkPad(const ShrinkPadConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  Image operator()(const Image& image) {
    const int s = cfg_.pad_size;
    if (s < 0) throw ArgumentError("pad size must be nonnegative");
    if (s == 0) return image;
    if (2 * s >= std::min(image.h, image.w)) {
      throw ArgumentError("pad size too large for image dimensions");
    }
    Image inner = resize_bilinear(image, image.h - 2 * s, image.w - 2 * s);
    const int off_y = static_cast<int>(rng_.index(2 * s + 1));
    const int off_x = static_cast<int>(rng_.index(2 * s + 1));
    Image out(image.c, image.h, image.w);
    for (int c = 0; c < image.c; ++c) {
      for (int y = 0; y < inner.h; ++y) {
        for (int x = 0; x < inner.w; ++x) out.at(c, off_y + y, off_x + x) = inner.at(c, y, x);
      }
    }
    return out;
  }

 private:
  ShrinkPadConfig cfg_;
  Rng rng_;
};

inline Image shrinkpad(const Image& image, const ShrinkPadConfig& cfg) {
  ShrinkPad op(cfg);
  return op(image);
}

}  // namespace refine
