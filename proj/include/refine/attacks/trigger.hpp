#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/data/imageops.hpp"
#include "refine/data/types.hpp"

namespace refine {

enum class TriggerVariant { Patch, Blend, Rotation };

inline std::string to_string(TriggerVariant v) {
  switch (v) {
    case TriggerVariant::Patch: return "patch";
    case TriggerVariant::Blend: return "blend";
    case TriggerVariant::Rotation: return "rotation";
  }
  return "?";
}

inline TriggerVariant trigger_variant_from_string(const std::string& s) {
  if (s == "patch") return TriggerVariant::Patch;
  if (s == "blend") return TriggerVariant::Blend;
  if (s == "rotation") return TriggerVariant::Rotation;
  throw ArgumentError("unknown trigger variant: " + s);
}

struct TriggerSpec {
  TriggerVariant variant = TriggerVariant::Patch;
  // patch
  Image patch_pattern;
  int anchor_row = -1, anchor_col = -1;  // -1 means bottom-right aligned
  // blend
  Image blend_pattern;
  double blend_ratio = 0.1;
  // rotation
  double angle_degrees = 16.0;
};

// Fixed random square pattern, seeded per experiment.
inline Image make_random_patch(int size, int channels, std::uint64_t seed) {
  Rng rng(seed);
  Image p(channels, size, size);
  for (auto& v : p.pix) v = static_cast<float>(rng.uniform());
  return p;
}

// Deterministic smooth full-size pattern used as the default blend trigger.
inline Image make_default_blend_pattern(int channels, int h, int w) {
  Image p(channels, h, w);
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double phase = 2.0 * M_PI * (c + 1);
        p.at(c, y, x) = static_cast<float>(
            0.5 + 0.5 * std::sin(phase * x / w + 1.7 * phase * y / h + 0.9 * c));
      }
    }
  }
  return p;
}

inline TriggerSpec default_patch_trigger(std::uint64_t seed, int size = 3, int channels = 3) {
  TriggerSpec t;
  t.variant = TriggerVariant::Patch;
  t.patch_pattern = make_random_patch(size, channels, seed);
  return t;
}

inline Image inject_trigger(const Image& image, const TriggerSpec& trigger) {
  switch (trigger.variant) {
    case TriggerVariant::Patch: {
      const Image& p = trigger.patch_pattern;
      if (p.c != image.c) throw ArgumentError("patch channel count mismatch");
      const int row = trigger.anchor_row >= 0 ? trigger.anchor_row : image.h - p.h;
      const int col = trigger.anchor_col >= 0 ? trigger.anchor_col : image.w - p.w;
      if (row < 0 || col < 0 || row + p.h > image.h || col + p.w > image.w) {
        throw ArgumentError("patch out of bounds at anchor (" + std::to_string(row) + "," +
                            std::to_string(col) + ")");
      }
      Image out = image;
      for (int c = 0; c < p.c; ++c) {
        for (int y = 0; y < p.h; ++y) {
          for (int x = 0; x < p.w; ++x) out.at(c, row + y, col + x) = p.at(c, y, x);
        }
      }
      return out;
    }
    case TriggerVariant::Blend: {
      const Image& p = trigger.blend_pattern;
      if (!p.same_dims(image)) throw ArgumentError("blend pattern dimension mismatch");
      if (trigger.blend_ratio < 0.0 || trigger.blend_ratio > 1.0) {
        throw ArgumentError("blend ratio outside [0,1]");
      }
      Image out = image;
      const float r = static_cast<float>(trigger.blend_ratio);
      for (std::size_t i = 0; i < out.pix.size(); ++i) {
        out.pix[i] = (1.0f - r) * image.pix[i] + r * p.pix[i];
      }
      out.clamp01();
      return out;
    }
    case TriggerVariant::Rotation:
      return rotate(image, trigger.angle_degrees);
  }
  throw ArgumentError("invalid trigger variant");
}

}  // namespace refine
