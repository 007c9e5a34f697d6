#pragma once

#include <cmath>

#include "refine/data/types.hpp"

namespace refine {

// Bilinear sample with zero fill outside the image.
inline float sample_bilinear(const Image& im, int c, double y, double x) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const double fy = y - y0, fx = x - x0;
  float acc = 0.0f;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int yy = y0 + dy, xx = x0 + dx;
      if (yy < 0 || yy >= im.h || xx < 0 || xx >= im.w) continue;
      const double wgt = (dy ? fy : 1.0 - fy) * (dx ? fx : 1.0 - fx);
      acc += static_cast<float>(wgt) * im.at(c, yy, xx);
    }
  }
  return acc;
}

inline Image resize_bilinear(const Image& im, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw ArgumentError("resize target must be positive");
  Image out(im.c, out_h, out_w);
  const double sy = static_cast<double>(im.h) / out_h;
  const double sx = static_cast<double>(im.w) / out_w;
  for (int c = 0; c < im.c; ++c) {
    for (int y = 0; y < out_h; ++y) {
      for (int x = 0; x < out_w; ++x) {
        // Align pixel centers.
        const double src_y = (y + 0.5) * sy - 0.5;
        const double src_x = (x + 0.5) * sx - 0.5;
        out.at(c, y, x) = sample_bilinear(im, c, src_y, src_x);
      }
    }
  }
  out.clamp01();
  return out;
}

// Rotation about the image center, zero fill, same dimensions.
inline Image rotate(const Image& im, double angle_degrees) {
  const double a = angle_degrees * M_PI / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  const double cy = (im.h - 1) / 2.0, cx = (im.w - 1) / 2.0;
  Image out(im.c, im.h, im.w);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      // Inverse-map the output pixel into the source frame.
      const double ry = y - cy, rx = x - cx;
      const double src_y = cy + (sa * rx + ca * ry);
      const double src_x = cx + (ca * rx - sa * ry);
      for (int c = 0; c < im.c; ++c) out.at(c, y, x) = sample_bilinear(im, c, src_y, src_x);
    }
  }
  out.clamp01();
  return out;
}

}  // namespace refine
