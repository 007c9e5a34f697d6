#pragma once

#include <string>
#include <vector>

#include "refine/core/errors.hpp"
#include "refine/core/tensor.hpp"

namespace refine {

// A single image, planar CHW, pixels in [0, 1].
struct Image {
  int c = 0, h = 0, w = 0;
  std::vector<float> pix;

  Image() = default;
  Image(int c_, int h_, int w_) : c(c_), h(h_), w(w_), pix(static_cast<std::size_t>(c_) * h_ * w_, 0.0f) {}

  float& at(int ic, int iy, int ix) { return pix[(static_cast<std::size_t>(ic) * h + iy) * w + ix]; }
  float at(int ic, int iy, int ix) const { return pix[(static_cast<std::size_t>(ic) * h + iy) * w + ix]; }

  bool same_dims(const Image& o) const { return c == o.c && h == o.h && w == o.w; }

  void clamp01() {
    for (auto& p : pix) p = p < 0.0f ? 0.0f : (p > 1.0f ? 1.0f : p);
  }
};

struct LabeledDataset {
  std::vector<Image> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<std::string> class_names;

  std::size_t size() const { return images.size(); }

  void validate() const {
    if (images.empty()) throw ArgumentError("dataset is empty");
    if (images.size() != labels.size()) throw ArgumentError("image/label count mismatch");
    for (int l : labels) {
      if (l < 0 || l >= num_classes) {
        throw ArgumentError("label " + std::to_string(l) + " outside [0," +
                            std::to_string(num_classes) + ")");
      }
    }
    for (const auto& im : images) {
      if (!im.same_dims(images.front())) throw ArgumentError("inconsistent image dimensions");
    }
  }

  std::vector<int> class_counts() const {
    std::vector<int> counts(num_classes, 0);
    for (int l : labels) counts[l]++;
    return counts;
  }
};

struct UnlabeledDataset {
  std::vector<Image> images;
  std::size_t size() const { return images.size(); }
};

// Batch packing: images [begin, end) of a list into an NCHW tensor.
inline Tensor to_tensor(const std::vector<Image>& images, std::size_t begin, std::size_t end) {
  if (end > images.size() || begin >= end) throw ArgumentError("bad batch range");
  const Image& first = images[begin];
  Tensor t(static_cast<int>(end - begin), first.c, first.h, first.w);
  for (std::size_t i = begin; i < end; ++i) {
    if (!images[i].same_dims(first)) throw ArgumentError("batch images differ in dimensions");
    std::copy(images[i].pix.begin(), images[i].pix.end(), t.sample(static_cast<int>(i - begin)));
  }
  return t;
}

inline Tensor to_tensor(const std::vector<Image>& images) {
  return to_tensor(images, 0, images.size());
}

inline Image image_from_tensor(const Tensor& t, int sample) {
  Image im(t.c, t.h, t.w);
  std::copy(t.sample(sample), t.sample(sample) + t.sample_size(), im.pix.begin());
  return im;
}

}  // namespace refine
