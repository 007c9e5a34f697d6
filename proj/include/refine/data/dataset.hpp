#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "refine/core/rng.hpp"
#include "refine/data/types.hpp"

namespace refine {

namespace fs = std::filesystem;

// Where a dataset split lives on disk.
//   format "cifar":   <root>/<split>.bin records of [label u8][C*H*W u8 planar],
//                     or the classic <root>/data_batch_*.bin + test_batch.bin names.
//   format "folders": <root>/<split>/<class_name>/*.ppm (binary P6).
struct DatasetDescriptor {
  std::string name = "synthetic";
  std::string root;
  std::string format = "cifar";
  std::string train_split = "train";
  std::string test_split = "test";
  int channels = 3, height = 32, width = 32;  // cifar format record shape
  int num_classes = 10;                       // cifar format only; folders infer it
};

namespace detail {

inline void load_cifar_file(const fs::path& path, int c, int h, int w, LabeledDataset& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open dataset file: " + path.string());
  const std::size_t npix = static_cast<std::size_t>(c) * h * w;
  std::vector<unsigned char> rec(1 + npix);
  while (in.read(reinterpret_cast<char*>(rec.data()), static_cast<std::streamsize>(rec.size()))) {
    Image im(c, h, w);
    for (std::size_t i = 0; i < npix; ++i) im.pix[i] = rec[1 + i] / 255.0f;
    out.images.push_back(std::move(im));
    out.labels.push_back(rec[0]);
  }
  if (in.gcount() != 0) throw IngestionError("truncated record in " + path.string());
}

inline Image load_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open image: " + path.string());
  std::string magic;
  int w = 0, h = 0, maxv = 0;
  in >> magic >> w >> h >> maxv;
  if (magic != "P6" || w <= 0 || h <= 0 || maxv != 255) {
    throw IngestionError("unsupported ppm header in " + path.string());
  }
  in.get();  // single whitespace after header
  std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * 3);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
    throw IngestionError("truncated ppm payload in " + path.string());
  }
  Image im(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        im.at(ch, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + ch] / 255.0f;
      }
    }
  }
  return im;
}

inline void save_ppm(const fs::path& path, const Image& im) {
  if (im.c != 3) throw ArgumentError("ppm export requires 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write image: " + path.string());
  out << "P6\n" << im.w << " " << im.h << "\n255\n";
  std::vector<unsigned char> buf(static_cast<std::size_t>(im.w) * im.h * 3);
  for (int y = 0; y < im.h; ++y) {
    for (int x = 0; x < im.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = std::clamp(im.at(ch, y, x), 0.0f, 1.0f);
        buf[(static_cast<std::size_t>(y) * im.w + x) * 3 + ch] =
            static_cast<unsigned char>(std::lround(v * 255.0f));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

}  // namespace detail

// Loads one split described by `desc`. Pixel values come back scaled to [0, 1].
inline LabeledDataset load_dataset(const DatasetDescriptor& desc, const std::string& split) {
  const fs::path root(desc.root);
  if (!fs::exists(root)) throw IngestionError("dataset root does not exist: " + root.string());
  LabeledDataset out;
  if (desc.format == "cifar") {
    std::vector<fs::path> files;
    if (fs::exists(root / (split + ".bin"))) {
      files.push_back(root / (split + ".bin"));
    } else if (split == desc.train_split) {
      for (int i = 1; i <= 5; ++i) {
        const fs::path p = root / ("data_batch_" + std::to_string(i) + ".bin");
        if (fs::exists(p)) files.push_back(p);
      }
    } else if (fs::exists(root / "test_batch.bin")) {
      files.push_back(root / "test_batch.bin");
    }
    if (files.empty()) {
      throw IngestionError("no archive files for split '" + split + "' under " + root.string());
    }
    for (const auto& f : files) {
      detail::load_cifar_file(f, desc.channels, desc.height, desc.width, out);
    }
    out.num_classes = desc.num_classes;
  } else if (desc.format == "folders") {
    const fs::path split_dir = root / split;
    if (!fs::exists(split_dir)) throw IngestionError("missing split directory: " + split_dir.string());
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(split_dir)) {
      if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw IngestionError("no class folders under " + split_dir.string());
    out.num_classes = static_cast<int>(class_dirs.size());
    for (int label = 0; label < out.num_classes; ++label) {
      out.class_names.push_back(class_dirs[label].filename().string());
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(class_dirs[label])) {
        if (e.path().extension() == ".ppm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const auto& f : files) {
        out.images.push_back(detail::load_ppm(f));
        out.labels.push_back(label);
      }
    }
  } else {
    throw IngestionError("unknown dataset format: " + desc.format);
  }
  out.validate();
  return out;
}

// Drops labels and keeps the first ceil(fraction*N) samples of a seeded shuffle.
inline UnlabeledDataset strip_labels(const LabeledDataset& dataset, double fraction,
                                     std::uint64_t seed) {
  if (!(fraction > 0.0) || fraction > 1.0) {
    throw ArgumentError("strip_labels fraction must be in (0,1]");
  }
  const std::size_t n = dataset.size();
  const std::size_t keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  Rng rng(seed);
  std::vector<int> order = rng.permutation(n);
  UnlabeledDataset out;
  out.images.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.images.push_back(dataset.images[order[i]]);
  return out;
}

// Exports a labeled split in the binary archive layout (<root>/<split>.bin).
inline void save_dataset_cifar(const LabeledDataset& dataset, const std::string& root,
                               const std::string& split) {
  fs::create_directories(root);
  const fs::path path = fs::path(root) / (split + ".bin");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write dataset file: " + path.string());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Image& im = dataset.images[i];
    std::vector<unsigned char> rec(1 + im.pix.size());
    rec[0] = static_cast<unsigned char>(dataset.labels[i]);
    for (std::size_t p = 0; p < im.pix.size(); ++p) {
      rec[1 + p] = static_cast<unsigned char>(std::lround(std::clamp(im.pix[p], 0.0f, 1.0f) * 255.0f));
    }
    out.write(reinterpret_cast<const char*>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
}

// Exports to the directory-of-class-folders layout with ppm files.
inline void save_dataset_folders(const LabeledDataset& dataset, const std::string& root,
                                 const std::string& split) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int label = dataset.labels[i];
    const std::string cls = label < static_cast<int>(dataset.class_names.size())
                                ? dataset.class_names[label]
                                : "class_" + std::to_string(label);
    const fs::path dir = fs::path(root) / split / cls;
    fs::create_directories(dir);
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.ppm", i);
    detail::save_ppm(dir / name, dataset.images[i]);
  }
}

}  // namespace refine
