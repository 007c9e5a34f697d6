#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "refine/classifier/net.hpp"
#include "refine/data/types.hpp"
#include "refine/io/serialize.hpp"

namespace refine {

// Trained K-class model plus its metadata. Inference entry points operate on
// image batches; the underlying net is reachable for gradient-based training.
class Classifier {
 public:
  Classifier(std::string arch, int num_classes, int in_c, int in_h, int in_w, int width,
             std::uint64_t init_seed)
      : arch_(std::move(arch)),
        num_classes_(num_classes),
        in_c_(in_c),
        in_h_(in_h),
        in_w_(in_w),
        width_(width) {
    Rng rng(init_seed);
    net_ = make_classifier_net(arch_, in_c_, num_classes_, width_, rng);
  }

  const std::string& arch() const { return arch_; }
  int num_classes() const { return num_classes_; }
  int input_channels() const { return in_c_; }
  int input_height() const { return in_h_; }
  int input_width() const { return in_w_; }
  int width() const { return width_; }
  int feature_dim() const { return net_->feature_dim(); }
  const std::string& train_config_echo() const { return train_config_echo_; }
  void set_train_config_echo(std::string echo) { train_config_echo_ = std::move(echo); }

  ClassifierNet& net() { return *net_; }
  const ClassifierNet& net() const { return *net_; }

  void check_batch(const Tensor& x) const {
    if (x.c != in_c_ || x.h != in_h_ || x.w != in_w_) {
      throw ArgumentError("batch dimensions do not match model input dims");
    }
  }

  Tensor logits(const Tensor& x) const {
    check_batch(x);
    return net_->forward(x, /*train=*/false);
  }

  Matrix predict_probs(const Tensor& x) const { return nn::softmax(logits(x)); }

  Matrix predict_probs(const std::vector<Image>& images, int batch = 256) const {
    Matrix out(static_cast<int>(images.size()), num_classes_);
    for (std::size_t b = 0; b < images.size(); b += batch) {
      const std::size_t e = std::min(images.size(), b + batch);
      Matrix p = predict_probs(to_tensor(images, b, e));
      std::copy(p.v.begin(), p.v.end(), out.row(static_cast<int>(b)));
    }
    return out;
  }

  std::vector<int> predict_labels(const std::vector<Image>& images, int batch = 256) const {
    Matrix p = predict_probs(images, batch);
    std::vector<int> labels(p.rows);
    for (int i = 0; i < p.rows; ++i) {
      int best = 0;
      for (int k = 1; k < p.cols; ++k) {
        if (p.at(i, k) > p.at(i, best)) best = k;
      }
      labels[i] = best;
    }
    return labels;
  }

  // Penultimate-layer representations f(x).
  Matrix extract_features(const std::vector<Image>& images, int batch = 256) const {
    Matrix out(static_cast<int>(images.size()), feature_dim());
    for (std::size_t b = 0; b < images.size(); b += batch) {
      const std::size_t e = std::min(images.size(), b + batch);
      Tensor x = to_tensor(images, b, e);
      check_batch(x);
      net_->forward(x, false);
      const Tensor& f = net_->last_features();
      std::copy(f.v.begin(), f.v.end(), out.row(static_cast<int>(b)));
    }
    return out;
  }

  static constexpr const char* kMagic = "RFNCLS1";
  static constexpr std::uint32_t kVersion = 1;

  void save(const std::string& path) const {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("cannot write checkpoint: " + path);
    out.write(kMagic, 8);
    io::write_u32(out, kVersion);
    io::write_string(out, arch_);
    io::write_u32(out, static_cast<std::uint32_t>(num_classes_));
    io::write_u32(out, static_cast<std::uint32_t>(in_c_));
    io::write_u32(out, static_cast<std::uint32_t>(in_h_));
    io::write_u32(out, static_cast<std::uint32_t>(in_w_));
    io::write_u32(out, static_cast<std::uint32_t>(width_));
    io::write_string(out, train_config_echo_);
    io::write_params(out, net_->params());
  }

  static Classifier load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DependencyError("missing classifier checkpoint: " + path);
    char magic[8] = {};
    in.read(magic, 8);
    if (std::string(magic, 7) != kMagic) throw IngestionError("bad checkpoint magic in " + path);
    const std::uint32_t version = io::read_u32(in);
    if (version != kVersion) {
      throw IngestionError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::string arch = io::read_string(in);
    const int k = static_cast<int>(io::read_u32(in));
    const int c = static_cast<int>(io::read_u32(in));
    const int h = static_cast<int>(io::read_u32(in));
    const int w = static_cast<int>(io::read_u32(in));
    const int width = static_cast<int>(io::read_u32(in));
    Classifier model(arch, k, c, h, w, width, /*init_seed=*/0);
    model.train_config_echo_ = io::read_string(in);
    io::read_params(in, model.net_->params());
    return model;
  }

 private:
  std::string arch_;
  int num_classes_, in_c_, in_h_, in_w_, width_;
  std::string train_config_echo_;
  std::unique_ptr<ClassifierNet> net_;
};

}  // namespace refine
