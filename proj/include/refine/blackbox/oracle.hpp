#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "refine/classifier/classifier.hpp"

// Keep httplib after Eigen-dependent headers: its transitive system includes
// leak macros that break Eigen's product kernels when seen first.
#include <httplib.h>
#include <json.hpp>

namespace refine {

// Query-only access to a deployed model: probability vectors in, no gradients,
// no parameters. Query volume is tracked for reporting.
class ScoreOracle {
 public:
  virtual ~ScoreOracle() = default;
  virtual int num_classes() const = 0;

  Matrix query(const std::vector<Image>& images) {
    if (images.empty()) throw ArgumentError("oracle query with no images");
    queries_ += images.size();
    return do_query(images);
  }

  std::vector<int> query_labels(const std::vector<Image>& images) {
    Matrix p = query(images);
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

  std::size_t query_count() const { return queries_; }

 protected:
  virtual Matrix do_query(const std::vector<Image>& images) = 0;

 private:
  std::atomic<std::size_t> queries_{0};
};

// In-process oracle over a held model; the reference baseline and test double.
class LocalOracle : public ScoreOracle {
 public:
  explicit LocalOracle(std::shared_ptr<Classifier> model) : model_(std::move(model)) {
    if (!model_) throw ArgumentError("local oracle needs a model");
  }

  int num_classes() const override { return model_->num_classes(); }
  const Classifier& model() const { return *model_; }

 protected:
  Matrix do_query(const std::vector<Image>& images) override {
    return model_->predict_probs(images);
  }

 private:
  std::shared_ptr<Classifier> model_;
};

// ---------------------------------------------------------------------------
// HTTP wire format, POST /predict:
//   request  {"count": n, "channels": c, "height": h, "width": w,
//             "pixels": [n*c*h*w floats, planar per image]}
//   response {"classes": k, "probs": [n*k floats, row-major]}

class HttpOracle : public ScoreOracle {
 public:
  HttpOracle(const std::string& host, int port, int num_classes)
      : client_(host, port), num_classes_(num_classes) {
    client_.set_read_timeout(60, 0);
  }

  int num_classes() const override { return num_classes_; }

 protected:
  Matrix do_query(const std::vector<Image>& images) override {
    const Image& first = images.front();
    nlohmann::json req;
    req["count"] = images.size();
    req["channels"] = first.c;
    req["height"] = first.h;
    req["width"] = first.w;
    std::vector<float> flat;
    flat.reserve(images.size() * first.pix.size());
    for (const auto& im : images) {
      if (!im.same_dims(first)) throw ArgumentError("oracle batch images differ in dimensions");
      flat.insert(flat.end(), im.pix.begin(), im.pix.end());
    }
    req["pixels"] = flat;

    auto res = client_.Post("/predict", req.dump(), "application/json");
    if (!res || res->status != 200) {
      throw DependencyError("oracle request failed" +
                            (res ? " with status " + std::to_string(res->status) : ""));
    }
    nlohmann::json body = nlohmann::json::parse(res->body);
    const int k = body.at("classes").get<int>();
    if (k != num_classes_) throw IngestionError("oracle class count changed mid-session");
    const auto probs = body.at("probs").get<std::vector<float>>();
    if (probs.size() != images.size() * static_cast<std::size_t>(k)) {
      throw IngestionError("oracle response length mismatch");
    }
    Matrix out(static_cast<int>(images.size()), k);
    std::copy(probs.begin(), probs.end(), out.v.begin());
    return out;
  }

 private:
  httplib::Client client_;
  int num_classes_;
};

// Serves a model over the wire format above; blocks until stop() on the
// returned server. Intended for experiments and tests, not production traffic.
inline std::unique_ptr<httplib::Server> make_oracle_server(std::shared_ptr<Classifier> model) {
  auto server = std::make_unique<httplib::Server>();
  server->Post("/predict", [model](const httplib::Request& req, httplib::Response& res) {
    try {
      nlohmann::json body = nlohmann::json::parse(req.body);
      const std::size_t n = body.at("count").get<std::size_t>();
      const int c = body.at("channels").get<int>();
      const int h = body.at("height").get<int>();
      const int w = body.at("width").get<int>();
      const auto flat = body.at("pixels").get<std::vector<float>>();
      if (flat.size() != n * static_cast<std::size_t>(c) * h * w) {
        throw ArgumentError("pixel payload length mismatch");
      }
      std::vector<Image> images;
      images.reserve(n);
      const std::size_t per = static_cast<std::size_t>(c) * h * w;
      for (std::size_t i = 0; i < n; ++i) {
        Image im(c, h, w);
        std::copy(flat.begin() + i * per, flat.begin() + (i + 1) * per, im.pix.begin());
        images.push_back(std::move(im));
      }
      Matrix p = model->predict_probs(images);
      nlohmann::json out;
      out["classes"] = p.cols;
      out["probs"] = p.v;
      res.set_content(out.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(std::string("{\"error\":\"") + e.what() + "\"}", "application/json");
    }
  });
  return server;
}

}  // namespace refine
