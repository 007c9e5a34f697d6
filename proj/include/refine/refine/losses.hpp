#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "refine/classifier/classifier.hpp"
#include "refine/refine/mapping.hpp"
#include "refine/refine/transform.hpp"

namespace refine {

// Frozen-model argmax predictions on raw inputs; ties break to the lowest index.
inline std::vector<int> pseudo_labels(const Classifier& model, const Tensor& raw_batch) {
  Matrix probs = model.predict_probs(raw_batch);
  std::vector<int> labels(probs.rows);
  for (int i = 0; i < probs.rows; ++i) {
    int best = 0;
    for (int k = 1; k < probs.cols; ++k) {
      if (probs.at(i, k) > probs.at(i, best)) best = k;
    }
    labels[i] = best;
  }
  return labels;
}

// Mean negative log of the mapped probability assigned to each pseudo-label,
// probabilities floored at 1e-12.
inline double ce_loss(const std::vector<int>& pseudo, const Matrix& mapped_scores) {
  if (static_cast<int>(pseudo.size()) != mapped_scores.rows) {
    throw ArgumentError("pseudo-label count does not match score rows");
  }
  double loss = 0.0;
  for (int i = 0; i < mapped_scores.rows; ++i) {
    if (pseudo[i] < 0 || pseudo[i] >= mapped_scores.cols) {
      throw ArgumentError("pseudo-label outside [0,K)");
    }
    loss -= std::log(std::max(static_cast<double>(mapped_scores.at(i, pseudo[i])), 1e-12));
  }
  return loss / mapped_scores.rows;
}

// Batch contrastive loss over transformed samples. Each sample is flattened
// (and by default L2-normalized) into an embedding; positives share a
// pseudo-label. Samples without positives contribute zero. When dx is
// non-null the gradient with respect to the transformed batch is written.
inline double supcon_loss(const Tensor& transformed, const std::vector<int>& pseudo, double tau,
                          bool normalize = true, Tensor* dx = nullptr) {
  const int n = transformed.n;
  if (n < 2) throw ArgumentError("supcon_loss needs a batch of at least 2");
  if (tau <= 0.0) throw ArgumentError("supcon_loss temperature must be positive");
  if (static_cast<int>(pseudo.size()) != n) throw ArgumentError("pseudo-label count mismatch");
  const int d = static_cast<int>(transformed.sample_size());

  using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  EMat z(n, d);
  std::vector<double> norms(n, 1.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) z(i, j) = transformed.sample(i)[j];
    if (normalize) {
      const double r = std::max(z.row(i).norm(), 1e-12);
      norms[i] = r;
      z.row(i) /= r;
    }
  }
  EMat s = (z * z.transpose()) / tau;

  std::vector<int> pos_count(n, 0);
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < n; ++p) {
      if (p != i && pseudo[p] == pseudo[i]) pos_count[i]++;
    }
  }

  EMat ds = EMat::Zero(n, n);
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    if (pos_count[i] == 0) continue;
    // log-sum-exp over A(i) = all indices except i.
    double mx = -1e300;
    for (int a = 0; a < n; ++a) {
      if (a != i) mx = std::max(mx, s(i, a));
    }
    double denom = 0.0;
    for (int a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(s(i, a) - mx);
    }
    const double lse = mx + std::log(denom);
    double pos_sum = 0.0;
    for (int p = 0; p < n; ++p) {
      if (p != i && pseudo[p] == pseudo[i]) pos_sum += s(i, p);
    }
    loss += -pos_sum / pos_count[i] + lse;
    if (dx) {
      for (int a = 0; a < n; ++a) {
        if (a == i) continue;
        double g = std::exp(s(i, a) - mx) / denom;
        if (pseudo[a] == pseudo[i]) g -= 1.0 / pos_count[i];
        ds(i, a) = g;
      }
    }
  }

  if (dx) {
    // s_ij depends on both z_i and z_j.
    EMat dz = ((ds + ds.transpose()) * z) / tau;
    *dx = Tensor(transformed.n, transformed.c, transformed.h, transformed.w);
    for (int i = 0; i < n; ++i) {
      if (normalize) {
        const double dot = dz.row(i).dot(z.row(i));
        for (int j = 0; j < d; ++j) {
          dx->sample(i)[j] = static_cast<float>((dz(i, j) - dot * z(i, j)) / norms[i]);
        }
      } else {
        for (int j = 0; j < d; ++j) dx->sample(i)[j] = static_cast<float>(dz(i, j));
      }
    }
  }
  return loss;
}

struct RefineLossResult {
  double total = 0.0;
  double ce = 0.0;
  double sup = 0.0;
  std::vector<int> pseudo;
};

struct RefineLossOptions {
  double lambda = 0.5;
  double tau = 0.1;
  bool normalize_embeddings = true;
  bool transform_train_mode = true;
  // Exactly one of these receives gradients; the other side stays frozen.
  bool grads_into_transform = false;
  bool grads_into_classifier = false;
};

// Combined objective with caller-supplied pseudo-labels: transform the batch,
// score it through the frozen model, permute the scores, and compare against
// the labels; the contrastive term acts on the transformed pixels. Gradients
// accumulate into whichever side the options select.
inline RefineLossResult refine_loss_with_pseudo(Classifier& model, const OutputMapping& mapping,
                                                TransformNet& transform, const Tensor& raw_batch,
                                                std::vector<int> pseudo,
                                                const RefineLossOptions& opt) {
  if (mapping.size() != model.num_classes()) {
    throw ConfigError("mapping size does not match model classes");
  }
  model.check_batch(raw_batch);
  RefineLossResult res;
  res.pseudo = std::move(pseudo);
  if (static_cast<int>(res.pseudo.size()) != raw_batch.n) {
    throw ArgumentError("pseudo-label count does not match batch size");
  }

  Tensor transformed = transform.forward(raw_batch, opt.transform_train_mode);
  Tensor logits = model.net().forward(transformed, /*train=*/false);
  Matrix probs = nn::softmax(logits);
  Matrix mapped = apply_mapping(probs, mapping);
  res.ce = ce_loss(res.pseudo, mapped);

  const bool want_grads = opt.grads_into_transform || opt.grads_into_classifier;
  Tensor dsup;
  // Per-anchor average, so the contrastive term stays on the same scale as
  // the batch-mean cross-entropy regardless of batch size; otherwise lambda
  // would have to shrink with the batch.
  res.sup = supcon_loss(transformed, res.pseudo, opt.tau, opt.normalize_embeddings,
                        opt.grads_into_transform ? &dsup : nullptr) /
            raw_batch.n;
  res.total = res.ce + opt.lambda * res.sup;
  if (!want_grads) return res;

  // CE through the permutation reduces to a permuted one-hot target.
  OutputMapping inv = mapping.inverse();
  const int n = raw_batch.n, k = model.num_classes();
  Tensor dlogits(n, k, 1, 1);
  for (int i = 0; i < n; ++i) {
    const int target = inv.perm[res.pseudo[i]];
    for (int j = 0; j < k; ++j) {
      dlogits.at(i, j, 0, 0) = (probs.at(i, j) - (j == target ? 1.0f : 0.0f)) / n;
    }
  }

  if (opt.grads_into_classifier) {
    model.net().backward(dlogits, /*want_input_grad=*/false, /*want_param_grads=*/true);
    return res;
  }

  Tensor dtransformed = model.net().backward(dlogits, /*want_input_grad=*/true,
                                             /*want_param_grads=*/false);
  if (opt.lambda != 0.0) {
    const float scale = static_cast<float>(opt.lambda / raw_batch.n);
    for (std::size_t i = 0; i < dtransformed.v.size(); ++i) {
      dtransformed.v[i] += scale * dsup.v[i];
    }
  }
  transform.backward(dtransformed, /*want_input_grad=*/false, /*want_param_grads=*/true);
  return res;
}

// Standard form: pseudo-labels come from the frozen model's raw-input argmax.
inline RefineLossResult refine_loss(Classifier& model, const OutputMapping& mapping,
                                    TransformNet& transform, const Tensor& raw_batch,
                                    const RefineLossOptions& opt) {
  return refine_loss_with_pseudo(model, mapping, transform, raw_batch,
                                 pseudo_labels(model, raw_batch), opt);
}

}  // namespace refine
