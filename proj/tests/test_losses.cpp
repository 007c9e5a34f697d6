#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include <refine/refine/losses.hpp>

using namespace refine;

namespace {

// Independent quadratic-time reference evaluator, straight from the
// definition, in full double precision and without shared subexpressions.
double supcon_reference(const Tensor& t, const std::vector<int>& labels, double tau,
                        bool normalize) {
  const int n = t.n;
  const int d = static_cast<int>(t.sample_size());
  std::vector<std::vector<double>> z(n, std::vector<double>(d));
  for (int i = 0; i < n; ++i) {
    double norm2 = 0.0;
    for (int j = 0; j < d; ++j) {
      z[i][j] = t.sample(i)[j];
      norm2 += z[i][j] * z[i][j];
    }
    if (normalize) {
      const double r = std::max(std::sqrt(norm2), 1e-12);
      for (int j = 0; j < d; ++j) z[i][j] /= r;
    }
  }
  auto sim = [&](int i, int j) {
    double s = 0.0;
    for (int k = 0; k < d; ++k) s += z[i][k] * z[j][k];
    return s / tau;
  };
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> positives;
    for (int p = 0; p < n; ++p) {
      if (p != i && labels[p] == labels[i]) positives.push_back(p);
    }
    if (positives.empty()) continue;
    double denom = 0.0;
    for (int a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(sim(i, a));
    }
    double inner = 0.0;
    for (int p : positives) inner += std::log(std::exp(sim(i, p)) / denom);
    total += -inner / static_cast<double>(positives.size());
  }
  return total;
}

Tensor random_batch(int n, int c, int h, int w, Rng& rng) {
  Tensor t(n, c, h, w);
  for (auto& v : t.v) v = static_cast<float>(rng.uniform(0.02, 0.98));
  return t;
}

}  // namespace

TEST_CASE("contrastive loss matches the reference evaluator on random batches") {
  Rng rng(1234);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.index(15));  // N <= 16
    Tensor t = random_batch(n, 2, 4, 4, rng);
    std::vector<int> labels(n);
    const int classes = 1 + static_cast<int>(rng.index(5));
    for (auto& l : labels) l = static_cast<int>(rng.index(classes));
    const double tau = 0.05 + rng.uniform() * 0.5;
    const bool normalize = rng.index(2) == 0;
    const double got = supcon_loss(t, labels, tau, normalize);
    const double want = supcon_reference(t, labels, tau, normalize);
    const double rel = std::abs(got - want) / std::max(1.0, std::abs(want));
    INFO("trial " << trial << " n=" << n << " tau=" << tau);
    REQUIRE(rel < 1e-6);
  }
}

TEST_CASE("contrastive gradient matches finite differences") {
  Rng rng(77);
  Tensor t = random_batch(5, 2, 3, 3, rng);
  std::vector<int> labels = {0, 1, 0, 1, 0};
  for (bool normalize : {true, false}) {
    Tensor dx;
    supcon_loss(t, labels, 0.2, normalize, &dx);
    const double eps = 1e-3;
    for (std::size_t i = 0; i < t.v.size(); i += 5) {
      const float keep = t.v[i];
      t.v[i] = keep + static_cast<float>(eps);
      const double up = supcon_loss(t, labels, 0.2, normalize);
      t.v[i] = keep - static_cast<float>(eps);
      const double dn = supcon_loss(t, labels, 0.2, normalize);
      t.v[i] = keep;
      const double fd = (up - dn) / (2 * eps);
      REQUIRE(std::abs(fd - dx.v[i]) < 1e-3 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("samples without positives contribute nothing") {
  Rng rng(5);
  Tensor t = random_batch(3, 1, 2, 2, rng);
  REQUIRE(supcon_loss(t, {0, 1, 2}, 0.1) == 0.0);
  Tensor dx;
  supcon_loss(t, {0, 1, 2}, 0.1, true, &dx);
  for (float g : dx.v) REQUIRE(g == 0.0f);
}

TEST_CASE("contrastive loss argument validation") {
  Rng rng(6);
  Tensor t = random_batch(1, 1, 2, 2, rng);
  REQUIRE_THROWS_AS(supcon_loss(t, {0}, 0.1), ArgumentError);
  Tensor t2 = random_batch(3, 1, 2, 2, rng);
  REQUIRE_THROWS_AS(supcon_loss(t2, {0, 1, 0}, 0.0), ArgumentError);
  REQUIRE_THROWS_AS(supcon_loss(t2, {0, 1}, 0.1), ArgumentError);
}

TEST_CASE("cross-entropy against mapped scores") {
  Matrix scores(2, 3);
  scores.at(0, 0) = 0.7f;
  scores.at(0, 1) = 0.2f;
  scores.at(0, 2) = 0.1f;
  scores.at(1, 0) = 0.1f;
  scores.at(1, 1) = 0.1f;
  scores.at(1, 2) = 0.8f;
  const double want = -(std::log(0.7) + std::log(0.8)) / 2.0;
  REQUIRE(ce_loss({0, 2}, scores) == Catch::Approx(want).epsilon(1e-6));
  REQUIRE_THROWS_AS(ce_loss({0}, scores), ArgumentError);
  REQUIRE_THROWS_AS(ce_loss({0, 3}, scores), ArgumentError);
  // Zero probabilities are floored, not infinite.
  Matrix zeros(1, 2);
  REQUIRE(std::isfinite(ce_loss({0}, zeros)));
}
