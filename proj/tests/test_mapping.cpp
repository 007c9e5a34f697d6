#include <catch2/catch_amalgamated.hpp>

#include <refine/nn/layers.hpp>
#include <refine/refine/mapping.hpp>

using namespace refine;

TEST_CASE("sampled output mappings are fixed-point-free bijections") {
  for (int k = 2; k <= 20; ++k) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      OutputMapping m = make_output_mapping(k, seed);
      REQUIRE(m.size() == k);
      REQUIRE(m.is_bijection());
      REQUIRE(m.is_derangement());
      REQUIRE_FALSE(m.identity);
    }
  }
}

TEST_CASE("no mapping exists for fewer than two classes") {
  REQUIRE_THROWS_AS(make_output_mapping(1, 0), ArgumentError);
  REQUIRE_THROWS_AS(make_output_mapping(0, 0), ArgumentError);
  REQUIRE_THROWS_AS(make_output_mapping(-3, 0), ArgumentError);
}

TEST_CASE("mapping is deterministic in the seed and varies across seeds") {
  OutputMapping a = make_output_mapping(10, 42);
  OutputMapping b = make_output_mapping(10, 42);
  REQUIRE(a.perm == b.perm);
  bool any_differ = false;
  for (std::uint64_t s = 0; s < 10; ++s) {
    if (make_output_mapping(10, s).perm != a.perm) any_differ = true;
  }
  REQUIRE(any_differ);
}

TEST_CASE("identity mapping is flagged and is not a derangement") {
  OutputMapping m = make_identity_mapping(5);
  REQUIRE(m.identity);
  REQUIRE(m.is_bijection());
  REQUIRE_FALSE(m.is_derangement());
  std::vector<float> s = {0.1f, 0.2f, 0.3f, 0.25f, 0.15f};
  REQUIRE(apply_mapping(s, m) == s);
}

TEST_CASE("inverse composes to the identity") {
  OutputMapping m = make_output_mapping(8, 3);
  OutputMapping inv = m.inverse();
  for (int i = 0; i < 8; ++i) REQUIRE(inv.perm[m.perm[i]] == i);
}

TEST_CASE("score permutation moves class l to slot perm[l]") {
  OutputMapping m;
  m.perm = {1, 2, 0};
  std::vector<float> s = {0.5f, 0.3f, 0.2f};
  std::vector<float> out = apply_mapping(s, m);
  REQUIRE(out == std::vector<float>{0.2f, 0.5f, 0.3f});
  REQUIRE_THROWS_AS(apply_mapping(std::vector<float>{0.5f, 0.5f}, m), ArgumentError);
}

TEST_CASE("permutation commutes with softmax") {
  Rng rng(17);
  const int n = 6, k = 9;
  Tensor logits(n, k, 1, 1);
  for (auto& v : logits.v) v = static_cast<float>(rng.gaussian(0.0, 2.0));
  OutputMapping m = make_output_mapping(k, 5);

  // softmax then permute.
  Matrix a = apply_mapping(nn::softmax(logits), m);
  // permute logits then softmax.
  Tensor permuted(n, k, 1, 1);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < k; ++l) permuted.at(i, m.perm[l], 0, 0) = logits.at(i, l, 0, 0);
  }
  Matrix b = nn::softmax(permuted);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < k; ++l) {
      REQUIRE(std::abs(a.at(i, l) - b.at(i, l)) < 1e-6);
    }
  }
}
