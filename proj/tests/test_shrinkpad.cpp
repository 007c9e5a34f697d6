#include <catch2/catch_amalgamated.hpp>

#include <refine/baseline/shrinkpad.hpp>
#include <refine/data/synth.hpp>

using namespace refine;

TEST_CASE("pad size zero is the identity") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 3);
  Image out = shrinkpad(data.images[0], {0, 1});
  REQUIRE(out.pix == data.images[0].pix);
}

TEST_CASE("output keeps the original dimensions with a zero border") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 5);
  const int s = 4;
  Image out = shrinkpad(data.images[0], {s, 9});
  REQUIRE(out.h == 32);
  REQUIRE(out.w == 32);
  // The shrunken content occupies (h-2s)x(w-2s); everything else is zero, so
  // each row/column band of width 2s in total must be zero somewhere. Check
  // total zero count is at least the guaranteed border area.
  std::size_t zeros = 0;
  for (float p : out.pix) zeros += p == 0.0f;
  const std::size_t inner = static_cast<std::size_t>(32 - 2 * s) * (32 - 2 * s);
  REQUIRE(zeros >= 3 * (32u * 32u - inner));
}

TEST_CASE("placement is random across calls but seeded per instance") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 7);
  ShrinkPad a({6, 42});
  ShrinkPad b({6, 42});
  std::vector<Image> from_a, from_b;
  for (int i = 0; i < 8; ++i) {
    from_a.push_back(a(data.images[0]));
    from_b.push_back(b(data.images[0]));
  }
  bool varies = false;
  for (int i = 0; i < 8; ++i) {
    REQUIRE(from_a[i].pix == from_b[i].pix);  // same seed, same sequence
    if (from_a[i].pix != from_a[0].pix) varies = true;
  }
  REQUIRE(varies);  // offsets move between calls
}

TEST_CASE("oversized pad is rejected") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 9);
  REQUIRE_THROWS_AS(shrinkpad(data.images[0], {16, 1}), ArgumentError);
  REQUIRE_THROWS_AS(shrinkpad(data.images[0], {-1, 1}), ArgumentError);
  REQUIRE_NOTHROW(shrinkpad(data.images[0], {15, 1}));
}
