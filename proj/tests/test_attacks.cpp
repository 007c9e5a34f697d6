#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include <refine/attacks/poison.hpp>
#include <refine/data/synth.hpp>

using namespace refine;

namespace {
LabeledDataset small_data(int per_class = 6, int classes = 5) {
  SynthConfig cfg;
  cfg.num_classes = classes;
  return make_synthetic(cfg, per_class, 21);
}
}  // namespace

TEST_CASE("patch trigger lands bottom-right by default") {
  LabeledDataset data = small_data();
  TriggerSpec t = default_patch_trigger(11);
  Image out = inject_trigger(data.images[0], t);
  const Image& im = data.images[0];
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x < 3; ++x) {
        REQUIRE(out.at(c, im.h - 3 + y, im.w - 3 + x) == t.patch_pattern.at(c, y, x));
      }
    }
  }
  // Pixels away from the patch are untouched.
  REQUIRE(out.at(0, 0, 0) == im.at(0, 0, 0));
  REQUIRE(out.at(2, im.h / 2, 2) == im.at(2, im.h / 2, 2));
}

TEST_CASE("patch trigger validates placement and channels") {
  LabeledDataset data = small_data();
  TriggerSpec t = default_patch_trigger(11);
  t.anchor_row = 31;
  t.anchor_col = 31;
  REQUIRE_THROWS_AS(inject_trigger(data.images[0], t), ArgumentError);
  TriggerSpec gray = t;
  gray.anchor_row = -1;
  gray.anchor_col = -1;
  gray.patch_pattern = make_random_patch(3, 1, 11);
  REQUIRE_THROWS_AS(inject_trigger(data.images[0], gray), ArgumentError);
}

TEST_CASE("blend trigger mixes at the configured ratio") {
  LabeledDataset data = small_data();
  TriggerSpec t;
  t.variant = TriggerVariant::Blend;
  t.blend_pattern = make_default_blend_pattern(3, 32, 32);
  t.blend_ratio = 0.25;
  Image out = inject_trigger(data.images[0], t);
  const float expect = 0.75f * data.images[0].pix[100] + 0.25f * t.blend_pattern.pix[100];
  REQUIRE(out.pix[100] == Catch::Approx(std::clamp(expect, 0.0f, 1.0f)));

  t.blend_ratio = 1.5;
  REQUIRE_THROWS_AS(inject_trigger(data.images[0], t), ArgumentError);
  t.blend_ratio = 0.1;
  t.blend_pattern = make_default_blend_pattern(3, 16, 16);
  REQUIRE_THROWS_AS(inject_trigger(data.images[0], t), ArgumentError);
}

TEST_CASE("poisoning flips ceil(rate*N) samples to the target label") {
  LabeledDataset data = small_data(10, 5);  // 50 samples
  PoisonPlan plan;
  plan.trigger = default_patch_trigger(3);
  plan.target_label = 2;
  plan.poison_rate = 0.101;  // ceil(5.05) = 6
  PoisonedDataset p = build_poisoned_dataset(data, plan, 17);
  REQUIRE(p.size() == data.size());
  REQUIRE(p.poisoned_count() == 6);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.poisoned[i]) {
      REQUIRE(p.labels[i] == 2);
      REQUIRE(p.images[i].pix != data.images[i].pix);
    } else {
      REQUIRE(p.labels[i] == data.labels[i]);
      REQUIRE(p.images[i].pix == data.images[i].pix);
    }
  }
  // Same seed, same victim set.
  PoisonedDataset q = build_poisoned_dataset(data, plan, 17);
  REQUIRE(p.poisoned == q.poisoned);
}

TEST_CASE("poison plan validation") {
  PoisonPlan plan;
  plan.target_label = 9;
  REQUIRE_THROWS_AS(plan.validate(5), ArgumentError);
  plan.target_label = 0;
  plan.poison_rate = 1.5;
  REQUIRE_THROWS_AS(plan.validate(5), ArgumentError);
}

TEST_CASE("triggered test set drops true-target samples and keeps labels") {
  LabeledDataset data = small_data(8, 5);
  PoisonPlan plan;
  plan.trigger = default_patch_trigger(3);
  plan.target_label = 1;
  LabeledDataset triggered = poison_test_set(data, plan);
  REQUIRE(triggered.size() == data.size() - 8);
  for (int l : triggered.labels) REQUIRE(l != 1);
}

TEST_CASE("poisoned export writes the archive plus a victim index") {
  namespace fsys = std::filesystem;
  LabeledDataset data = small_data(4, 5);
  PoisonPlan plan;
  plan.trigger = default_patch_trigger(3);
  plan.poison_rate = 0.5;
  PoisonedDataset p = build_poisoned_dataset(data, plan, 1);
  const fsys::path dir = fsys::temp_directory_path() / "refine_test_poison_export";
  fsys::remove_all(dir);
  export_poisoned_dataset(p, dir.string(), "train");
  REQUIRE(fsys::exists(dir / "train.bin"));
  std::ifstream idx(dir / "train.poison_index");
  std::size_t lines = 0;
  std::string line;
  while (std::getline(idx, line)) lines++;
  REQUIRE(lines == p.poisoned_count());
}
