#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include <refine/data/dataset.hpp>
#include <refine/data/imageops.hpp>
#include <refine/data/synth.hpp>

using namespace refine;
namespace fsys = std::filesystem;

namespace {
fsys::path temp_dir(const std::string& tag) {
  const fsys::path dir = fsys::temp_directory_path() / ("refine_test_" + tag);
  fsys::remove_all(dir);
  fsys::create_directories(dir);
  return dir;
}
}  // namespace

TEST_CASE("synthetic data is deterministic and well formed") {
  SynthConfig cfg;
  LabeledDataset a = make_synthetic(cfg, 5, 3);
  LabeledDataset b = make_synthetic(cfg, 5, 3);
  REQUIRE(a.size() == 50);
  REQUIRE(a.num_classes == 10);
  a.validate();
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a.labels[i] == b.labels[i]);
    REQUIRE(a.images[i].pix == b.images[i].pix);
  }
  for (float p : a.images[0].pix) {
    REQUIRE(p >= 0.0f);
    REQUIRE(p <= 1.0f);
  }
  LabeledDataset c = make_synthetic(cfg, 5, 4);
  REQUIRE(a.images[0].pix != c.images[0].pix);
}

TEST_CASE("separate sample seed keeps class definitions but changes samples") {
  SynthConfig cfg;
  LabeledDataset train = make_synthetic(cfg, 4, 3, 3);
  LabeledDataset test = make_synthetic(cfg, 4, 3, 99);
  REQUIRE(train.num_classes == test.num_classes);
  bool any_equal = false;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.images[i].pix == test.images[i].pix) any_equal = true;
  }
  REQUIRE_FALSE(any_equal);
}

TEST_CASE("binary archive round-trip preserves labels and quantized pixels") {
  SynthConfig cfg;
  cfg.num_classes = 4;
  LabeledDataset data = make_synthetic(cfg, 3, 9);
  const auto dir = temp_dir("cifar");
  save_dataset_cifar(data, dir.string(), "train");

  DatasetDescriptor desc;
  desc.root = dir.string();
  desc.num_classes = 4;
  LabeledDataset loaded = load_dataset(desc, "train");
  REQUIRE(loaded.size() == data.size());
  REQUIRE(loaded.num_classes == 4);
  for (std::size_t i = 0; i < data.size(); ++i) {
    REQUIRE(loaded.labels[i] == data.labels[i]);
    for (std::size_t p = 0; p < data.images[i].pix.size(); ++p) {
      REQUIRE(loaded.images[i].pix[p] == Catch::Approx(data.images[i].pix[p]).margin(1.0 / 255));
    }
  }
}

TEST_CASE("folder layout round-trip") {
  SynthConfig cfg;
  cfg.num_classes = 3;
  LabeledDataset data = make_synthetic(cfg, 2, 11);
  const auto dir = temp_dir("folders");
  save_dataset_folders(data, dir.string(), "test");

  DatasetDescriptor desc;
  desc.root = dir.string();
  desc.format = "folders";
  LabeledDataset loaded = load_dataset(desc, "test");
  REQUIRE(loaded.num_classes == 3);
  REQUIRE(loaded.size() == data.size());
  REQUIRE(loaded.class_names == std::vector<std::string>{"class_0", "class_1", "class_2"});
}

TEST_CASE("loader failure modes") {
  DatasetDescriptor desc;
  desc.root = "/nonexistent/refine";
  REQUIRE_THROWS_AS(load_dataset(desc, "train"), IngestionError);

  const auto dir = temp_dir("badfmt");
  desc.root = dir.string();
  desc.format = "parquet";
  REQUIRE_THROWS_AS(load_dataset(desc, "train"), IngestionError);

  desc.format = "cifar";
  REQUIRE_THROWS_AS(load_dataset(desc, "train"), IngestionError);  // no files

  // Truncated record.
  {
    std::ofstream out(dir / "train.bin", std::ios::binary);
    out << "abc";
  }
  REQUIRE_THROWS_AS(load_dataset(desc, "train"), IngestionError);
}

TEST_CASE("strip_labels keeps a seeded subset") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 10, 5);
  UnlabeledDataset u = strip_labels(data, 0.3, 7);
  REQUIRE(u.size() == 30);
  UnlabeledDataset v = strip_labels(data, 0.3, 7);
  for (std::size_t i = 0; i < u.size(); ++i) REQUIRE(u.images[i].pix == v.images[i].pix);
  UnlabeledDataset w = strip_labels(data, 0.3, 8);
  bool differs = false;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u.images[i].pix != w.images[i].pix) differs = true;
  }
  REQUIRE(differs);
  REQUIRE_THROWS_AS(strip_labels(data, 0.0, 1), ArgumentError);
  REQUIRE_THROWS_AS(strip_labels(data, 1.5, 1), ArgumentError);
}

TEST_CASE("rotation by zero degrees is the identity") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 2);
  Image r = rotate(data.images[0], 0.0);
  REQUIRE(r.pix == data.images[0].pix);
  Image r2 = rotate(data.images[0], 16.0);
  REQUIRE(r2.pix != data.images[0].pix);
}

TEST_CASE("bilinear resize to the same size is near-identity") {
  SynthConfig cfg;
  LabeledDataset data = make_synthetic(cfg, 1, 13);
  const Image& im = data.images[0];
  Image r = resize_bilinear(im, im.h, im.w);
  for (std::size_t i = 0; i < im.pix.size(); ++i) {
    REQUIRE(r.pix[i] == Catch::Approx(im.pix[i]).margin(1e-5));
  }
}
