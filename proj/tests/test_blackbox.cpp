#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include <refine/blackbox/distill.hpp>
#include <refine/classifier/train.hpp>
#include <refine/data/synth.hpp>

using namespace refine;

namespace {

std::shared_ptr<Classifier> trained_victim(const LabeledDataset& data) {
  TrainConfig cfg;
  cfg.epochs = 6;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  return std::make_shared<Classifier>(train_classifier(data, cfg, "convnet", 4));
}

LabeledDataset tiny_data() {
  SynthConfig cfg;
  cfg.num_classes = 4;
  cfg.height = 16;
  cfg.width = 16;
  return make_synthetic(cfg, 16, 91);
}

}  // namespace

TEST_CASE("local oracle answers like the model and counts queries") {
  LabeledDataset data = tiny_data();
  auto victim = trained_victim(data);
  LocalOracle oracle(victim);
  REQUIRE(oracle.query_count() == 0);
  Matrix p = oracle.query(data.images);
  REQUIRE(oracle.query_count() == data.size());
  Matrix direct = victim->predict_probs(data.images);
  REQUIRE(p.v == direct.v);
  REQUIRE(oracle.query_labels(data.images) == victim->predict_labels(data.images));
  REQUIRE_THROWS_AS(oracle.query({}), ArgumentError);
}

TEST_CASE("distilled surrogate tracks the oracle on the pool") {
  LabeledDataset data = tiny_data();
  auto victim = trained_victim(data);
  LocalOracle oracle(victim);

  UnlabeledDataset pool;
  pool.images = data.images;
  DistillConfig cfg;
  cfg.arch = "convnet";
  cfg.width = 4;
  cfg.in_h = 16;
  cfg.in_w = 16;
  cfg.train.epochs = 30;
  cfg.train.batch_size = 32;
  cfg.train.lr = 0.1;
  std::vector<double> losses;
  Classifier surrogate =
      distill_surrogate(oracle, pool, cfg, [&](int, double loss) { losses.push_back(loss); });
  REQUIRE(losses.back() < losses.front());

  const auto oracle_labels = oracle.query_labels(data.images);
  const auto surrogate_labels = surrogate.predict_labels(data.images);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < oracle_labels.size(); ++i) {
    agree += oracle_labels[i] == surrogate_labels[i];
  }
  REQUIRE(static_cast<double>(agree) / oracle_labels.size() > 0.8);
}

TEST_CASE("mse on probability vectors and its gradient") {
  Matrix p(1, 2), t(1, 2);
  p.at(0, 0) = 0.8f;
  p.at(0, 1) = 0.2f;
  t.at(0, 0) = 0.5f;
  t.at(0, 1) = 0.5f;
  Matrix d;
  const double loss = mse_probs(p, t, &d);
  REQUIRE(loss == Catch::Approx(0.09 + 0.09));
  REQUIRE(d.at(0, 0) == Catch::Approx(0.6));
  REQUIRE(d.at(0, 1) == Catch::Approx(-0.6));
  Matrix wrong(2, 2);
  REQUIRE_THROWS_AS(mse_probs(p, wrong), ArgumentError);
}

TEST_CASE("http oracle round-trips through the server") {
  LabeledDataset data = tiny_data();
  auto victim = trained_victim(data);
  auto server = make_oracle_server(victim);
  const int port = 18931;
  std::thread serving([&] { server->listen("127.0.0.1", port); });
  server->wait_until_ready();

  HttpOracle remote("127.0.0.1", port, victim->num_classes());
  std::vector<Image> batch(data.images.begin(), data.images.begin() + 8);
  Matrix over_wire = remote.query(batch);
  Matrix direct = victim->predict_probs(batch);
  REQUIRE(over_wire.rows == direct.rows);
  for (std::size_t i = 0; i < direct.v.size(); ++i) {
    REQUIRE(over_wire.v[i] == Catch::Approx(direct.v[i]).margin(1e-6));
  }
  REQUIRE(remote.query_count() == 8);

  server->stop();
  serving.join();
}

TEST_CASE("query-only defense composes transform, oracle and mapping") {
  LabeledDataset data = tiny_data();
  auto victim = trained_victim(data);
  LocalOracle oracle(victim);

  UnlabeledDataset pool;
  pool.images.assign(data.images.begin(), data.images.begin() + 32);
  DistillConfig dcfg;
  dcfg.arch = "convnet";
  dcfg.width = 2;
  dcfg.in_h = 16;
  dcfg.in_w = 16;
  dcfg.train.epochs = 2;
  dcfg.train.batch_size = 16;
  RefineConfig rcfg;
  rcfg.epochs = 1;
  rcfg.batch_size = 16;
  rcfg.transform_width = 2;

  BlackboxResult res = blackbox_defend(oracle, pool, dcfg, rcfg);
  REQUIRE(res.mapping.is_derangement());
  BlackboxDefended defended = res.deploy(oracle);
  const auto labels = defended.predict(pool.images);
  REQUIRE(labels.size() == pool.size());
  for (int l : labels) {
    REQUIRE(l >= 0);
    REQUIRE(l < 4);
  }
  // Deployment only ever consults the oracle, never surrogate internals: the
  // prediction path works even after the surrogate is gone.
  res.surrogate.reset();
  REQUIRE(defended.predict(pool.images) == labels);
}
