// Command-line runner for the full experiment pipeline: data generation,
// backdoor injection, classifier training, transformation defense, baselines,
// adaptive and query-only settings, and result reporting.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <refine/refine.hpp>

namespace fs = std::filesystem;
using namespace refine;

namespace {

struct Splits {
  LabeledDataset train, test;
};

Splits load_splits(const ExperimentConfig& cfg) {
  Splits s;
  if (cfg.data.kind == "synthetic") {
    s.train = make_synthetic(cfg.data.synth, cfg.data.samples_per_class, cfg.data.seed,
                             cfg.data.seed);
    s.test = make_synthetic(cfg.data.synth, cfg.data.test_per_class, cfg.data.seed,
                            cfg.data.seed ^ 0x7e57da7aULL);
  } else {
    s.train = load_dataset(cfg.data.archive, cfg.data.archive.train_split);
    s.test = load_dataset(cfg.data.archive, cfg.data.archive.test_split);
  }
  return s;
}

PoisonPlan plan_for(const ExperimentConfig& cfg, const Splits& s) {
  const Image& first = s.train.images.front();
  return cfg.attack.build_plan(first.c, first.h, first.w);
}

std::string classifier_path(const ExperimentConfig& cfg) {
  return (fs::path(cfg.outdir) / ("classifier_" + cfg.attack.variant + ".ckpt")).string();
}

std::string defense_path(const ExperimentConfig& cfg, const std::string& tag) {
  return (fs::path(cfg.outdir) / ("defense_" + cfg.attack.variant + tag + ".ckpt")).string();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// One results file per output directory; every row carries the seed and the
// config hash so runs are attributable and comparable.
void append_row(const ExperimentConfig& cfg, const std::string& kind, const std::string& defense,
                double extra, double ba, double asr) {
  fs::create_directories(cfg.outdir);
  const fs::path path = fs::path(cfg.outdir) / "results.csv";
  const bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (fresh) out << "kind,attack,defense,extra,ba,asr,seed,config\n";
  out << kind << ',' << cfg.attack.variant << ',' << defense << ',' << fmt(extra) << ','
      << fmt(ba) << ',' << fmt(asr) << ',' << cfg.seed << ',' << experiment_config_hash(cfg)
      << "\n";
  std::cout << kind << " attack=" << cfg.attack.variant << " defense=" << defense
            << " ba=" << fmt(ba) << " asr=" << fmt(asr) << "\n";
}

PredictFn plain_predictor(const Classifier& model) {
  return [&model](const std::vector<Image>& images) { return model.predict_labels(images); };
}

// --- pipeline stages, shared between subcommands ---------------------------

Classifier run_attack(const ExperimentConfig& cfg, const Splits& s, bool quiet = false) {
  const PoisonPlan plan = plan_for(cfg, s);
  PoisonedDataset poisoned = build_poisoned_dataset(s.train, plan, cfg.seed);
  if (!quiet) {
    std::cout << "poisoned " << poisoned.poisoned_count() << "/" << poisoned.size()
              << " training samples, target " << plan.target_label << "\n";
  }
  Classifier model =
      train_classifier(poisoned, cfg.train, cfg.arch, cfg.width, [&](int epoch, double loss) {
        if (!quiet) std::cout << "  epoch " << epoch << " loss " << fmt(loss) << "\n";
      });
  model.set_train_config_echo(experiment_config_echo(cfg).dump());
  return model;
}

struct DefenseRun {
  DefendedModel defended;
  std::string tag;  // "", "_no_hrf", "_no_scl"
};

DefenseRun run_defense(const ExperimentConfig& cfg, std::shared_ptr<Classifier> model,
                       const Splits& s, bool quiet = false) {
  UnlabeledDataset pool = strip_labels(s.train, cfg.defense.unlabeled_fraction, cfg.seed);
  RefineConfig rcfg = cfg.defense.refine;
  if (cfg.defense.no_scl) rcfg.lambda = 0.0;
  OutputMapping mapping = cfg.defense.no_hrf ? make_identity_mapping(model->num_classes())
                                             : make_output_mapping(model->num_classes(), rcfg.seed);
  TransformNet transform =
      train_refine(*model, pool, mapping, rcfg, [&](const RefineEpochStats& st) {
        if (!quiet) {
          std::cout << "  defense epoch " << st.epoch << " total " << fmt(st.total) << " ce "
                    << fmt(st.ce) << " sup " << fmt(st.sup) << "\n";
        }
      });
  DefenseRun run;
  run.tag = cfg.defense.no_hrf ? "_no_hrf" : (cfg.defense.no_scl ? "_no_scl" : "");
  run.defended = DefendedModel{std::make_shared<TransformNet>(std::move(transform)), model, mapping};
  return run;
}

void eval_and_record(const ExperimentConfig& cfg, const std::string& kind,
                     const std::string& defense, double extra, const PredictFn& predict,
                     const Splits& s) {
  const PoisonPlan plan = plan_for(cfg, s);
  const double ba = benign_accuracy(predict, s.test);
  const double asr = attack_success_rate(predict, poison_test_set(s.test, plan), plan.target_label);
  append_row(cfg, kind, defense, extra, ba, asr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reprogramming-based backdoor defense experiments"};
  app.require_subcommand(1);

  std::string config_path, out_override, attack_override, defense_ckpt, model_ckpt, host = "127.0.0.1";
  std::int64_t seed_override = -1, epochs_override = -1;
  double lambda_override = -1.0, tau_override = -1.0, gamma = 1.0;
  bool no_hrf = false, no_scl = false;
  std::vector<int> pad_sizes;
  int port = 8093, num_classes = 10;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (json)");
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--seed", seed_override, "experiment seed override");
    sub->add_option("--attack", attack_override, "trigger variant: patch|blend|rotation");
    sub->add_option("--epochs", epochs_override, "epoch count override (training stage)");
    return sub;
  };

  auto* gen = add_common(app.add_subcommand("gen-data", "generate and export the dataset"));
  auto* attack = add_common(app.add_subcommand("attack", "train a backdoored classifier"));
  auto* defend = add_common(app.add_subcommand("defend", "train the transformation defense"));
  defend->add_option("--lambda", lambda_override, "contrastive weight override");
  defend->add_option("--tau", tau_override, "temperature override");
  defend->add_flag("--no-hrf", no_hrf, "ablation: identity output mapping");
  defend->add_flag("--no-scl", no_scl, "ablation: drop the contrastive term");
  auto* evalc = add_common(app.add_subcommand("eval", "evaluate a checkpoint"));
  evalc->add_option("--defense", defense_ckpt, "defense checkpoint to compose");
  evalc->add_option("--model", model_ckpt, "classifier checkpoint (default: outdir)");
  auto* ablate = add_common(app.add_subcommand("ablate", "full / no-mapping / no-contrastive runs"));
  auto* adaptive = add_common(app.add_subcommand("adaptive", "defense-aware attacker"));
  adaptive->add_option("--gamma", gamma, "weight on the simulated-defense term");
  auto* blackbox = add_common(app.add_subcommand("blackbox", "query-only defense via a surrogate"));
  blackbox->add_option("--host", host, "remote oracle host (default: in-process)")->capture_default_str();
  blackbox->add_option("--port", port, "remote oracle port")->capture_default_str();
  bool use_http = false;
  blackbox->add_flag("--http", use_http, "query a remote oracle instead of in-process");
  auto* sweep = add_common(app.add_subcommand("sweep", "shrink-and-pad baseline sweep"));
  sweep->add_option("--pad-sizes", pad_sizes, "pad sizes to sweep");
  auto* report = add_common(app.add_subcommand("report", "print results.csv as a table"));
  auto* serve = add_common(app.add_subcommand("serve", "serve a classifier over http"));
  serve->add_option("--model", model_ckpt, "classifier checkpoint");
  serve->add_option("--port", port, "listen port")->capture_default_str();
  serve->add_option("--host", host, "bind address")->capture_default_str();
  (void)num_classes;

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg =
        config_path.empty() ? ExperimentConfig{} : load_experiment_config(config_path);
    if (!out_override.empty()) cfg.outdir = out_override;
    if (!attack_override.empty()) {
      trigger_variant_from_string(attack_override);
      cfg.attack.variant = attack_override;
    }
    if (seed_override >= 0) {
      cfg.seed = static_cast<std::uint64_t>(seed_override);
      cfg.train.seed = cfg.seed;
      cfg.defense.refine.seed = cfg.seed;
    }
    if (epochs_override >= 0) {
      cfg.train.epochs = static_cast<int>(epochs_override);
      cfg.defense.refine.epochs = static_cast<int>(epochs_override);
    }
    if (lambda_override >= 0.0) cfg.defense.refine.lambda = lambda_override;
    if (tau_override > 0.0) cfg.defense.refine.tau = tau_override;
    cfg.defense.no_hrf = cfg.defense.no_hrf || no_hrf;
    cfg.defense.no_scl = cfg.defense.no_scl || no_scl;

    if (gen->parsed()) {
      Splits s = load_splits(cfg);
      const std::string dir = (fs::path(cfg.outdir) / "data").string();
      save_dataset_cifar(s.train, dir, "train");
      save_dataset_cifar(s.test, dir, "test");
      PoisonedDataset poisoned = build_poisoned_dataset(s.train, plan_for(cfg, s), cfg.seed);
      export_poisoned_dataset(poisoned, dir, "train_poisoned");
      std::cout << "wrote " << s.train.size() << " train / " << s.test.size() << " test samples ("
                << poisoned.poisoned_count() << " poisoned) to " << dir << "\n";
    } else if (attack->parsed()) {
      Splits s = load_splits(cfg);
      Classifier model = run_attack(cfg, s);
      model.save(classifier_path(cfg));
      eval_and_record(cfg, "attack", "none", 0.0, plain_predictor(model), s);
    } else if (defend->parsed()) {
      Splits s = load_splits(cfg);
      auto model = std::make_shared<Classifier>(Classifier::load(classifier_path(cfg)));
      DefenseRun run = run_defense(cfg, model, s);
      save_defense(defense_path(cfg, run.tag), *run.defended.transform, run.defended.mapping,
                   experiment_config_echo(cfg).dump());
      eval_and_record(cfg, "defend", "refine" + run.tag, 0.0,
                      [&](const std::vector<Image>& im) { return defended_predict(run.defended, im); },
                      s);
    } else if (evalc->parsed()) {
      Splits s = load_splits(cfg);
      const std::string mpath = model_ckpt.empty() ? classifier_path(cfg) : model_ckpt;
      auto model = std::make_shared<Classifier>(Classifier::load(mpath));
      if (defense_ckpt.empty()) {
        eval_and_record(cfg, "eval", "none", 0.0, plain_predictor(*model), s);
      } else {
        LoadedDefense loaded = load_defense(defense_ckpt);
        DefendedModel defended{loaded.transform, model, loaded.mapping};
        eval_and_record(cfg, "eval", "refine", 0.0,
                        [&](const std::vector<Image>& im) { return defended_predict(defended, im); },
                        s);
      }
      // Distribution-shift diagnostics on the penultimate features of clean
      // versus triggered test inputs.
      const PoisonPlan plan = plan_for(cfg, s);
      LabeledDataset triggered = poison_test_set(s.test, plan);
      const std::size_t cap = std::min<std::size_t>(kW1MaxSamples, std::min(s.test.size(),
                                                                            triggered.size()));
      std::vector<Image> clean_im(s.test.images.begin(), s.test.images.begin() + cap);
      std::vector<Image> trig_im(triggered.images.begin(), triggered.images.begin() + cap);
      FeatureCloud before = make_cloud(model->extract_features(clean_im), "clean");
      FeatureCloud after = make_cloud(model->extract_features(trig_im), "triggered");
      const double ba = benign_accuracy(plain_predictor(*model), s.test);
      const double asr_acc = benign_accuracy(plain_predictor(*model), triggered);
      ShiftBoundDiagnostics d =
          shift_bound_diagnostics(ba, asr_acc, model->num_classes(), before, after, cfg.seed);
      std::cout << "feature-shift: |d_acc|=" << fmt(d.lhs) << " w1=" << fmt(d.w1)
                << " bound=" << fmt(d.bound)
                << (d.ratio_defined ? " ratio=" + fmt(d.ratio) : " ratio=undefined") << "\n";
    } else if (ablate->parsed()) {
      Splits s = load_splits(cfg);
      auto model = std::make_shared<Classifier>(Classifier::load(classifier_path(cfg)));
      for (const std::string& mode : {"full", "no_hrf", "no_scl"}) {
        ExperimentConfig variant = cfg;
        variant.defense.no_hrf = mode == "no_hrf";
        variant.defense.no_scl = mode == "no_scl";
        DefenseRun run = run_defense(variant, model, s, /*quiet=*/true);
        eval_and_record(variant, "ablate", "refine" + run.tag, 0.0,
                        [&](const std::vector<Image>& im) { return defended_predict(run.defended, im); },
                        s);
      }
    } else if (adaptive->parsed()) {
      Splits s = load_splits(cfg);
      cfg.adaptive.gamma = gamma;
      if (epochs_override >= 0) cfg.adaptive.train.epochs = static_cast<int>(epochs_override);
      AdaptiveResult res = train_adaptive_backdoor(s.train, plan_for(cfg, s), cfg.adaptive,
                                                   cfg.arch, cfg.width,
                                                   [&](const AdaptiveEpochStats& st) {
                                                     std::cout << "  epoch " << st.epoch
                                                               << " backdoor " << fmt(st.backdoor)
                                                               << " defense " << fmt(st.defense)
                                                               << "\n";
                                                   });
      res.model.save(classifier_path(cfg));
      eval_and_record(cfg, "adaptive", "none", gamma, plain_predictor(res.model), s);
      auto model = std::make_shared<Classifier>(std::move(res.model));
      DefenseRun run = run_defense(cfg, model, s, /*quiet=*/true);
      eval_and_record(cfg, "adaptive", "refine", gamma,
                      [&](const std::vector<Image>& im) { return defended_predict(run.defended, im); },
                      s);
    } else if (blackbox->parsed()) {
      Splits s = load_splits(cfg);
      std::unique_ptr<ScoreOracle> oracle;
      std::shared_ptr<Classifier> local;
      if (use_http) {
        oracle = std::make_unique<HttpOracle>(host, port, cfg.data.synth.num_classes);
      } else {
        local = std::make_shared<Classifier>(Classifier::load(classifier_path(cfg)));
        oracle = std::make_unique<LocalOracle>(local);
      }
      UnlabeledDataset pool = strip_labels(s.train, cfg.blackbox.pool_fraction, cfg.seed);
      const Image& first = s.train.images.front();
      cfg.blackbox.distill.in_c = first.c;
      cfg.blackbox.distill.in_h = first.h;
      cfg.blackbox.distill.in_w = first.w;
      BlackboxResult res = blackbox_defend(*oracle, pool, cfg.blackbox.distill, cfg.defense.refine);
      BlackboxDefended defended = res.deploy(*oracle);
      eval_and_record(cfg, "blackbox", "refine", 0.0,
                      [&](const std::vector<Image>& im) { return defended.predict(im); }, s);
      std::cout << "oracle queries: " << oracle->query_count() << "\n";
    } else if (sweep->parsed()) {
      Splits s = load_splits(cfg);
      Classifier model = Classifier::load(classifier_path(cfg));
      if (!pad_sizes.empty()) cfg.pad_sizes = pad_sizes;
      for (int pad : cfg.pad_sizes) {
        auto predict = [&](const std::vector<Image>& images) {
          ShrinkPad sp({pad, cfg.seed});
          std::vector<Image> shrunk;
          shrunk.reserve(images.size());
          for (const auto& im : images) shrunk.push_back(sp(im));
          return model.predict_labels(shrunk);
        };
        eval_and_record(cfg, "sweep", "shrinkpad", pad, predict, s);
      }
    } else if (report->parsed()) {
      const fs::path path = fs::path(cfg.outdir) / "results.csv";
      std::ifstream in(path);
      if (!in) throw DependencyError("no results at " + path.string());
      std::vector<std::vector<std::string>> rows;
      std::string line;
      while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
      }
      if (rows.empty()) throw DependencyError("results file is empty");
      std::vector<std::size_t> widths(rows[0].size(), 0);
      for (const auto& r : rows) {
        for (std::size_t i = 0; i < r.size() && i < widths.size(); ++i) {
          widths[i] = std::max(widths[i], r[i].size());
        }
      }
      auto print_row = [&](const std::vector<std::string>& r) {
        std::cout << "|";
        for (std::size_t i = 0; i < widths.size(); ++i) {
          const std::string& c = i < r.size() ? r[i] : "";
          std::cout << " " << c << std::string(widths[i] - c.size(), ' ') << " |";
        }
        std::cout << "\n";
      };
      print_row(rows[0]);
      std::cout << "|";
      for (std::size_t w : widths) std::cout << std::string(w + 2, '-') << "|";
      std::cout << "\n";
      for (std::size_t i = 1; i < rows.size(); ++i) print_row(rows[i]);
    } else if (serve->parsed()) {
      const std::string mpath = model_ckpt.empty() ? classifier_path(cfg) : model_ckpt;
      auto model = std::make_shared<Classifier>(Classifier::load(mpath));
      auto server = make_oracle_server(model);
      std::cout << "serving " << mpath << " on " << host << ":" << port << "\n";
      if (!server->listen(host, port)) throw DependencyError("cannot bind " + host);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
