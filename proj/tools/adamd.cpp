// SPDX-License-Identifier: Apache-2.0
// adamd: synth | train | eval | sweep
#include <cstdio>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "adamd/binary_io.hpp"
#include "adamd/experiment/config.hpp"
#include "adamd/experiment/pipeline.hpp"
#include "adamd/experiment/runtime.hpp"

namespace ex = adamd::experiment;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out, data;
  std::vector<std::string> sets;
};

void add_common(CLI::App *app, Common &c, bool with_data) {
  app->add_option("--config", c.config, "key = value config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master seed");
  app->add_option("--out", c.out, "output directory");
  if (with_data) app->add_option("--data", c.data, "dataset directory");
  app->add_option("--set", c.sets, "extra key=value override (repeatable)");
}

ex::ExperimentConfig resolve(const Common &c, bool seed_is_dataset) {
  ex::ExperimentConfig cfg = c.config.empty() ? ex::ExperimentConfig{} : ex::load_config(c.config);
  for (const auto &kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ex::ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) {
    if (seed_is_dataset)
      cfg.dataset.seed = *c.seed;
    else
      cfg.seed = *c.seed;
  }
  if (!c.out.empty()) (seed_is_dataset ? cfg.data : cfg.out) = c.out;
  if (!c.data.empty()) cfg.data = c.data;
  cfg.finalize();
  return cfg;
}

void print_report(const ex::EvalOutput &e) {
  std::cout << ex::metrics_csv(e);
}

} // namespace

int main(int argc, char **argv) {
  ex::tune_allocator();
  CLI::App app{"Adaptive multi-scale acoustic event detector"};
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, sweep_c;
  std::vector<double> noise;
  auto *synth = app.add_subcommand("synth", "generate a synthetic dataset (--out is the dataset directory, --seed the dataset seed)");
  add_common(synth, synth_c, false);
  synth->add_option("--noise", noise, "extra noisy copies at these amplifications")->delimiter(',');

  std::string mode;
  std::optional<std::size_t> scale;
  std::optional<double> boost, alpha;
  auto *train = app.add_subcommand("train", "train a model and write checkpoint.admd and history.csv");
  add_common(train, train_c, true);
  train->add_option("--mode", mode, "adaptive | suppress-worst | fixed-weight | unweighted");
  train->add_option("--scale", scale, "scale boosted in fixed-weight mode (1-based)");
  train->add_option("--boost", boost, "weight of the boosted scale in fixed-weight mode");
  train->add_option("--alpha", alpha, "weight of non-selected scales in adaptive mode");

  std::string checkpoint, split = "test", threshold_file;
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint; writes metrics.csv and friends");
  add_common(eval, eval_c, true);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  eval->add_option("--split", split, "train | val | test");
  eval->add_option("--threshold-file", threshold_file, "per-class thresholds from a sweep (balanced mode)")
      ->check(CLI::ExistingFile);

  std::string sweep_checkpoint, sweep_split = "val";
  auto *sweep = app.add_subcommand("sweep", "threshold sweep on the dev split; writes sweep.csv and thresholds.tsv");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--checkpoint", sweep_checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--split", sweep_split, "split to sweep on");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  int stage = 0; // 0 while resolving configuration
  try {
    if (*synth) {
      ex::ExperimentConfig cfg = resolve(synth_c, true);
      if (!noise.empty()) {
        cfg.dataset.noise_levels = noise;
        cfg.finalize();
      }
      stage = 1;
      const auto d = ex::run_synth(cfg);
      std::cerr << "wrote " << d.clips.size() << " clips to " << cfg.data << '\n';
    } else if (*train) {
      ex::ExperimentConfig cfg = resolve(train_c, false);
      if (!mode.empty()) cfg.set("train.mode", mode);
      if (scale) cfg.train.fixed_scale = *scale;
      if (boost) cfg.train.boost = *boost;
      if (alpha) cfg.train.alpha = *alpha;
      cfg.finalize();
      stage = 1;
      const auto out = ex::run_train(cfg, [](const adamd::train::EpochRecord &r) {
        std::fprintf(stderr, "epoch %zu loss %.5f v", r.epoch, r.loss);
        for (double v : r.v) std::fprintf(stderr, " %.4f", v);
        std::fprintf(stderr, "\n");
      });
      std::cerr << "best epoch " << out.result.best_epoch << ", checkpoint " << out.checkpoint << '\n';
    } else if (*eval) {
      const ex::ExperimentConfig cfg = resolve(eval_c, false);
      stage = 1;
      std::optional<std::filesystem::path> tf;
      if (!threshold_file.empty()) tf = threshold_file;
      print_report(ex::run_eval(cfg, checkpoint, split, tf));
    } else if (*sweep) {
      const ex::ExperimentConfig cfg = resolve(sweep_c, false);
      stage = 1;
      const auto s = ex::run_sweep(cfg, sweep_checkpoint, sweep_split);
      const auto names = cfg.class_names();
      for (std::size_t c = 0; c < s.best.size(); ++c)
        std::cout << names[c] << '\t' << s.best[c] << '\n';
    }
  } catch (const ex::ConfigError &e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::invalid_argument &e) {
    std::cerr << (stage == 0 ? "config error: " : "error: ") << e.what() << '\n';
    return stage == 0 ? 1 : 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
