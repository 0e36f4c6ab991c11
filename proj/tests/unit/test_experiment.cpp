// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adamd/experiment/config.hpp"
#include "adamd/experiment/pipeline.hpp"

using namespace adamd::experiment;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string digest(const fs::path &dir) {
  std::string all;
  std::vector<fs::path> files;
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
  std::sort(files.begin(), files.end());
  for (const auto &f : files) all += f.string() + '\n' + slurp(dir / f);
  return std::to_string(std::hash<std::string>{}(all)) + ":" + std::to_string(files.size());
}

ExperimentConfig smoke(const fs::path &root) {
  ExperimentConfig c = parse_config(R"(
    dataset.train_clips = 12
    dataset.val_clips = 4
    dataset.test_clips = 6
    dataset.clip_s = 2.56
    dataset.sources_per_class = 2
    dataset.backgrounds = 2
    dataset.noise_levels = 0.1
    features.n_mels = 32
    features.n_fft = 1024
    features.segment_len = 128
    model.channels = 8
    model.hidden_dims = 8,8,8,8
    train.epochs = 2
    train.batch = 4
  )");
  c.data = root / "data";
  c.out = root / "run";
  return c;
}

} // namespace

TEST_CASE("config defaults are the desk setup and round-trip through text") {
  const ExperimentConfig c;
  CHECK(c.features.segment_len == 256);
  CHECK(c.features.n_mels == 64);
  CHECK(c.model.hourglass.channels == 32);
  CHECK(c.train.epochs == 30);
  CHECK(c.train.batch == 8);
  CHECK(c.train.alpha == 0.1);
  CHECK(c.train.lr == 0.001);
  CHECK(c.dataset.train_clips == 200);
  CHECK(c.class_names() == std::vector<std::string>{"babycry", "glassbreak", "gunshot"});
  const auto m = c.resolved_model();
  CHECK(m.hourglass.frames == 256);
  CHECK(m.hourglass.mels == 64);
  CHECK(m.branch.classes == 3);

  ExperimentConfig d;
  d.set("train.alpha", "0.25");
  d.set("dataset.ebr_db", "-3, 3");
  d.set("decision.thresholds", "0.3,0.4,0.45");
  d.set("train.mode", "fixed-weight");
  d.finalize();
  const ExperimentConfig e = parse_config(d.to_text());
  CHECK(e.to_text() == d.to_text());
  CHECK(e.train.alpha == 0.25);
  CHECK(e.dataset.ebr_db == std::vector<double>{-3, 3});
  CHECK(e.train.mode == adamd::train::WeightingMode::fixed);
  const std::string text = d.to_text();
  CHECK(config_keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("no_such_key = 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed = 1\nseed = 2"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.alpha = abc"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.alpha = 0"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.epochs = -1"), ConfigError);
  CHECK_THROWS_AS(parse_config("decision.thresholds = 0.5,0.5"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.noise = 0.1"), ConfigError);
  CHECK_THROWS_AS(parse_config("features.segment_len = 100"), ConfigError);
  CHECK_THROWS_AS(parse_config("dataset.classes = babycry,thunder"), ConfigError);
  CHECK_THROWS_AS(parse_config("train.mode = sometimes"), ConfigError);
  CHECK_THROWS_AS(parse_config("dataset.train_presence = 1.5"), ConfigError);
  CHECK_NOTHROW(parse_config("# comment\n\n  seed = 7   # trailing\n"));
  CHECK(parse_config("seed = 7").seed == 7);
  CHECK(parse_config("dataset.noise_levels = 0.1\ntrain.noise = 0.1").train_noise == 0.1);
}

TEST_CASE("threshold files") {
  const fs::path p = fs::temp_directory_path() / "adamd_thresholds.tsv";
  const std::vector<std::string> names{"a", "b"};
  const std::vector<double> t{0.35, 0.6};
  write_thresholds(p, names, t);
  CHECK(read_thresholds(p, names) == t);
  CHECK_THROWS(read_thresholds(p, {"a", "c"}));
  fs::remove(p);
}

TEST_CASE("smoke pipeline") {
  const fs::path root = fs::temp_directory_path() / "adamd_smoke";
  fs::remove_all(root);
  const ExperimentConfig c = smoke(root);
  const auto start = std::chrono::steady_clock::now();

  const auto d = run_synth(c);
  CHECK(d.clips.size() == 22);
  std::ifstream manifest(c.data / "manifest.tsv");
  std::size_t rows = 0;
  for (std::string line; std::getline(manifest, line);) ++rows;
  CHECK(rows == 23);
  CHECK(fs::exists(c.data / "noise_0.1" / "test_0000.wav"));
  const std::string first = digest(c.data);
  fs::remove_all(c.data);
  run_synth(c);
  CHECK(digest(c.data) == first);

  const TrainOutput t = run_train(c);
  const std::string hist = slurp(t.history);
  CHECK(std::count(hist.begin(), hist.end(), '\n') == 3);
  CHECK(fs::exists(c.out / "config.resolved"));
  CHECK(parse_config(slurp(c.out / "config.resolved")).to_text() == c.to_text());
  // features now come from the cache; results must not change
  ExperimentConfig again = c;
  again.out = root / "run2";
  CHECK(slurp(run_train(again).history) == hist);

  const auto seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(seconds < 60);

  ExperimentConfig ev = c;
  ev.out = root / "eval";
  const EvalOutput e = run_eval(ev, t.checkpoint, "test");
  CHECK(e.names.size() == 5);
  CHECK(e.names.back() == "fused");
  const std::string m1 = slurp(ev.out / "metrics.csv");
  CHECK(std::count(m1.begin(), m1.end(), '\n') == 6);
  run_eval(ev, t.checkpoint, "test");
  CHECK(slurp(ev.out / "metrics.csv") == m1);
  const std::string shifts = slurp(ev.out / "onset_shift.csv");
  CHECK(std::count(shifts.begin(), shifts.end(), '\n') == 25);

  ExperimentConfig sw = c;
  sw.out = root / "sweep";
  const SweepOutput s = run_sweep(sw, t.checkpoint);
  REQUIRE(s.curves.size() == 3);
  for (const auto &curve : s.curves) CHECK(curve.thresholds.size() == 19);
  const std::string sweep_csv = slurp(sw.out / "sweep.csv");
  CHECK(std::count(sweep_csv.begin(), sweep_csv.end(), '\n') == 1 + 3 * 19);
  std::size_t flagged = 0;
  std::istringstream lines(sweep_csv);
  for (std::string line; std::getline(lines, line);)
    if (line.size() > 2 && line.substr(line.size() - 2) == ",1") ++flagged;
  CHECK(flagged == 3);
  run_sweep(sw, t.checkpoint);
  CHECK(slurp(sw.out / "sweep.csv") == sweep_csv);

  const EvalOutput balanced = run_eval(ev, t.checkpoint, "test", sw.out / "thresholds.tsv");
  CHECK(balanced.thresholds == s.best);

  ExperimentConfig wrong = c;
  wrong.model.hourglass.channels = 4;
  CHECK_THROWS_AS(run_eval(wrong, t.checkpoint, "test"), ConfigError);

  ExperimentConfig fixed = c;
  fixed.set("train.mode", "fixed-weight");
  fixed.set("train.scale", "1");
  fixed.set("train.boost", "10");
  fixed.out = root / "fixed";
  fixed.finalize();
  CHECK(run_train(fixed).result.history.epochs.size() == 2);

  ExperimentConfig missing = c;
  missing.data = root / "nothing_here";
  CHECK_THROWS(run_train(missing));
  fs::remove_all(root);
}
