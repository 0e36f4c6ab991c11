// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adamd/audio/features.hpp"
#include "adamd/metrics/metrics.hpp"
#include "adamd/model/config.hpp"
#include "adamd/synth/synth.hpp"
#include "adamd/train/trainer.hpp"

namespace adamd::experiment {

/// Raised for malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Flat key=value settings for a whole run. The defaults are the desk-scale
/// setup: 5 s clips at 16 kHz, tau=256, d=64, N=32, E=30, B=8.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "run";
  std::filesystem::path data = "data";
  bool feature_cache = true;

  audio::FeatureParams features;
  model::ModelConfig model;   // frames, mels and classes follow features/dataset
  train::TrainConfig train;   // seed follows `seed`
  metrics::DecisionConfig decision;
  double collar_s = 0.5;
  synth::DatasetConfig dataset;

  double train_noise = 0.0; // audio variant used for train and val
  double eval_noise = 0.0;  // audio variant used for eval and sweep

  double sweep_first = 0.05, sweep_last = 0.95, sweep_step = 0.05;

  ExperimentConfig();

  /// Applies one setting; throws ConfigError for unknown keys or bad values.
  void set(const std::string &key, const std::string &value);
  /// Re-derives the dependent fields and checks cross-field consistency.
  void finalize();

  std::vector<std::string> class_names() const;
  model::ModelConfig resolved_model() const;
  train::TrainConfig resolved_train() const;

  /// Every key in a fixed order, one `key = value` per line.
  std::string to_text() const;
};

/// Parses `key = value` lines; '#' starts a comment. Duplicate keys are
/// rejected. Starts from `base` (defaults when omitted).
ExperimentConfig parse_config(const std::string &text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base = {});
void write_config(const std::filesystem::path &path, const ExperimentConfig &c);

std::vector<std::string> config_keys();

} // namespace adamd::experiment
