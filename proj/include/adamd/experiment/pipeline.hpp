// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adamd/experiment/config.hpp"
#include "adamd/metrics/metrics.hpp"
#include "adamd/model/checkpoint.hpp"
#include "adamd/train/trainer.hpp"

namespace adamd::experiment {

using num::RowMatrix;

/// Log-mel features, frame labels and reference events of one clip.
struct LoadedFile {
  std::string name;
  RowMatrix fbank;
  RowMatrix labels;
  std::vector<metrics::Event> reference;
};

/// Writes the dataset under config.data, plus its resolved config.
synth::Dataset run_synth(const ExperimentConfig &config);

/// Loads one split from the audio variant for `noise` (0 = clean). With
/// feature caching on, fbanks are stored under data/cache/.
std::vector<LoadedFile> load_split(const ExperimentConfig &config, const std::string &split,
                                   double noise);

/// Normalized tau-frame training windows.
std::vector<train::Sample> training_samples(const std::vector<LoadedFile> &files,
                                            const audio::FeatureParams &p);
/// Normalized whole files.
std::vector<train::EvalFile> eval_files(const std::vector<LoadedFile> &files);

struct TrainOutput {
  train::TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path history;
};

/// Trains on the train split, validates on val, and writes checkpoint.admd,
/// history.csv and config.resolved into config.out.
TrainOutput run_train(const ExperimentConfig &config, const train::EpochCallback &on_epoch = {});

struct EvalOutput {
  std::vector<std::string> names;              // scale_1 .. scale_K, fused
  std::vector<metrics::MetricsReport> reports; // aligned with names
  std::vector<metrics::MetricsReport> fused_per_class;
  metrics::ErrorBreakdown breakdown; // fused
  std::vector<metrics::FileEvents> fused_events;
  std::vector<double> thresholds;
  std::vector<double> fusion_weights;

  const metrics::MetricsReport &fused() const { return reports.back(); }
};

/// Whole-file inference, fusion, decoding and scoring on prepared files.
EvalOutput evaluate_model(const model::AdamdModel &m, std::span<const double> fusion_weights,
                          const std::vector<LoadedFile> &files, const ExperimentConfig &config,
                          std::span<const double> thresholds);

/// Loads the checkpoint (rejecting one built for another model config),
/// evaluates `split` and writes metrics.csv, class_metrics.csv,
/// onset_shift.csv, errors.csv and detections.tsv into config.out. Without a
/// threshold file the configured decision thresholds apply.
EvalOutput run_eval(const ExperimentConfig &config, const std::filesystem::path &checkpoint,
                    const std::string &split,
                    const std::optional<std::filesystem::path> &threshold_file = std::nullopt);

struct SweepOutput {
  std::vector<metrics::SweepCurve> curves;
  std::vector<double> best;
};

/// Threshold sweep on `split` (the dev split); writes sweep.csv and
/// thresholds.tsv into config.out.
SweepOutput run_sweep(const ExperimentConfig &config, const std::filesystem::path &checkpoint,
                      const std::string &split = "val");

void write_thresholds(const std::filesystem::path &path, const std::vector<std::string> &classes,
                      std::span<const double> thresholds);
std::vector<double> read_thresholds(const std::filesystem::path &path,
                                    const std::vector<std::string> &classes);

std::string metrics_csv(const EvalOutput &e);

} // namespace adamd::experiment
