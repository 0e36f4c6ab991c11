// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adamd/audio/features.hpp"
#include "adamd/model/model.hpp"

namespace adamd::train {

using num::RowMatrix;

enum class WeightingMode {
  adaptive,       // weight 1 at the best (lowest-loss) scale, alpha elsewhere
  suppress_worst, // alpha at the worst scale, 1 elsewhere
  fixed,          // boost at one scale, 1 elsewhere, for every sample
  unweighted,     // every scale weighted 1
};

enum class AccuracyMode { frame_accuracy, exp_neg_bce };

struct TrainConfig {
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch = 8;
  double alpha = 0.1;
  std::uint64_t seed = 1;
  WeightingMode mode = WeightingMode::adaptive;
  std::size_t fixed_scale = 1; // 1-based
  double boost = 10.0;
  AccuracyMode accuracy = AccuracyMode::frame_accuracy;
  double accuracy_threshold = 0.5;

  void validate(std::size_t scales) const;
};

WeightingMode weighting_mode_from_string(const std::string &s);
std::string to_string(WeightingMode m);
AccuracyMode accuracy_mode_from_string(const std::string &s);
std::string to_string(AccuracyMode m);

/// One training window: features [tau, d] (already normalized), labels
/// [tau, C]; rows from `valid_frames` on are padding and carry no loss.
struct Sample {
  RowMatrix features;
  RowMatrix labels;
  std::size_t valid_frames = 0;
};

Sample make_sample(const audio::FeatureMatrix &m);

/// [tau, C] mask with 1 on valid rows.
num::Tensor frame_mask(std::size_t frames, std::size_t classes, std::size_t valid_frames);

/// Per-scale frame-averaged BCE, as differentiable scalars.
std::vector<num::Tensor> branch_loss_tensors(const model::ScalePredictions &preds,
                                             const num::Tensor &labels,
                                             const num::Tensor &mask);
std::vector<double> branch_losses(const model::ScalePredictions &preds, const num::Tensor &labels,
                                  const num::Tensor &mask);
std::vector<double> branch_losses(const model::ScalePredictions &preds, const num::Tensor &labels);

/// 1 at the argmin loss, alpha elsewhere; ties go to the lowest index.
std::vector<double> sample_scale_weights(std::span<const double> losses, double alpha);
/// alpha at the argmax loss, 1 elsewhere; ties go to the lowest index.
std::vector<double> suppress_worst_weights(std::span<const double> losses, double alpha);
/// boost at `scale` (1-based), 1 elsewhere.
std::vector<double> fixed_scale_weights(std::size_t scales, std::size_t scale, double boost);

std::vector<double> scale_weights(std::span<const double> losses, const TrainConfig &config);

struct AdaptiveLoss {
  num::Tensor loss;            // sum_k s_k * l_k
  std::vector<double> losses;  // l_k
  std::vector<double> weights; // s_k, computed from detached losses
};

AdaptiveLoss adaptive_loss(const model::ScalePredictions &preds, const num::Tensor &labels,
                           const num::Tensor &mask, const TrainConfig &config);
AdaptiveLoss adaptive_loss(const model::ScalePredictions &preds, const num::Tensor &labels,
                           double alpha);

struct FusionWeights {
  std::vector<double> w;
  std::vector<double> v;
};

/// w = v / sum(v); uniform when every v is zero.
FusionWeights fusion_from_accuracy(std::vector<double> v);
FusionWeights uniform_fusion(std::size_t scales);

/// Convex combination of per-scale [T, C] predictions.
RowMatrix fuse(std::span<const RowMatrix> preds, std::span<const double> w);

/// A whole file ready for inference: normalized features over every real
/// frame, frame labels and the reference events.
struct EvalFile {
  std::string name;
  RowMatrix features;
  RowMatrix labels;
};

/// Whole-file forward with frozen weights. Pads by repeating the last frame
/// up to the model's frame multiple and crops predictions back, giving one
/// [frames, C] matrix per scale.
std::vector<RowMatrix> predict(const model::AdamdModel &m, const RowMatrix &features);

/// v_k over all frames and classes of the set: fraction of cells with
/// (p_k >= threshold) == label, or exp(-BCE_k) in the alternative mode.
std::vector<double> validation_accuracy(const model::AdamdModel &m,
                                        std::span<const EvalFile> val,
                                        const TrainConfig &config);
FusionWeights validation_weights(const model::AdamdModel &m, std::span<const EvalFile> val,
                                 const TrainConfig &config);

struct EpochRecord {
  std::size_t epoch = 0; // 1-based
  double loss = 0.0;     // mean weighted loss per sample
  std::vector<double> v;
  std::vector<double> w;
};

struct TrainHistory {
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
};

/// epoch,loss,v_1..v_K,w_1..w_K with round-trippable doubles.
void write_history_csv(const std::filesystem::path &path, const TrainHistory &h);
std::string history_csv(const TrainHistory &h);

struct TrainResult {
  TrainHistory history;
  FusionWeights fusion; // from the best epoch
  std::size_t best_epoch = 0;
};

class TrainingAborted : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using EpochCallback = std::function<void(const EpochRecord &)>;

/// Adam on the summed adaptive loss of shuffled mini-batches. Fusion weights
/// are recomputed on `val` after every epoch; the model ends holding the
/// epoch with the highest sum of validation accuracies. A non-finite loss
/// throws TrainingAborted.
TrainResult train(model::AdamdModel &m, std::span<const Sample> train_set,
                  std::span<const EvalFile> val, const TrainConfig &config,
                  const EpochCallback &on_epoch = {});

} // namespace adamd::train
