// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adamd/model/config.hpp"
#include "adamd/numerics/tensor.hpp"

namespace adamd::model {

struct NamedParam {
  std::string name;
  num::Tensor value;
};

/// Pre-activation bottleneck: relu -> 1x1 (N -> N/2) -> relu -> kxk ->
/// relu -> 1x1 (N/2 -> N), added to the identity path.
struct ResidualParams {
  num::Tensor reduce_w, reduce_b;
  num::Tensor spatial_w, spatial_b;
  num::Tensor expand_w, expand_b;
};

struct GruDirection {
  num::Tensor input_weight, recurrent_weight, bias;
};

struct GruLayer {
  GruDirection forward, backward;
};

struct BranchParams {
  num::Tensor conv_w, conv_b; // N -> 1 channel reduction
  std::vector<GruLayer> layers;
  num::Tensor dense_w, dense_b; // 2H -> C
};

/// K per-frame probability tensors, one per scale, each [T, C]. Index 0 is
/// scale 1 (coarsest).
struct ScalePredictions {
  std::vector<num::Tensor> scales;
};

num::Tensor residual_block(const num::Tensor &x, const ResidualParams &p);

class AdamdModel {
public:
  /// Weights drawn from N(0, 1/fan_in) using `seed`; biases start at zero.
  AdamdModel(ModelConfig config, std::uint64_t seed);

  // Parameters are shared handles; copying would alias weights.
  AdamdModel(const AdamdModel &) = delete;
  AdamdModel &operator=(const AdamdModel &) = delete;
  AdamdModel(AdamdModel &&) = default;
  AdamdModel &operator=(AdamdModel &&) = default;

  const ModelConfig &config() const { return config_; }

  /// feature [1,T,d] with T divisible by 2^(K-1). Returns K maps, index 0
  /// the coarsest [N, T/2^(K-1), d/2^(K-1)], the last at full resolution.
  std::vector<num::Tensor> hourglass_forward(const num::Tensor &feature) const;

  /// Scale k is 1-based. Returns [T,C] probabilities with
  /// T = map frames * 2^(K-k).
  num::Tensor branch_forward(const num::Tensor &map, std::size_t scale) const;

  ScalePredictions forward(const num::Tensor &feature) const;

  /// Deterministic order: stem, encoder, bottleneck, decoder, then branches.
  std::vector<NamedParam> &parameters() { return params_; }
  const std::vector<NamedParam> &parameters() const { return params_; }
  std::vector<num::Tensor> parameter_tensors() const;
  std::size_t parameter_count() const;

  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>> &values);

  ResidualParams &encoder_block(std::size_t level) { return encoder_[level]; }
  ResidualParams &decoder_block(std::size_t level) { return decoder_[level]; }
  ResidualParams &bottleneck_block() { return bottleneck_; }
  BranchParams &branch(std::size_t scale) { return branches_.at(scale - 1); }

private:
  ModelConfig config_;
  num::Tensor stem_w_, stem_b_;
  std::vector<ResidualParams> encoder_; // level 0 = full resolution
  ResidualParams bottleneck_;
  std::vector<ResidualParams> decoder_; // level 0 = full resolution
  std::vector<BranchParams> branches_;
  std::vector<NamedParam> params_;
};

} // namespace adamd::model
