// SPDX-License-Identifier: Apache-2.0
#include "adamd/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "adamd/numerics/ops.hpp"

namespace adamd::model {

using num::Tensor;

namespace {

class Initializer {
public:
  Initializer(std::uint64_t seed, std::vector<NamedParam> &out)
      : rng_(seed), out_(out) {}

  Tensor normal(const std::string &name, num::Shape shape, std::size_t fan_in) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(fan_in)));
    std::vector<double> v(num::numel(shape));
    for (double &x : v) x = dist(rng_);
    return keep(name, Tensor::from(std::move(shape), std::move(v), true));
  }

  Tensor zeros(const std::string &name, num::Shape shape) {
    return keep(name, Tensor::zeros(std::move(shape), true));
  }

private:
  Tensor keep(const std::string &name, Tensor t) {
    out_.push_back({name, t});
    return t;
  }
  std::mt19937_64 rng_;
  std::vector<NamedParam> &out_;
};

ResidualParams make_residual(Initializer &init, const std::string &prefix,
                             std::size_t n, std::size_t k) {
  const std::size_t half = n / 2;
  ResidualParams p;
  p.reduce_w = init.normal(prefix + ".reduce.weight", {half, n, 1, 1}, n);
  p.reduce_b = init.zeros(prefix + ".reduce.bias", {half});
  p.spatial_w = init.normal(prefix + ".spatial.weight", {half, half, k, k}, half * k * k);
  p.spatial_b = init.zeros(prefix + ".spatial.bias", {half});
  p.expand_w = init.normal(prefix + ".expand.weight", {n, half, 1, 1}, half);
  p.expand_b = init.zeros(prefix + ".expand.bias", {n});
  return p;
}

GruDirection make_direction(Initializer &init, const std::string &prefix,
                            std::size_t in, std::size_t hidden) {
  GruDirection d;
  d.input_weight = init.normal(prefix + ".input_weight", {in, 3 * hidden}, in);
  d.recurrent_weight = init.normal(prefix + ".recurrent_weight", {hidden, 3 * hidden}, hidden);
  d.bias = init.zeros(prefix + ".bias", {3 * hidden});
  return d;
}

} // namespace

Tensor residual_block(const Tensor &x, const ResidualParams &p) {
  if (x.rank() != 3 || x.dim(0) != p.reduce_w.dim(1))
    throw num::ShapeError("residual_block: input " + num::to_string(x.shape()) +
                          " does not match block width " +
                          std::to_string(p.reduce_w.dim(1)));
  Tensor y = num::conv2d(num::relu(x), p.reduce_w, p.reduce_b);
  y = num::conv2d(num::relu(y), p.spatial_w, p.spatial_b);
  y = num::conv2d(num::relu(y), p.expand_w, p.expand_b);
  return num::add(x, y);
}

AdamdModel::AdamdModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  const auto &hg = config_.hourglass;
  const auto &br = config_.branch;
  const std::size_t n = hg.channels, K = hg.depth;
  Initializer init(seed, params_);

  stem_w_ = init.normal("stem.weight", {n, 1, hg.kernel, hg.kernel}, hg.kernel * hg.kernel);
  stem_b_ = init.zeros("stem.bias", {n});
  for (std::size_t l = 0; l + 1 < K; ++l)
    encoder_.push_back(make_residual(init, "encoder" + std::to_string(l), n, hg.kernel));
  bottleneck_ = make_residual(init, "bottleneck", n, hg.kernel);
  decoder_.resize(K - 1);
  for (std::size_t l = K - 1; l-- > 0;)
    decoder_[l] = make_residual(init, "decoder" + std::to_string(l), n, hg.kernel);

  for (std::size_t k = 1; k <= K; ++k) {
    const std::string prefix = "branch" + std::to_string(k);
    const std::size_t hidden = br.hidden_dims[k - 1];
    const std::size_t ck = br.conv_kernel;
    BranchParams b;
    b.conv_w = init.normal(prefix + ".conv.weight", {1, n, ck, ck}, n * ck * ck);
    b.conv_b = init.zeros(prefix + ".conv.bias", {1});
    std::size_t in = config_.mels_at(k);
    for (std::size_t l = 0; l < br.gru_layers; ++l) {
      const std::string lp = prefix + ".gru" + std::to_string(l);
      GruLayer layer;
      layer.forward = make_direction(init, lp + ".fwd", in, hidden);
      layer.backward = make_direction(init, lp + ".bwd", in, hidden);
      b.layers.push_back(std::move(layer));
      in = 2 * hidden;
    }
    b.dense_w = init.normal(prefix + ".dense.weight", {2 * hidden, br.classes}, 2 * hidden);
    b.dense_b = init.zeros(prefix + ".dense.bias", {br.classes});
    branches_.push_back(std::move(b));
  }
}

std::vector<Tensor> AdamdModel::hourglass_forward(const Tensor &feature) const {
  const auto &hg = config_.hourglass;
  const std::size_t K = hg.depth;
  if (feature.rank() != 3 || feature.dim(0) != 1 || feature.dim(2) != hg.mels)
    throw num::ShapeError("hourglass_forward: expected [1,T," + std::to_string(hg.mels) +
                          "], got " + num::to_string(feature.shape()));
  if (feature.dim(1) % config_.frame_multiple())
    throw num::ShapeError("hourglass_forward: frame count " + std::to_string(feature.dim(1)) +
                          " not divisible by " + std::to_string(config_.frame_multiple()));

  Tensor x = num::conv2d(feature, stem_w_, stem_b_);
  std::vector<Tensor> skips;
  for (std::size_t l = 0; l + 1 < K; ++l) {
    skips.push_back(residual_block(x, encoder_[l]));
    x = num::maxpool2d(skips.back()).output;
  }
  std::vector<Tensor> taps;
  taps.push_back(residual_block(x, bottleneck_));
  for (std::size_t l = K - 1; l-- > 0;) {
    const Tensor up = num::add(num::upsample_nearest2d(taps.back()), skips[l]);
    taps.push_back(residual_block(up, decoder_[l]));
  }
  return taps;
}

Tensor AdamdModel::branch_forward(const Tensor &map, std::size_t scale) const {
  const BranchParams &b = branches_.at(scale - 1);
  const std::size_t d = config_.mels_at(scale);
  if (map.rank() != 3 || map.dim(0) != config_.hourglass.channels || map.dim(2) != d)
    throw num::ShapeError("branch_forward: scale " + std::to_string(scale) + " expects [" +
                          std::to_string(config_.hourglass.channels) + ",T," +
                          std::to_string(d) + "], got " + num::to_string(map.shape()));
  const std::size_t frames = map.dim(1);
  Tensor seq = num::reshape(num::conv2d(map, b.conv_w, b.conv_b), {frames, d});
  for (const GruLayer &layer : b.layers) {
    const Tensor f = num::gru(seq, layer.forward.input_weight, layer.forward.recurrent_weight,
                              layer.forward.bias, false);
    const Tensor r = num::gru(seq, layer.backward.input_weight,
                              layer.backward.recurrent_weight, layer.backward.bias, true);
    seq = num::concat_features(f, r);
  }
  const Tensor prob = num::sigmoid(num::dense(seq, b.dense_w, b.dense_b));
  return num::upsample_linear_time(prob, config_.upsample_factor(scale));
}

ScalePredictions AdamdModel::forward(const Tensor &feature) const {
  const std::vector<Tensor> taps = hourglass_forward(feature);
  ScalePredictions out;
  for (std::size_t k = 1; k <= taps.size(); ++k)
    out.scales.push_back(branch_forward(taps[k - 1], k));
  return out;
}

std::vector<Tensor> AdamdModel::parameter_tensors() const {
  std::vector<Tensor> out;
  for (const auto &p : params_) out.push_back(p.value);
  return out;
}

std::size_t AdamdModel::parameter_count() const {
  std::size_t total = 0;
  for (const auto &p : params_) total += p.value.size();
  return total;
}

std::vector<std::vector<double>> AdamdModel::snapshot() const {
  std::vector<std::vector<double>> out;
  for (const auto &p : params_)
    out.emplace_back(p.value.values().begin(), p.value.values().end());
  return out;
}

void AdamdModel::restore(const std::vector<std::vector<double>> &values) {
  if (values.size() != params_.size())
    throw std::invalid_argument("restore: snapshot has wrong parameter count");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = params_[i].value.mutable_values();
    if (values[i].size() != dst.size())
      throw std::invalid_argument("restore: size mismatch for " + params_[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

} // namespace adamd::model
