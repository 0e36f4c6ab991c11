// SPDX-License-Identifier: Apache-2.0
#include "adamd/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "adamd/numerics/adam.hpp"
#include "adamd/numerics/ops.hpp"
#include "adamd/numerics/tape.hpp"

namespace adamd::train {

using num::Tensor;

void TrainConfig::validate(std::size_t scales) const {
  if (!(lr > 0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be positive");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
  if (batch == 0) throw std::invalid_argument("batch must be >= 1");
  if (!(alpha > 0 && alpha <= 1)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (mode == WeightingMode::fixed) {
    if (fixed_scale < 1 || fixed_scale > scales)
      throw std::invalid_argument("fixed-weight scale must be in [1, " +
                                  std::to_string(scales) + "]");
    if (!(boost > 0) || !std::isfinite(boost)) throw std::invalid_argument("boost must be positive");
  }
  if (!(accuracy_threshold > 0 && accuracy_threshold < 1))
    throw std::invalid_argument("accuracy threshold must lie in (0, 1)");
}

WeightingMode weighting_mode_from_string(const std::string &s) {
  if (s == "adaptive") return WeightingMode::adaptive;
  if (s == "suppress-worst") return WeightingMode::suppress_worst;
  if (s == "fixed-weight") return WeightingMode::fixed;
  if (s == "unweighted") return WeightingMode::unweighted;
  throw std::invalid_argument("unknown training mode '" + s +
                              "' (adaptive, suppress-worst, fixed-weight, unweighted)");
}

std::string to_string(WeightingMode m) {
  switch (m) {
  case WeightingMode::adaptive: return "adaptive";
  case WeightingMode::suppress_worst: return "suppress-worst";
  case WeightingMode::fixed: return "fixed-weight";
  case WeightingMode::unweighted: return "unweighted";
  }
  return "?";
}

AccuracyMode accuracy_mode_from_string(const std::string &s) {
  if (s == "frame-accuracy") return AccuracyMode::frame_accuracy;
  if (s == "exp-neg-bce") return AccuracyMode::exp_neg_bce;
  throw std::invalid_argument("unknown accuracy mode '" + s + "' (frame-accuracy, exp-neg-bce)");
}

std::string to_string(AccuracyMode m) {
  return m == AccuracyMode::frame_accuracy ? "frame-accuracy" : "exp-neg-bce";
}

Sample make_sample(const audio::FeatureMatrix &m) {
  if (m.labels.rows() != m.values.rows())
    throw std::invalid_argument("sample labels and features disagree on frame count");
  return {m.values, m.labels, m.valid_frames};
}

Tensor frame_mask(std::size_t frames, std::size_t classes, std::size_t valid_frames) {
  Tensor t = Tensor::zeros({frames, classes});
  auto v = t.mutable_values();
  std::fill(v.begin(), v.begin() + std::min(valid_frames, frames) * classes, 1.0);
  return t;
}

namespace {

Tensor to_tensor(const RowMatrix &m, num::Shape shape) {
  return Tensor::from(std::move(shape), std::vector<double>(m.data(), m.data() + m.size()));
}

std::size_t argmin(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] < x[best]) best = i;
  return best;
}

std::size_t argmax(std::span<const double> x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if (x[i] > x[best]) best = i;
  return best;
}

void require_finite(std::span<const double> losses) {
  for (double l : losses)
    if (!std::isfinite(l)) throw std::invalid_argument("scale weights need finite losses");
}

} // namespace

std::vector<Tensor> branch_loss_tensors(const model::ScalePredictions &preds, const Tensor &labels,
                                        const Tensor &mask) {
  std::vector<Tensor> out;
  out.reserve(preds.scales.size());
  for (const Tensor &p : preds.scales) out.push_back(num::bce(p, labels, mask));
  return out;
}

std::vector<double> branch_losses(const model::ScalePredictions &preds, const Tensor &labels,
                                  const Tensor &mask) {
  num::Tape::Pause pause;
  std::vector<double> out;
  for (const Tensor &l : branch_loss_tensors(preds, labels, mask)) out.push_back(l.item());
  return out;
}

std::vector<double> branch_losses(const model::ScalePredictions &preds, const Tensor &labels) {
  return branch_losses(preds, labels, Tensor::full(labels.shape(), 1.0));
}

std::vector<double> sample_scale_weights(std::span<const double> losses, double alpha) {
  require_finite(losses);
  std::vector<double> s(losses.size(), alpha);
  if (!losses.empty()) s[argmin(losses)] = 1.0;
  return s;
}

std::vector<double> suppress_worst_weights(std::span<const double> losses, double alpha) {
  require_finite(losses);
  std::vector<double> s(losses.size(), 1.0);
  if (!losses.empty()) s[argmax(losses)] = alpha;
  return s;
}

std::vector<double> fixed_scale_weights(std::size_t scales, std::size_t scale, double boost) {
  if (scale < 1 || scale > scales) throw std::invalid_argument("scale index out of range");
  std::vector<double> s(scales, 1.0);
  s[scale - 1] = boost;
  return s;
}

std::vector<double> scale_weights(std::span<const double> losses, const TrainConfig &c) {
  switch (c.mode) {
  case WeightingMode::adaptive: return sample_scale_weights(losses, c.alpha);
  case WeightingMode::suppress_worst: return suppress_worst_weights(losses, c.alpha);
  case WeightingMode::fixed: return fixed_scale_weights(losses.size(), c.fixed_scale, c.boost);
  case WeightingMode::unweighted: return std::vector<double>(losses.size(), 1.0);
  }
  return {};
}

AdaptiveLoss adaptive_loss(const model::ScalePredictions &preds, const Tensor &labels,
                           const Tensor &mask, const TrainConfig &config) {
  AdaptiveLoss out;
  const std::vector<Tensor> terms = branch_loss_tensors(preds, labels, mask);
  for (const Tensor &t : terms) out.losses.push_back(t.item());
  for (double l : out.losses)
    if (!std::isfinite(l)) {
      out.weights.assign(terms.size(), 1.0);
      out.loss = Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
      return out;
    }
  out.weights = scale_weights(out.losses, config);
  out.loss = num::weighted_sum(terms, out.weights);
  return out;
}

AdaptiveLoss adaptive_loss(const model::ScalePredictions &preds, const Tensor &labels,
                           double alpha) {
  TrainConfig c;
  c.alpha = alpha;
  return adaptive_loss(preds, labels, Tensor::full(labels.shape(), 1.0), c);
}

FusionWeights fusion_from_accuracy(std::vector<double> v) {
  FusionWeights f;
  double total = 0.0;
  for (double x : v) {
    if (!(x >= 0) || !std::isfinite(x))
      throw std::invalid_argument("validation accuracies must be finite and non-negative");
    total += x;
  }
  f.w.assign(v.size(), v.empty() ? 0.0 : 1.0 / v.size());
  if (total > 0)
    for (std::size_t k = 0; k < v.size(); ++k) f.w[k] = v[k] / total;
  f.v = std::move(v);
  return f;
}

FusionWeights uniform_fusion(std::size_t scales) {
  return fusion_from_accuracy(std::vector<double>(scales, 1.0));
}

RowMatrix fuse(std::span<const RowMatrix> preds, std::span<const double> w) {
  if (preds.empty() || preds.size() != w.size())
    throw std::invalid_argument("fuse: need one weight per scale");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0)) throw std::invalid_argument("fuse: weights must be non-negative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("fuse: weights must sum to 1");
  RowMatrix out = RowMatrix::Zero(preds[0].rows(), preds[0].cols());
  for (std::size_t k = 0; k < preds.size(); ++k) {
    if (preds[k].rows() != out.rows() || preds[k].cols() != out.cols())
      throw std::invalid_argument("fuse: scale " + std::to_string(k + 1) + " has a different shape");
    out += w[k] * preds[k];
  }
  // rounding can push a convex combination a hair outside the hull
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    double lo = preds[0].data()[i], hi = lo;
    for (const auto &p : preds) {
      lo = std::min(lo, p.data()[i]);
      hi = std::max(hi, p.data()[i]);
    }
    out.data()[i] = std::clamp(out.data()[i], lo, hi);
  }
  return out;
}

std::vector<RowMatrix> predict(const model::AdamdModel &m, const RowMatrix &features) {
  const auto &cfg = m.config();
  if (features.cols() != static_cast<Eigen::Index>(cfg.hourglass.mels))
    throw std::invalid_argument("predict: feature width " + std::to_string(features.cols()) +
                                " does not match model mels " + std::to_string(cfg.hourglass.mels));
  const std::size_t frames = static_cast<std::size_t>(features.rows());
  if (frames == 0) throw std::invalid_argument("predict: empty feature matrix");
  const std::size_t mult = cfg.frame_multiple();
  const std::size_t padded = (frames + mult - 1) / mult * mult;
  const RowMatrix x = padded == frames ? features : audio::pad_repeat_last(features, padded);

  num::Tape::Pause pause;
  const model::ScalePredictions preds =
      m.forward(to_tensor(x, {1, padded, static_cast<std::size_t>(x.cols())}));
  std::vector<RowMatrix> out;
  for (const Tensor &p : preds.scales) {
    const std::size_t c = p.dim(1);
    out.push_back(num::cmap(p.values(), static_cast<Eigen::Index>(padded), c)
                      .topRows(static_cast<Eigen::Index>(frames)));
  }
  return out;
}

std::vector<double> validation_accuracy(const model::AdamdModel &m, std::span<const EvalFile> val,
                                        const TrainConfig &config) {
  if (val.empty()) throw std::invalid_argument("validation set is empty");
  const std::size_t K = m.config().scales();
  std::vector<double> hits(K, 0.0), bce(K, 0.0);
  double cells = 0.0;
  for (const EvalFile &f : val) {
    const auto preds = predict(m, f.features);
    if (f.labels.rows() != preds[0].rows() || f.labels.cols() != preds[0].cols())
      throw std::invalid_argument("validation labels of " + f.name + " do not match predictions");
    cells += static_cast<double>(f.labels.size());
    for (std::size_t k = 0; k < K; ++k) {
      const double *p = preds[k].data();
      const double *y = f.labels.data();
      for (Eigen::Index i = 0; i < f.labels.size(); ++i) {
        const bool on = p[i] >= config.accuracy_threshold;
        hits[k] += (on == (y[i] >= 0.5)) ? 1.0 : 0.0;
        const double q = std::clamp(p[i], num::kBceClamp, 1.0 - num::kBceClamp);
        bce[k] -= y[i] * std::log(q) + (1.0 - y[i]) * std::log(1.0 - q);
      }
    }
  }
  std::vector<double> v(K);
  for (std::size_t k = 0; k < K; ++k)
    v[k] = config.accuracy == AccuracyMode::frame_accuracy ? hits[k] / cells
                                                          : std::exp(-bce[k] / cells);
  return v;
}

FusionWeights validation_weights(const model::AdamdModel &m, std::span<const EvalFile> val,
                                 const TrainConfig &config) {
  return fusion_from_accuracy(validation_accuracy(m, val, config));
}

namespace {

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace

std::string history_csv(const TrainHistory &h) {
  std::ostringstream out;
  const std::size_t K = h.epochs.empty() ? 0 : h.epochs[0].v.size();
  out << "epoch,loss";
  for (std::size_t k = 1; k <= K; ++k) out << ",v_" << k;
  for (std::size_t k = 1; k <= K; ++k) out << ",w_" << k;
  out << '\n';
  for (const auto &e : h.epochs) {
    out << e.epoch << ',' << fmt(e.loss);
    for (double x : e.v) out << ',' << fmt(x);
    for (double x : e.w) out << ',' << fmt(x);
    out << '\n';
  }
  return out.str();
}

void write_history_csv(const std::filesystem::path &path, const TrainHistory &h) {
  std::ofstream out(path, std::ios::binary);
  out << history_csv(h);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

TrainResult train(model::AdamdModel &m, std::span<const Sample> train_set,
                  std::span<const EvalFile> val, const TrainConfig &config,
                  const EpochCallback &on_epoch) {
  const auto &mc = m.config();
  config.validate(mc.scales());
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (val.empty()) throw std::invalid_argument("validation set is empty");
  const std::size_t C = mc.branch.classes, d = mc.hourglass.mels;
  for (const Sample &s : train_set) {
    if (static_cast<std::size_t>(s.features.cols()) != d ||
        static_cast<std::size_t>(s.labels.cols()) != C || s.labels.rows() != s.features.rows())
      throw std::invalid_argument("training sample shape does not match the model");
  }

  std::vector<Tensor> params = m.parameter_tensors();
  num::AdamState adam;
  adam.lr = config.lr;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.history.seed = config.seed;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_params;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      for (std::size_t i = start; i < end; ++i) {
        const Sample &s = train_set[order[i]];
        const std::size_t T = static_cast<std::size_t>(s.features.rows());
        num::Tape tape;
        num::Tape::Scope scope(tape);
        const model::ScalePredictions preds = m.forward(to_tensor(s.features, {1, T, d}));
        for (std::size_t k = 0; k < preds.scales.size(); ++k)
          for (double x : preds.scales[k].values())
            if (!std::isfinite(x))
              throw TrainingAborted("non-finite prediction at scale " + std::to_string(k + 1) +
                                    ", epoch " + std::to_string(epoch) + ", sample " +
                                    std::to_string(order[i]));
        const AdaptiveLoss L =
            adaptive_loss(preds, to_tensor(s.labels, {T, C}), frame_mask(T, C, s.valid_frames),
                          config);
        const double value = L.loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss at epoch " << epoch << ", sample " << order[i]
              << "; branch losses";
          for (double l : L.losses) msg << ' ' << l;
          throw TrainingAborted(msg.str());
        }
        total += value;
        tape.backward(L.loss);
      }
      num::adam_step(params, adam);
      for (Tensor &p : params) p.zero_grad();
    }
    for (const Tensor &p : params)
      for (double x : p.values())
        if (!std::isfinite(x))
          throw TrainingAborted("non-finite parameter after epoch " + std::to_string(epoch));

    const FusionWeights f = validation_weights(m, val, config);
    EpochRecord rec{epoch, total / static_cast<double>(order.size()), f.v, f.w};
    result.history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    const double score = std::accumulate(f.v.begin(), f.v.end(), 0.0);
    if (score > best) {
      best = score;
      best_params = m.snapshot();
      result.fusion = f;
      result.best_epoch = epoch;
    }
  }
  m.restore(best_params);
  return result;
}

} // namespace adamd::train
