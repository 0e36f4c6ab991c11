// SPDX-License-Identifier: Apache-2.0
#include "adamd/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace adamd::metrics {

namespace {

// absorbs frame-time rounding such as 25 * 0.02 > 0.5
constexpr double kCollarSlack = 1e-9;

bool within_collar(const Event &r, const Event &d, double collar) {
  return r.class_index == d.class_index && std::abs(d.onset - r.onset) <= collar + kCollarSlack;
}

std::vector<std::size_t> onset_order(std::span<const Event> ev) {
  std::vector<std::size_t> idx(ev.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return ev[a].onset < ev[b].onset; });
  return idx;
}

} // namespace

void DecisionConfig::validate() const {
  if (thresholds.empty()) throw std::invalid_argument("at least one threshold is required");
  for (double t : thresholds)
    if (!(t > 0 && t < 1)) throw std::invalid_argument("thresholds must lie in (0, 1)");
  if (filter_width == 0 || filter_width % 2 == 0)
    throw std::invalid_argument("filter width must be odd");
  if (min_active_frames == 0) throw std::invalid_argument("min active frames must be >= 1");
}

double DecisionConfig::threshold(std::size_t c) const {
  if (thresholds.size() == 1) return thresholds[0];
  if (c >= thresholds.size())
    throw std::invalid_argument("no threshold for class " + std::to_string(c));
  return thresholds[c];
}

std::vector<double> mean_filter(std::span<const double> p, std::size_t width) {
  if (width == 0 || width % 2 == 0) throw std::invalid_argument("filter width must be odd");
  const std::size_t n = p.size(), half = width / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double s = 0.0;
    for (std::size_t j = lo; j < hi; ++j) s += p[j];
    out[i] = s / static_cast<double>(hi - lo);
  }
  return out;
}

std::vector<Event> binarize_and_extract(std::span<const double> p, double threshold,
                                        std::size_t min_active_frames, double hop_s,
                                        DecodeMode mode, std::size_t class_index) {
  if (!(hop_s > 0)) throw std::invalid_argument("hop must be positive");
  std::vector<Event> out;
  std::size_t i = 0;
  while (i < p.size()) {
    if (!(p[i] >= threshold)) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    double peak = 0.0;
    while (i < p.size() && p[i] >= threshold) peak = std::max(peak, p[i++]);
    if (i - start < min_active_frames) continue;
    out.push_back({class_index, static_cast<double>(start) * hop_s, static_cast<double>(i) * hop_s,
                   peak});
    if (mode == DecodeMode::monophonic) break;
  }
  return out;
}

std::vector<Event> decode(const RowMatrix &probabilities, const DecisionConfig &config,
                          double hop_s) {
  config.validate();
  std::vector<Event> out;
  std::vector<double> column(static_cast<std::size_t>(probabilities.rows()));
  for (Eigen::Index c = 0; c < probabilities.cols(); ++c) {
    for (Eigen::Index t = 0; t < probabilities.rows(); ++t) column[t] = probabilities(t, c);
    const auto smooth = mean_filter(column, config.filter_width);
    const auto ev = binarize_and_extract(smooth, config.threshold(c), config.min_active_frames,
                                         hop_s, config.mode, static_cast<std::size_t>(c));
    out.insert(out.end(), ev.begin(), ev.end());
  }
  std::stable_sort(out.begin(), out.end(), [](const Event &a, const Event &b) {
    return a.onset < b.onset || (a.onset == b.onset && a.class_index < b.class_index);
  });
  return out;
}

MatchResult match_events(std::span<const Event> reference, std::span<const Event> detected,
                         double collar_s) {
  if (!(collar_s >= 0)) throw std::invalid_argument("collar must be non-negative");
  MatchResult r;
  const auto refs = onset_order(reference);
  const auto dets = onset_order(detected);
  std::vector<bool> used(detected.size(), false);
  for (std::size_t ri : refs) {
    for (std::size_t di : dets) {
      if (used[di] || !within_collar(reference[ri], detected[di], collar_s)) continue;
      used[di] = true;
      r.pairs.emplace_back(ri, di);
      break;
    }
  }
  r.tp = r.pairs.size();
  r.fn = reference.size() - r.tp;
  r.fp = detected.size() - r.tp;
  return r;
}

std::size_t max_matching_bruteforce(std::span<const Event> reference,
                                    std::span<const Event> detected, double collar_s) {
  std::vector<bool> used(detected.size(), false);
  std::function<std::size_t(std::size_t)> best = [&](std::size_t i) -> std::size_t {
    if (i == reference.size()) return 0;
    std::size_t b = best(i + 1); // leave reference i unmatched
    for (std::size_t j = 0; j < detected.size(); ++j) {
      if (used[j] || !within_collar(reference[i], detected[j], collar_s)) continue;
      used[j] = true;
      b = std::max(b, 1 + best(i + 1));
      used[j] = false;
    }
    return b;
  };
  return best(0);
}

MetricsReport compute_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  MetricsReport m;
  m.tp = tp;
  m.fp = fp;
  m.fn = fn;
  m.n = tp + fn;
  m.precision = tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = m.n ? static_cast<double>(tp) / static_cast<double>(m.n) : 0.0;
  m.f1 = m.precision + m.recall > 0
             ? 2 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  if (m.n) m.error_rate = static_cast<double>(fn + fp) / static_cast<double>(m.n);
  return m;
}

namespace {

std::vector<Event> only_class(std::span<const Event> ev, std::optional<std::size_t> c) {
  std::vector<Event> out;
  for (const Event &e : ev)
    if (!c || e.class_index == *c) out.push_back(e);
  return out;
}

} // namespace

MetricsReport evaluate(std::span<const FileEvents> files, double collar_s,
                       std::optional<std::size_t> class_index) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const FileEvents &f : files) {
    const auto r = only_class(f.reference, class_index);
    const auto d = only_class(f.detected, class_index);
    const MatchResult m = match_events(r, d, collar_s);
    tp += m.tp;
    fp += m.fp;
    fn += m.fn;
  }
  return compute_metrics(tp, fp, fn);
}

std::vector<double> threshold_grid(double first, double last, double step) {
  if (!(step > 0) || !(first > 0) || !(last < 1) || last < first)
    throw std::invalid_argument("threshold grid must satisfy 0 < first <= last < 1, step > 0");
  std::vector<double> g;
  for (std::size_t i = 0;; ++i) {
    const double v = first + static_cast<double>(i) * step;
    if (v > last + step * 1e-3) break;
    // snap to a short decimal so 0.15000000000000002 prints as 0.15
    g.push_back(std::round(v * 1e9) / 1e9);
  }
  return g;
}

std::vector<SweepCurve> sweep_threshold(std::span<const SweepInput> inputs, std::size_t classes,
                                        std::span<const double> grid, const DecisionConfig &base,
                                        double hop_s, double collar_s) {
  if (grid.empty()) throw std::invalid_argument("threshold grid is empty");
  for (double t : grid)
    if (!(t > 0 && t < 1)) throw std::invalid_argument("threshold grid values must lie in (0, 1)");
  std::vector<SweepCurve> curves(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    SweepCurve &curve = curves[c];
    curve.class_index = c;
    curve.thresholds.assign(grid.begin(), grid.end());
    // one mean filter per file, reused across the grid
    std::vector<std::vector<double>> smooth;
    for (const SweepInput &in : inputs) {
      if (static_cast<std::size_t>(in.probabilities.cols()) != classes)
        throw std::invalid_argument("sweep input has the wrong number of classes");
      std::vector<double> col(static_cast<std::size_t>(in.probabilities.rows()));
      for (std::size_t t = 0; t < col.size(); ++t)
        col[t] = in.probabilities(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(c));
      smooth.push_back(mean_filter(col, base.filter_width));
    }
    for (double lambda : grid) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t f = 0; f < inputs.size(); ++f) {
        const auto det =
            binarize_and_extract(smooth[f], lambda, base.min_active_frames, hop_s, base.mode, c);
        const auto ref = only_class(inputs[f].reference, c);
        const MatchResult m = match_events(ref, det, collar_s);
        tp += m.tp;
        fp += m.fp;
        fn += m.fn;
      }
      curve.reports.push_back(compute_metrics(tp, fp, fn));
    }
    auto cost = [&](std::size_t i) {
      const MetricsReport &r = curve.reports[i];
      return r.error_rate ? *r.error_rate : static_cast<double>(r.fp);
    };
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double a = cost(i), b = cost(curve.best);
      const double da = std::abs(grid[i] - 0.5), db = std::abs(grid[curve.best] - 0.5);
      if (a < b || (a == b && (da < db || (da == db && grid[i] < grid[curve.best]))))
        curve.best = i;
    }
  }
  return curves;
}

double ErrorBreakdown::bin_lower(std::size_t i) {
  return -kRange + 2 * kRange * static_cast<double>(i) / static_cast<double>(kBins);
}

std::size_t ErrorBreakdown::bin_of(double shift) {
  for (std::size_t i = 0; i + 1 < kBins; ++i)
    if (shift <= bin_lower(i + 1)) return i;
  return kBins - 1;
}

ErrorBreakdown error_breakdown(std::span<const FileEvents> files, double collar_s) {
  ErrorBreakdown out;
  for (const FileEvents &f : files) {
    if (f.reference.empty()) {
      out.false_alarm += f.detected.size();
      continue;
    }
    const MatchResult m = match_events(f.reference, f.detected, collar_s);
    std::vector<bool> matched(f.reference.size(), false);
    for (auto [ri, di] : m.pairs) {
      matched[ri] = true;
      ++out.histogram[ErrorBreakdown::bin_of(f.detected[di].onset - f.reference[ri].onset)];
    }
    for (std::size_t ri = 0; ri < f.reference.size(); ++ri) {
      if (matched[ri]) continue;
      const bool any = std::any_of(f.detected.begin(), f.detected.end(), [&](const Event &d) {
        return d.class_index == f.reference[ri].class_index;
      });
      ++(any ? out.outside_collar : out.missing);
    }
  }
  return out;
}

void write_events_tsv(const std::filesystem::path &path, std::span<const FileEvents> files,
                      std::span<const std::string> class_names, bool detected) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "file\tonset\toffset\tlabel\n";
  char buf[64];
  for (const FileEvents &f : files) {
    const auto &ev = detected ? f.detected : f.reference;
    if (ev.empty()) out << f.file << "\t\t\tnone\n";
    for (const Event &e : ev) {
      if (e.class_index >= class_names.size())
        throw std::invalid_argument("event class without a name");
      std::snprintf(buf, sizeof buf, "%.6f\t%.6f", e.onset, e.offset);
      out << f.file << '\t' << buf << '\t' << class_names[e.class_index] << '\n';
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace adamd::metrics
