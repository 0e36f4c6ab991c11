// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adamd/numerics/eigen_maps.hpp"

namespace adamd::metrics {

using num::RowMatrix;

struct Event {
  std::size_t class_index = 0;
  double onset = 0.0;
  double offset = 0.0;
  double peak = 0.0; // highest probability inside a detected run
};

enum class DecodeMode { monophonic, polyphonic };

struct DecisionConfig {
  std::vector<double> thresholds{0.5}; // one per class, or a single shared value
  std::size_t filter_width = 3;
  std::size_t min_active_frames = 1;
  DecodeMode mode = DecodeMode::monophonic;

  void validate() const;
  double threshold(std::size_t class_index) const;
};

/// Sliding mean of odd `width`; windows are truncated at the edges.
std::vector<double> mean_filter(std::span<const double> p, std::size_t width = 3);

/// Frames with p >= threshold are active. Frame i spans [i*hop, (i+1)*hop).
/// Monophonic keeps only the first run that survives the min-length filter.
std::vector<Event> binarize_and_extract(std::span<const double> p, double threshold,
                                        std::size_t min_active_frames, double hop_s,
                                        DecodeMode mode, std::size_t class_index = 0);

/// Per class: mean filter, then extraction with that class's threshold.
/// Events come back sorted by onset, then class.
std::vector<Event> decode(const RowMatrix &probabilities, const DecisionConfig &config,
                          double hop_s);

struct MatchResult {
  std::size_t tp = 0, fp = 0, fn = 0;
  // (reference index, detection index)
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// One-to-one matching within class on onsets, |det - ref| <= collar.
/// References are visited in onset order and take the earliest unmatched
/// detection inside their collar, which maximizes the number of matches.
MatchResult match_events(std::span<const Event> reference, std::span<const Event> detected,
                         double collar_s = 0.5);

/// Largest matching size by exhaustive search; exponential, for testing.
std::size_t max_matching_bruteforce(std::span<const Event> reference,
                                    std::span<const Event> detected, double collar_s = 0.5);

struct MetricsReport {
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  std::size_t n = 0;            // reference events, tp + fn
  std::optional<double> error_rate; // absent when n == 0
};

MetricsReport compute_metrics(std::size_t tp, std::size_t fp, std::size_t fn);

struct FileEvents {
  std::string file;
  std::vector<Event> reference;
  std::vector<Event> detected;
};

/// Counts summed over files, optionally restricted to one class.
MetricsReport evaluate(std::span<const FileEvents> files, double collar_s = 0.5,
                       std::optional<std::size_t> class_index = std::nullopt);

struct SweepInput {
  RowMatrix probabilities; // [frames, C], fused
  std::vector<Event> reference;
};

struct SweepCurve {
  std::size_t class_index = 0;
  std::vector<double> thresholds;
  std::vector<MetricsReport> reports;
  std::size_t best = 0; // index into thresholds
};

/// ER per class at every grid value; the best threshold minimizes ER
/// (ties go to the value closest to 0.5, then the lower value). Classes
/// without reference events minimize false positives instead.
std::vector<SweepCurve> sweep_threshold(std::span<const SweepInput> inputs, std::size_t classes,
                                        std::span<const double> grid, const DecisionConfig &base,
                                        double hop_s, double collar_s = 0.5);

/// first, first+step, ... <= last (inclusive, with a tolerance of step/1000).
std::vector<double> threshold_grid(double first, double last, double step);

struct ErrorBreakdown {
  static constexpr std::size_t kBins = 24;
  static constexpr double kRange = 0.48;
  std::size_t missing = 0;        // reference with no same-class detection in its file
  std::size_t false_alarm = 0;    // detection in a file without reference events
  std::size_t outside_collar = 0; // unmatched reference although its file has detections
  std::vector<std::size_t> histogram = std::vector<std::size_t>(kBins, 0);

  /// Bin i covers (-0.48 + 0.04 i, -0.48 + 0.04 (i+1)]; shifts beyond the
  /// range fold into the outer bins.
  static double bin_lower(std::size_t i);
  static std::size_t bin_of(double shift_s);
};

ErrorBreakdown error_breakdown(std::span<const FileEvents> files, double collar_s = 0.5);

// TSV in the dataset schema: file, onset, offset, label.
void write_events_tsv(const std::filesystem::path &path, std::span<const FileEvents> files,
                      std::span<const std::string> class_names, bool detected);

} // namespace adamd::metrics
