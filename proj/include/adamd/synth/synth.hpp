// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adamd/audio/wav.hpp"

namespace adamd::synth {

using audio::Waveform;

enum class Tail { vanishing, non_vanishing };
enum class Consistency { consistent, inconsistent };

struct EventArchetype {
  int id = 0;
  Tail tail = Tail::non_vanishing;
  Consistency consistency = Consistency::consistent;
};

/// Archetypes 1-4: (non-vanishing, inconsistent), (vanishing, consistent),
/// (vanishing, inconsistent), (non-vanishing, consistent).
/// Throws std::invalid_argument for any other id.
EventArchetype archetype(int id);

/// Recipe knobs for one event class; individual sources jitter around them.
struct ClassParams {
  int archetype = 4;
  double f0 = 440.0;            // fundamental for tonal archetypes
  std::size_t harmonics = 4;
  double decay = 5.0;           // 1/s, vanishing archetypes
  double vibrato_rate = 6.0;    // Hz, archetype 1
  double vibrato_depth = 0.08;  // relative pitch swing, archetype 1
  double band_center = 1200.0;  // Hz, archetype 3
  double band_q = 1.5;          // archetype 3
  double min_duration = 0.5;    // s
  double max_duration = 1.5;    // s
};

/// Type 4: sustained harmonic tone, flat envelope. Type 2: harmonic tone
/// with exp(-decay t) envelope. Type 3: band-passed noise with the same
/// decay. Type 1: harmonic tone whose pitch warbles, flat envelope.
/// 5 ms fades at both ends; unit RMS. Deterministic in `seed`.
Waveform synth_event(const ClassParams &params, double duration_s, int sample_rate,
                     std::uint64_t seed);

double rms(const std::vector<double> &x, std::size_t begin = 0,
           std::size_t end = static_cast<std::size_t>(-1));

/// Colored noise with power spectrum ~ f^-beta, scaled to `level` RMS.
Waveform colored_noise(double duration_s, int sample_rate, double beta, double level,
                       std::uint64_t seed);

struct Annotation {
  std::string file;
  double onset = 0.0;
  double offset = 0.0;
  std::string label;
};

struct MixResult {
  Waveform audio;
  std::optional<Annotation> annotation;
  double gain = 0.0;        // factor applied to the event before addition
  double normalization = 1.0; // factor applied to the sum to keep peaks <= 0.99
};

/// Scales `event` so RMS(scaled event) / RMS(background over the event span)
/// = 10^(ebr_db/20), adds it at `onset_s`, and rescales the sum to peak 0.99
/// when it would exceed that. Throws when the event does not fit or the
/// background is silent (RMS < 1e-9) over the span. An empty event leaves
/// the background unchanged and yields no annotation.
MixResult mix(const Waveform &background, const Waveform &event, double ebr_db,
              double onset_s, const std::string &label = "");

/// Adds amplification * N(0, 1) to every sample.
Waveform add_noise(const Waveform &w, double amplification, std::uint64_t seed);

struct ClassSpec {
  std::string name;
  ClassParams params;
};

/// The desk default: archetypes 1, 2, 3 in the roles of baby cry, glass break
/// and gun shot.
std::vector<ClassSpec> default_classes();
/// default_classes() plus "machine", a sustained tone (archetype 4).
std::vector<ClassSpec> builtin_classes();
/// Looks a class up by name among builtin_classes().
ClassSpec builtin_class(const std::string &name);

struct DatasetConfig {
  std::vector<ClassSpec> classes = default_classes();
  std::size_t train_clips = 200;
  std::size_t val_clips = 40;
  std::size_t test_clips = 50;
  double train_presence = 0.99;
  double val_presence = 0.5;
  double test_presence = 0.5;
  double clip_s = 5.0;
  int sample_rate = 16000;
  std::vector<double> ebr_db{-6.0, 0.0, 6.0};
  std::size_t sources_per_class = 12; // per split; splits never share sources
  std::size_t backgrounds = 6;        // per split
  double background_level = 0.05;     // RMS
  bool polyphonic = false;            // up to two overlapping events of distinct classes
  std::vector<double> noise_levels;   // extra noisy copies of every clip
  std::uint64_t seed = 1;

  void validate() const;
};

/// Positive clip count for a split: round(presence * clips).
std::size_t positive_count(std::size_t clips, double presence);

struct ClipRecord {
  std::string file;  // relative to the dataset root, without directory
  std::string split; // train | val | test
  std::vector<Annotation> events;
};

struct Dataset {
  std::vector<ClipRecord> clips;
  std::vector<std::string> class_names;
};

/// Writes audio/<file>.wav, noise_<a>/<file>.wav for each noise level,
/// metadata.tsv and manifest.tsv under `root`.
Dataset generate_dataset(const DatasetConfig &config, const std::filesystem::path &root);

/// Directory holding the clips for a noise level (0 = clean).
std::string audio_dir_name(double noise_level);

void write_metadata(const std::filesystem::path &path, const Dataset &d);
void write_manifest(const std::filesystem::path &path, const Dataset &d);
/// Reads metadata.tsv and manifest.tsv back; class names are those seen in
/// the metadata in first-appearance order unless `class_names` is given.
Dataset read_dataset(const std::filesystem::path &root,
                     const std::vector<std::string> &class_names = {});

} // namespace adamd::synth
