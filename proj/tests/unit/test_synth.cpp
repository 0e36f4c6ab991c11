// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "adamd/audio/wav.hpp"
#include "adamd/synth/synth.hpp"

using namespace adamd::synth;
namespace fs = std::filesystem;

namespace {

double window_rms(const Waveform &w, double from_s, double to_s) {
  const auto a = static_cast<std::size_t>(from_s * w.sample_rate);
  const auto b = static_cast<std::size_t>(to_s * w.sample_rate);
  return rms(w.samples, a, b);
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string &name) {
  const auto p = fs::temp_directory_path() / ("adamd_synth_" + name);
  fs::remove_all(p);
  return p;
}

DatasetConfig small_config() {
  DatasetConfig c;
  c.train_clips = 100;
  c.val_clips = 6;
  c.test_clips = 50;
  c.train_presence = 0.99;
  c.test_presence = 0.5;
  c.clip_s = 2.0;
  c.sources_per_class = 3;
  c.backgrounds = 3;
  c.seed = 17;
  return c;
}

} // namespace

TEST_CASE("archetypes follow the four-category table") {
  CHECK(archetype(1).tail == Tail::non_vanishing);
  CHECK(archetype(1).consistency == Consistency::inconsistent);
  CHECK(archetype(2).tail == Tail::vanishing);
  CHECK(archetype(2).consistency == Consistency::consistent);
  CHECK(archetype(3).tail == Tail::vanishing);
  CHECK(archetype(3).consistency == Consistency::inconsistent);
  CHECK(archetype(4).tail == Tail::non_vanishing);
  CHECK(archetype(4).consistency == Consistency::consistent);
  CHECK_THROWS_AS(archetype(0), std::invalid_argument);
  CHECK_THROWS_AS(archetype(5), std::invalid_argument);
  ClassParams p;
  p.archetype = 7;
  CHECK_THROWS_AS(synth_event(p, 1.0, 16000, 1), std::invalid_argument);
}

TEST_CASE("non-vanishing tone keeps its level") {
  ClassParams p;
  p.archetype = 4;
  const Waveform w = synth_event(p, 1.0, 16000, 3);
  REQUIRE(w.samples.size() == 16000);
  const double head = window_rms(w, 0.0, 0.1), tail = window_rms(w, 0.9, 1.0);
  CHECK(std::abs(tail - head) < 0.1 * head);
  CHECK(rms(w.samples) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("vanishing tone decays") {
  ClassParams p;
  p.archetype = 2;
  p.decay = 5.0;
  const Waveform w = synth_event(p, 1.0, 16000, 3);
  CHECK(window_rms(w, 0.9, 1.0) < 0.05 * window_rms(w, 0.0, 0.1));

  p.archetype = 3;
  const Waveform n = synth_event(p, 1.0, 16000, 3);
  CHECK(window_rms(n, 0.9, 1.0) < 0.05 * window_rms(n, 0.0, 0.1));
}

TEST_CASE("warbling archetype stays non-vanishing") {
  ClassParams p;
  p.archetype = 1;
  p.f0 = 400;
  const Waveform w = synth_event(p, 1.0, 16000, 5);
  const double head = window_rms(w, 0.0, 0.1), tail = window_rms(w, 0.9, 1.0);
  CHECK(tail > 0.75 * head);
  CHECK(tail < 1.25 * head);
}

TEST_CASE("band-limited noise concentrates energy near the centre") {
  ClassParams p;
  p.archetype = 3;
  p.band_center = 1000;
  p.band_q = 2.0;
  p.decay = 0.0;
  const Waveform w = synth_event(p, 1.0, 16000, 9);
  // Goertzel-style power at a few probe frequencies
  auto power = [&](double f) {
    double re = 0, im = 0;
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
      const double ph = 2 * M_PI * f * i / w.sample_rate;
      re += w.samples[i] * std::cos(ph);
      im += w.samples[i] * std::sin(ph);
    }
    return re * re + im * im;
  };
  double near = 0, far = 0;
  for (int d = -20; d <= 20; ++d) {
    near += power(1000 + d);
    far += power(5000 + d);
  }
  CHECK(near > 20 * far);
}

TEST_CASE("event synthesis is deterministic in the seed") {
  for (int a = 1; a <= 4; ++a) {
    ClassParams p;
    p.archetype = a;
    const auto x = synth_event(p, 0.5, 16000, 42);
    const auto y = synth_event(p, 0.5, 16000, 42);
    CHECK(x.samples == y.samples);
    if (a == 1 || a == 3) CHECK(x.samples != synth_event(p, 0.5, 16000, 43).samples);
  }
  ClassParams p;
  CHECK_THROWS_AS(synth_event(p, 0.0, 16000, 1), std::invalid_argument);
  CHECK_THROWS_AS(synth_event(p, -1.0, 16000, 1), std::invalid_argument);
}

TEST_CASE("colored noise level and slope") {
  const Waveform pink = colored_noise(2.0, 16000, 1.0, 0.05, 1);
  const Waveform red = colored_noise(2.0, 16000, 2.0, 0.05, 1);
  CHECK(rms(pink.samples) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(pink.samples.size() == 32000);
  // first differences amplify high frequencies: steeper spectra give smaller ratios
  auto diff_ratio = [](const Waveform &w) {
    std::vector<double> d(w.samples.size() - 1);
    for (std::size_t i = 0; i + 1 < w.samples.size(); ++i) d[i] = w.samples[i + 1] - w.samples[i];
    return rms(d) / rms(w.samples);
  };
  CHECK(diff_ratio(red) < diff_ratio(pink));
  CHECK(colored_noise(2.0, 16000, 1.0, 0.05, 1).samples == pink.samples);
}

TEST_CASE("mix scales the event to the requested EBR") {
  const Waveform bg = colored_noise(3.0, 16000, 1.0, 0.05, 2);
  ClassParams p;
  p.archetype = 2;
  const Waveform ev = synth_event(p, 0.8, 16000, 4);
  const std::size_t start = 16000;
  const double bg_rms = rms(bg.samples, start, start + ev.samples.size());

  const MixResult zero = mix(bg, ev, 0.0, 1.0, "glass");
  CHECK(zero.gain == doctest::Approx(bg_rms / rms(ev.samples)).epsilon(1e-12));
  const MixResult minus6 = mix(bg, ev, -6.0, 1.0, "glass");
  CHECK(minus6.gain / zero.gain == doctest::Approx(0.5012).epsilon(1e-4));

  for (double ebr : {-6.0, 0.0, 6.0, 20.0}) {
    const MixResult m = mix(bg, ev, ebr, 1.0, "glass");
    std::vector<double> scaled(ev.samples);
    for (double &v : scaled) v *= m.gain;
    const double measured = 20 * std::log10(rms(scaled) / bg_rms);
    CHECK(std::abs(measured - ebr) < 0.1);
    REQUIRE(m.annotation);
    CHECK(m.annotation->onset == doctest::Approx(1.0));
    CHECK(m.annotation->offset == doctest::Approx(1.8));
    CHECK(m.annotation->label == "glass");
    double peak = 0;
    for (double v : m.audio.samples) peak = std::max(peak, std::abs(v));
    CHECK(peak <= 0.99 + 1e-12);
    // recover the pre-normalization sum
    for (std::size_t i = 0; i < bg.samples.size(); ++i) {
      double expect = bg.samples[i];
      if (i >= start && i < start + ev.samples.size()) expect += m.gain * ev.samples[i - start];
      if (std::abs(m.audio.samples[i] / m.normalization - expect) > 1e-12) {
        FAIL("mixed sample mismatch at " << i);
        break;
      }
    }
  }
  const MixResult loud = mix(bg, ev, 40.0, 1.0);
  CHECK(loud.normalization < 1.0);
}

TEST_CASE("mix edge cases") {
  const Waveform bg = colored_noise(1.0, 16000, 1.0, 0.05, 2);
  const MixResult none = mix(bg, Waveform{}, 0.0, 0.0);
  CHECK(none.audio.samples == bg.samples);
  CHECK_FALSE(none.annotation);

  ClassParams p;
  const Waveform ev = synth_event(p, 0.5, 16000, 1);
  CHECK_THROWS_AS(mix(bg, ev, 0.0, 0.6), std::invalid_argument);
  CHECK_NOTHROW(mix(bg, ev, 0.0, 0.5));
  Waveform silent;
  silent.samples.assign(16000, 0.0);
  CHECK_THROWS_AS(mix(silent, ev, 0.0, 0.1), std::invalid_argument);
  Waveform other = ev;
  other.sample_rate = 8000;
  CHECK_THROWS_AS(mix(bg, other, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("add_noise") {
  Waveform zero;
  zero.samples.assign(100000, 0.0);
  CHECK(add_noise(zero, 0.0, 1).samples == zero.samples);
  for (double a : {0.01, 0.3, 2.0}) {
    const Waveform n = add_noise(zero, a, 7);
    double s = 0, s2 = 0;
    for (double v : n.samples) {
      s += v;
      s2 += v * v;
    }
    const double m = s / n.samples.size();
    const double var = s2 / n.samples.size() - m * m;
    CHECK(std::abs(var - a * a) < 0.05 * a * a);
  }
  CHECK(add_noise(zero, 0.1, 3).samples == add_noise(zero, 0.1, 3).samples);
  CHECK_THROWS_AS(add_noise(zero, -0.1, 3), std::invalid_argument);
}

TEST_CASE("positive clip counts") {
  CHECK(positive_count(100, 0.99) == 99);
  CHECK(positive_count(50, 0.5) == 25);
  CHECK(positive_count(200, 0.99) == 198);
  CHECK(positive_count(40, 0.5) == 20);
  CHECK_THROWS_AS(positive_count(10, 1.5), std::invalid_argument);
}

TEST_CASE("generate_dataset proportions, balance and reproducibility") {
  const DatasetConfig c = small_config();
  const fs::path a = fresh_dir("a"), b = fresh_dir("b");
  const Dataset d = generate_dataset(c, a);
  generate_dataset(c, b);

  CHECK(slurp(a / "metadata.tsv") == slurp(b / "metadata.tsv"));
  CHECK(slurp(a / "manifest.tsv") == slurp(b / "manifest.tsv"));
  CHECK(slurp(a / "audio" / "train_0007.wav") == slurp(b / "audio" / "train_0007.wav"));

  std::map<std::string, std::size_t> clips, positives;
  std::map<std::string, std::map<std::string, std::size_t>> per_class;
  std::set<std::string> names;
  for (const auto &clip : d.clips) {
    CHECK(names.insert(clip.file).second);
    ++clips[clip.split];
    CHECK(clip.events.size() <= 1);
    if (!clip.events.empty()) {
      ++positives[clip.split];
      ++per_class[clip.split][clip.events[0].label];
    }
    for (const auto &e : clip.events) {
      CHECK(e.onset >= 0);
      CHECK(e.offset > e.onset);
      CHECK(e.offset <= c.clip_s + 1e-12);
    }
    CHECK(fs::exists(a / "audio" / clip.file));
  }
  CHECK(clips["train"] == 100);
  CHECK(clips["val"] == 6);
  CHECK(clips["test"] == 50);
  CHECK(positives["train"] == 99);
  CHECK(positives["val"] == 3);
  CHECK(positives["test"] == 25);
  CHECK(per_class["train"]["babycry"] == 33);
  CHECK(per_class["train"]["glassbreak"] == 33);
  CHECK(per_class["train"]["gunshot"] == 33);
  CHECK(per_class["test"]["babycry"] == 9);
  CHECK(per_class["test"]["glassbreak"] == 8);
  CHECK(per_class["test"]["gunshot"] == 8);

  const Waveform w = adamd::audio::read_wav(a / "audio" / "test_0000.wav");
  CHECK(w.samples.size() == 32000);

  const Dataset back = read_dataset(a, d.class_names);
  REQUIRE(back.clips.size() == d.clips.size());
  for (std::size_t i = 0; i < d.clips.size(); ++i) {
    CHECK(back.clips[i].file == d.clips[i].file);
    CHECK(back.clips[i].split == d.clips[i].split);
    REQUIRE(back.clips[i].events.size() == d.clips[i].events.size());
    for (std::size_t j = 0; j < d.clips[i].events.size(); ++j) {
      CHECK(back.clips[i].events[j].onset == doctest::Approx(d.clips[i].events[j].onset).epsilon(1e-6));
      CHECK(back.clips[i].events[j].label == d.clips[i].events[j].label);
    }
  }

  DatasetConfig other = c;
  other.seed = 18;
  const fs::path o = fresh_dir("o");
  generate_dataset(other, o);
  CHECK(slurp(o / "metadata.tsv") != slurp(a / "metadata.tsv"));
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(o);
}

TEST_CASE("metadata marks background-only clips") {
  DatasetConfig c = small_config();
  c.train_clips = 4;
  c.train_presence = 0.5;
  c.val_clips = 0;
  c.test_clips = 0;
  const fs::path a = fresh_dir("none");
  const Dataset d = generate_dataset(c, a);
  std::ifstream in(a / "metadata.tsv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "file\tonset\toffset\tlabel");
  std::size_t none = 0, rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.size() > 7 && line.substr(line.size() - 7) == "\t\t\tnone") ++none;
  }
  CHECK(rows == 4);
  CHECK(none == 2);
  fs::remove_all(a);
}

TEST_CASE("noise variants and polyphonic mode") {
  DatasetConfig c = small_config();
  c.train_clips = 20;
  c.val_clips = 0;
  c.test_clips = 4;
  c.polyphonic = true;
  c.noise_levels = {0.05};
  const fs::path a = fresh_dir("poly");
  const Dataset d = generate_dataset(c, a);
  std::size_t doubles = 0;
  for (const auto &clip : d.clips) {
    if (clip.events.size() == 2) {
      ++doubles;
      CHECK(clip.events[0].label != clip.events[1].label);
    }
    CHECK(clip.events.size() <= 2);
  }
  CHECK(doubles > 0);
  const Waveform clean = adamd::audio::read_wav(a / "audio" / "test_0001.wav");
  const Waveform noisy = adamd::audio::read_wav(a / audio_dir_name(0.05) / "test_0001.wav");
  std::vector<double> diff(clean.samples.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.samples[i] - clean.samples[i];
  CHECK(rms(diff) == doctest::Approx(0.05).epsilon(0.05));
  CHECK(audio_dir_name(0) == "audio");
  CHECK(audio_dir_name(0.05) == "noise_0.05");
  fs::remove_all(a);
}

TEST_CASE("invalid dataset configs are rejected") {
  DatasetConfig c = small_config();
  c.train_presence = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.test_presence = -0.1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.classes.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.backgrounds = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.clip_s = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.ebr_db.clear();
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.classes.resize(1);
  c.polyphonic = true;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
