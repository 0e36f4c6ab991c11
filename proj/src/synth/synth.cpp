// SPDX-License-Identifier: Apache-2.0
#include "adamd/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace adamd::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kFade = 0.005;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word
  std::uint64_t z = a * 0x9E3779B97F4A7C15ull + b + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform(std::mt19937_64 &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void apply_fades(std::vector<double> &x, int sr) {
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(kFade * sr), x.size() / 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = static_cast<double>(i) / n;
    x[i] *= g;
    x[x.size() - 1 - i] *= g;
  }
}

void normalize_rms(std::vector<double> &x) {
  const double r = rms(x);
  if (r > 0)
    for (double &v : x) v /= r;
}

// harmonic amplitudes fall as 1/h
void harmonic_tone(std::vector<double> &out, const std::vector<double> &f0_track, int sr,
                   std::size_t harmonics, double phase0) {
  const double nyquist = 0.5 * sr;
  double phase = phase0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    double s = 0.0;
    for (std::size_t h = 1; h <= harmonics; ++h) {
      if (f0_track[i] * h >= nyquist) break;
      s += std::sin(phase * h) / h;
    }
    out[i] = s;
    phase += kTwoPi * f0_track[i] / sr;
  }
}

// RBJ band-pass (constant 0 dB peak gain)
void bandpass(std::vector<double> &x, double fc, double q, int sr) {
  const double w0 = kTwoPi * fc / sr;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0, b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (double &v : x) {
    const double y = b0 * v + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = v;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

std::string fmt_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

} // namespace

EventArchetype archetype(int id) {
  switch (id) {
  case 1: return {1, Tail::non_vanishing, Consistency::inconsistent};
  case 2: return {2, Tail::vanishing, Consistency::consistent};
  case 3: return {3, Tail::vanishing, Consistency::inconsistent};
  case 4: return {4, Tail::non_vanishing, Consistency::consistent};
  default: throw std::invalid_argument("unknown event archetype " + std::to_string(id));
  }
}

double rms(const std::vector<double> &x, std::size_t begin, std::size_t end) {
  end = std::min(end, x.size());
  if (begin >= end) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += x[i] * x[i];
  return std::sqrt(s / (end - begin));
}

Waveform synth_event(const ClassParams &p, double duration_s, int sample_rate,
                     std::uint64_t seed) {
  const EventArchetype a = archetype(p.archetype);
  if (!(duration_s > 0)) throw std::invalid_argument("event duration must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  if (n == 0) throw std::invalid_argument("event shorter than one sample");

  std::mt19937_64 rng(seed);
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.assign(n, 0.0);
  const double dt = 1.0 / sample_rate;

  if (a.id == 3) {
    std::normal_distribution<double> g;
    for (double &v : w.samples) v = g(rng);
    bandpass(w.samples, p.band_center, p.band_q, sample_rate);
  } else {
    std::vector<double> f0(n, p.f0);
    if (a.id == 1) {
      // warble plus a new note roughly every 150 ms
      const double vib_phase = uniform(rng, 0, kTwoPi);
      const std::size_t note = std::max<std::size_t>(1, static_cast<std::size_t>(0.15 * sample_rate));
      double step = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (i % note == 0) step = std::exp2(uniform(rng, -0.35, 0.35));
        f0[i] = p.f0 * step *
                (1.0 + p.vibrato_depth * std::sin(kTwoPi * p.vibrato_rate * i * dt + vib_phase));
      }
    }
    harmonic_tone(w.samples, f0, sample_rate, p.harmonics, uniform(rng, 0, kTwoPi));
  }

  if (a.tail == Tail::vanishing)
    for (std::size_t i = 0; i < n; ++i) w.samples[i] *= std::exp(-p.decay * i * dt);

  apply_fades(w.samples, sample_rate);
  normalize_rms(w.samples);
  return w;
}

Waveform colored_noise(double duration_s, int sample_rate, double beta, double level,
                       std::uint64_t seed) {
  if (!(duration_s > 0) || sample_rate <= 0) throw std::invalid_argument("bad noise length");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> white(n);
  for (double &v : white) v = g(rng);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, white);
  spec[0] = 0.0;
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const std::size_t f = std::min(k, n - k);
    spec[k] *= std::pow(static_cast<double>(f), -0.5 * beta);
  }
  Waveform w;
  w.sample_rate = sample_rate;
  fft.inv(w.samples, spec);
  w.samples.resize(n);
  normalize_rms(w.samples);
  for (double &v : w.samples) v *= level;
  return w;
}

MixResult mix(const Waveform &background, const Waveform &event, double ebr_db, double onset_s,
              const std::string &label) {
  if (background.sample_rate != event.sample_rate)
    throw std::invalid_argument("sample rate mismatch between background and event");
  if (!std::isfinite(ebr_db)) throw std::invalid_argument("EBR must be finite");
  if (!(onset_s >= 0)) throw std::invalid_argument("onset must be non-negative");
  const auto start = static_cast<std::size_t>(std::llround(onset_s * background.sample_rate));
  const std::size_t len = event.samples.size();
  if (len == 0) {
    MixResult r;
    r.audio = background;
    return r;
  }
  if (start + len > background.samples.size())
    throw std::invalid_argument("event does not fit inside the background");

  const double bg = rms(background.samples, start, start + len);
  if (bg < 1e-9) throw std::invalid_argument("background is silent over the event span");
  const double ev = rms(event.samples);
  if (ev <= 0) throw std::invalid_argument("event is silent");

  MixResult r;
  r.gain = std::pow(10.0, ebr_db / 20.0) * bg / ev;
  r.audio = background;
  for (std::size_t i = 0; i < len; ++i) r.audio.samples[start + i] += r.gain * event.samples[i];

  double peak = 0.0;
  for (double v : r.audio.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.99) {
    r.normalization = 0.99 / peak;
    for (double &v : r.audio.samples) v *= r.normalization;
  }
  const double sr = background.sample_rate;
  r.annotation = Annotation{"", start / sr, (start + len) / sr, label};
  return r;
}

Waveform add_noise(const Waveform &w, double amplification, std::uint64_t seed) {
  if (!(amplification >= 0)) throw std::invalid_argument("noise amplification must be >= 0");
  Waveform out = w;
  if (amplification == 0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  for (double &v : out.samples) v += amplification * g(rng);
  return out;
}

std::vector<ClassSpec> default_classes() {
  ClassParams cry;
  cry.archetype = 1;
  cry.f0 = 400.0;
  cry.harmonics = 6;
  cry.vibrato_rate = 6.0;
  cry.vibrato_depth = 0.06;
  cry.min_duration = 0.6;
  cry.max_duration = 1.6;

  ClassParams glass;
  glass.archetype = 2;
  glass.f0 = 2000.0;
  glass.harmonics = 3;
  glass.decay = 6.0;
  glass.min_duration = 0.4;
  glass.max_duration = 1.0;

  ClassParams shot;
  shot.archetype = 3;
  shot.band_center = 1000.0;
  shot.band_q = 0.8;
  shot.decay = 12.0;
  shot.min_duration = 0.3;
  shot.max_duration = 0.8;

  return {{"babycry", cry}, {"glassbreak", glass}, {"gunshot", shot}};
}

std::vector<ClassSpec> builtin_classes() {
  auto out = default_classes();
  ClassParams machine;
  machine.archetype = 4;
  machine.f0 = 150.0;
  machine.harmonics = 8;
  machine.min_duration = 0.8;
  machine.max_duration = 2.0;
  out.push_back({"machine", machine});
  return out;
}

ClassSpec builtin_class(const std::string &name) {
  for (auto &c : builtin_classes())
    if (c.name == name) return c;
  throw std::invalid_argument("unknown event class '" + name +
                              "' (babycry, glassbreak, gunshot, machine)");
}

void DatasetConfig::validate() const {
  if (classes.empty()) throw std::invalid_argument("at least one event class is required");
  for (const auto &c : classes) {
    archetype(c.params.archetype);
    if (c.name.empty() || c.name == "none" ||
        c.name.find_first_of("\t\n ") != std::string::npos)
      throw std::invalid_argument("invalid class name '" + c.name + "'");
    if (!(c.params.min_duration > 0) || c.params.max_duration < c.params.min_duration)
      throw std::invalid_argument("invalid duration range for class " + c.name);
    if (c.params.max_duration > clip_s)
      throw std::invalid_argument("events of class " + c.name + " may exceed the clip length");
  }
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = i + 1; j < classes.size(); ++j)
      if (classes[i].name == classes[j].name)
        throw std::invalid_argument("duplicate class name " + classes[i].name);
  for (double p : {train_presence, val_presence, test_presence})
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("presence proportion outside [0, 1]");
  if (!(clip_s > 0) || sample_rate <= 0) throw std::invalid_argument("invalid clip format");
  if (ebr_db.empty()) throw std::invalid_argument("EBR set is empty");
  for (double e : ebr_db)
    if (!std::isfinite(e)) throw std::invalid_argument("EBR values must be finite");
  if (sources_per_class == 0 || backgrounds == 0)
    throw std::invalid_argument("need at least one background and one source per class");
  if (!(background_level > 0)) throw std::invalid_argument("background level must be positive");
  if (polyphonic && classes.size() < 2)
    throw std::invalid_argument("polyphonic mode needs at least two classes");
  for (double a : noise_levels)
    if (!(a > 0)) throw std::invalid_argument("noise levels must be positive");
}

std::size_t positive_count(std::size_t clips, double presence) {
  if (!(presence >= 0 && presence <= 1)) throw std::invalid_argument("presence outside [0, 1]");
  return static_cast<std::size_t>(std::llround(presence * static_cast<double>(clips)));
}

std::string audio_dir_name(double noise_level) {
  if (noise_level == 0) return "audio";
  char buf[48];
  std::snprintf(buf, sizeof buf, "noise_%g", noise_level);
  return buf;
}

namespace {

struct Source {
  std::size_t class_index;
  ClassParams params;
  std::uint64_t seed;
};

std::vector<Source> make_sources(const DatasetConfig &c, std::uint64_t split_seed) {
  std::vector<Source> out;
  for (std::size_t k = 0; k < c.classes.size(); ++k) {
    for (std::size_t s = 0; s < c.sources_per_class; ++s) {
      std::mt19937_64 rng(mix_seed(split_seed, 1000 * k + s + 1));
      ClassParams p = c.classes[k].params;
      p.f0 *= std::exp2(uniform(rng, -0.25, 0.25));
      p.decay *= uniform(rng, 0.8, 1.25);
      p.band_center *= std::exp2(uniform(rng, -0.3, 0.3));
      p.vibrato_rate *= uniform(rng, 0.8, 1.25);
      out.push_back({k, p, rng()});
    }
  }
  return out;
}

std::vector<double> split_backgrounds_beta(std::size_t count) {
  std::vector<double> b(count);
  for (std::size_t i = 0; i < count; ++i) b[i] = 0.5 + 1.5 * static_cast<double>(i % 4) / 3.0;
  return b;
}

} // namespace

Dataset generate_dataset(const DatasetConfig &c, const std::filesystem::path &root) {
  c.validate();
  namespace fs = std::filesystem;
  fs::create_directories(root / audio_dir_name(0));
  for (double a : c.noise_levels) fs::create_directories(root / audio_dir_name(a));

  Dataset d;
  for (const auto &k : c.classes) d.class_names.push_back(k.name);

  struct SplitDef {
    const char *name;
    std::size_t clips;
    double presence;
  };
  const SplitDef splits[] = {{"train", c.train_clips, c.train_presence},
                             {"val", c.val_clips, c.val_presence},
                             {"test", c.test_clips, c.test_presence}};

  const std::size_t clip_len = static_cast<std::size_t>(std::llround(c.clip_s * c.sample_rate));
  for (std::size_t si = 0; si < 3; ++si) {
    const SplitDef &sp = splits[si];
    const std::uint64_t split_seed = mix_seed(c.seed, si + 1);
    const auto sources = make_sources(c, split_seed);
    const auto betas = split_backgrounds_beta(c.backgrounds);
    const std::size_t positives = positive_count(sp.clips, sp.presence);

    std::mt19937_64 rng(mix_seed(split_seed, 0xC11F));
    std::vector<std::size_t> order(sp.clips);
    for (std::size_t i = 0; i < sp.clips; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    // slot i of the shuffled order gets positive index i; classes round-robin
    std::vector<long> class_of(sp.clips, -1);
    for (std::size_t i = 0; i < positives; ++i)
      class_of[order[i]] = static_cast<long>(i % c.classes.size());

    for (std::size_t i = 0; i < sp.clips; ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04zu.wav", sp.name, i);
      std::mt19937_64 crng(mix_seed(split_seed, 0x10000 + i));
      const std::size_t bg_id = crng() % c.backgrounds;
      Waveform audio = colored_noise(c.clip_s, c.sample_rate, betas[bg_id], c.background_level,
                                     mix_seed(split_seed, 0x20000 + bg_id * 7919 + i));
      audio.samples.resize(clip_len, 0.0);

      ClipRecord rec{name, sp.name, {}};
      std::vector<std::size_t> event_classes;
      if (class_of[i] >= 0) {
        event_classes.push_back(static_cast<std::size_t>(class_of[i]));
        if (c.polyphonic && uniform(crng, 0, 1) < 0.5) {
          std::size_t other = crng() % (c.classes.size() - 1);
          if (other >= event_classes[0]) ++other;
          event_classes.push_back(other);
        }
      }
      for (std::size_t k : event_classes) {
        const std::size_t src_idx = k * c.sources_per_class + crng() % c.sources_per_class;
        const Source &src = sources[src_idx];
        const double dur = uniform(crng, src.params.min_duration, src.params.max_duration);
        const double ebr = c.ebr_db[crng() % c.ebr_db.size()];
        const Waveform ev = synth_event(src.params, dur, c.sample_rate, mix_seed(src.seed, i));
        const double latest = static_cast<double>(clip_len - ev.samples.size()) / c.sample_rate;
        const double onset = uniform(crng, 0.0, std::max(latest, 0.0));
        MixResult m = mix(audio, ev, ebr, onset, c.classes[k].name);
        audio = std::move(m.audio);
        m.annotation->file = name;
        rec.events.push_back(*m.annotation);
      }
      std::sort(rec.events.begin(), rec.events.end(),
                [](const Annotation &a, const Annotation &b) { return a.onset < b.onset; });

      audio::write_wav(root / audio_dir_name(0) / name, audio);
      for (std::size_t ni = 0; ni < c.noise_levels.size(); ++ni) {
        const double a = c.noise_levels[ni];
        audio::write_wav(root / audio_dir_name(a) / name,
                         add_noise(audio, a, mix_seed(split_seed, 0x30000 + ni * 100003 + i)));
      }
      d.clips.push_back(std::move(rec));
    }
  }
  write_metadata(root / "metadata.tsv", d);
  write_manifest(root / "manifest.tsv", d);
  return d;
}

void write_metadata(const std::filesystem::path &path, const Dataset &d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "file\tonset\toffset\tlabel\n";
  for (const auto &clip : d.clips) {
    if (clip.events.empty()) out << clip.file << "\t\t\tnone\n";
    for (const auto &e : clip.events)
      out << clip.file << '\t' << fmt_time(e.onset) << '\t' << fmt_time(e.offset) << '\t'
          << e.label << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_manifest(const std::filesystem::path &path, const Dataset &d) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "file\tsplit\n";
  for (const auto &clip : d.clips) out << clip.file << '\t' << clip.split << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

namespace {

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const std::size_t t = line.find('\t', start);
    f.push_back(line.substr(start, t - start));
    if (t == std::string::npos) break;
    start = t + 1;
  }
  return f;
}

std::vector<std::vector<std::string>> read_tsv(const std::filesystem::path &path,
                                               const std::vector<std::string> &header) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_tabs(line) != header)
    throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != header.size())
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " fields");
    rows.push_back(std::move(f));
  }
  return rows;
}

double parse_time(const std::string &s, const std::filesystem::path &path) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used != s.size() || s.empty() || !std::isfinite(v))
    throw std::runtime_error(path.string() + ": bad time value '" + s + "'");
  return v;
}

} // namespace

Dataset read_dataset(const std::filesystem::path &root,
                     const std::vector<std::string> &class_names) {
  Dataset d;
  d.class_names = class_names;
  const auto manifest = read_tsv(root / "manifest.tsv", {"file", "split"});
  std::map<std::string, std::size_t> index;
  for (const auto &r : manifest) {
    if (index.count(r[0])) throw std::runtime_error("duplicate file in manifest: " + r[0]);
    index[r[0]] = d.clips.size();
    d.clips.push_back({r[0], r[1], {}});
  }
  const auto meta = read_tsv(root / "metadata.tsv", {"file", "onset", "offset", "label"});
  for (const auto &r : meta) {
    const auto it = index.find(r[0]);
    if (it == index.end()) throw std::runtime_error("metadata file not in manifest: " + r[0]);
    if (r[3] == "none") continue;
    Annotation a{r[0], parse_time(r[1], root / "metadata.tsv"),
                 parse_time(r[2], root / "metadata.tsv"), r[3]};
    if (!(a.offset > a.onset)) throw std::runtime_error("annotation with offset <= onset: " + r[0]);
    if (std::find(d.class_names.begin(), d.class_names.end(), a.label) == d.class_names.end()) {
      if (!class_names.empty()) throw std::runtime_error("unknown class label " + a.label);
      d.class_names.push_back(a.label);
    }
    d.clips[it->second].events.push_back(std::move(a));
  }
  return d;
}

} // namespace adamd::synth
