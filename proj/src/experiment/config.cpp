// SPDX-License-Identifier: Apache-2.0
#include "adamd/experiment/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace adamd::experiment {

namespace {

std::string trim(const std::string &s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string &key, const std::string &v) {
  double x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return x;
}

std::uint64_t parse_u64(const std::string &key, const std::string &v) {
  std::uint64_t x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return x;
}

bool parse_bool(const std::string &key, const std::string &v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string &v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::vector<double> parse_doubles(const std::string &key, const std::string &v) {
  std::vector<double> out;
  for (const auto &s : split_list(v)) out.push_back(parse_double(key, s));
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string &key, const std::string &v) {
  std::vector<std::size_t> out;
  for (const auto &s : split_list(v)) out.push_back(parse_u64(key, s));
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T> std::string join(const std::vector<T> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>)
      s += fmt(v[i]);
    else
      s += std::to_string(v[i]);
  }
  return s;
}

struct Key {
  const char *name;
  std::function<void(ExperimentConfig &, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

#define ADAMD_DOUBLE(NAME, FIELD)                                                                  \
  Key {                                                                                            \
    NAME, [](ExperimentConfig &c, const std::string &v) { c.FIELD = parse_double(NAME, v); },      \
        [](const ExperimentConfig &c) { return fmt(c.FIELD); }                                     \
  }
#define ADAMD_SIZE(NAME, FIELD)                                                                    \
  Key {                                                                                            \
    NAME, [](ExperimentConfig &c, const std::string &v) { c.FIELD = parse_u64(NAME, v); },         \
        [](const ExperimentConfig &c) { return std::to_string(c.FIELD); }                          \
  }
#define ADAMD_BOOL(NAME, FIELD)                                                                    \
  Key {                                                                                            \
    NAME, [](ExperimentConfig &c, const std::string &v) { c.FIELD = parse_bool(NAME, v); },        \
        [](const ExperimentConfig &c) { return std::string(c.FIELD ? "true" : "false"); }          \
  }

const std::vector<Key> &keys() {
  static const std::vector<Key> table = {
      ADAMD_SIZE("seed", seed),
      Key{"out", [](ExperimentConfig &c, const std::string &v) { c.out = v; },
          [](const ExperimentConfig &c) { return c.out.string(); }},
      Key{"data", [](ExperimentConfig &c, const std::string &v) { c.data = v; },
          [](const ExperimentConfig &c) { return c.data.string(); }},
      ADAMD_BOOL("feature_cache", feature_cache),

      ADAMD_DOUBLE("features.win_s", features.win_s),
      ADAMD_DOUBLE("features.hop_s", features.hop_s),
      ADAMD_SIZE("features.n_fft", features.n_fft),
      ADAMD_SIZE("features.n_mels", features.n_mels),
      ADAMD_SIZE("features.segment_len", features.segment_len),
      ADAMD_DOUBLE("features.segment_step_fraction", features.segment_step_fraction),

      ADAMD_SIZE("model.depth", model.hourglass.depth),
      ADAMD_SIZE("model.channels", model.hourglass.channels),
      ADAMD_SIZE("model.kernel", model.hourglass.kernel),
      Key{"model.hidden_dims",
          [](ExperimentConfig &c, const std::string &v) {
            c.model.branch.hidden_dims = parse_sizes("model.hidden_dims", v);
          },
          [](const ExperimentConfig &c) { return join(c.model.branch.hidden_dims); }},
      ADAMD_SIZE("model.gru_layers", model.branch.gru_layers),
      ADAMD_SIZE("model.branch_kernel", model.branch.conv_kernel),

      ADAMD_DOUBLE("train.lr", train.lr),
      ADAMD_SIZE("train.epochs", train.epochs),
      ADAMD_SIZE("train.batch", train.batch),
      ADAMD_DOUBLE("train.alpha", train.alpha),
      Key{"train.mode",
          [](ExperimentConfig &c, const std::string &v) {
            try {
              c.train.mode = train::weighting_mode_from_string(v);
            } catch (const std::invalid_argument &e) {
              throw ConfigError(std::string("train.mode: ") + e.what());
            }
          },
          [](const ExperimentConfig &c) { return train::to_string(c.train.mode); }},
      ADAMD_SIZE("train.scale", train.fixed_scale),
      ADAMD_DOUBLE("train.boost", train.boost),
      Key{"train.accuracy",
          [](ExperimentConfig &c, const std::string &v) {
            try {
              c.train.accuracy = train::accuracy_mode_from_string(v);
            } catch (const std::invalid_argument &e) {
              throw ConfigError(std::string("train.accuracy: ") + e.what());
            }
          },
          [](const ExperimentConfig &c) { return train::to_string(c.train.accuracy); }},
      ADAMD_DOUBLE("train.noise", train_noise),

      Key{"decision.thresholds",
          [](ExperimentConfig &c, const std::string &v) {
            c.decision.thresholds = parse_doubles("decision.thresholds", v);
          },
          [](const ExperimentConfig &c) { return join(c.decision.thresholds); }},
      ADAMD_SIZE("decision.filter_width", decision.filter_width),
      ADAMD_SIZE("decision.min_active_frames", decision.min_active_frames),
      Key{"decision.mode",
          [](ExperimentConfig &c, const std::string &v) {
            if (v == "monophonic")
              c.decision.mode = metrics::DecodeMode::monophonic;
            else if (v == "polyphonic")
              c.decision.mode = metrics::DecodeMode::polyphonic;
            else
              throw ConfigError("decision.mode: expected monophonic or polyphonic, got '" + v + "'");
          },
          [](const ExperimentConfig &c) {
            return std::string(c.decision.mode == metrics::DecodeMode::monophonic ? "monophonic"
                                                                                  : "polyphonic");
          }},
      ADAMD_DOUBLE("decision.collar_s", collar_s),
      ADAMD_DOUBLE("eval.noise", eval_noise),
      ADAMD_DOUBLE("sweep.first", sweep_first),
      ADAMD_DOUBLE("sweep.last", sweep_last),
      ADAMD_DOUBLE("sweep.step", sweep_step),

      Key{"dataset.classes",
          [](ExperimentConfig &c, const std::string &v) {
            std::vector<synth::ClassSpec> cls;
            try {
              for (const auto &name : split_list(v)) cls.push_back(synth::builtin_class(name));
            } catch (const std::invalid_argument &e) {
              throw ConfigError(std::string("dataset.classes: ") + e.what());
            }
            c.dataset.classes = std::move(cls);
          },
          [](const ExperimentConfig &c) {
            std::string s;
            for (std::size_t i = 0; i < c.dataset.classes.size(); ++i)
              s += (i ? "," : "") + c.dataset.classes[i].name;
            return s;
          }},
      ADAMD_SIZE("dataset.seed", dataset.seed),
      ADAMD_SIZE("dataset.train_clips", dataset.train_clips),
      ADAMD_SIZE("dataset.val_clips", dataset.val_clips),
      ADAMD_SIZE("dataset.test_clips", dataset.test_clips),
      ADAMD_DOUBLE("dataset.train_presence", dataset.train_presence),
      ADAMD_DOUBLE("dataset.val_presence", dataset.val_presence),
      ADAMD_DOUBLE("dataset.test_presence", dataset.test_presence),
      ADAMD_DOUBLE("dataset.clip_s", dataset.clip_s),
      Key{"dataset.sample_rate",
          [](ExperimentConfig &c, const std::string &v) {
            const auto x = parse_u64("dataset.sample_rate", v);
            if (x == 0 || x > 384000) throw ConfigError("dataset.sample_rate out of range");
            c.dataset.sample_rate = static_cast<int>(x);
          },
          [](const ExperimentConfig &c) { return std::to_string(c.dataset.sample_rate); }},
      Key{"dataset.ebr_db",
          [](ExperimentConfig &c, const std::string &v) {
            c.dataset.ebr_db = parse_doubles("dataset.ebr_db", v);
          },
          [](const ExperimentConfig &c) { return join(c.dataset.ebr_db); }},
      ADAMD_SIZE("dataset.sources_per_class", dataset.sources_per_class),
      ADAMD_SIZE("dataset.backgrounds", dataset.backgrounds),
      ADAMD_DOUBLE("dataset.background_level", dataset.background_level),
      ADAMD_BOOL("dataset.polyphonic", dataset.polyphonic),
      Key{"dataset.noise_levels",
          [](ExperimentConfig &c, const std::string &v) {
            c.dataset.noise_levels = parse_doubles("dataset.noise_levels", v);
          },
          [](const ExperimentConfig &c) { return join(c.dataset.noise_levels); }},
  };
  return table;
}

#undef ADAMD_DOUBLE
#undef ADAMD_SIZE
#undef ADAMD_BOOL

} // namespace

ExperimentConfig::ExperimentConfig() {
  features.n_mels = 64;
  features.segment_len = 256;
  model.hourglass.channels = 32;
  train.epochs = 30;
  train.batch = 8;
  finalize();
}

void ExperimentConfig::set(const std::string &key, const std::string &value) {
  for (const Key &k : keys())
    if (key == k.name) {
      k.set(*this, value);
      return;
    }
  throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::string> ExperimentConfig::class_names() const {
  std::vector<std::string> out;
  for (const auto &c : dataset.classes) out.push_back(c.name);
  return out;
}

model::ModelConfig ExperimentConfig::resolved_model() const {
  model::ModelConfig m = model;
  m.hourglass.frames = features.segment_len;
  m.hourglass.mels = features.n_mels;
  m.branch.classes = dataset.classes.size();
  m.branch.input_dims.clear();
  return m;
}

train::TrainConfig ExperimentConfig::resolved_train() const {
  train::TrainConfig t = train;
  t.seed = seed;
  return t;
}

void ExperimentConfig::finalize() {
  try {
    features.validate(dataset.sample_rate);
    dataset.validate();
    const auto m = resolved_model();
    m.validate();
    resolved_train().validate(m.scales());
    decision.validate();
    if (decision.thresholds.size() != 1 && decision.thresholds.size() != dataset.classes.size())
      throw ConfigError("decision.thresholds needs one value or one per class");
    if (!(collar_s >= 0)) throw ConfigError("decision.collar_s must be >= 0");
    metrics::threshold_grid(sweep_first, sweep_last, sweep_step);
    auto check_noise = [&](double a, const char *key) {
      if (a < 0) throw ConfigError(std::string(key) + " must be >= 0");
      if (a > 0 && std::find(dataset.noise_levels.begin(), dataset.noise_levels.end(), a) ==
                       dataset.noise_levels.end())
        throw ConfigError(std::string(key) + "=" + fmt(a) + " is not in dataset.noise_levels");
    };
    check_noise(train_noise, "train.noise");
    check_noise(eval_noise, "eval.noise");
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw ConfigError(e.what());
  }
}

std::string ExperimentConfig::to_text() const {
  std::string s;
  for (const Key &k : keys()) s += std::string(k.name) + " = " + k.get(*this) + "\n";
  return s;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key &k : keys()) out.push_back(k.name);
  return out;
}

ExperimentConfig parse_config(const std::string &text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (!seen.insert(key).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    try {
      base.set(key, value);
    } catch (const ConfigError &e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  base.finalize();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path &path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_config(const std::filesystem::path &path, const ExperimentConfig &c) {
  std::ofstream out(path, std::ios::binary);
  out << c.to_text();
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

} // namespace adamd::experiment
