// SPDX-License-Identifier: Apache-2.0
#include "adamd/experiment/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "adamd/audio/wav.hpp"

namespace adamd::experiment {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

std::string cache_key(const ExperimentConfig &c) {
  std::ostringstream s;
  s << c.features.win_s << ' ' << c.features.hop_s << ' ' << c.features.n_fft << ' '
    << c.features.n_mels << ' ' << c.dataset.sample_rate;
  std::uint64_t h = 1469598103934665603ull; // FNV-1a
  for (unsigned char ch : s.str()) h = (h ^ ch) * 1099511628211ull;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void ensure_dir(const fs::path &p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p))
    throw std::runtime_error("cannot create directory " + p.string() + ": " + ec.message());
}

} // namespace

synth::Dataset run_synth(const ExperimentConfig &config) {
  ensure_dir(config.data);
  synth::Dataset d = synth::generate_dataset(config.dataset, config.data);
  write_config(config.data / "config.resolved", config);
  return d;
}

std::vector<LoadedFile> load_split(const ExperimentConfig &config, const std::string &split,
                                   double noise) {
  const auto names = config.class_names();
  const synth::Dataset d = synth::read_dataset(config.data, names);
  const std::string audio_dir = synth::audio_dir_name(noise);
  const fs::path cache_dir = config.data / "cache" / cache_key(config) / audio_dir;
  if (config.feature_cache) ensure_dir(cache_dir);

  std::vector<LoadedFile> out;
  for (const auto &clip : d.clips) {
    if (clip.split != split) continue;
    LoadedFile f;
    f.name = clip.file;
    const fs::path cached = cache_dir / (clip.file + ".adfc");
    if (config.feature_cache && fs::exists(cached)) {
      f.fbank = audio::read_feature_cache(cached);
    } else {
      const audio::Waveform w = audio::read_wav(config.data / audio_dir / clip.file);
      if (w.sample_rate != config.dataset.sample_rate)
        throw std::runtime_error(clip.file + ": sample rate " + std::to_string(w.sample_rate) +
                                 " differs from the configured " +
                                 std::to_string(config.dataset.sample_rate));
      f.fbank = audio::fbank(w, config.features);
      if (config.feature_cache) audio::write_feature_cache(cached, f.fbank);
    }
    if (f.fbank.rows() == 0) throw std::runtime_error(clip.file + " is shorter than one frame");
    std::vector<audio::LabeledSpan> spans;
    for (const auto &a : clip.events) {
      const auto it = std::find(names.begin(), names.end(), a.label);
      const auto c = static_cast<std::size_t>(it - names.begin());
      spans.push_back({a.onset, a.offset, c});
      f.reference.push_back({c, a.onset, a.offset, 1.0});
    }
    f.labels = audio::frame_labels(static_cast<std::size_t>(f.fbank.rows()), spans, names.size(),
                                   config.features);
    out.push_back(std::move(f));
  }
  if (out.empty()) throw std::runtime_error("split '" + split + "' has no clips in " +
                                            config.data.string());
  return out;
}

std::vector<train::Sample> training_samples(const std::vector<LoadedFile> &files,
                                            const audio::FeatureParams &p) {
  std::vector<train::Sample> out;
  for (const auto &f : files)
    for (const auto &seg : audio::segment(f.fbank, f.labels, p, audio::SegmentMode::train))
      out.push_back(train::make_sample(audio::normalize(seg)));
  return out;
}

std::vector<train::EvalFile> eval_files(const std::vector<LoadedFile> &files) {
  std::vector<train::EvalFile> out;
  for (const auto &f : files) {
    audio::FeatureMatrix m{f.fbank, f.labels, 0.0, 0.0, static_cast<std::size_t>(f.fbank.rows())};
    out.push_back({f.name, audio::normalize(m).values, f.labels});
  }
  return out;
}

TrainOutput run_train(const ExperimentConfig &config, const train::EpochCallback &on_epoch) {
  ensure_dir(config.out);
  write_config(config.out / "config.resolved", config);
  const auto train_files = load_split(config, "train", config.train_noise);
  const auto val_files = load_split(config, "val", config.train_noise);
  const auto samples = training_samples(train_files, config.features);
  const auto val = eval_files(val_files);

  model::AdamdModel m(config.resolved_model(), config.seed);
  TrainOutput out;
  out.result = train::train(m, samples, val, config.resolved_train(), on_epoch);
  out.checkpoint = config.out / "checkpoint.admd";
  out.history = config.out / "history.csv";
  model::save_checkpoint(out.checkpoint, m, {out.result.fusion.w, out.result.fusion.v});
  train::write_history_csv(out.history, out.result.history);
  return out;
}

EvalOutput evaluate_model(const model::AdamdModel &m, std::span<const double> fusion_weights,
                          const std::vector<LoadedFile> &files, const ExperimentConfig &config,
                          std::span<const double> thresholds) {
  const std::size_t K = m.config().scales(), C = m.config().branch.classes;
  EvalOutput out;
  out.thresholds.assign(thresholds.begin(), thresholds.end());
  out.fusion_weights.assign(fusion_weights.begin(), fusion_weights.end());
  if (out.fusion_weights.empty()) out.fusion_weights = train::uniform_fusion(K).w;
  metrics::DecisionConfig decision = config.decision;
  decision.thresholds = out.thresholds;
  decision.validate();
  if (decision.thresholds.size() != 1 && decision.thresholds.size() != C)
    throw std::invalid_argument("need one threshold or one per class");

  const auto prepared = eval_files(files);
  std::vector<std::vector<metrics::FileEvents>> per_scale(K);
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto preds = train::predict(m, prepared[i].features);
    for (std::size_t k = 0; k < K; ++k)
      per_scale[k].push_back(
          {files[i].name, files[i].reference, metrics::decode(preds[k], decision, config.features.hop_s)});
    const RowMatrix fused = train::fuse(preds, out.fusion_weights);
    out.fused_events.push_back(
        {files[i].name, files[i].reference, metrics::decode(fused, decision, config.features.hop_s)});
  }
  for (std::size_t k = 0; k < K; ++k) {
    out.names.push_back("scale_" + std::to_string(k + 1));
    out.reports.push_back(metrics::evaluate(per_scale[k], config.collar_s));
  }
  out.names.push_back("fused");
  out.reports.push_back(metrics::evaluate(out.fused_events, config.collar_s));
  for (std::size_t c = 0; c < C; ++c)
    out.fused_per_class.push_back(metrics::evaluate(out.fused_events, config.collar_s, c));
  out.breakdown = metrics::error_breakdown(out.fused_events, config.collar_s);
  return out;
}

namespace {

std::string report_fields(const metrics::MetricsReport &r) {
  return std::to_string(r.tp) + ',' + std::to_string(r.fp) + ',' + std::to_string(r.fn) + ',' +
         fmt(r.precision) + ',' + fmt(r.recall) + ',' + fmt(r.f1) + ',' +
         (r.error_rate ? fmt(*r.error_rate) : std::string());
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

model::LoadedCheckpoint open_checkpoint(const ExperimentConfig &config, const fs::path &path) {
  auto ck = model::load_checkpoint(path);
  if (!(ck.model.config() == config.resolved_model()))
    throw ConfigError(path.string() + ": checkpoint was trained with a different model config");
  return ck;
}

} // namespace

std::string metrics_csv(const EvalOutput &e) {
  std::string s = "name,tp,fp,fn,precision,recall,f1,er\n";
  for (std::size_t i = 0; i < e.names.size(); ++i)
    s += e.names[i] + ',' + report_fields(e.reports[i]) + '\n';
  return s;
}

EvalOutput run_eval(const ExperimentConfig &config, const fs::path &checkpoint,
                    const std::string &split, const std::optional<fs::path> &threshold_file) {
  const auto ck = open_checkpoint(config, checkpoint);
  const auto names = config.class_names();
  std::vector<double> thresholds =
      threshold_file ? read_thresholds(*threshold_file, names) : config.decision.thresholds;
  const auto files = load_split(config, split, config.eval_noise);
  EvalOutput e = evaluate_model(ck.model, ck.extras.fusion_weights, files, config, thresholds);

  ensure_dir(config.out);
  write_config(config.out / "config.resolved", config);
  write_text(config.out / "metrics.csv", metrics_csv(e));
  std::string cls = "class,threshold,tp,fp,fn,precision,recall,f1,er\n";
  for (std::size_t c = 0; c < names.size(); ++c)
    cls += names[c] + ',' + fmt(thresholds.size() == 1 ? thresholds[0] : thresholds[c]) + ',' +
           report_fields(e.fused_per_class[c]) + '\n';
  write_text(config.out / "class_metrics.csv", cls);
  std::string shift = "bin_lower,bin_upper,count\n";
  for (std::size_t i = 0; i < metrics::ErrorBreakdown::kBins; ++i)
    shift += fmt(std::round(metrics::ErrorBreakdown::bin_lower(i) * 1e9) / 1e9) + ',' +
             fmt(std::round(metrics::ErrorBreakdown::bin_lower(i + 1) * 1e9) / 1e9) + ',' +
             std::to_string(e.breakdown.histogram[i]) + '\n';
  write_text(config.out / "onset_shift.csv", shift);
  write_text(config.out / "errors.csv",
             "type,count\nmissing," + std::to_string(e.breakdown.missing) + "\nfalse_alarm," +
                 std::to_string(e.breakdown.false_alarm) + "\noutside_collar," +
                 std::to_string(e.breakdown.outside_collar) + '\n');
  metrics::write_events_tsv(config.out / "detections.tsv", e.fused_events, names, true);
  return e;
}

SweepOutput run_sweep(const ExperimentConfig &config, const fs::path &checkpoint,
                      const std::string &split) {
  const auto ck = open_checkpoint(config, checkpoint);
  const auto names = config.class_names();
  const auto files = load_split(config, split, config.eval_noise);
  const auto prepared = eval_files(files);
  std::vector<double> w = ck.extras.fusion_weights;
  if (w.empty()) w = train::uniform_fusion(ck.model.config().scales()).w;
  std::vector<metrics::SweepInput> inputs;
  for (std::size_t i = 0; i < files.size(); ++i)
    inputs.push_back({train::fuse(train::predict(ck.model, prepared[i].features), w),
                      files[i].reference});
  const auto grid = metrics::threshold_grid(config.sweep_first, config.sweep_last, config.sweep_step);
  SweepOutput out;
  out.curves = metrics::sweep_threshold(inputs, names.size(), grid, config.decision,
                                        config.features.hop_s, config.collar_s);
  std::string csv = "class,threshold,tp,fp,fn,precision,recall,f1,er,best\n";
  for (const auto &curve : out.curves) {
    for (std::size_t i = 0; i < curve.thresholds.size(); ++i)
      csv += names[curve.class_index] + ',' + fmt(curve.thresholds[i]) + ',' +
             report_fields(curve.reports[i]) + ',' + (i == curve.best ? "1" : "0") + '\n';
    out.best.push_back(curve.thresholds[curve.best]);
  }
  ensure_dir(config.out);
  write_config(config.out / "config.resolved", config);
  write_text(config.out / "sweep.csv", csv);
  write_thresholds(config.out / "thresholds.tsv", names, out.best);
  return out;
}

void write_thresholds(const fs::path &path, const std::vector<std::string> &classes,
                      std::span<const double> thresholds) {
  if (thresholds.size() != classes.size())
    throw std::invalid_argument("one threshold per class is required");
  std::string s = "class\tthreshold\n";
  for (std::size_t c = 0; c < classes.size(); ++c) s += classes[c] + '\t' + fmt(thresholds[c]) + '\n';
  write_text(path, s);
}

std::vector<double> read_thresholds(const fs::path &path, const std::vector<std::string> &classes) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open threshold file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "class\tthreshold")
    throw std::runtime_error(path.string() + ": expected header 'class<TAB>threshold'");
  std::map<std::string, double> found;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw std::runtime_error(path.string() + ": bad line '" + line + "'");
    const std::string name = line.substr(0, tab), value = line.substr(tab + 1);
    double x = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), x);
    if (ec != std::errc() || p != value.data() + value.size() || !(x > 0 && x < 1))
      throw std::runtime_error(path.string() + ": bad threshold for " + name);
    found[name] = x;
  }
  std::vector<double> out;
  for (const auto &c : classes) {
    const auto it = found.find(c);
    if (it == found.end()) throw std::runtime_error(path.string() + ": no threshold for " + c);
    out.push_back(it->second);
  }
  return out;
}

} // namespace adamd::experiment
