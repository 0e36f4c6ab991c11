// SPDX-License-Identifier: Apache-2.0
#include "adamd/model/checkpoint.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace adamd::model {

namespace {

std::string join(const std::vector<std::size_t> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<std::size_t> split_sizes(const std::string &s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(std::stoul(item));
  return out;
}

} // namespace

std::string to_text(const ModelConfig &c) {
  std::ostringstream os;
  os << "depth=" << c.hourglass.depth << '\n'
     << "channels=" << c.hourglass.channels << '\n'
     << "kernel=" << c.hourglass.kernel << '\n'
     << "frames=" << c.hourglass.frames << '\n'
     << "mels=" << c.hourglass.mels << '\n'
     << "input_dims=" << join(c.branch.input_dims) << '\n'
     << "hidden_dims=" << join(c.branch.hidden_dims) << '\n'
     << "gru_layers=" << c.branch.gru_layers << '\n'
     << "classes=" << c.branch.classes << '\n'
     << "conv_kernel=" << c.branch.conv_kernel << '\n';
  return os.str();
}

ModelConfig model_config_from_text(const std::string &text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("bad config line: " + line);
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char *key) -> const std::string & {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("config missing key ") + key);
    return it->second;
  };
  try {
    ModelConfig c;
    c.hourglass.depth = std::stoul(get("depth"));
    c.hourglass.channels = std::stoul(get("channels"));
    c.hourglass.kernel = std::stoul(get("kernel"));
    c.hourglass.frames = std::stoul(get("frames"));
    c.hourglass.mels = std::stoul(get("mels"));
    c.branch.input_dims = split_sizes(get("input_dims"));
    c.branch.hidden_dims = split_sizes(get("hidden_dims"));
    c.branch.gru_layers = std::stoul(get("gru_layers"));
    c.branch.classes = std::stoul(get("classes"));
    c.branch.conv_kernel = std::stoul(get("conv_kernel"));
    return c;
  } catch (const std::logic_error &e) {
    throw FormatError(std::string("bad numeric value in model config: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path &path, const AdamdModel &model,
                     const CheckpointExtras &extras) {
  if (extras.fusion_weights.size() != extras.validation_accuracy.size())
    throw std::invalid_argument("save_checkpoint: fusion weights and accuracies differ in length");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os.write("ADMD", 4);
  write_le<std::uint32_t>(os, kCheckpointVersion);
  write_string(os, to_text(model.config()));
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(extras.fusion_weights.size()));
  for (double w : extras.fusion_weights) write_le(os, w);
  for (double v : extras.validation_accuracy) write_le(os, v);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto &p : model.parameters()) {
    write_string(os, p.name);
    write_le<std::uint32_t>(os, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) write_le<std::uint64_t>(os, d);
    for (double v : p.value.values()) write_le(os, v);
  }
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path &path,
                                 const ModelConfig *expected) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ADMD")
    throw FormatError(path.string() + ": not an ADMD checkpoint");
  const auto version = read_le<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
  const ModelConfig config = model_config_from_text(read_string(is, "config"));
  if (expected && !(config == *expected))
    throw FormatError(path.string() + ": checkpoint config does not match the requested model");

  CheckpointExtras extras;
  const auto k = read_le<std::uint32_t>(is, "fusion count");
  if (k > 1024) throw FormatError("implausible fusion weight count");
  for (std::uint32_t i = 0; i < k; ++i) extras.fusion_weights.push_back(read_le<double>(is, "fusion weight"));
  for (std::uint32_t i = 0; i < k; ++i) extras.validation_accuracy.push_back(read_le<double>(is, "accuracy"));

  struct Stored {
    num::Shape shape;
    std::vector<double> values;
  };
  std::map<std::string, Stored> stored;
  const auto count = read_le<std::uint32_t>(is, "parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = read_string(is, "parameter name");
    const auto rank = read_le<std::uint32_t>(is, "rank");
    if (rank > 8) throw FormatError("implausible rank for " + name);
    Stored s;
    for (std::uint32_t r = 0; r < rank; ++r)
      s.shape.push_back(static_cast<std::size_t>(read_le<std::uint64_t>(is, "extent")));
    const std::size_t n = num::numel(s.shape);
    if (n > (std::size_t{1} << 28)) throw FormatError("implausible size for " + name);
    s.values.resize(n);
    if (n && !is.read(reinterpret_cast<char *>(s.values.data()),
                      static_cast<std::streamsize>(n * sizeof(double))))
      throw FormatError("truncated file while reading " + name);
    stored.emplace(name, std::move(s));
  }

  AdamdModel model(config, 0);
  if (stored.size() != model.parameters().size())
    throw FormatError(path.string() + ": parameter count does not match config");
  for (auto &p : model.parameters()) {
    auto it = stored.find(p.name);
    if (it == stored.end()) throw FormatError(path.string() + ": missing parameter " + p.name);
    if (it->second.shape != p.value.shape())
      throw FormatError(path.string() + ": shape mismatch for " + p.name);
    std::copy(it->second.values.begin(), it->second.values.end(),
              p.value.mutable_values().begin());
  }
  return {std::move(model), std::move(extras)};
}

} // namespace adamd::model
