// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "adamd/model/checkpoint.hpp"
#include "model_support.hpp"

using namespace adamd;
using testing::toy_config;

namespace {

std::filesystem::path temp_path(const std::string &name) {
  return std::filesystem::temp_directory_path() / ("adamd_test_" + name);
}

std::vector<char> slurp(const std::filesystem::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

void spill(const std::filesystem::path &p, const std::vector<char> &bytes) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

} // namespace

TEST_CASE("checkpoint round trip reproduces forward bitwise") {
  model::AdamdModel m(toy_config(3), 31);
  const auto path = temp_path("roundtrip.bin");
  model::save_checkpoint(path, m, {{0.1, 0.2, 0.3, 0.4}, {0.5, 0.6, 0.7, 0.8}});
  const auto loaded = model::load_checkpoint(path);
  CHECK(loaded.model.config() == m.config());
  CHECK(loaded.model.snapshot() == m.snapshot());
  CHECK(loaded.extras.fusion_weights == std::vector<double>{0.1, 0.2, 0.3, 0.4});
  CHECK(loaded.extras.validation_accuracy == std::vector<double>{0.5, 0.6, 0.7, 0.8});

  std::mt19937_64 rng(1);
  const auto feature = testing::random_tensor({1, 32, 16}, rng, -1, 1, false);
  const auto a = m.forward(feature), b = loaded.model.forward(feature);
  for (std::size_t k = 0; k < a.scales.size(); ++k)
    for (std::size_t i = 0; i < a.scales[k].size(); ++i)
      CHECK(a.scales[k].values()[i] == b.scales[k].values()[i]);
  std::filesystem::remove(path);
}

TEST_CASE("config text round trips") {
  model::ModelConfig c = toy_config(2);
  c.branch.input_dims = {2, 4, 8, 16};
  CHECK(model::model_config_from_text(model::to_text(c)) == c);
}

TEST_CASE("truncated checkpoints are rejected") {
  model::AdamdModel m(toy_config(), 32);
  const auto path = temp_path("trunc.bin");
  model::save_checkpoint(path, m);
  const auto bytes = slurp(path);
  for (std::size_t cut : {std::size_t{2}, std::size_t{7}, std::size_t{40}, bytes.size() / 2,
                          bytes.size() - 1}) {
    spill(path, {bytes.begin(), bytes.begin() + static_cast<long>(cut)});
    CHECK_THROWS_AS(model::load_checkpoint(path), FormatError);
  }
  std::filesystem::remove(path);
}

TEST_CASE("bad magic, version, or config are rejected") {
  model::AdamdModel m(toy_config(), 33);
  const auto path = temp_path("bad.bin");
  model::save_checkpoint(path, m);
  auto bytes = slurp(path);

  auto magic = bytes;
  magic[0] = 'X';
  spill(path, magic);
  CHECK_THROWS_AS(model::load_checkpoint(path), FormatError);

  auto version = bytes;
  version[4] = 9;
  spill(path, version);
  CHECK_THROWS_AS(model::load_checkpoint(path), FormatError);

  spill(path, bytes);
  model::ModelConfig other = toy_config();
  other.branch.classes = 5;
  CHECK_THROWS_AS(model::load_checkpoint(path, &other), FormatError);
  const model::ModelConfig same = toy_config();
  CHECK_NOTHROW(model::load_checkpoint(path, &same));
  std::filesystem::remove(path);
}

TEST_CASE("missing checkpoint file is reported") {
  CHECK_THROWS(model::load_checkpoint(temp_path("does_not_exist.bin")));
}
