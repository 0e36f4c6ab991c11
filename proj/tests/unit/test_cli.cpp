// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string &args) {
  const std::string cmd = std::string(ADAMD_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("cli exit codes") {
  const fs::path root = fs::temp_directory_path() / "adamd_cli";
  fs::remove_all(root);
  const std::string conf = std::string(ADAMD_SMOKE_CONFIG);
  const std::string data = (root / "data").string(), out = (root / "run").string();

  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train --set no.such.key=1") == 1);
  CHECK(run("train --config " + conf + " --mode sideways") == 1);
  CHECK(run("train --config " + conf + " --data " + (root / "absent").string() + " --out " + out) == 2);

  REQUIRE(run("synth --config " + conf + " --out " + data + " --seed 3") == 0);
  CHECK(fs::exists(root / "data" / "manifest.tsv"));
  REQUIRE(run("train --config " + conf + " --data " + data + " --out " + out +
              " --mode fixed-weight --scale 1 --boost 10") == 0);
  CHECK(fs::exists(root / "run" / "checkpoint.admd"));
  CHECK(fs::exists(root / "run" / "history.csv"));
  const std::string ck = (root / "run" / "checkpoint.admd").string();
  CHECK(run("sweep --config " + conf + " --data " + data + " --out " + out + " --checkpoint " + ck) == 0);
  CHECK(run("eval --config " + conf + " --data " + data + " --out " + (root / "eval").string() +
            " --checkpoint " + ck + " --threshold-file " + (root / "run" / "thresholds.tsv").string()) == 0);
  CHECK(fs::exists(root / "eval" / "metrics.csv"));
  CHECK(run("eval --config " + conf + " --data " + data + " --out " + (root / "eval").string() +
            " --checkpoint " + ck + " --set model.channels=4") == 1);
  fs::remove_all(root);
}
