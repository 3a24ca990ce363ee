// Copyright (c) 2026 The Cauliflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cauliflow/cli/cli.h"

namespace fs = std::filesystem;
namespace cli = cauliflow::cli;

namespace {

fs::path Scratch(const std::string& name) {
  fs::path p = fs::path(::testing::TempDir()) / ("cauliflow_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int Invoke(const std::vector<std::string>& args) { return cli::Run(args); }

std::string Slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

std::map<std::string, std::string> Tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = Slurp(e.path());
  }
  return out;
}

std::map<std::string, std::string> Report(const fs::path& csv) {
  std::map<std::string, std::string> out;
  std::istringstream is(Slurp(csv));
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    auto comma = line.find(',');
    out[line.substr(0, comma)] = line.substr(comma + 1);
  }
  return out;
}

int GenSmall(const fs::path& out, const std::string& seed = "7") {
  return Invoke({"gen-data", "--seed", seed, "--train", "40", "--dev", "10", "--test", "10", "--out",
              out.string()});
}

TEST(Cli, GenDataTwiceGivesIdenticalTrees) {
  fs::path root = Scratch("gen");
  ASSERT_EQ(GenSmall(root / "a"), cli::kOk);
  ASSERT_EQ(GenSmall(root / "b"), cli::kOk);
  auto a = Tree(root / "a");
  EXPECT_TRUE(a.count("manifest.json"));
  EXPECT_TRUE(a.count("train/utterances.txt"));
  EXPECT_EQ(a, Tree(root / "b"));
  ASSERT_EQ(GenSmall(root / "c", "8"), cli::kOk);
  EXPECT_NE(a.at("train/utterances.txt"), Tree(root / "c").at("train/utterances.txt"));
}

TEST(Cli, EvaluateSelfComparison) {
  fs::path root = Scratch("eval");
  ASSERT_EQ(GenSmall(root / "d"), cli::kOk);
  const std::string test = (root / "d" / "test").string();
  ASSERT_EQ(Invoke({"evaluate", "--predicted", test, "--target", test, "--out", (root / "e").string()}),
            cli::kOk);
  auto r = Report(root / "e" / "report.csv");
  EXPECT_EQ(std::stod(r.at("jsd_pause")), 0.0);
  EXPECT_EQ(std::stod(r.at("jsd_nonpause")), 0.0);
  EXPECT_EQ(std::stod(r.at("punct_f")), 100.0);
  EXPECT_EQ(std::stod(r.at("word_f")), 100.0);
  EXPECT_EQ(r.at("pause_rate"), r.at("target_pause_rate"));
  EXPECT_EQ(r.at("speech_rate"), r.at("target_speech_rate"));
  EXPECT_EQ(std::stod(r.at("percentile_l1")), 0.0);
}

TEST(Cli, UsageErrors) {
  fs::path root = Scratch("usage");
  EXPECT_EQ(Invoke({}), cli::kUsage);
  EXPECT_EQ(Invoke({"no-such-command"}), cli::kUsage);
  EXPECT_EQ(Invoke({"gen-data", "--bogus", "1", "--out", root.string()}), cli::kUsage);
  EXPECT_EQ(Invoke({"gen-data", "--train", "many", "--out", root.string()}), cli::kUsage);
  EXPECT_EQ(Invoke({"--help"}), cli::kOk);
}

TEST(Cli, MissingInput) {
  fs::path root = Scratch("missing");
  EXPECT_EQ(Invoke({"evaluate", "--predicted", (root / "nope").string(), "--target",
                 (root / "nope").string(), "--out", (root / "e").string()}),
            cli::kMissingInput);
  EXPECT_EQ(Invoke({"train-dur", "--data", (root / "nope").string(), "--out", (root / "m").string()}),
            cli::kMissingInput);
  EXPECT_EQ(Invoke({"gen-data", "--config", (root / "none.json").string(), "--out", root.string()}),
            cli::kMissingInput);
}

TEST(Cli, ConfigViolations) {
  fs::path root = Scratch("config");
  EXPECT_EQ(Invoke({"gen-data", "--seed", "1"}), cli::kConfigInvalid);  // no --out
  std::ofstream(root / "bad.json") << R"({"trian": 10})";
  EXPECT_EQ(Invoke({"gen-data", "--config", (root / "bad.json").string(), "--out", (root / "o").string()}),
            cli::kConfigInvalid);
  std::ofstream(root / "broken.json") << "{";
  EXPECT_EQ(Invoke({"gen-data", "--config", (root / "broken.json").string(), "--out", (root / "o").string()}),
            cli::kConfigInvalid);
  ASSERT_EQ(GenSmall(root / "d"), cli::kOk);
  EXPECT_EQ(Invoke({"train-dur", "--data", (root / "d").string(), "--dilations", "1,x", "--out",
                 (root / "m").string()}),
            cli::kConfigInvalid);
  EXPECT_EQ(Invoke({"predict", "--data", (root / "d" / "test").string(), "--out", (root / "p").string()}),
            cli::kConfigInvalid);  // no --model
}

TEST(Cli, MalformedCorpusIsDataError) {
  fs::path root = Scratch("data");
  ASSERT_EQ(GenSmall(root / "d"), cli::kOk);
  std::ofstream(root / "d" / "test" / "utterances.txt") << "garbage line\n";
  const std::string test = (root / "d" / "test").string();
  EXPECT_EQ(Invoke({"evaluate", "--predicted", test, "--target", test, "--out", (root / "e").string()}),
            cli::kDataInvalid);
}

TEST(Cli, FlagsWinOverConfigFile) {
  fs::path root = Scratch("precedence");
  std::ofstream(root / "c.json") << R"({"train": 12, "dev": 3, "test": 3, "seed": 5})";
  ASSERT_EQ(Invoke({"gen-data", "--config", (root / "c.json").string(), "--train", "20", "--out",
                 (root / "o").string()}),
            cli::kOk);
  const std::string manifest = Slurp(root / "o" / "manifest.json");
  EXPECT_NE(manifest.find("\"train\": \"20\""), std::string::npos);
  EXPECT_NE(manifest.find("\"dev\": \"3\""), std::string::npos);
  EXPECT_NE(manifest.find("\"seed\": 5"), std::string::npos);
}

TEST(Cli, RerunFromManifestIsBitExact) {
  fs::path root = Scratch("manifest");
  ASSERT_EQ(GenSmall(root / "d", "11"), cli::kOk);
  ASSERT_EQ(Invoke({"train-dur", "--data", (root / "d").string(), "--epochs", "2", "--embed-dim", "8",
                 "--conv-layers", "1", "--dilations", "1", "--seed", "3", "--out", (root / "m1").string()}),
            cli::kOk);
  ASSERT_EQ(Invoke({"train-dur", "--from-manifest", (root / "m1" / "manifest.json").string(), "--out",
                 (root / "m2").string()}),
            cli::kOk);
  EXPECT_EQ(Tree(root / "m1"), Tree(root / "m2"));
  ASSERT_EQ(Invoke({"gen-data", "--from-manifest", (root / "d" / "manifest.json").string(), "--out",
                 (root / "d2").string()}),
            cli::kOk);
  EXPECT_EQ(Tree(root / "d"), Tree(root / "d2"));
  // A manifest only replays the command that wrote it.
  EXPECT_EQ(Invoke({"train-flow", "--from-manifest", (root / "m1" / "manifest.json").string(), "--out",
                 (root / "m3").string()}),
            cli::kConfigInvalid);
}

}  // namespace
