// Copyright 2026 The jaggedrec Authors.
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
#include "jaggedrec/experiment.h"

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "jaggedrec/errors.h"

namespace jaggedrec {
namespace {

std::string TempDir(const std::string& leaf) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("jaggedrec_" + std::to_string(::getpid()) + "_" + leaf);
  std::filesystem::remove_all(dir);
  return dir.string();
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ConfigTest, JsonRoundTrip) {
  ExperimentConfig c;
  c.seed = 99;
  c.pool_sizes = {7, 8};
  c.num_tables = 2;
  c.fp16_neg = true;
  c.lengths.kind = LengthDistKind::kZipf;
  const ExperimentConfig back = ConfigFromJson(ConfigToJson(c));
  EXPECT_EQ(ConfigToJson(back), ConfigToJson(c));
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.pool_sizes, (std::vector<int64_t>{7, 8}));
}

TEST(ConfigTest, PartialJsonKeepsDefaults) {
  const ExperimentConfig c =
      ConfigFromJson(nlohmann::json::parse(R"({"tau": 2, "num_workers": 8})"));
  EXPECT_EQ(c.tau, 2);
  EXPECT_EQ(c.num_workers, 8);
  EXPECT_EQ(c.num_devices, ExperimentConfig().num_devices);
}

TEST(ConfigTest, RejectsUnknownKeysTypesAndBadValues) {
  EXPECT_THROW(ConfigFromJson(nlohmann::json::parse(R"({"sede": 1})")),
               ValidationError);
  EXPECT_THROW(ConfigFromJson(nlohmann::json::parse(R"({"tau": "one"})")),
               ValidationError);
  EXPECT_THROW(ConfigFromJson(nlohmann::json::parse("[1, 2]")),
               ValidationError);
  ExperimentConfig c;
  c.group_counts = {3};
  EXPECT_THROW(c.Validate(), ValidationError);
  c = ExperimentConfig();
  c.temperature = 0.0;
  EXPECT_THROW(c.Validate(), ValidationError);
  c = ExperimentConfig();
  c.pool_sizes = {1, 2};
  EXPECT_THROW(c.Validate(), ValidationError);
  EXPECT_NO_THROW(ExperimentConfig().Validate());
}

TEST(ConfigTest, LoadsFileWithComments) {
  const std::string dir = TempDir("cfg");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/c.json";
  std::ofstream(path) << "{\n  // shorter run\n  \"toy_steps\": 10\n}\n";
  EXPECT_EQ(LoadConfig(path).toy_steps, 10);
  std::ofstream(path) << "{ \"toy_steps\": }";
  EXPECT_THROW(LoadConfig(path), ValidationError);
  EXPECT_THROW(LoadConfig(dir + "/missing.json"), ValidationError);
  std::filesystem::remove_all(dir);
}

TEST(ConfigTest, EnvironmentOverrides) {
  ExperimentConfig c;
  ::setenv("JAGGEDREC_SEED", "1234", 1);
  ::setenv("JAGGEDREC_OUT", "/tmp/elsewhere", 1);
  ApplyEnvOverrides(c);
  EXPECT_EQ(c.seed, 1234u);
  EXPECT_EQ(c.out_dir, "/tmp/elsewhere");
  ::setenv("JAGGEDREC_SEED", "12x", 1);
  EXPECT_THROW(ApplyEnvOverrides(c), ValidationError);
  ::unsetenv("JAGGEDREC_SEED");
  ::unsetenv("JAGGEDREC_OUT");
  ExperimentConfig d;
  ApplyEnvOverrides(d);
  EXPECT_EQ(d.seed, 1u);
}

TEST(ExperimentKindTest, NamesRoundTrip) {
  EXPECT_EQ(AllExperimentKinds().size(), 9u);
  for (ExperimentKind k : AllExperimentKinds()) {
    EXPECT_EQ(ParseExperimentKind(ExperimentKindName(k)), k);
  }
  EXPECT_EQ(ParseExperimentKind("semi_async"), ExperimentKind::kSemiAsync);
  EXPECT_EQ(ExperimentKindName(ExperimentKind::kTrainToy), "train-toy");
  EXPECT_THROW(ParseExperimentKind("report"), ValidationError);
}

TEST(ReportTest, RenderingCarriesConfigAndRows) {
  Report r;
  r.name = "demo";
  r.columns = {"a", "b"};
  r.AddRow({"1", "x"});
  r.Check(true, "fine");
  r.Check(false, "broken");
  EXPECT_EQ(r.failures, (std::vector<std::string>{"broken"}));
  EXPECT_THROW(r.AddRow({"only one"}), InvariantError);
  ExperimentConfig c;
  const std::string csv = RenderCsv(r, c);
  EXPECT_EQ(csv.rfind("# experiment: demo\n# config: {", 0), 0u) << csv;
  EXPECT_NE(csv.find("\na,b\n1,x\n"), std::string::npos);
  const auto line_end = csv.find('\n', csv.find("# config: "));
  const auto json = nlohmann::json::parse(
      csv.substr(csv.find("# config: ") + 10,
                 line_end - csv.find("# config: ") - 10));
  EXPECT_EQ(ConfigToJson(ConfigFromJson(json)), ConfigToJson(c));
  const std::string md = RenderMarkdown(r, c);
  EXPECT_NE(md.find("## demo"), std::string::npos);
  EXPECT_NE(md.find("```json"), std::string::npos);
  EXPECT_NE(md.find("| a | b |"), std::string::npos);
  EXPECT_NE(md.find("| 1 | x |"), std::string::npos);
  EXPECT_NE(md.find("broken"), std::string::npos);
}

TEST(FormatDoubleTest, FixedDecimals) {
  EXPECT_EQ(FormatDouble(3.0), "3.0000");
  EXPECT_EQ(FormatDouble(2.5, 2), "2.50");
  EXPECT_EQ(FormatDouble(-0.125, 3), "-0.125");
  EXPECT_EQ(FormatDouble(34359738368.0, 0), "34359738368");
}

ExperimentConfig QuickConfig(const std::string& out) {
  ExperimentConfig c;
  c.out_dir = out;
  c.toy_steps = 40;
  c.hsp_steps = 3;
  return c;
}

class QuickExperimentTest : public ::testing::TestWithParam<ExperimentKind> {};

TEST_P(QuickExperimentTest, ChecksPassAndOutputIsReproducible) {
  const ExperimentKind kind = GetParam();
  const std::string dir = TempDir(ExperimentKindName(kind));
  ExperimentConfig c = QuickConfig(dir + "/a");
  const WrittenReport a = RunAndWrite(c, kind);
  c.out_dir = dir + "/b";
  const WrittenReport b = RunAndWrite(c, kind);
  EXPECT_TRUE(a.report.failures.empty())
      << ExperimentKindName(kind) << ": " << a.report.failures.front();
  EXPECT_FALSE(a.report.rows.empty());
  EXPECT_FALSE(a.report.checks.empty());
  const std::string csv_a = Slurp(a.csv_path);
  std::string csv_b = Slurp(b.csv_path);
  // Only the stamped output directory differs.
  const std::string from = dir + "/b";
  const std::string to = dir + "/a";
  for (size_t p = csv_b.find(from); p != std::string::npos;
       p = csv_b.find(from, p + to.size())) {
    csv_b.replace(p, from.size(), to);
  }
  EXPECT_EQ(csv_a, csv_b);
  EXPECT_FALSE(Slurp(a.md_path).empty());
  std::filesystem::remove_all(dir);
}

INSTANTIATE_TEST_SUITE_P(
    Kinds, QuickExperimentTest,
    ::testing::Values(ExperimentKind::kJagged, ExperimentKind::kLookup,
                      ExperimentKind::kBalance, ExperimentKind::kHsp,
                      ExperimentKind::kPipeline, ExperimentKind::kNegSample,
                      ExperimentKind::kTrainToy, ExperimentKind::kPreprocess),
    [](const auto& info) {
      std::string n = ExperimentKindName(info.param);
      for (char& ch : n) {
        if (ch == '-') ch = '_';
      }
      return n;
    });

}  // namespace
}  // namespace jaggedrec
