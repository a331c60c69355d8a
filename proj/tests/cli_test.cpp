// Copyright 2026 The flowinv Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the flowinv binary end to end through a temporary directory.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "flowinv/flowtable.hpp"
#include "flowinv/report.hpp"
#include "gtest/gtest.h"

namespace flowinv {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("flowinv_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int run(const std::string& args) const {
    const std::string cmd = std::string(FLOWINV_CLI_PATH) + " " + args + " >" + path("stdout.txt") + " 2>" +
                            path("stderr.txt");
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  fs::path dir_;
};

TEST_F(CliTest, FullPipeline) {
  ASSERT_EQ(run("generate --flows 3000 --alpha 1.5 --max-len 500 --seed 5 --out " + path("trace.txt") +
                " --truth " + path("truth_hist.csv")),
            0);
  ASSERT_EQ(run("flows --in " + path("trace.txt") + " --out " + path("truth.csv")), 0);
  ASSERT_EQ(run("sample --in " + path("trace.txt") + " --method sh-packet --p 0.05 --seed 3 --out " +
                path("sampled.csv")),
            0);
  ASSERT_EQ(run("invert --in " + path("sampled.csv") + " --method sh-packet --p 0.05 --out " + path("est.json")),
            0);
  ASSERT_EQ(run("compare --truth " + path("truth.csv") + " --estimate " + path("est.json") + " --seed 3 --out " +
                path("report.csv")),
            0);

  std::ifstream truth_in(path("truth.csv"));
  const auto truth = read_flows_csv(truth_in);
  EXPECT_EQ(truth.records.size(), 3000u);

  std::ifstream est_in(path("est.json"));
  const auto est = nlohmann::json::parse(est_in);
  EXPECT_EQ(est.at("method"), "sh-packet");
  EXPECT_DOUBLE_EQ(est.at("p").get<double>(), 0.05);
  double raw_sum = 0.0;
  for (double v : est.at("raw")) raw_sum += v;
  EXPECT_NEAR(raw_sum, 1.0, 1e-9);

  const auto report = read_plot_data(path("report.csv"));
  EXPECT_FALSE(report.per_bin_table.empty());
  EXPECT_GE(report.total_variation, 0.0);
  EXPECT_LE(report.total_variation, 1.0);
  EXPECT_EQ(report.metadata.method, "sh-packet");
  EXPECT_EQ(report.metadata.seed, 3u);
  EXPECT_EQ(report.metadata.flow_timeout, 300.0);
  EXPECT_EQ(report.metadata.buffer_capacity, 1u << 20);
}

TEST_F(CliTest, CalibratedSamplingAndPcap) {
  ASSERT_EQ(run("generate --flows 2000 --seed 9 --format pcap --out " + path("trace.pcap")), 0);
  ASSERT_EQ(run("sample --in " + path("trace.pcap") + " --method sh-byte --target-fraction 0.1 --seed 2 --out " +
                path("sampled.csv")),
            0);
  ASSERT_EQ(run("invert --in " + path("sampled.csv") + " --method sh-byte --p 0.0001 --out " + path("est.json")),
            0);
  std::ifstream est_in(path("est.json"));
  const auto est = nlohmann::json::parse(est_in);
  EXPECT_TRUE(est.at("approximate").get<bool>());
  EXPECT_TRUE(est.contains("mean_packet_len"));
}

TEST_F(CliTest, SynMethod) {
  ASSERT_EQ(run("generate --flows 1000 --seed 4 --out " + path("trace.txt")), 0);
  ASSERT_EQ(run("sample --in " + path("trace.txt") + " --method sh-syn --p 0.5 --out " + path("s.csv")), 0);
  ASSERT_EQ(run("invert --in " + path("s.csv") + " --method syn --p 0.5 --out " + path("est.json")), 0);
  ASSERT_EQ(run("flows --in " + path("trace.txt") + " --out " + path("truth.csv")), 0);
  ASSERT_EQ(run("compare --truth " + path("truth.csv") + " --estimate " + path("est.json") + " --out " +
                path("r.csv")),
            0);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("bogus"), 1);
  EXPECT_EQ(run("sample --in x --method sh-packet --out y"), 1);
  EXPECT_EQ(run("sample --in x --method sh-packet --p 0.1 --target-fraction 0.1 --out y"), 1);
  EXPECT_EQ(run("sample --in x --method sh-packet --p 1.5 --out y"), 1);
  EXPECT_EQ(run("invert --in x --method median --p 0.1 --out y"), 1);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run("flows --in " + path("missing.txt") + " --out " + path("f.csv")), 2);
  std::ofstream(path("bad.txt")) << "0.0 6 10.0.0.1 1 10.0.0.2 2 40 S\nnot a packet\n";
  EXPECT_EQ(run("flows --in " + path("bad.txt") + " --out " + path("f.csv")), 2);
  std::ifstream err(path("stderr.txt"));
  const std::string msg((std::istreambuf_iterator<char>(err)), std::istreambuf_iterator<char>());
  EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  EXPECT_EQ(run("sample --in " + path("bad.txt") + " --method sh-packet --p 0 --out " + path("s.csv")), 2);
}

}  // namespace
}  // namespace flowinv
