// Copyright 2026 The edl3d Authors
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

// Runs the edl3d binary on fixture directories.

#include <fmt/format.h>
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "edl3d/kitti_io.hpp"
#include "edl3d/workflows.hpp"

#ifndef EDL3D_CLI_PATH
#error "EDL3D_CLI_PATH must point at the edl3d binary"
#endif

namespace edl3d {
namespace {

namespace fs = std::filesystem;

struct CommandResult {
  int code = -1;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / fmt::format("edl3d_cli_{}_{}", info->name(), ::getpid());
    fs::remove_all(root_);
    fs::create_directories(root_ / "labels");
    fs::create_directories(root_ / "preds");
  }
  void TearDown() override { fs::remove_all(root_); }

  CommandResult run(const std::string& args) const {
    const fs::path out = root_ / "stdout.txt", err = root_ / "stderr.txt";
    const std::string cmd =
        fmt::format("{} {} >{} 2>{}", EDL3D_CLI_PATH, args, out.string(), err.string());
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = read_text_file(out);
    r.err = read_text_file(err);
    return r;
  }

  void write(const fs::path& rel, const std::string& text) const {
    std::ofstream(root_ / rel) << text;
  }

  // Frames of cars on a lane, labels plus predictions whose raw uncertainty
  // grows with the size of the injected error.
  void write_fixture(bool perfect, int frames = 4) const {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int f = 0; f < frames; ++f) {
      std::string labels, preds;
      for (int k = 0; k < 5; ++k) {
        KittiLabelLine l = parse_kitti(
            "Car 0.00 0 0.00 100.00 150.00 200.00 220.00 1.50 1.70 4.00 0.00 1.60 20.00 -1.57");
        l.x = -6.0 + 3.0 * k;
        l.z = 10.0 + 8.0 * f + 2.0 * k;
        l.rotation_y = -1.57 + 0.1 * k;
        labels += format_kitti(l) + "\n";
        PseudoLabel p;
        p.label = l;
        const double noise = perfect ? 0.0 : 0.05 * (1 + k + f);
        p.label.x += noise * n(rng);
        p.label.z += noise * n(rng);
        p.label.l += 0.5 * noise * n(rng);
        for (std::size_t j = 0; j < kNumBoxParams; ++j) {
          p.uncertainty.values[j] = noise + 0.01 * (j + 1) + 0.001 * k + 0.0001 * f;
        }
        p.confidence = 0.9 - 0.1 * k;
        preds += format_pseudo_label(p) + "\n";
      }
      write(fs::path("labels") / fmt::format("{:06d}.txt", f), labels);
      write(fs::path("preds") / fmt::format("{:06d}.txt", f), preds);
    }
  }

  std::string path(const std::string& rel) const { return (root_ / rel).string(); }

  fs::path root_;
};

TEST_F(CliTest, EvalOnPerfectPredictionsPrintsApOne) {
  write_fixture(true);
  const auto r = run(fmt::format("eval --labels {} --preds {}", path("labels"), path("preds")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("AP_R40@0.7 1.000000"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("param nll spearman_residual spearman_iou"), std::string::npos);
}

TEST_F(CliTest, UnmatchedStemsAreReported) {
  write_fixture(true, 2);
  write("labels/000099.txt", "");
  write("preds/000042.txt", "");
  const auto r = run(fmt::format("eval --labels {} --preds {}", path("labels"), path("preds")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("000099"), std::string::npos);
  EXPECT_NE(r.err.find("000042"), std::string::npos);
}

TEST_F(CliTest, CalibrateThenApplyWithUnitEpsilonEqualsMapAlone) {
  write_fixture(false, 6);
  const std::string map = path("map.txt");
  auto r = run(fmt::format("calibrate --labels {} --preds {} --out {}", path("labels"),
                           path("preds"), map));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cal = read_calibration_map(map);
  r = run(fmt::format("apply --map {} --eps 1 --in {} --out {}", map, path("preds"),
                      path("calibrated")));
  ASSERT_EQ(r.code, 0) << r.err;
  for (int f = 0; f < 6; ++f) {
    const std::string stem = fmt::format("{:06d}.txt", f);
    const auto raw = read_pseudo_label_file(root_ / "preds" / stem);
    const auto out =
        read_pseudo_label_file(root_ / "calibrated" / stem, UncertaintyStage::kCalibrated);
    ASSERT_EQ(raw.size(), out.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const auto expect = apply_calibration(raw[i].uncertainty, cal);
      for (std::size_t j = 0; j < kNumBoxParams; ++j) {
        EXPECT_NEAR(out[i].uncertainty.values[j], expect.values[j], 5e-7);
      }
    }
  }
  // Writers are byte-stable.
  const std::string first = read_text_file(map);
  const std::string first_out = read_text_file(root_ / "calibrated" / "000000.txt");
  run(fmt::format("calibrate --labels {} --preds {} --out {}", path("labels"), path("preds"),
                  map));
  run(fmt::format("apply --map {} --eps 1 --in {} --out {}", map, path("preds"),
                  path("calibrated")));
  EXPECT_EQ(read_text_file(map), first);
  EXPECT_EQ(read_text_file(root_ / "calibrated" / "000000.txt"), first_out);

  r = run(fmt::format("eval --labels {} --preds {} --map {}", path("labels"), path("preds"), map));
  EXPECT_EQ(r.code, 0) << r.err;
}

TEST_F(CliTest, VoteMergesDuplicates) {
  write_fixture(true, 1);
  // Duplicate every prediction once with a slightly shifted copy.
  auto recs = read_pseudo_label_file(root_ / "preds" / "000000.txt");
  const std::size_t n = recs.size();
  for (std::size_t i = 0; i < n; ++i) {
    PseudoLabel copy = recs[i];
    copy.label.z += 0.1;
    copy.confidence *= 0.5;
    recs.push_back(copy);
  }
  write_pseudo_labels(recs, root_ / "dups.txt");
  const auto r = run(fmt::format("vote --in {} --iou-thresh 0.5 --sigma-t 0.05 --out {}",
                                 path("dups.txt"), path("voted.txt")));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_pseudo_label_file(root_ / "voted.txt").size(), n);
}

TEST_F(CliTest, BenchWritesDeterministicHistory) {
  write("bench.cfg", "epochs = 2\ntrain_size = 64\nval_size = 32\nhidden = 8, 8\n");
  auto a = run(fmt::format("bench --config {} --seed 5 --out {}", path("bench.cfg"), path("h1")));
  ASSERT_EQ(a.code, 0) << a.err;
  auto b = run(fmt::format("bench --config {} --seed 5 --out {}", path("bench.cfg"), path("h2")));
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(read_text_file(root_ / "h1"), read_text_file(root_ / "h2"));
  EXPECT_NE(read_text_file(root_ / "h1").find("epoch\ttotal"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run(fmt::format("eval --labels {} --preds {} --bogus", path("labels"), path("preds")))
                .code,
            1);
  EXPECT_EQ(run(fmt::format("eval --labels {} --preds {}", path("nope"), path("preds"))).code, 1);
  EXPECT_EQ(run("--help").code, 0);

  write("labels/000000.txt", "Car 0 0 0 1 2 3\n");
  write("preds/000000.txt", "");
  const auto r = run(fmt::format("eval --labels {} --preds {}", path("labels"), path("preds")));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("000000.txt"), std::string::npos) << r.err;

  write("bad.cfg", "epochs = 2\nlearning_rate = 1e9\ntrain_size = 64\nval_size = 32\n");
  EXPECT_EQ(run(fmt::format("bench --config {} --out {}", path("bad.cfg"), path("h"))).code, 3);
  write("unknown.cfg", "color = blue\n");
  EXPECT_EQ(run(fmt::format("bench --config {}", path("unknown.cfg"))).code, 2);
}

}  // namespace
}  // namespace edl3d
