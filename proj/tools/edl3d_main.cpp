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

// edl3d: calibrate, apply, eval, vote and bench subcommands.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "edl3d/error.hpp"
#include "edl3d/workflows.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

void report_unmatched(const edl3d::FrameMatch& frames) {
  for (const auto& s : frames.only_in_labels) {
    fmt::print(stderr, "warning: frame '{}' has labels but no predictions\n", s);
  }
  for (const auto& s : frames.only_in_preds) {
    fmt::print(stderr, "warning: frame '{}' has predictions but no labels\n", s);
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw edl3d::IoError(fmt::format("cannot open '{}' for writing", path.string()));
  os << text;
  if (!os) throw edl3d::IoError(fmt::format("write to '{}' failed", path.string()));
}

struct CommonFilter {
  std::string object_class = "Car";
  std::optional<int> min_points;

  edl3d::FilterOptions options() const { return {object_class, min_points}; }
};

void add_filter_flags(CLI::App* cmd, CommonFilter& f) {
  cmd->add_option("--class", f.object_class, "Object class to evaluate")->capture_default_str();
  cmd->add_option("--min-points", f.min_points,
                  "Drop predictions whose point-count column is below this value")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evidential 3D box uncertainty toolkit"};
  app.require_subcommand(1);

  // calibrate
  std::string cal_labels, cal_preds, cal_out;
  CommonFilter cal_filter;
  auto* calibrate = app.add_subcommand("calibrate", "Fit a calibration map on labeled frames");
  calibrate->add_option("--labels", cal_labels, "Ground-truth label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  calibrate->add_option("--preds", cal_preds, "Raw-uncertainty prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  calibrate->add_option("--out", cal_out, "Calibration map output file")->required();
  add_filter_flags(calibrate, cal_filter);

  // apply
  std::string app_map, app_in, app_out;
  double app_eps = 1.0;
  auto* apply = app.add_subcommand("apply", "Calibrate raw uncertainties in a directory");
  apply->add_option("--map", app_map, "Calibration map")->required()->check(CLI::ExistingFile);
  apply->add_option("--eps", app_eps, "Shared epsilon exponent")
      ->required()
      ->check(CLI::PositiveNumber);
  apply->add_option("--in", app_in, "Input directory")->required()->check(CLI::ExistingDirectory);
  apply->add_option("--out", app_out, "Output directory")->required();

  // eval
  std::string ev_labels, ev_preds, ev_map;
  double ev_iou = 0.7;
  CommonFilter ev_filter;
  auto* eval = app.add_subcommand("eval", "Uncertainty report and AP-R40");
  eval->add_option("--labels", ev_labels, "Ground-truth label directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--preds", ev_preds, "Prediction directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--map", ev_map, "Calibration map applied before the report")
      ->check(CLI::ExistingFile);
  eval->add_option("--iou", ev_iou, "3D IoU threshold for AP")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  add_filter_flags(eval, ev_filter);

  // vote
  std::string vote_in, vote_out;
  edl3d::VotingConfig vote_cfg;
  auto* vote = app.add_subcommand("vote", "Variance voting over a detection file");
  vote->add_option("--in", vote_in, "Pseudo-label file")->required()->check(CLI::ExistingFile);
  vote->add_option("--iou-thresh", vote_cfg.iou_threshold, "Cluster IoU threshold")
      ->capture_default_str();
  vote->add_option("--sigma-t", vote_cfg.sigma_t, "IoU locality temperature")
      ->capture_default_str();
  vote->add_option("--out", vote_out, "Output file (default: stdout)");

  // bench
  std::string bench_config, bench_out;
  std::optional<std::uint64_t> bench_seed;
  auto* bench = app.add_subcommand("bench", "Train and evaluate on the synthetic benchmark");
  bench->add_option("--config", bench_config, "Benchmark config file")
      ->required()
      ->check(CLI::ExistingFile);
  bench->add_option("--seed", bench_seed, "Seed (overrides the config)");
  bench->add_option("--out", bench_out, "Training history output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*calibrate) {
      const auto summary = edl3d::calibrate_dirs(cal_labels, cal_preds, cal_filter.options());
      report_unmatched(summary.data.frames);
      edl3d::write_calibration_map(summary.map, std::filesystem::path(cal_out));
      fmt::print("calibrated on {} matched objects from {} frames -> {}\n",
                 summary.data.records.size(), summary.data.frames.stems.size(), cal_out);
    } else if (*apply) {
      const auto map = edl3d::read_calibration_map(app_map);
      const auto n = edl3d::apply_dir(map, edl3d::Epsilon::shared(app_eps), app_in, app_out);
      fmt::print("wrote {} files to {}\n", n, app_out);
    } else if (*eval) {
      std::optional<edl3d::CalibrationMap> map;
      if (!ev_map.empty()) map = edl3d::read_calibration_map(ev_map);
      const auto summary =
          edl3d::eval_dirs(ev_labels, ev_preds, map, ev_iou, ev_filter.options());
      report_unmatched(summary.data.frames);
      if (summary.report) {
        edl3d::write_report(*summary.report, std::cout);
      } else {
        fmt::print(stderr, "warning: {} matched objects, uncertainty report needs at least 3\n",
                   summary.data.records.size());
      }
      fmt::print("AP_R40@{} {:.6f}\n", ev_iou, summary.ap_r40);
    } else if (*vote) {
      const auto merged = edl3d::vote_file(vote_in, vote_cfg);
      if (vote_out.empty()) {
        edl3d::write_pseudo_labels(merged, std::cout);
      } else {
        edl3d::write_pseudo_labels(merged, std::filesystem::path(vote_out));
      }
    } else if (*bench) {
      auto cfg = edl3d::bench::parse_train_config(edl3d::read_text_file(bench_config));
      if (bench_seed) cfg.seed = *bench_seed;
      const auto result = edl3d::bench::train(cfg);
      std::ostringstream history;
      edl3d::bench::write_history(result.history, history);
      if (bench_out.empty()) {
        std::cout << history.str();
      } else {
        write_file(bench_out, history.str());
      }
      if (result.diverged) {
        fmt::print(stderr, "error: training diverged: {}\n", result.failure);
        return kExitNumeric;
      }
      const auto rep = edl3d::summarize_bench(result);
      fmt::print(stderr, "initial loss {:.6f}, final loss {:.6f}\n", rep.initial_loss,
                 rep.final_loss);
      fmt::print(stderr, "{:<6}{:>12}{:>14}{:>14}\n", "param", "spearman", "epi_low",
                 "epi_high");
      for (std::size_t j = 0; j < edl3d::kNumBoxParams; ++j) {
        fmt::print(stderr, "{:<6}{:>12.4f}{:>14.6g}{:>14.6g}\n", edl3d::kBoxParamNames[j],
                   rep.val_spearman[j], rep.bottom_decile_epistemic[j],
                   rep.top_decile_epistemic[j]);
      }
    }
  } catch (const edl3d::NumericError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
