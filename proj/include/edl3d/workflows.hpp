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

/// \file
/// \brief Directory-level workflows behind the `edl3d` subcommands.
///
/// Label and prediction directories hold one `.txt` file per frame; frames
/// pair up by identical file stem. Labels are KITTI lines, predictions are
/// pseudo-label lines.
#ifndef EDL3D_WORKFLOWS_HPP_
#define EDL3D_WORKFLOWS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edl3d/calibration.hpp"
#include "edl3d/kitti_io.hpp"
#include "edl3d/metrics.hpp"
#include "edl3d/prob_fusion.hpp"
#include "edl3d/synthetic_bench.hpp"

namespace edl3d {

struct FrameMatch {
  std::vector<std::string> stems;            // present in both, sorted
  std::vector<std::string> only_in_labels;   // sorted
  std::vector<std::string> only_in_preds;    // sorted
};

/// Throws IoError if either directory is missing.
FrameMatch match_frames(const std::filesystem::path& labels_dir,
                        const std::filesystem::path& preds_dir);

struct ObjectPair {
  std::size_t gt = 0;
  std::size_t pred = 0;
  double iou = 0.0;
};

/// Greedy one-to-one pairing by descending 3D IoU; pairs need IoU > 0.
std::vector<ObjectPair> match_objects(const std::vector<Box3D>& gts,
                                      const std::vector<Box3D>& preds);

struct FilterOptions {
  std::string object_class = "Car";
  std::optional<int> min_points;  // applies only to predictions carrying a point count
};

struct MatchedSet {
  FrameMatch frames;
  std::vector<EvalRecord> records;  // matched objects, raw uncertainties
  std::size_t unmatched_gt = 0;
  std::size_t unmatched_pred = 0;
  // Per matched frame, for AP.
  std::vector<std::vector<Detection>> detections;
  std::vector<std::vector<Box3D>> ground_truth;
};

MatchedSet load_matched(const std::filesystem::path& labels_dir,
                        const std::filesystem::path& preds_dir, const FilterOptions& filter = {});

struct CalibrateSummary {
  CalibrationMap map;
  MatchedSet data;
};

/// Fits min-max bounds and kappa on matched pairs (raw epistemic columns).
CalibrateSummary calibrate_dirs(const std::filesystem::path& labels_dir,
                                const std::filesystem::path& preds_dir,
                                const FilterOptions& filter = {});

/// Calibrates every `.txt` file of `in_dir` into `out_dir` (created if
/// needed). Returns the number of files written.
std::size_t apply_dir(const CalibrationMap& map, const Epsilon& eps,
                      const std::filesystem::path& in_dir, const std::filesystem::path& out_dir);

struct EvalSummary {
  MatchedSet data;
  std::optional<UncReport> report;  // needs >= 3 matched objects
  double ap_r40 = 0.0;
};

/// With `map`, uncertainties are calibrated (eps = 1) before the report.
EvalSummary eval_dirs(const std::filesystem::path& labels_dir,
                      const std::filesystem::path& preds_dir,
                      const std::optional<CalibrationMap>& map, double iou_thresh,
                      const FilterOptions& filter = {});

/// Variance voting over one pseudo-label file. Uncertainty columns are read
/// as variances and confidence as the score; merged boxes keep the metadata
/// of their cluster head.
std::vector<PseudoLabel> vote_file(const std::filesystem::path& in, const VotingConfig& cfg);

/// Held-out quantities checked after a benchmark run.
struct BenchReport {
  std::array<double, kNumBoxParams> val_spearman{};
  std::array<double, kNumBoxParams> top_decile_epistemic{};
  std::array<double, kNumBoxParams> bottom_decile_epistemic{};
  double initial_loss = 0.0;
  double final_loss = 0.0;
};

BenchReport summarize_bench(const bench::TrainResult& result);

}  // namespace edl3d

#endif  // EDL3D_WORKFLOWS_HPP_
