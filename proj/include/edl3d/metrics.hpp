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
/// \brief Uncertainty-quality metrics: per-parameter Gaussian NLL and
/// Spearman rank correlation against residual magnitude and GT IoU.
#ifndef EDL3D_METRICS_HPP_
#define EDL3D_METRICS_HPP_

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "edl3d/box_geometry.hpp"
#include "edl3d/calibration.hpp"

namespace edl3d {

/// 1-based fractional ranks; tied values share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Needs equal lengths >= 3; throws
/// UndefinedResult when either series is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct EvalRecord {
  Box3D pred;
  Box3D gt;
  UncertaintyVector uncertainty;

  /// gt_j - pred_j, with both yaws normalized first.
  std::array<double, kNumBoxParams> residuals() const;
};

struct ParamReport {
  double nll = 0.0;
  // Empty when a series is constant and the correlation is undefined.
  std::optional<double> spearman_vs_residual;
  std::optional<double> spearman_vs_iou;
};

struct UncReport {
  std::array<ParamReport, kNumBoxParams> params{};
  UncertaintyStage source = UncertaintyStage::kRaw;
  std::size_t num_records = 0;
};

/// Per parameter: mean gaussian_nll(r_j, u_j), spearman(u_j, |r_j|) and
/// spearman(u_j, iou_3d(pred, gt)). Needs >= 3 records that share one
/// uncertainty stage.
UncReport uncertainty_report(std::span<const EvalRecord> records);

}  // namespace edl3d

#endif  // EDL3D_METRICS_HPP_
