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
/// \brief Composite autolabeler objective: evidence-aware task-loss wrapper,
/// the uncertainty-aware IoU loss, and their weighted total.
///
/// Every loss is returned together with its derivatives so callers can
/// back-propagate without an autodiff framework.
#ifndef EDL3D_LOSSES_HPP_
#define EDL3D_LOSSES_HPP_

#include <array>

#include "edl3d/box_geometry.hpp"
#include "edl3d/evidential.hpp"

namespace edl3d {

/// Means of alpha_j and nu_j over the box parameters and the derived
/// evidence scale nu_mean + 2 alpha_mean - 1 (> 1 for valid inputs).
struct EvidenceScale {
  double alpha_mean = 0.0;
  double nu_mean = 0.0;
  double scale = 0.0;
};

EvidenceScale evidence_scale(const EvidentialBox& pred);

/// Gradient of EvidenceScale::scale w.r.t. every Nig, times `upstream`.
EvidentialGradient evidence_scale_gradient(double upstream);

struct WrappedLoss {
  double value = 0.0;
  double d_base = 0.0;   // d value / d base_loss
  double d_scale = 0.0;  // d value / d scale
};

/// scale * base_loss - log(scale).
WrappedLoss evidence_aware_task_loss(double base_loss, const EvidenceScale& s);

enum class IouKind { k3d, kBev };

/// Affine map between the network's gamma space and metric box parameters:
/// box_j = offset_j + spread_j * gamma_j. The identity by default.
struct TargetScaling {
  std::array<double, kNumBoxParams> offset{};
  std::array<double, kNumBoxParams> spread{1, 1, 1, 1, 1, 1, 1};

  Box3D to_box(const EvidentialBox& pred) const;
  std::array<double, kNumBoxParams> to_targets(const Box3D& gt) const;
};

/// Floor applied to predicted l, w, h inside the IoU loss.
inline constexpr double kMinPredictedDim = 1e-3;

struct IouLoss {
  double value = 0.0;
  double iou = 0.0;
  double penalty = 0.0;
  bool clamped = false;  // a predicted dimension was raised to kMinPredictedDim
  EvidentialGradient grad{};
};

/// s * (R(b, gt) + 1 - IoU(b, gt)) - log s, with b the box of predicted means
/// mapped through `scaling`, R the DIoU penalty and s the evidence scale.
IouLoss uncertainty_aware_iou_loss(const EvidentialBox& pred, const Box3D& gt,
                                   IouKind kind = IouKind::k3d,
                                   const TargetScaling& scaling = {});

/// Eq.-8 weights. Defaults are the autolabeler settings eta_seg = eta_depth =
/// eta_conf = eta_dir = 1, eta_evi = 2, eta_iou = 5. `eta_reg` enables the
/// original evidence regularizer for ablations and is off by default.
struct LossWeights {
  double eta_seg = 1.0;
  double eta_depth = 1.0;
  double eta_conf = 1.0;
  double eta_dir = 1.0;
  double eta_evi = 2.0;
  double eta_iou = 5.0;
  double eta_reg = 0.0;

  void validate() const;
  LossWeights scaled(double factor) const;
};

/// Raw (unwrapped) auxiliary task losses, all >= 0.
struct TaskLosses {
  double seg = 0.0;
  double depth = 0.0;
  double conf = 0.0;
  double dir = 0.0;
};

struct TotalLossOptions {
  IouKind iou_kind = IouKind::k3d;
  TargetScaling scaling{};
};

struct TotalLoss {
  double total = 0.0;
  // Unweighted components; total = sum of weight * component.
  double seg = 0.0, depth = 0.0, conf = 0.0, dir = 0.0;
  double evi = 0.0, iou = 0.0, reg = 0.0;
  bool iou_clamped = false;
  EvidentialGradient grad{};
  TaskLosses d_task{};  // d total / d raw task loss

  /// Weighted re-summation of the components.
  double recombine(const LossWeights& w) const;
};

/// Weighted sum of the wrapped task losses, evidential NLL, IoU loss and
/// regularizer. IoU and regularizer are only evaluated when their weight is
/// positive and read 0 otherwise. The ground-truth yaw is normalized first.
TotalLoss total_loss(const TaskLosses& tasks, const EvidentialBox& pred, const Box3D& gt,
                     const LossWeights& weights = {}, const TotalLossOptions& options = {});

}  // namespace edl3d

#endif  // EDL3D_LOSSES_HPP_
