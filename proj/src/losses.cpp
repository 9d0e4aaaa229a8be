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

#include "edl3d/losses.hpp"

#include <fmt/format.h>

#include <cmath>

#include "edl3d/dual.hpp"
#include "edl3d/error.hpp"

namespace edl3d {

namespace {

constexpr double kInvParams = 1.0 / static_cast<double>(kNumBoxParams);
using BoxDual = Dual<kNumBoxParams>;

}  // namespace

EvidenceScale evidence_scale(const EvidentialBox& pred) {
  EvidenceScale s;
  for (const Nig& p : pred.params) {
    s.alpha_mean += p.alpha;
    s.nu_mean += p.nu;
  }
  s.alpha_mean *= kInvParams;
  s.nu_mean *= kInvParams;
  s.scale = s.nu_mean + 2.0 * s.alpha_mean - 1.0;
  return s;
}

EvidentialGradient evidence_scale_gradient(double upstream) {
  EvidentialGradient g{};
  for (auto& gj : g) {
    gj.d_nu = upstream * kInvParams;
    gj.d_alpha = 2.0 * upstream * kInvParams;
  }
  return g;
}

WrappedLoss evidence_aware_task_loss(double base_loss, const EvidenceScale& s) {
  if (!std::isfinite(base_loss) || base_loss < 0.0) {
    throw InvalidInput(fmt::format("task loss must be finite and >= 0, got {}", base_loss));
  }
  if (!(s.scale > 0.0)) {
    throw InvariantViolation(fmt::format("evidence scale must be positive, got {}", s.scale));
  }
  return {s.scale * base_loss - std::log(s.scale), s.scale, base_loss - 1.0 / s.scale};
}

Box3D TargetScaling::to_box(const EvidentialBox& pred) const {
  std::array<double, kNumBoxParams> b{};
  for (std::size_t j = 0; j < kNumBoxParams; ++j) b[j] = offset[j] + spread[j] * pred[j].gamma;
  return Box3D::from_array(b);
}

std::array<double, kNumBoxParams> TargetScaling::to_targets(const Box3D& gt) const {
  auto t = gt.to_array();
  for (std::size_t j = 0; j < kNumBoxParams; ++j) t[j] = (t[j] - offset[j]) / spread[j];
  return t;
}

IouLoss uncertainty_aware_iou_loss(const EvidentialBox& pred, const Box3D& gt, IouKind kind,
                                   const TargetScaling& scaling) {
  validate_evidential_box(pred);
  validate_box(gt);

  IouLoss out;
  std::array<BoxDual, kNumBoxParams> b;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const double v = scaling.offset[j] + scaling.spread[j] * pred[j].gamma;
    b[j] = BoxDual::variable(v, j);
  }
  for (BoxParam dim : {BoxParam::kL, BoxParam::kW, BoxParam::kH}) {
    auto& d = b[static_cast<std::size_t>(dim)];
    if (d.v < kMinPredictedDim) {
      d = BoxDual(kMinPredictedDim);
      out.clamped = true;
    }
  }
  const auto box = BasicBox<BoxDual>::from_array(b);
  const auto target = BasicBox<BoxDual>::from_array(
      {gt.x, gt.y, gt.z, gt.l, gt.w, gt.h, gt.rot});

  const BoxDual iou = kind == IouKind::k3d ? geometry_detail::iou_3d(box, target)
                                           : geometry_detail::iou_bev(box, target);
  const BoxDual penalty = geometry_detail::diou_penalty(box, target);
  const BoxDual misfit = penalty + BoxDual(1.0) - iou;

  const EvidenceScale s = evidence_scale(pred);
  out.iou = iou.v;
  out.penalty = penalty.v;
  out.value = s.scale * misfit.v - std::log(s.scale);

  out.grad = evidence_scale_gradient(misfit.v - 1.0 / s.scale);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    out.grad[j].d_gamma = s.scale * misfit.d[j] * scaling.spread[j];
  }
  if (!std::isfinite(out.value)) {
    throw NumericError("uncertainty_aware_iou_loss: non-finite value");
  }
  return out;
}

void LossWeights::validate() const {
  for (double w : {eta_seg, eta_depth, eta_conf, eta_dir, eta_evi, eta_iou, eta_reg}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidInput(fmt::format("loss weights must be finite and >= 0, got {}", w));
    }
  }
}

LossWeights LossWeights::scaled(double factor) const {
  return {eta_seg * factor, eta_depth * factor, eta_conf * factor, eta_dir * factor,
          eta_evi * factor, eta_iou * factor,   eta_reg * factor};
}

double TotalLoss::recombine(const LossWeights& w) const {
  return w.eta_seg * seg + w.eta_depth * depth + w.eta_conf * conf + w.eta_dir * dir +
         w.eta_evi * evi + w.eta_iou * iou + w.eta_reg * reg;
}

TotalLoss total_loss(const TaskLosses& tasks, const EvidentialBox& pred, const Box3D& gt,
                     const LossWeights& weights, const TotalLossOptions& options) {
  weights.validate();
  validate_evidential_box(pred);
  validate_box(gt);

  TotalLoss out;
  const EvidenceScale s = evidence_scale(pred);

  double d_scale = 0.0;
  auto wrap = [&](double base, double eta, double& component, double& d_task) {
    const WrappedLoss w = evidence_aware_task_loss(base, s);
    component = w.value;
    d_task = eta * w.d_base;
    d_scale += eta * w.d_scale;
  };
  wrap(tasks.seg, weights.eta_seg, out.seg, out.d_task.seg);
  wrap(tasks.depth, weights.eta_depth, out.depth, out.d_task.depth);
  wrap(tasks.conf, weights.eta_conf, out.conf, out.d_task.conf);
  wrap(tasks.dir, weights.eta_dir, out.dir, out.d_task.dir);
  out.grad = evidence_scale_gradient(d_scale);

  Box3D wrapped_gt = gt;
  wrapped_gt.rot = normalize_yaw(gt.rot);
  const auto targets = options.scaling.to_targets(wrapped_gt);

  const BoxLoss evi = evidential_loss(pred, targets);
  out.evi = evi.value;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) out.grad[j] += evi.grad[j] * weights.eta_evi;

  if (weights.eta_iou > 0.0) {
    const IouLoss iou = uncertainty_aware_iou_loss(pred, wrapped_gt, options.iou_kind,
                                                   options.scaling);
    out.iou = iou.value;
    out.iou_clamped = iou.clamped;
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      out.grad[j] += iou.grad[j] * weights.eta_iou;
    }
  }

  if (weights.eta_reg > 0.0) {
    const BoxLoss reg = evidence_regularizer(pred, targets);
    out.reg = reg.value;
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      out.grad[j] += reg.grad[j] * weights.eta_reg;
    }
  }

  out.total = out.recombine(weights);
  if (!std::isfinite(out.total)) throw NumericError("total_loss: non-finite total");
  return out;
}

}  // namespace edl3d
