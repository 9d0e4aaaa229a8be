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

#include "edl3d/prob_fusion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "edl3d/error.hpp"

namespace edl3d {

namespace {
constexpr std::size_t kRot = static_cast<std::size_t>(BoxParam::kRot);
}  // namespace

void validate_gaussian_box(const GaussianBox& g) {
  validate_box(g.mean);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    if (!(g.var[j] > 0.0) || !std::isfinite(g.var[j])) {
      throw InvalidInput(
          fmt::format("gaussian box: variance of {} is {}", kBoxParamNames[j], g.var[j]));
    }
  }
}

KlLoss kl_regression_loss(const GaussianBox& pred, const GaussianBox& pseudo) {
  validate_gaussian_box(pred);
  validate_gaussian_box(pseudo);
  auto y_hat = pred.mean.to_array();
  auto y_g = pseudo.mean.to_array();
  y_hat[kRot] = normalize_yaw(y_hat[kRot]);
  y_g[kRot] = normalize_yaw(y_g[kRot]);

  KlLoss out;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const double pv = pred.var[j];
    const double r = y_g[j] - y_hat[j];
    out.per_param[j] = 0.5 * std::log(pv / pseudo.var[j]) + pseudo.var[j] / (2.0 * pv) +
                       r * r / (2.0 * pv);
    out.mean += out.per_param[j];
  }
  out.mean /= static_cast<double>(kNumBoxParams);
  return out;
}

void VotingConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw InvalidInput(fmt::format("voting iou_threshold {} outside (0, 1)", iou_threshold));
  }
  if (!(sigma_t > 0.0) || !std::isfinite(sigma_t)) {
    throw InvalidInput(fmt::format("voting sigma_t must be > 0, got {}", sigma_t));
  }
}

std::vector<VotedBox> variance_voting(const std::vector<ScoredGaussianBox>& candidates,
                                     const VotingConfig& cfg) {
  cfg.validate();
  if (candidates.empty()) throw InvalidInput("variance_voting: no candidates");
  for (const auto& c : candidates) {
    validate_gaussian_box(c.box);
    if (!(c.score >= 0.0 && c.score <= 1.0)) {
      throw InvalidInput(fmt::format("variance_voting: score {} outside [0, 1]", c.score));
    }
  }

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return candidates[a].score > candidates[b].score;
  });

  std::vector<bool> consumed(candidates.size(), false);
  std::vector<VotedBox> merged;
  for (std::size_t head : order) {
    if (consumed[head]) continue;
    const auto& top = candidates[head];

    struct Member {
      std::size_t index;
      double locality;
    };
    std::vector<Member> cluster;
    for (std::size_t i : order) {
      if (consumed[i]) continue;
      const double iou = i == head ? 1.0 : iou_3d(top.box.mean, candidates[i].box.mean);
      if (iou >= cfg.iou_threshold) {
        const double gap = 1.0 - iou;
        cluster.push_back({i, std::exp(-gap * gap / cfg.sigma_t)});
        consumed[i] = true;
      }
    }

    VotedBox out;
    out.score = top.score;
    out.head = head;
    for (const Member& m : cluster) out.members.push_back(m.index);

    if (cluster.size() == 1) {
      out.box = top.box;
      out.box.mean.rot = normalize_yaw(out.box.mean.rot);
      merged.push_back(std::move(out));
      continue;
    }

    std::array<double, kNumBoxParams> weight_sum{};
    std::array<double, kNumBoxParams> value_sum{};
    double sin_sum = 0.0;
    double cos_sum = 0.0;
    for (const Member& m : cluster) {
      const auto& c = candidates[m.index].box;
      const auto v = c.mean.to_array();
      for (std::size_t j = 0; j < kNumBoxParams; ++j) {
        const double w = m.locality / c.var[j];
        weight_sum[j] += w;
        if (j == kRot) {
          sin_sum += w * std::sin(2.0 * v[j]);
          cos_sum += w * std::cos(2.0 * v[j]);
        } else {
          value_sum[j] += w * v[j];
        }
      }
    }

    std::array<double, kNumBoxParams> mean{};
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      mean[j] = j == kRot ? normalize_yaw(0.5 * std::atan2(sin_sum, cos_sum))
                          : value_sum[j] / weight_sum[j];
      out.box.var[j] = 1.0 / weight_sum[j];
    }
    out.box.mean = Box3D::from_array(mean);
    merged.push_back(std::move(out));
  }
  return merged;
}

}  // namespace edl3d
