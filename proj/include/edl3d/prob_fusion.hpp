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
/// \brief Probabilistic-detector utilities: the Gaussian KL regression loss
/// against uncertain pseudo labels, and 3D variance voting.
#ifndef EDL3D_PROB_FUSION_HPP_
#define EDL3D_PROB_FUSION_HPP_

#include <array>
#include <vector>

#include "edl3d/box_geometry.hpp"

namespace edl3d {

/// Axis-independent Gaussian over box parameters. var[j] > 0.
struct GaussianBox {
  Box3D mean;
  std::array<double, kNumBoxParams> var{1, 1, 1, 1, 1, 1, 1};
};

void validate_gaussian_box(const GaussianBox& g);

struct KlLoss {
  std::array<double, kNumBoxParams> per_param{};
  double mean = 0.0;
};

/// Per parameter: log(s_hat / s) + s^2 / (2 s_hat^2) + (y_g - y_hat)^2 / (2 s_hat^2),
/// with s_hat^2 = pred.var, s^2 = pseudo.var. Yaw means are normalized before
/// the residual is taken.
KlLoss kl_regression_loss(const GaussianBox& pred, const GaussianBox& pseudo);

struct VotingConfig {
  double iou_threshold = 0.5;  // in (0, 1)
  double sigma_t = 0.05;       // > 0

  void validate() const;
};

struct ScoredGaussianBox {
  GaussianBox box;
  double score = 0.0;
};

/// One merged cluster. `head` and `members` index the input list; members
/// are listed in visiting order, head first.
struct VotedBox {
  GaussianBox box;
  double score = 0.0;
  std::size_t head = 0;
  std::vector<std::size_t> members;
};

/// Greedy score-descending clustering by 3D IoU with the cluster head.
/// Each merged parameter is the mean of members weighted by
/// exp(-(1 - IoU_i)^2 / sigma_t) / var_ij; yaw uses the same weights on the
/// doubled-angle circle. The merged variance is 1 / sum of weights, a
/// heuristic with no probabilistic derivation. Equal scores keep input
/// order. Throws InvalidInput on an empty list.
std::vector<VotedBox> variance_voting(const std::vector<ScoredGaussianBox>& candidates,
                                     const VotingConfig& cfg = {});

}  // namespace edl3d

#endif  // EDL3D_PROB_FUSION_HPP_
