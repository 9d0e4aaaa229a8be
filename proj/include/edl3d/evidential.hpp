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
/// \brief Normal-Inverse-Gamma evidential regression: moments, the Student-t
/// marginal, the evidential NLL and the evidence regularizer, each with
/// analytic gradients.
#ifndef EDL3D_EVIDENTIAL_HPP_
#define EDL3D_EVIDENTIAL_HPP_

#include <array>

#include "edl3d/box_geometry.hpp"

namespace edl3d {

/// NIG hyperparameters for one scalar target. Valid when nu > 0, alpha > 1,
/// beta > 0 and gamma is finite.
struct Nig {
  double gamma = 0.0;
  double nu = 1.0;
  double alpha = 2.0;
  double beta = 1.0;
};

/// Partial derivatives of a scalar w.r.t. the four Nig fields.
struct NigGradient {
  double d_gamma = 0.0;
  double d_nu = 0.0;
  double d_alpha = 0.0;
  double d_beta = 0.0;

  NigGradient& operator+=(const NigGradient& o) {
    d_gamma += o.d_gamma;
    d_nu += o.d_nu;
    d_alpha += o.d_alpha;
    d_beta += o.d_beta;
    return *this;
  }
  NigGradient operator*(double s) const {
    return {d_gamma * s, d_nu * s, d_alpha * s, d_beta * s};
  }
};

/// One Nig per box parameter, indexed in kBoxParamNames order.
struct EvidentialBox {
  std::array<Nig, kNumBoxParams> params{};

  Nig& operator[](std::size_t j) { return params[j]; }
  const Nig& operator[](std::size_t j) const { return params[j]; }
  Nig& operator[](BoxParam p) { return params[static_cast<std::size_t>(p)]; }
  const Nig& operator[](BoxParam p) const { return params[static_cast<std::size_t>(p)]; }

  /// Box assembled from the seven gamma values.
  Box3D mean_box() const;
};

using EvidentialGradient = std::array<NigGradient, kNumBoxParams>;

/// Throws InvariantViolation when `p` is not a valid Nig.
void validate_nig(const Nig& p);
void validate_evidential_box(const EvidentialBox& b);

inline double predict_mean(const Nig& p) { return p.gamma; }

/// E[sigma^2] = beta / (alpha - 1).
double aleatoric(const Nig& p);

/// Var[mu] = beta / (nu (alpha - 1)).
double epistemic(const Nig& p);

/// 2 nu + alpha.
inline double total_evidence(const Nig& p) { return 2.0 * p.nu + p.alpha; }

struct StudentT {
  double dof = 0.0;
  double loc = 0.0;
  double scale2 = 0.0;
};

/// Marginal of y after integrating out (mu, sigma^2):
/// St(2 alpha, gamma, beta (1 + nu) / (nu alpha)).
StudentT student_t_marginal(const Nig& p);

/// Log density of a location-scale Student-t, computed through lgamma.
double student_t_log_pdf(const StudentT& t, double y);

struct NigNll {
  double value = 0.0;
  NigGradient grad;
};

/// -log St(y | 2 alpha, gamma, beta (1 + nu) / (nu alpha)) and its exact
/// gradient. Throws NumericError if the result is not finite.
NigNll nig_nll(const Nig& p, double y);

struct BoxLoss {
  double value = 0.0;
  EvidentialGradient grad{};
};

/// Mean of nig_nll over the seven box parameters. `targets` must already
/// carry a normalized yaw.
BoxLoss evidential_loss(const EvidentialBox& pred, const std::array<double, kNumBoxParams>& targets);
BoxLoss evidential_loss(const EvidentialBox& pred, const Box3D& gt);

/// (1/7) sum_j (2 nu_j + alpha_j) |y_j - gamma_j|. The gamma subgradient at a
/// zero residual is taken as 0.
BoxLoss evidence_regularizer(const EvidentialBox& pred,
                             const std::array<double, kNumBoxParams>& targets);
BoxLoss evidence_regularizer(const EvidentialBox& pred, const Box3D& gt);

}  // namespace edl3d

#endif  // EDL3D_EVIDENTIAL_HPP_
