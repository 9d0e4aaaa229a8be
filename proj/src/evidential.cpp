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

#include "edl3d/evidential.hpp"

#include <fmt/format.h>

#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <numbers>

#include "edl3d/error.hpp"

namespace edl3d {

namespace {

constexpr double kInvParams = 1.0 / static_cast<double>(kNumBoxParams);

std::array<double, kNumBoxParams> targets_of(const Box3D& gt) {
  auto t = gt.to_array();
  t[6] = normalize_yaw(t[6]);
  return t;
}

}  // namespace

Box3D EvidentialBox::mean_box() const {
  std::array<double, kNumBoxParams> g{};
  for (std::size_t j = 0; j < kNumBoxParams; ++j) g[j] = params[j].gamma;
  return Box3D::from_array(g);
}

void validate_nig(const Nig& p) {
  if (!(std::isfinite(p.gamma) && std::isfinite(p.nu) && std::isfinite(p.alpha) &&
        std::isfinite(p.beta) && p.nu > 0.0 && p.alpha > 1.0 && p.beta > 0.0)) {
    throw InvariantViolation(fmt::format(
        "invalid Nig(gamma={}, nu={}, alpha={}, beta={}): need nu>0, alpha>1, beta>0",
        p.gamma, p.nu, p.alpha, p.beta));
  }
}

void validate_evidential_box(const EvidentialBox& b) {
  for (const Nig& p : b.params) validate_nig(p);
}

double aleatoric(const Nig& p) {
  validate_nig(p);
  return p.beta / (p.alpha - 1.0);
}

double epistemic(const Nig& p) {
  validate_nig(p);
  return p.beta / (p.nu * (p.alpha - 1.0));
}

StudentT student_t_marginal(const Nig& p) {
  validate_nig(p);
  return {2.0 * p.alpha, p.gamma, p.beta * (1.0 + p.nu) / (p.nu * p.alpha)};
}

double student_t_log_pdf(const StudentT& t, double y) {
  const double n = t.dof;
  const double z2 = (y - t.loc) * (y - t.loc) / (n * t.scale2);
  return std::lgamma(0.5 * (n + 1.0)) - std::lgamma(0.5 * n) -
         0.5 * std::log(n * std::numbers::pi * t.scale2) - 0.5 * (n + 1.0) * std::log1p(z2);
}

NigNll nig_nll(const Nig& p, double y) {
  validate_nig(p);
  if (!std::isfinite(y)) throw InvalidInput("nig_nll: non-finite target");

  const double r = y - p.gamma;
  const double omega = 2.0 * p.beta * (1.0 + p.nu);
  const double denom = p.nu * r * r + omega;
  const double a_half = p.alpha + 0.5;
  const double log_denom = std::log(denom);
  const double log_omega = std::log(omega);

  NigNll out;
  out.value = 0.5 * std::log(std::numbers::pi / p.nu) - p.alpha * log_omega +
              a_half * log_denom + std::lgamma(p.alpha) - std::lgamma(a_half);

  out.grad.d_gamma = -2.0 * a_half * p.nu * r / denom;
  out.grad.d_nu = -0.5 / p.nu - p.alpha / (1.0 + p.nu) + a_half * (r * r + 2.0 * p.beta) / denom;
  out.grad.d_alpha = log_denom - log_omega + boost::math::digamma(p.alpha) -
                     boost::math::digamma(a_half);
  out.grad.d_beta = -p.alpha / p.beta + a_half * 2.0 * (1.0 + p.nu) / denom;

  if (!std::isfinite(out.value) || !std::isfinite(out.grad.d_gamma) ||
      !std::isfinite(out.grad.d_nu) || !std::isfinite(out.grad.d_alpha) ||
      !std::isfinite(out.grad.d_beta)) {
    throw NumericError(fmt::format("nig_nll overflow at Nig({}, {}, {}, {}), y={}", p.gamma,
                                   p.nu, p.alpha, p.beta, y));
  }
  return out;
}

BoxLoss evidential_loss(const EvidentialBox& pred,
                        const std::array<double, kNumBoxParams>& targets) {
  BoxLoss out;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const NigNll t = nig_nll(pred[j], targets[j]);
    out.value += t.value;
    out.grad[j] = t.grad * kInvParams;
  }
  out.value *= kInvParams;
  return out;
}

BoxLoss evidential_loss(const EvidentialBox& pred, const Box3D& gt) {
  return evidential_loss(pred, targets_of(gt));
}

BoxLoss evidence_regularizer(const EvidentialBox& pred,
                             const std::array<double, kNumBoxParams>& targets) {
  BoxLoss out;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const Nig& p = pred[j];
    validate_nig(p);
    const double r = targets[j] - p.gamma;
    const double mag = std::abs(r);
    const double phi = total_evidence(p);
    out.value += phi * mag;
    const double sign = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
    out.grad[j] = NigGradient{-phi * sign, 2.0 * mag, mag, 0.0} * kInvParams;
  }
  out.value *= kInvParams;
  return out;
}

BoxLoss evidence_regularizer(const EvidentialBox& pred, const Box3D& gt) {
  return evidence_regularizer(pred, targets_of(gt));
}

}  // namespace edl3d
