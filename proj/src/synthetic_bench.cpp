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

#include "edl3d/synthetic_bench.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "edl3d/error.hpp"
#include "edl3d/metrics.hpp"

namespace edl3d::bench {

namespace {

constexpr std::size_t kRot = static_cast<std::size_t>(BoxParam::kRot);
constexpr std::size_t kReconOffset = kEvidentialOutputs;
constexpr std::size_t kDirIndex = kEvidentialOutputs + kCodeWidth;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Orthonormal DCT-II basis, used as the fixed second view of the code.
const std::array<std::array<double, kCodeWidth>, kCodeWidth>& mixing_matrix() {
  static const auto m = [] {
    std::array<std::array<double, kCodeWidth>, kCodeWidth> out{};
    const double n = static_cast<double>(kCodeWidth);
    for (std::size_t k = 0; k < kCodeWidth; ++k) {
      const double c = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      for (std::size_t i = 0; i < kCodeWidth; ++i) {
        out[k][i] = c * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                 static_cast<double>(k) / n);
      }
    }
    return out;
  }();
  return m;
}

Nig activate(const std::vector<double>& raw, std::size_t j) {
  return {raw[4 * j], softplus(raw[4 * j + 1]) + kEvidenceFloor,
          1.0 + softplus(raw[4 * j + 2]) + kEvidenceFloor,
          softplus(raw[4 * j + 3]) + kEvidenceFloor};
}

struct Activations {
  // a[0] is the input; a[k] the output of layer k-1 (post-ReLU for hidden).
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> pre;
};

Activations run_layers(const EvidentialNet& net, const std::vector<double>& features) {
  if (net.layers.empty()) throw InvalidInput("forward: network has no layers");
  if (features.size() != net.input_width()) {
    throw InvalidInput(fmt::format("forward: feature width {} but network expects {}",
                                   features.size(), net.input_width()));
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (!std::isfinite(features[i])) {
      throw InvalidInput(fmt::format("forward: feature {} is {}", i, features[i]));
    }
  }
  Activations act;
  act.a.push_back(features);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const DenseLayer& layer = net.layers[l];
    const auto& x = act.a.back();
    std::vector<double> z(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* w = &layer.weight[o * layer.in];
      double s = layer.bias[o];
      for (std::size_t i = 0; i < layer.in; ++i) s += w[i] * x[i];
      z[o] = s;
    }
    act.pre.push_back(z);
    if (l + 1 < net.layers.size()) {
      for (double& v : z) v = std::max(v, 0.0);
    }
    act.a.push_back(std::move(z));
  }
  return act;
}

NetOutput assemble(std::vector<double> raw) {
  for (std::size_t k = 0; k < raw.size(); ++k) {
    if (!std::isfinite(raw[k])) {
      throw NumericError(fmt::format("forward: network output {} is {}", k, raw[k]));
    }
  }
  NetOutput out;
  for (std::size_t j = 0; j < kNumBoxParams; ++j) out.evidential[j] = activate(raw, j);
  for (std::size_t k = 0; k < kCodeWidth; ++k) out.reconstruction[k] = raw[kReconOffset + k];
  out.dir_logit = raw[kDirIndex];
  out.raw = std::move(raw);
  return out;
}

double yaw_sign_target(const Box3D& gt) { return normalize_yaw(gt.rot) >= 0.0 ? 1.0 : 0.0; }

SampleLoss loss_from_output(const NetOutput& out, const SyntheticSample& sample,
                            const LossConfig& cfg) {
  SampleLoss s;
  double recon = 0.0;
  for (std::size_t k = 0; k < kCodeWidth; ++k) {
    const double d = out.reconstruction[k] - sample.clean_code[k];
    recon += d * d;
  }
  s.depth_base = recon / static_cast<double>(kCodeWidth);
  s.dir_base = softplus(out.dir_logit) - yaw_sign_target(sample.gt) * out.dir_logit;

  TotalLossOptions opts;
  opts.iou_kind = cfg.iou_kind;
  opts.scaling = cfg.scaling;
  // seg and conf are constant-zero stand-ins; only their -log(scale) term acts.
  const TaskLosses tasks{0.0, s.depth_base, 0.0, s.dir_base};
  s.loss = total_loss(tasks, out.evidential, sample.gt, cfg.weights, opts);
  return s;
}

void require_finite(double v, const char* component) {
  if (!std::isfinite(v)) {
    throw NumericError(fmt::format("backward: non-finite value in {}", component));
  }
}

}  // namespace

std::array<double, kCodeWidth> encode_box(const Box3D& b, const BoxRanges& ranges) {
  const auto v = b.to_array();
  std::array<double, kCodeWidth> code{};
  for (std::size_t j = 0; j < kCodeWidth; ++j) {
    code[j] = 2.0 * (v[j] - ranges.lo[j]) / (ranges.hi[j] - ranges.lo[j]) - 1.0;
  }
  return code;
}

Box3D decode_code(const std::array<double, kCodeWidth>& code, const BoxRanges& ranges) {
  std::array<double, kNumBoxParams> v{};
  for (std::size_t j = 0; j < kCodeWidth; ++j) {
    v[j] = ranges.lo[j] + 0.5 * (code[j] + 1.0) * (ranges.hi[j] - ranges.lo[j]);
  }
  return Box3D::from_array(v);
}

Box3D decode_features(const std::vector<double>& features, const BoxRanges& ranges) {
  if (features.size() < kCodeWidth) throw InvalidInput("decode_features: too few features");
  std::array<double, kCodeWidth> code{};
  std::copy_n(features.begin(), kCodeWidth, code.begin());
  return decode_code(code, ranges);
}

std::vector<SyntheticSample> generate_dataset(std::size_t n, std::uint64_t seed,
                                              const NoiseConfig& noise, const BoxRanges& ranges,
                                              std::optional<double> fixed_noise) {
  if (n == 0) throw InvalidInput("generate_dataset: n must be >= 1");
  if (!(noise.min_scale > 0.0 && noise.max_scale >= noise.min_scale)) {
    throw InvalidInput("generate_dataset: need 0 < noise min <= max");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const double log_lo = std::log(noise.min_scale);
  const double log_hi = std::log(noise.max_scale);
  const double log_mid = 0.5 * (log_lo + log_hi);
  const double log_half = std::max(0.5 * (log_hi - log_lo), 1e-12);
  const auto& mix = mixing_matrix();

  std::vector<SyntheticSample> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::array<double, kNumBoxParams> v{};
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      v[j] = ranges.lo[j] + unit(rng) * (ranges.hi[j] - ranges.lo[j]);
    }
    SyntheticSample sample;
    sample.gt = Box3D::from_array(v);
    sample.gt.rot = normalize_yaw(sample.gt.rot);
    const double log_noise = log_lo + unit(rng) * (log_hi - log_lo);
    sample.noise_scale = fixed_noise ? *fixed_noise : std::exp(log_noise);
    sample.clean_code = encode_box(sample.gt, ranges);

    sample.features.assign(kFeatureWidth, 0.0);
    for (std::size_t j = 0; j < kCodeWidth; ++j) {
      sample.features[j] = sample.clean_code[j] + sample.noise_scale * gauss(rng);
    }
    for (std::size_t k = 0; k < kCodeWidth; ++k) {
      double m = 0.0;
      for (std::size_t i = 0; i < kCodeWidth; ++i) m += mix[k][i] * sample.clean_code[i];
      sample.features[kCodeWidth + k] = m + sample.noise_scale * gauss(rng);
    }
    const double jitter = noise.density_jitter * gauss(rng);
    const double log_used = sample.noise_scale > 0.0 ? std::log(sample.noise_scale) : log_lo;
    sample.features[2 * kCodeWidth] = -(log_used - log_mid) / log_half + jitter;
    out.push_back(std::move(sample));
  }
  return out;
}

EvidentialNet EvidentialNet::zeros(std::size_t input, const std::vector<std::size_t>& hidden) {
  EvidentialNet net;
  std::size_t prev = input;
  auto add = [&](std::size_t width) {
    net.layers.push_back({prev, width, std::vector<double>(prev * width, 0.0),
                          std::vector<double>(width, 0.0)});
    prev = width;
  };
  for (std::size_t h : hidden) add(h);
  add(kNetOutputs);
  return net;
}

EvidentialNet EvidentialNet::random(std::size_t input, const std::vector<std::size_t>& hidden,
                                    std::uint64_t seed) {
  EvidentialNet net = zeros(input, hidden);
  std::mt19937_64 rng(seed);
  for (auto& layer : net.layers) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& w : layer.weight) w = u(rng);
  }
  // Output layer starts small so the initial evidential parameters sit near
  // softplus(0).
  for (double& w : net.layers.back().weight) w *= 0.1;
  return net;
}

std::size_t EvidentialNet::num_params() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

double& EvidentialNet::param(std::size_t k) {
  for (auto& l : layers) {
    if (k < l.weight.size()) return l.weight[k];
    k -= l.weight.size();
    if (k < l.bias.size()) return l.bias[k];
    k -= l.bias.size();
  }
  throw InvalidInput("EvidentialNet::param: index out of range");
}

double EvidentialNet::param(std::size_t k) const {
  return const_cast<EvidentialNet&>(*this).param(k);
}

NetOutput forward(const EvidentialNet& net, const std::vector<double>& features) {
  if (net.layers.back().out != kNetOutputs) {
    throw InvalidInput(fmt::format("forward: output width {} but {} expected",
                                   net.layers.back().out, kNetOutputs));
  }
  Activations act = run_layers(net, features);
  return assemble(std::move(act.a.back()));
}

SampleLoss sample_loss(const EvidentialNet& net, const SyntheticSample& sample,
                       const LossConfig& cfg) {
  return loss_from_output(forward(net, sample.features), sample, cfg);
}

Backprop backward(const EvidentialNet& net, const SyntheticSample& sample, const LossConfig& cfg) {
  Activations act = run_layers(net, sample.features);
  const NetOutput out = assemble(act.a.back());
  Backprop bp;
  bp.loss = loss_from_output(out, sample, cfg);
  const TotalLoss& tl = bp.loss.loss;
  require_finite(tl.depth, "depth task loss");
  require_finite(tl.dir, "direction task loss");
  require_finite(tl.evi, "evidential loss");
  require_finite(tl.iou, "IoU loss");
  require_finite(tl.total, "total loss");

  const std::vector<double>& z = out.raw;
  std::vector<double> dz(kNetOutputs, 0.0);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    const NigGradient& g = tl.grad[j];
    dz[4 * j] = g.d_gamma;
    dz[4 * j + 1] = g.d_nu * sigmoid(z[4 * j + 1]);
    dz[4 * j + 2] = g.d_alpha * sigmoid(z[4 * j + 2]);
    dz[4 * j + 3] = g.d_beta * sigmoid(z[4 * j + 3]);
  }
  for (std::size_t k = 0; k < kCodeWidth; ++k) {
    dz[kReconOffset + k] = tl.d_task.depth * 2.0 *
                           (out.reconstruction[k] - sample.clean_code[k]) /
                           static_cast<double>(kCodeWidth);
  }
  dz[kDirIndex] = tl.d_task.dir * (sigmoid(out.dir_logit) - yaw_sign_target(sample.gt));
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    for (std::size_t q = 0; q < 4; ++q) require_finite(dz[4 * j + q], "evidential head gradient");
  }
  for (std::size_t k = kReconOffset; k < kDirIndex; ++k) {
    require_finite(dz[k], "reconstruction head gradient");
  }
  require_finite(dz[kDirIndex], "direction head gradient");

  // Offsets of each layer's block in the flat parameter vector.
  std::vector<std::size_t> offset(net.layers.size());
  std::size_t total = 0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    offset[l] = total;
    total += net.layers[l].weight.size() + net.layers[l].bias.size();
  }
  bp.grad.assign(total, 0.0);

  std::vector<double> delta = std::move(dz);
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const DenseLayer& layer = net.layers[l];
    const std::vector<double>& x = act.a[l];
    double* gw = &bp.grad[offset[l]];
    double* gb = gw + layer.weight.size();
    std::vector<double> below(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      gb[o] = d;
      if (d == 0.0) continue;
      const double* w = &layer.weight[o * layer.in];
      double* g = gw + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) {
        g[i] = d * x[i];
        below[i] += w[i] * d;
      }
    }
    if (l > 0) {
      const std::vector<double>& pre = act.pre[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (pre[i] <= 0.0) below[i] = 0.0;
      }
    }
    delta = std::move(below);
  }
  return bp;
}

TargetScaling fit_target_scaling(const std::vector<SyntheticSample>& samples) {
  if (samples.size() < 2) throw InvalidInput("fit_target_scaling: need >= 2 samples");
  TargetScaling s;
  const double n = static_cast<double>(samples.size());
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    double mean = 0.0;
    for (const auto& smp : samples) {
      auto v = smp.gt.to_array();
      v[kRot] = normalize_yaw(v[kRot]);
      mean += v[j];
    }
    mean /= n;
    double var = 0.0;
    for (const auto& smp : samples) {
      auto v = smp.gt.to_array();
      v[kRot] = normalize_yaw(v[kRot]);
      var += (v[j] - mean) * (v[j] - mean);
    }
    var /= n - 1.0;
    if (!(var > 0.0)) throw UndefinedResult("fit_target_scaling: constant target column");
    s.offset[j] = mean;
    s.spread[j] = std::sqrt(var);
  }
  return s;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw InvalidInput("train: epochs must be >= 1");
  if (batch_size == 0) throw InvalidInput("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidInput("train: momentum must be in [0, 1)");
  if (train_size < 2 || val_size < 3) throw InvalidInput("train: need train >= 2, val >= 3");
  if (hidden.empty()) throw InvalidInput("train: need at least one hidden layer");
  weights.validate();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, int line) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(fmt::format("config line {}: bad value '{}' for {}", line, value, key));
  }
  return out;
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto f = [&] { return parse_number<double>(key, value, line_no); };
    auto u = [&] { return parse_number<std::size_t>(key, value, line_no); };
    if (key == "epochs") cfg.epochs = u();
    else if (key == "batch_size") cfg.batch_size = u();
    else if (key == "learning_rate") cfg.learning_rate = f();
    else if (key == "momentum") cfg.momentum = f();
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value, line_no);
    else if (key == "train_size") cfg.train_size = u();
    else if (key == "val_size") cfg.val_size = u();
    else if (key == "eta_seg") cfg.weights.eta_seg = f();
    else if (key == "eta_depth") cfg.weights.eta_depth = f();
    else if (key == "eta_conf") cfg.weights.eta_conf = f();
    else if (key == "eta_dir") cfg.weights.eta_dir = f();
    else if (key == "eta_evi") cfg.weights.eta_evi = f();
    else if (key == "eta_iou") cfg.weights.eta_iou = f();
    else if (key == "eta_reg") cfg.weights.eta_reg = f();
    else if (key == "noise_min") cfg.noise.min_scale = f();
    else if (key == "noise_max") cfg.noise.max_scale = f();
    else if (key == "density_jitter") cfg.noise.density_jitter = f();
    else if (key == "iou_kind") {
      if (value == "3d") cfg.iou_kind = IouKind::k3d;
      else if (value == "bev") cfg.iou_kind = IouKind::kBev;
      else throw ParseError(fmt::format("config line {}: iou_kind must be 3d or bev", line_no));
    } else if (key == "hidden") {
      cfg.hidden.clear();
      std::istringstream parts(value);
      std::string part;
      while (std::getline(parts, part, ',')) {
        cfg.hidden.push_back(parse_number<std::size_t>(key, trim(part), line_no));
      }
    } else {
      throw ParseError(fmt::format("config line {}: unknown key '{}'", line_no, key));
    }
  }
  cfg.validate();
  return cfg;
}

void write_history(const TrainHistory& history, std::ostream& os) {
  fmt::print(os, "# initial_loss\t{:.10e}\n", history.initial_loss);
  os << "epoch\ttotal\tseg\tdepth\tconf\tdir\tevi\tiou";
  for (auto name : kBoxParamNames) os << "\tepistemic_" << name;
  for (auto name : kBoxParamNames) os << "\tspearman_" << name;
  os << '\n';
  for (const auto& e : history.epochs) {
    fmt::print(os, "{}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}\t{:.10e}", e.epoch,
               e.total, e.seg, e.depth, e.conf, e.dir, e.evi, e.iou);
    for (double v : e.mean_epistemic) fmt::print(os, "\t{:.10e}", v);
    for (double v : e.val_spearman) fmt::print(os, "\t{:.10e}", v);
    os << '\n';
  }
}

Evaluation evaluate(const EvidentialNet& net, const std::vector<SyntheticSample>& samples,
                    const TargetScaling& scaling) {
  Evaluation ev;
  ev.epistemic.reserve(samples.size());
  ev.residual.reserve(samples.size());
  ev.predicted.reserve(samples.size());
  for (const auto& s : samples) {
    const NetOutput out = forward(net, s.features);
    std::array<double, kNumBoxParams> epi{};
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      epi[j] = epistemic(out.evidential[j]) * scaling.spread[j] * scaling.spread[j];
    }
    Box3D pred = scaling.to_box(out.evidential);
    const EvalRecord rec{pred, s.gt, {}};
    ev.epistemic.push_back(epi);
    ev.residual.push_back(rec.residuals());
    ev.predicted.push_back(pred);
  }
  return ev;
}

TrainResult train(const TrainConfig& cfg) {
  cfg.validate();
  std::mt19937_64 master(cfg.seed);
  const std::uint64_t train_seed = master();
  const std::uint64_t val_seed = master();
  const std::uint64_t init_seed = master();
  const std::uint64_t shuffle_seed = master();

  TrainResult result;
  result.train = generate_dataset(cfg.train_size, train_seed, cfg.noise);
  result.val = generate_dataset(cfg.val_size, val_seed, cfg.noise);
  result.scaling = fit_target_scaling(result.train);
  result.net = EvidentialNet::random(kFeatureWidth, cfg.hidden, init_seed);

  LossConfig loss_cfg{cfg.weights, cfg.iou_kind, result.scaling};
  EvidentialNet& net = result.net;
  const std::size_t num_params = net.num_params();

  double initial = 0.0;
  for (const auto& s : result.train) initial += sample_loss(net, s, loss_cfg).loss.total;
  result.history.initial_loss = initial / static_cast<double>(result.train.size());

  std::vector<double> velocity(num_params, 0.0);
  std::vector<double> grad(num_params, 0.0);
  std::vector<std::size_t> order(result.train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffler(shuffle_seed);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffler);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t batches = 0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
        const double inv = 1.0 / static_cast<double>(stop - start);
        std::fill(grad.begin(), grad.end(), 0.0);
        double batch_total = 0.0;
        for (std::size_t b = start; b < stop; ++b) {
          const Backprop bp = backward(net, result.train[order[b]], loss_cfg);
          for (std::size_t k = 0; k < num_params; ++k) grad[k] += bp.grad[k] * inv;
          const TotalLoss& tl = bp.loss.loss;
          batch_total += tl.total * inv;
          rec.seg += tl.seg * inv;
          rec.depth += tl.depth * inv;
          rec.conf += tl.conf * inv;
          rec.dir += tl.dir * inv;
          rec.evi += tl.evi * inv;
          rec.iou += tl.iou * inv;
        }
        rec.total += batch_total;
        ++batches;
        for (std::size_t k = 0; k < num_params; ++k) {
          velocity[k] = cfg.momentum * velocity[k] - cfg.learning_rate * grad[k];
          net.param(k) += velocity[k];
        }
      }
    } catch (const NumericError& e) {
      result.diverged = true;
      result.failure = fmt::format("epoch {}: {}", epoch, e.what());
      return result;
    } catch (const InvariantViolation& e) {
      result.diverged = true;
      result.failure = fmt::format("epoch {}: {}", epoch, e.what());
      return result;
    }
    const double nb = static_cast<double>(batches);
    for (double* v : {&rec.total, &rec.seg, &rec.depth, &rec.conf, &rec.dir, &rec.evi, &rec.iou}) {
      *v /= nb;
    }
    if (!std::isfinite(rec.total)) {
      result.diverged = true;
      result.failure = fmt::format("epoch {}: non-finite mean loss", epoch);
      return result;
    }

    Evaluation ev;
    try {
      ev = evaluate(net, result.val, result.scaling);
    } catch (const std::exception& e) {
      result.diverged = true;
      result.failure = fmt::format("epoch {}: validation failed: {}", epoch, e.what());
      return result;
    }
    std::vector<double> u(ev.epistemic.size()), r(ev.epistemic.size());
    for (std::size_t j = 0; j < kNumBoxParams; ++j) {
      double sum = 0.0;
      for (std::size_t i = 0; i < ev.epistemic.size(); ++i) {
        u[i] = ev.epistemic[i][j];
        r[i] = std::abs(ev.residual[i][j]);
        sum += u[i];
      }
      rec.mean_epistemic[j] = sum / static_cast<double>(u.size());
      try {
        rec.val_spearman[j] = spearman(u, r);
      } catch (const UndefinedResult&) {
        rec.val_spearman[j] = std::numeric_limits<double>::quiet_NaN();
      }
    }
    result.history.epochs.push_back(rec);
  }
  return result;
}

}  // namespace edl3d::bench
