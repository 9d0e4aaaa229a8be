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

#include "edl3d/workflows.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "edl3d/error.hpp"

namespace edl3d {

namespace fs = std::filesystem;

namespace {

std::set<std::string> stems_in(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw IoError(fmt::format("'{}' is not a directory", dir.string()));
  }
  std::set<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") {
      out.insert(entry.path().stem().string());
    }
  }
  return out;
}

bool keep_prediction(const PseudoLabel& p, const FilterOptions& filter) {
  if (p.label.type != filter.object_class) return false;
  if (filter.min_points && p.points && *p.points < *filter.min_points) return false;
  return true;
}

}  // namespace

FrameMatch match_frames(const fs::path& labels_dir, const fs::path& preds_dir) {
  const auto labels = stems_in(labels_dir);
  const auto preds = stems_in(preds_dir);
  FrameMatch m;
  std::set_intersection(labels.begin(), labels.end(), preds.begin(), preds.end(),
                        std::back_inserter(m.stems));
  std::set_difference(labels.begin(), labels.end(), preds.begin(), preds.end(),
                      std::back_inserter(m.only_in_labels));
  std::set_difference(preds.begin(), preds.end(), labels.begin(), labels.end(),
                      std::back_inserter(m.only_in_preds));
  return m;
}

std::vector<ObjectPair> match_objects(const std::vector<Box3D>& gts,
                                      const std::vector<Box3D>& preds) {
  std::vector<ObjectPair> candidates;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    for (std::size_t p = 0; p < preds.size(); ++p) {
      const double iou = iou_3d(gts[g], preds[p]);
      if (iou > 0.0) candidates.push_back({g, p, iou});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const ObjectPair& a, const ObjectPair& b) { return a.iou > b.iou; });
  std::vector<bool> gt_used(gts.size(), false), pred_used(preds.size(), false);
  std::vector<ObjectPair> out;
  for (const auto& c : candidates) {
    if (gt_used[c.gt] || pred_used[c.pred]) continue;
    gt_used[c.gt] = pred_used[c.pred] = true;
    out.push_back(c);
  }
  std::sort(out.begin(), out.end(),
            [](const ObjectPair& a, const ObjectPair& b) { return a.gt < b.gt; });
  return out;
}

MatchedSet load_matched(const fs::path& labels_dir, const fs::path& preds_dir,
                        const FilterOptions& filter) {
  MatchedSet set;
  set.frames = match_frames(labels_dir, preds_dir);
  for (const auto& stem : set.frames.stems) {
    std::vector<Box3D> gts;
    for (const auto& k : read_kitti_file(labels_dir / (stem + ".txt"))) {
      if (k.evaluable() && k.type == filter.object_class) gts.push_back(to_box3d(k));
    }
    std::vector<PseudoLabel> preds;
    for (auto& p : read_pseudo_label_file(preds_dir / (stem + ".txt"))) {
      if (keep_prediction(p, filter)) preds.push_back(std::move(p));
    }
    std::vector<Box3D> pred_boxes;
    std::vector<Detection> dets;
    for (const auto& p : preds) {
      pred_boxes.push_back(p.box());
      dets.push_back({pred_boxes.back(), p.confidence});
    }
    const auto pairs = match_objects(gts, pred_boxes);
    for (const auto& pr : pairs) {
      set.records.push_back({pred_boxes[pr.pred], gts[pr.gt], preds[pr.pred].uncertainty});
    }
    set.unmatched_gt += gts.size() - pairs.size();
    set.unmatched_pred += pred_boxes.size() - pairs.size();
    set.detections.push_back(std::move(dets));
    set.ground_truth.push_back(std::move(gts));
  }
  return set;
}

CalibrateSummary calibrate_dirs(const fs::path& labels_dir, const fs::path& preds_dir,
                                const FilterOptions& filter) {
  CalibrateSummary out;
  out.data = load_matched(labels_dir, preds_dir, filter);
  std::vector<UncertaintyVector> raw;
  std::vector<std::array<double, kNumBoxParams>> residuals;
  for (const auto& r : out.data.records) {
    raw.push_back(r.uncertainty);
    residuals.push_back(r.residuals());
  }
  out.map = fit_calibration(raw, residuals);
  return out;
}

std::size_t apply_dir(const CalibrationMap& map, const Epsilon& eps, const fs::path& in_dir,
                      const fs::path& out_dir) {
  const auto stems = stems_in(in_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", out_dir.string(), ec.message()));
  for (const auto& stem : stems) {
    auto records = read_pseudo_label_file(in_dir / (stem + ".txt"));
    for (auto& r : records) r.uncertainty = apply_calibration(r.uncertainty, map, eps);
    write_pseudo_labels(records, out_dir / (stem + ".txt"));
  }
  return stems.size();
}

EvalSummary eval_dirs(const fs::path& labels_dir, const fs::path& preds_dir,
                      const std::optional<CalibrationMap>& map, double iou_thresh,
                      const FilterOptions& filter) {
  EvalSummary out;
  out.data = load_matched(labels_dir, preds_dir, filter);
  if (map) {
    for (auto& r : out.data.records) r.uncertainty = apply_calibration(r.uncertainty, *map);
  }
  if (out.data.records.size() >= 3) out.report = uncertainty_report(out.data.records);
  out.ap_r40 = ap_r40(out.data.detections, out.data.ground_truth, iou_thresh);
  return out;
}

std::vector<PseudoLabel> vote_file(const fs::path& in, const VotingConfig& cfg) {
  const auto records = read_pseudo_label_file(in);
  std::vector<ScoredGaussianBox> candidates;
  candidates.reserve(records.size());
  for (const auto& r : records) {
    GaussianBox g;
    g.mean = r.box();
    g.var = r.uncertainty.values;
    candidates.push_back({g, r.confidence});
  }
  const auto merged = variance_voting(candidates, cfg);

  std::vector<PseudoLabel> out;
  out.reserve(merged.size());
  for (const auto& m : merged) {
    PseudoLabel p = records[m.head];
    p.label = from_box3d(m.box.mean, p.label);
    p.uncertainty.values = m.box.var;
    p.confidence = m.score;
    out.push_back(std::move(p));
  }
  return out;
}

BenchReport summarize_bench(const bench::TrainResult& result) {
  BenchReport rep;
  rep.initial_loss = result.history.initial_loss;
  if (!result.history.epochs.empty()) rep.final_loss = result.history.epochs.back().total;

  const auto ev = bench::evaluate(result.net, result.val, result.scaling);
  const std::size_t n = ev.epistemic.size();
  std::vector<std::size_t> by_noise(n);
  std::iota(by_noise.begin(), by_noise.end(), 0);
  std::stable_sort(by_noise.begin(), by_noise.end(), [&](std::size_t a, std::size_t b) {
    return result.val[a].noise_scale < result.val[b].noise_scale;
  });
  const std::size_t decile = std::max<std::size_t>(1, n / 10);

  std::vector<double> u(n), r(n);
  for (std::size_t j = 0; j < kNumBoxParams; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      u[i] = ev.epistemic[i][j];
      r[i] = std::abs(ev.residual[i][j]);
    }
    rep.val_spearman[j] = spearman(u, r);
    double lo = 0.0, hi = 0.0;
    for (std::size_t k = 0; k < decile; ++k) {
      lo += u[by_noise[k]];
      hi += u[by_noise[n - 1 - k]];
    }
    rep.bottom_decile_epistemic[j] = lo / static_cast<double>(decile);
    rep.top_decile_epistemic[j] = hi / static_cast<double>(decile);
  }
  return rep;
}

}  // namespace edl3d
