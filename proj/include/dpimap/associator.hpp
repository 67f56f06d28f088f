#pragma once

// Frame-to-frame association of visual detections with predicted tracks by
// cosine similarity of the predicted and measured relative positions,
// optionally blended with appearance similarity. One-to-one via the matcher.

#include "dpimap/bim.hpp"
#include "dpimap/common.hpp"
#include "dpimap/identity.hpp"
#include "dpimap/track.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace dpimap {

struct VisualDetection {
  ConvertedMeasurement z;
  std::optional<FeatureVector> appearance;
};

struct AssociationOptions {
  double gate = 0.5;   // minimum score to associate
  double gamma = 0.7;  // position share of the blended score when appearance is present
  // Cosine scores of nearby bearings differ by ~1e-4, so the increment
  // must be far below the matcher default.
  AuctionParams auction{1.0, 1e-7, true};
  double tie_tolerance = 1e-12;
  // Pairs farther apart than this (m) are gated out as well; off by default.
  double distance_gate = std::numeric_limits<double>::infinity();
};

struct AssociationResult {
  std::vector<std::pair<std::size_t, std::size_t>> mapping;  // (measurement, track), by measurement
  std::vector<std::size_t> unassociated_measurements;
  std::vector<std::size_t> unassociated_tracks;
};

inline MatX association_scores(std::span<const VisualDetection> measurements,
                               std::span<const TrackState> tracks, const MotionModel& model,
                               const AssociationOptions& opts = {}) {
  MatX S(static_cast<Eigen::Index>(measurements.size()), static_cast<Eigen::Index>(tracks.size()));
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    const auto y = FeatureVector::from(measurements[k].z.corrected());
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const Vec3 predicted = model.H * tracks[i].x;
      double s = cosine_similarity(y, FeatureVector::from(predicted));
      if (measurements[k].appearance && tracks[i].appearance) {
        s = opts.gamma * s +
            (1.0 - opts.gamma) * cosine_similarity(*measurements[k].appearance, *tracks[i].appearance);
      }
      S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = s;
    }
  }
  return S;
}

inline MatX gate(const MatX& S, double threshold = 0.5) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw InvalidInput("gate: threshold must lie in [0, 1]");
  return (S.array() < threshold).select(MatX::Zero(S.rows(), S.cols()), S);
}

inline AssociationResult associate(std::span<const VisualDetection> measurements,
                                   std::span<const TrackState> tracks, const MotionModel& model,
                                   const AssociationOptions& opts = {}) {
  MatX S = gate(association_scores(measurements, tracks, model, opts), opts.gate);
  if (std::isfinite(opts.distance_gate)) {
    for (std::size_t k = 0; k < measurements.size(); ++k) {
      for (std::size_t i = 0; i < tracks.size(); ++i) {
        if ((measurements[k].z.corrected() - model.H * tracks[i].x).norm() > opts.distance_gate) {
          S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = 0.0;
        }
      }
    }
  }
  const MatX costs = S.cwiseMax(kSimilarityFloor).cwiseInverse();

  BimOptions bim;
  bim.auction = opts.auction;
  bim.exchange = false;
  auto matched = bim_match(CostMatrix(costs), bim).pairs;

  // Equal-score alternatives resolve to the smaller total Euclidean distance.
  auto dist = [&](std::size_t k, std::size_t i) {
    return (measurements[k].z.corrected() - model.H * tracks[i].x).norm();
  };
  auto score = [&](std::size_t k, std::size_t i) {
    return S(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i));
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t a = 0; a < matched.size() && !changed; ++a) {
      for (std::size_t b = a + 1; b < matched.size() && !changed; ++b) {
        const auto ka = matched[a].visual, ia = matched[a].auditory;
        const auto kb = matched[b].visual, ib = matched[b].auditory;
        if (score(ka, ib) <= 0.0 || score(kb, ia) <= 0.0) continue;
        const double now = score(ka, ia) + score(kb, ib);
        const double swapped = score(ka, ib) + score(kb, ia);
        if (std::abs(now - swapped) > opts.tie_tolerance) continue;
        if (dist(ka, ib) + dist(kb, ia) < dist(ka, ia) + dist(kb, ib)) {
          matched[a].auditory = ib;
          matched[b].auditory = ia;
          changed = true;
        }
      }
    }
  }

  AssociationResult out;
  std::vector<bool> track_used(tracks.size(), false), meas_used(measurements.size(), false);
  for (const auto& p : matched) {
    out.mapping.emplace_back(p.visual, p.auditory);
    meas_used[p.visual] = true;
    track_used[p.auditory] = true;
  }
  std::sort(out.mapping.begin(), out.mapping.end());
  for (std::size_t k = 0; k < measurements.size(); ++k) {
    if (!meas_used[k]) out.unassociated_measurements.push_back(k);
  }
  for (std::size_t i = 0; i < tracks.size(); ++i) {
    if (!track_used[i]) out.unassociated_tracks.push_back(i);
  }
  return out;
}

}  // namespace dpimap
