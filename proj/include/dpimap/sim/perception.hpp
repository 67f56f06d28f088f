#pragma once

// Per-node DPI pipeline: visual tracking every frame, D-ID/P-ID matching
// whenever new beacons have arrived, and cross-domain fusion of matched pairs.

#include "dpimap/associator.hpp"
#include "dpimap/bim.hpp"
#include "dpimap/identity.hpp"
#include "dpimap/sim/config.hpp"
#include "dpimap/sim/node.hpp"
#include "dpimap/track.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace dpimap::sim {

enum class VdVelocity : std::uint8_t {
  kTrack,            // filter velocity estimate
  kFrameDifference,  // converted positions differenced over consecutive frames
};

// Keeps noise-free runs well posed.
inline constexpr double kNoiseFloor = 1e-6;  // m^2

struct PerceptionParams {
  MotionModel model = MotionModel::constant_velocity(0.1, 5.0);
  AssociationOptions assoc;
  BimOptions bim;
  double beacon_interval = 1.0;
  double gnss_sigma = 3.0;
  double new_track_velocity_var = 1600.0;
  int max_misses = 3;
  double innovation_gate = 25.0;  // m, largest accepted frame-to-frame jump
  double match_gate = 0.0;
  double match_position_gate = 17.0;
  int min_track_frames = 3;
  WeightSource weight_source = WeightSource::kVisual;
  AdUpdate ad_update = AdUpdate::kPosition;
  VdVelocity vd_velocity = VdVelocity::kFrameDifference;
  VelocityFrame velocity_frame = VelocityFrame::kRelative;

  static PerceptionParams from(const SimConfig& c) {
    PerceptionParams p;
    p.model = MotionModel::constant_velocity(c.vd_interval, c.kf_q);
    p.assoc.gate = c.assoc_gate;
    p.assoc.gamma = c.assoc_gamma;
    p.bim.auction.alpha = c.alpha;
    p.bim.auction.epsilon = c.epsilon;
    p.bim.similarity.distinguishability = c.complement_distinguishability
                                              ? DistinguishabilityRule::kComplementProduct
                                              : DistinguishabilityRule::kLiteral;
    p.bim.similarity.magnitude_aware = c.magnitude_aware;
    p.beacon_interval = c.beacon_interval;
    p.gnss_sigma = c.gnss_sigma;
    const double rel = 2.0 * c.v_max;
    p.new_track_velocity_var = rel * rel / 3.0;
    p.max_misses = c.track_max_misses;
    p.innovation_gate = c.innovation_gate;
    p.assoc.distance_gate = c.innovation_gate;
    p.match_gate = c.match_gate;
    p.match_position_gate = c.match_position_gate;
    p.min_track_frames = c.min_track_frames;
    p.bim.exchange = c.bim_exchange;
    p.weight_source = c.weight_source;
    p.ad_update = c.ad_update;
    p.velocity_frame = c.velocity_frame;
    return p;
  }
};

// One frame of visual detections with hidden ground-truth labels.
struct Frame {
  std::vector<VisualDetection> detections;
  std::vector<double> measured_range;  // raw polar range per detection
  std::vector<std::uint32_t> truth;    // target UAV index per detection
};

// Outcome of one matching epoch, for accounting.
struct MatchReport {
  bool ran = false;
  std::uint64_t checked = 0;
  std::uint64_t correct = 0;
  std::vector<double> ad_error, vd_error, fused_error;
};

struct ObservationSets {
  ObservationSet visual;
  ObservationSet auditory;
  std::vector<std::size_t> visual_tracks;  // track index per visual member
  std::vector<Vec3> visual_measured;       // converted relative position per visual member
};

inline Vec3 own_position_estimate(const Beacon& fix, double now) {
  return fix.position + fix.velocity * (now - fix.sent_at);
}

// Neighbour position relative to the own navigation solution, both
// extrapolated to `now` with their reported velocities.
inline Vec3 beacon_relative_position(const Beacon& b, const Beacon& own, double now) {
  return b.position + b.velocity * (now - b.sent_at) - own_position_estimate(own, now);
}

inline void drop_stale_beacons(NeighborTable& table, double now, double beacon_interval) {
  for (auto it = table.heard.begin(); it != table.heard.end();) {
    if (now - it->second.beacon.sent_at > 2.0 * beacon_interval + 1e-9) {
      it = table.heard.erase(it);
    } else {
      ++it;
    }
  }
}

// Visual members: tracks observed in this frame (`observed[i]` holds the
// detection index for track i or -1). Auditory members: every beacon
// still within the staleness window.
inline ObservationSets build_observation_sets(const NeighborTable& table,
                                              std::span<const int> observed, const Frame& frame,
                                              std::int64_t epoch, double now, VdVelocity vd_velocity,
                                              VelocityFrame velocity_frame = VelocityFrame::kRelative,
                                              int min_frames = 1) {
  ObservationSets out;
  out.visual.domain = Domain::kVisual;
  out.visual.epoch = epoch;
  out.auditory.domain = Domain::kAuditory;
  out.auditory.epoch = epoch;
  for (std::size_t i = 0; i < table.tracks.size(); ++i) {
    const auto& trk = table.tracks[i];
    if (observed[i] < 0 || trk.frames < min_frames) continue;
    const Vec3 rel_p = frame.detections[static_cast<std::size_t>(observed[i])].z.corrected();
    Vec3 rel_v = vd_velocity == VdVelocity::kTrack ? trk.state.velocity() : trk.frame_velocity;
    if (velocity_frame == VelocityFrame::kGround && table.own_fix) rel_v += table.own_fix->velocity;
    PhysicalIdentity id;
    id.domain = Domain::kVisual;
    id.epoch = epoch;
    id.features = {FeatureVector::from(rel_p), FeatureVector::from(rel_v)};
    out.visual.identities.push_back(std::move(id));
    out.visual_tracks.push_back(i);
    out.visual_measured.push_back(rel_p);
  }
  if (!table.own_fix) return out;
  const Beacon& own = *table.own_fix;
  for (const auto& [did, heard] : table.heard) {
    PhysicalIdentity id;
    id.domain = Domain::kAuditory;
    id.epoch = epoch;
    id.features = {FeatureVector::from(beacon_relative_position(heard.beacon, own, now)),
                   FeatureVector::from(velocity_frame == VelocityFrame::kGround
                                           ? heard.beacon.velocity
                                           : Vec3(heard.beacon.velocity - own.velocity))};
    out.auditory.identities.push_back(std::move(id));
    out.auditory.digital_ids.push_back(did);
  }
  return out;
}

// Pairs that are dissimilar or whose relative positions disagree by more
// than the position gate become C_MAX, which the matcher leaves unmatched.
inline CostMatrix gate_costs(const CostMatrix& costs, const ObservationSets& sets,
                             const PerceptionParams& params) {
  MatX gated = costs.entries().topLeftCorner(static_cast<Eigen::Index>(costs.real_rows()),
                                             static_cast<Eigen::Index>(costs.real_cols()));
  const double cost_gate = 1.0 / std::max(params.match_gate, kSimilarityFloor);
  for (Eigen::Index m = 0; m < gated.rows(); ++m) {
    const Vec3& vp = sets.visual_measured[static_cast<std::size_t>(m)];
    for (Eigen::Index a = 0; a < gated.cols(); ++a) {
      const auto& ap = sets.auditory.identities[static_cast<std::size_t>(a)].features[0].values();
      if (gated(m, a) > cost_gate || (vp - ap).norm() > params.match_position_gate) {
        gated(m, a) = kCostMax;
      }
    }
  }
  return CostMatrix(gated);
}

// Predict every track, compensating the observer's own velocity change
// (known from its navigation system) since tracks live in relative coordinates.
inline void predict_tracks(NeighborTable& table, const MotionModel& model, const Vec3& own_dv) {
  for (auto& trk : table.tracks) {
    trk.state = kf_predict(trk.state, model);
    trk.state.x.tail<3>() -= own_dv;
  }
}

// One frame of the DPI pipeline at node `self`. `truth_did` maps UAV index
// to its D-ID and `truth_pos` holds true positions; both are used only for
// the returned accounting.
inline MatchReport dpi_pipeline_step(UavNode& self, const Frame& frame, std::int64_t epoch, double now,
                                     const Vec3& own_dv, const PerceptionParams& params,
                                     std::span<const DigitalIdentity> truth_did,
                                     std::span<const Vec3> truth_pos) {
  NeighborTable& table = self.table;
  predict_tracks(table, params.model, own_dv);

  std::vector<TrackState> states;
  states.reserve(table.tracks.size());
  for (const auto& t : table.tracks) states.push_back(t.state);
  const auto assoc = associate(frame.detections, states, params.model, params.assoc);

  std::vector<int> observed(table.tracks.size(), -1);
  std::vector<bool> claimed(frame.detections.size(), false);
  for (const auto& [k, i] : assoc.mapping) {
    auto& trk = table.tracks[i];
    const auto& det = frame.detections[k];
    // bearing similarity alone lets a lost track grab a newcomer far away
    if ((det.z.corrected() - trk.state.position()).norm() > params.innovation_gate) {
      continue;
    }
    claimed[k] = true;
    ConvertedMeasurement z = det.z;
    z.R += kNoiseFloor * Mat3::Identity();
    trk.state = kf_update(trk.state, z);
    if (det.appearance) {
      trk.state.appearance = trk.state.appearance
                                 ? FeatureVector(VecX(0.8 * trk.state.appearance->values() +
                                                      0.2 * det.appearance->values()))
                                 : *det.appearance;
    }
    const Vec3 pos = det.z.corrected();
    trk.frame_velocity = trk.last_position ? Vec3((pos - *trk.last_position) / params.model.dt)
                                           : trk.state.velocity();
    trk.last_position = pos;
    ++trk.frames;
    trk.misses = 0;
    trk.truth = frame.truth[k];
    observed[i] = static_cast<int>(k);
  }
  for (std::size_t i = 0; i < table.tracks.size(); ++i) {
    if (observed[i] >= 0) continue;
    ++table.tracks[i].misses;
    table.tracks[i].last_position.reset();
  }

  MatchReport report;
  drop_stale_beacons(table, now, params.beacon_interval);
  if (table.pending_match && table.own_fix) {
    table.pending_match = false;
    const auto sets = build_observation_sets(table, observed, frame, epoch, now, params.vd_velocity,
                                             params.velocity_frame, params.min_track_frames);
    if (!sets.visual.empty() && !sets.auditory.empty()) {
      report.ran = true;
      const auto w = params.weight_source == WeightSource::kVisual
                         ? dynamic_weights(sets.visual, params.bim.similarity)
                         : dynamic_weights(sets.auditory, params.bim.similarity);
      const auto costs = build_cost_matrix(sets.visual, sets.auditory, w, params.bim.similarity);
      const auto result = bim_match(gate_costs(costs, sets, params), params.bim);
      const Beacon& own = *table.own_fix;
      const double sg2 = params.gnss_sigma * params.gnss_sigma;
      for (const auto& pair : result.pairs) {
        const DigitalIdentity did = sets.auditory.digital_ids[pair.auditory];
        const std::size_t ti = sets.visual_tracks[pair.visual];
        for (auto& other : table.tracks) {
          if (other.state.bound_did == did) other.state.bound_did.reset();
        }
        auto& trk = table.tracks[ti];
        trk.state = bind_identity(trk.state, did);
        auto& heard = table.heard.at(did);
        if (!heard.fresh) continue;
        // The visual update for this frame is already applied; the
        // auditory one completes the sequential fusion.
        const double age = now - heard.beacon.sent_at;
        const double pos_var = 2.0 * sg2 * (1.0 + 0.01 * age * age) + kNoiseFloor;
        const Vec3 rel_p = beacon_relative_position(heard.beacon, own, now);
        if (params.ad_update == AdUpdate::kPosition) {
          ConvertedMeasurement ad;
          ad.p = rel_p;
          ad.R = pos_var * Mat3::Identity();
          trk.state = kf_update(trk.state, ad);
        } else {
          KinematicObservation ad;
          ad.z << rel_p, heard.beacon.velocity - own.velocity;
          ad.R.setZero();
          ad.R.topLeftCorner<3, 3>() = pos_var * Mat3::Identity();
          ad.R.bottomRightCorner<3, 3>() = (0.02 * sg2 + kNoiseFloor) * Mat3::Identity();
          trk.state = kf_update(trk.state, ad);
        }
      }

      std::vector<bool> in_ad(truth_did.size(), false);
      for (const auto& did : sets.auditory.digital_ids) {
        // D-IDs are index + 1 in the simulator, but look them up generally.
        for (std::size_t u = 0; u < truth_did.size(); ++u) {
          if (truth_did[u] == did) {
            in_ad[u] = true;
            break;
          }
        }
      }
      for (std::size_t m = 0; m < sets.visual_tracks.size(); ++m) {
        const auto& trk = table.tracks[sets.visual_tracks[m]];
        if (!in_ad[trk.truth]) continue;
        ++report.checked;
        const DigitalIdentity truth = truth_did[trk.truth];
        if (trk.state.bound_did == truth) ++report.correct;
        const auto& heard = table.heard.at(truth);
        if (!heard.fresh) continue;
        const double true_range = (truth_pos[trk.truth] - self.position).norm();
        const auto k = static_cast<std::size_t>(observed[sets.visual_tracks[m]]);
        report.ad_error.push_back(std::abs(heard.rssi_range - heard.true_range));
        report.vd_error.push_back(std::abs(frame.measured_range[k] - true_range));
        report.fused_error.push_back(std::abs(trk.state.position().norm() - true_range));
      }
    }
    for (auto& [did, heard] : table.heard) heard.fresh = false;
  }

  for (std::size_t k = 0; k < frame.detections.size(); ++k) {
    if (claimed[k]) continue;
    NeighborTrack trk;
    trk.state = track_from_measurement(frame.detections[k].z, params.new_track_velocity_var, epoch);
    trk.state.appearance = frame.detections[k].appearance;
    trk.last_position = frame.detections[k].z.corrected();
    trk.frames = 1;
    trk.truth = frame.truth[k];
    table.tracks.push_back(std::move(trk));
  }
  std::erase_if(table.tracks, [&](const NeighborTrack& t) { return t.misses > params.max_misses; });
  return report;
}

}  // namespace dpimap::sim
