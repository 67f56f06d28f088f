#pragma once

// Two-UAV ranging trial: a leader and a follower flying the same heading,
// both climbing, the follower closing from behind and below. Compares
// AD-only (RSSI), VD-only (converted polar) and fused range errors.

#include "dpimap/sim/config.hpp"
#include "dpimap/sim/metrics.hpp"
#include "dpimap/sim/node.hpp"
#include "dpimap/sim/perception.hpp"
#include "dpimap/track.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace dpimap::sim {

struct RangingScenario {
  double observer_height = 15.0;  // m
  double target_height = 10.0;    // m
  double trailing = 8.0;          // m, horizontal gap behind the observer
  double observer_speed = 2.0;    // m/s, forward and climb
  double target_speed = 2.5;      // m/s, forward and climb
  double duration = 10.0;         // s
  double frame_interval = 0.1;    // s
  double beacon_interval = 1.0;   // s
  double rssi_sigma = 5.0 / std::sqrt(10.0);
  double gnss_sigma = 3.0;
  VisualNoise visual;
  double kf_q = 0.5;

  void validate() const {
    if (!(duration > 0.0) || !(frame_interval > 0.0) || !(beacon_interval > 0.0)) {
      throw InvalidInput("RangingScenario: duration and intervals must be > 0");
    }
    if (!(rssi_sigma >= 0.0) || !(gnss_sigma >= 0.0)) throw InvalidInput("RangingScenario: sigmas must be >= 0");
  }
};

struct RangingResult {
  std::vector<double> ad_error, vd_error, fused_error;  // m, one per frame
  double ad_p90() const { return percentile(ad_error, 0.9); }
  double vd_p90() const { return percentile(vd_error, 0.9); }
  double fused_p90() const { return percentile(fused_error, 0.9); }
};

// One trial; the seed picks the start location and heading.
inline RangingResult run_ranging_trial(const RangingScenario& sc, std::uint64_t seed) {
  sc.validate();
  Rng rng(seed);
  const double heading = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  const Vec3 fwd(std::cos(heading), std::sin(heading), 0.0);
  const Vec3 up = Vec3::UnitZ();
  const Vec3 start(std::uniform_real_distribution<double>(-50.0, 50.0)(rng),
                   std::uniform_real_distribution<double>(-50.0, 50.0)(rng), 0.0);

  UavNode observer, target;
  observer.did = DigitalIdentity{1};
  target.did = DigitalIdentity{2};
  observer.position = start + sc.observer_height * up;
  target.position = start - sc.trailing * fwd + sc.target_height * up;
  observer.velocity = sc.observer_speed * (fwd + up);
  target.velocity = sc.target_speed * (fwd + up);
  observer.appearance_truth = target.appearance_truth = FeatureVector{0.5, 0.5, 0.5};

  const auto model = MotionModel::constant_velocity(sc.frame_interval, sc.kf_q);
  const double rel_speed = (sc.target_speed - sc.observer_speed) * std::sqrt(2.0);
  const double velocity_var = std::max(1.0, 4.0 * rel_speed * rel_speed);
  const auto frames = static_cast<int>(std::llround(sc.duration / sc.frame_interval));
  const auto beacon_every = std::max(1, static_cast<int>(std::llround(sc.beacon_interval / sc.frame_interval)));
  const double ad_var = 2.0 * sc.gnss_sigma * sc.gnss_sigma + kNoiseFloor;

  RangingResult out;
  std::optional<TrackState> track;
  for (int f = 0; f < frames; ++f) {
    if (f > 0) {
      observer.position += observer.velocity * sc.frame_interval;
      target.position += target.velocity * sc.frame_interval;
    }
    const double truth = (target.position - observer.position).norm();
    const auto sample = sense_visual(observer, target, std::numeric_limits<double>::infinity(), sc.visual, rng);
    ConvertedMeasurement z = unbiased_convert(sample->polar);
    z.R += kNoiseFloor * Mat3::Identity();
    track = track ? kf_update(kf_predict(*track, model), z) : track_from_measurement(z, velocity_var);
    if (f % beacon_every == 0) {
      const Beacon own = emit_beacon(observer, 0.0, sc.gnss_sigma, rng);
      const Beacon nb = emit_beacon(target, 0.0, sc.gnss_sigma, rng);
      ConvertedMeasurement ad;
      ad.p = nb.position - own.position;
      ad.R = ad_var * Mat3::Identity();
      track = kf_update(*track, ad);
    }
    const double rssi = *rssi_range(target.position, observer.position,
                                    std::numeric_limits<double>::infinity(), sc.rssi_sigma, rng);
    out.ad_error.push_back(std::abs(rssi - truth));
    out.vd_error.push_back(std::abs(z.corrected().norm() - truth));
    out.fused_error.push_back(std::abs(track->position().norm() - truth));
  }
  return out;
}

}  // namespace dpimap::sim
