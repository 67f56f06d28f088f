#pragma once

// Swarm members: random-waypoint kinematics, beaconing and visual sensing.

#include "dpimap/common.hpp"
#include "dpimap/identity.hpp"
#include "dpimap/sim/config.hpp"
#include "dpimap/track.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace dpimap::sim {

using Rng = std::mt19937_64;

// Self-reported kinematics as broadcast in a beacon.
struct Beacon {
  DigitalIdentity did;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  double sent_at = 0.0;
};

// A beacon as held by a receiver.
struct HeardBeacon {
  Beacon beacon;
  double rssi_range = 0.0;   // m
  double true_range = 0.0;   // m, for error accounting only
  bool fresh = true;         // not yet consumed by a matching epoch
};

// One neighbour track plus simulator bookkeeping.
struct NeighborTrack {
  TrackState state;
  std::optional<Vec3> last_position;  // filtered position at the previous frame
  Vec3 frame_velocity = Vec3::Zero(); // position difference over consecutive frames
  int frames = 0;
  int misses = 0;
  std::uint32_t truth = 0;  // UAV index of the last associated detection
};

struct NeighborTable {
  std::vector<NeighborTrack> tracks;
  std::map<DigitalIdentity, HeardBeacon> heard;
  std::optional<Beacon> own_fix;  // own navigation solution at last beacon
  bool pending_match = false;     // new beacons since the last matching epoch
};

struct UavNode {
  DigitalIdentity did;
  std::uint32_t index = 0;
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Vec3 waypoint = Vec3::Zero();
  double speed = 0.0;
  Vec3 anchor = Vec3::Zero();
  FeatureVector appearance_truth;
  int beacon_phase = 0;      // tick offset within the beacon period
  double tx_free_at = 0.0;   // FIFO transmitter: time the queue drains
  NeighborTable table;
};

struct MobilityBounds {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  double v_min = 0.0;
  double v_max = 0.0;
};

inline Vec3 uniform_in(const Vec3& lo, const Vec3& hi, Rng& rng) {
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = std::uniform_real_distribution<double>(lo[k], hi[k])(rng);
  return out;
}

inline void draw_leg(UavNode& node, const MobilityBounds& b, Rng& rng) {
  node.waypoint = uniform_in(b.lo, b.hi, rng);
  node.speed = std::uniform_real_distribution<double>(b.v_min, b.v_max)(rng);
  const Vec3 to = node.waypoint - node.position;
  const double d = to.norm();
  node.velocity = d > kZeroNorm ? Vec3(to / d * node.speed) : Vec3::Zero();
}

// Moves toward the waypoint; on arrival draws the next leg (zero pause).
inline void step_mobility(UavNode& node, double dt, const MobilityBounds& b, Rng& rng) {
  if (!(dt > 0.0)) throw InvalidInput("step_mobility: dt must be > 0");
  const Vec3 to = node.waypoint - node.position;
  const double d = to.norm();
  const double travel = node.speed * dt;
  if (d <= travel) {
    node.position = node.waypoint;
    draw_leg(node, b, rng);
  } else {
    node.position += to / d * travel;
    node.velocity = to / d * node.speed;
  }
  node.position = node.position.cwiseMax(b.lo).cwiseMin(b.hi);
}

inline Vec3 gaussian3(double sigma, Rng& rng) {
  if (sigma == 0.0) return Vec3::Zero();
  std::normal_distribution<double> n(0.0, sigma);
  return {n(rng), n(rng), n(rng)};
}

inline Beacon emit_beacon(const UavNode& node, double now, double gnss_sigma, Rng& rng) {
  Beacon b;
  b.did = node.did;
  b.position = node.position + gaussian3(gnss_sigma, rng);
  b.velocity = node.velocity + gaussian3(0.1 * gnss_sigma, rng);
  b.sent_at = now;
  return b;
}

// RSSI-derived range at the receiver; nullopt beyond comm range.
inline std::optional<double> rssi_range(const Vec3& tx, const Vec3& rx, double comm_range,
                                        double rssi_sigma, Rng& rng) {
  const double d = (tx - rx).norm();
  if (d > comm_range) return std::nullopt;
  if (rssi_sigma == 0.0) return d;
  return std::max(0.0, d + std::normal_distribution<double>(0.0, rssi_sigma)(rng));
}

struct VisualNoise {
  double sigma_r = 0.5;
  double sigma_theta = 0.02;
  double sigma_phi = 0.02;
  double sigma_app = 0.05;
};

struct VisualSample {
  PolarMeasurement polar;
  FeatureVector appearance;
};

// Noisy polar detection of `target` from `observer`; 360 degree coverage.
inline std::optional<VisualSample> sense_visual(const UavNode& observer, const UavNode& target,
                                                double sense_range, const VisualNoise& noise,
                                                Rng& rng) {
  const Vec3 d = target.position - observer.position;
  const double r = d.norm();
  if (r > sense_range) return std::nullopt;
  const double theta = std::atan2(d.y(), d.x());
  const double phi = r > 0.0 ? std::asin(std::clamp(d.z() / r, -1.0, 1.0)) : 0.0;
  std::normal_distribution<double> n(0.0, 1.0);
  VisualSample s;
  s.polar.r = std::max(0.0, r + noise.sigma_r * n(rng));
  s.polar.theta = theta + noise.sigma_theta * n(rng);
  s.polar.phi = std::clamp(phi + noise.sigma_phi * n(rng), -std::numbers::pi / 2, std::numbers::pi / 2);
  s.polar.sigma_r = noise.sigma_r;
  s.polar.sigma_theta = noise.sigma_theta;
  s.polar.sigma_phi = noise.sigma_phi;
  VecX app = target.appearance_truth.values();
  for (Eigen::Index k = 0; k < app.size(); ++k) app[k] += noise.sigma_app * n(rng);
  s.appearance = FeatureVector(std::move(app));
  return s;
}

}  // namespace dpimap::sim
