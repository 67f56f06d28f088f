#pragma once

#include "dpimap/common.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dpimap::sim {

enum class Protocol : std::uint8_t { kBroadcast, kFeedback, kDpi };
enum class Mobility : std::uint8_t { kRandomWaypoint, kAnchored };
enum class WeightSource : std::uint8_t { kVisual, kAuditory };
enum class AdUpdate : std::uint8_t { kPosition, kKinematic };
enum class VelocityFrame : std::uint8_t { kRelative, kGround };

inline std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::kBroadcast: return "broadcast";
    case Protocol::kFeedback: return "feedback";
    case Protocol::kDpi: return "dpi";
  }
  return "?";
}

inline std::optional<Protocol> parse_protocol(const std::string& s) {
  if (s == "broadcast") return Protocol::kBroadcast;
  if (s == "feedback") return Protocol::kFeedback;
  if (s == "dpi") return Protocol::kDpi;
  return std::nullopt;
}

// Configuration problem; `fields` names every offending key.
class ConfigError : public InvalidInput {
 public:
  ConfigError(const std::string& what, std::vector<std::string> fields)
      : InvalidInput(what), fields_(std::move(fields)) {}
  const std::vector<std::string>& fields() const { return fields_; }

 private:
  std::vector<std::string> fields_;
};

struct SimConfig {
  int num_uavs = 40;
  Vec3 region{600.0, 600.0, 150.0};  // m
  double v_min = 5.0;                // m/s
  double v_max = 20.0;               // m/s
  double beacon_interval = 1.0;      // s
  double vd_interval = 0.1;          // s, also the simulation tick
  double comm_range = 150.0;         // m
  double sense_range = 150.0;        // m
  double rssi_sigma = 5.0 / std::sqrt(10.0);  // m
  double gnss_sigma = 3.0;                    // m
  double ec_rate = 10.0;                      // EC senders per second
  double alpha = 1.0;
  double epsilon = 0.02;
  double tx_airtime = 0.002;        // s per message
  double proc_jitter_mean = 0.001;  // s, exponential
  double contention_slot = 1e-4;    // s of mean access delay per node in range
  double duration = 5.0;            // s
  double warmup = 2.0;              // s before EC events start
  double settle_timeout = 1.0;      // s
  std::uint64_t seed = 1;
  Protocol protocol = Protocol::kDpi;

  // visual sensor noise
  double sigma_r = 0.5;
  double sigma_theta = 0.02;
  double sigma_phi = 0.02;
  double sigma_app = 0.05;

  // tracking / matching
  double kf_q = 0.5;  // white-acceleration spectral density, m^2/s^3
  double assoc_gate = 0.5;
  double assoc_gamma = 0.7;
  int track_max_misses = 3;
  double innovation_gate = 25.0;  // m
  bool bim_exchange = true;
  double match_gate = 0.0;   // pair similarity below this carries no evidence
  double match_position_gate = 17.0;  // m, VD-AD relative position disagreement
  int min_track_frames = 3;  // frames before a track joins the visual set
  WeightSource weight_source = WeightSource::kVisual;
  bool complement_distinguishability = false;
  bool magnitude_aware = false;
  AdUpdate ad_update = AdUpdate::kPosition;
  VelocityFrame velocity_frame = VelocityFrame::kRelative;

  Mobility mobility = Mobility::kRandomWaypoint;
  double anchor_spacing = 40.0;   // m, lattice pitch in anchored mode
  double anchor_halfwidth = 9.9;  // m, per-axis excursion around the anchor

  std::string log_path;

  // Throws ConfigError listing every invalid field.
  void validate() const {
    std::vector<std::string> bad;
    auto need = [&](bool ok, const char* name) {
      if (!ok) bad.emplace_back(name);
    };
    need(num_uavs >= 0, "num_uavs");
    need(region.minCoeff() > 0.0 && region.allFinite(), "region");
    need(v_min >= 0.0, "v_min");
    need(v_max >= v_min, "v_max");
    need(beacon_interval > 0.0, "beacon_interval");
    need(vd_interval > 0.0, "vd_interval");
    need(comm_range > 0.0, "comm_range");
    need(sense_range > 0.0, "sense_range");
    need(rssi_sigma >= 0.0, "rssi_sigma");
    need(gnss_sigma >= 0.0, "gnss_sigma");
    need(ec_rate > 0.0, "ec_rate");
    need(alpha > 0.0, "alpha");
    need(epsilon > 0.0, "epsilon");
    need(tx_airtime > 0.0, "tx_airtime");
    need(proc_jitter_mean >= 0.0, "proc_jitter_mean");
    need(contention_slot >= 0.0, "contention_slot");
    need(duration >= 0.0, "duration");
    need(warmup >= 0.0, "warmup");
    need(settle_timeout > 0.0, "settle_timeout");
    need(sigma_r >= 0.0, "sigma_r");
    need(sigma_theta >= 0.0, "sigma_theta");
    need(sigma_phi >= 0.0, "sigma_phi");
    need(sigma_app >= 0.0, "sigma_app");
    need(kf_q >= 0.0, "kf_q");
    need(assoc_gate >= 0.0 && assoc_gate <= 1.0, "assoc_gate");
    need(assoc_gamma >= 0.0 && assoc_gamma <= 1.0, "assoc_gamma");
    need(track_max_misses >= 0, "track_max_misses");
    need(innovation_gate > 0.0, "innovation_gate");
    need(match_gate >= 0.0 && match_gate <= 1.0, "match_gate");
    need(match_position_gate > 0.0, "match_position_gate");
    need(min_track_frames >= 1, "min_track_frames");
    need(anchor_spacing > 0.0, "anchor_spacing");
    need(anchor_halfwidth >= 0.0, "anchor_halfwidth");
    if (!bad.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& b : bad) msg += " " + b;
      throw ConfigError(msg, bad);
    }
  }
};

}  // namespace dpimap::sim
