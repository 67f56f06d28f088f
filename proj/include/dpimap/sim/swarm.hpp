#pragma once

// Seeded discrete-time swarm simulation. One tick per visual frame; beacons
// fire on per-node phase offsets; EC events start after a warm-up.

#include "dpimap/sim/config.hpp"
#include "dpimap/sim/metrics.hpp"
#include "dpimap/sim/node.hpp"
#include "dpimap/sim/perception.hpp"
#include "dpimap/sim/protocols.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <vector>

namespace dpimap::sim {

// Independent streams so protocols see identical mobility and events.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

// Lattice points with the given pitch, centred in the region.
inline std::vector<Vec3> lattice_anchors(const Vec3& region, double pitch, std::size_t count) {
  std::vector<Vec3> out;
  Eigen::Vector3i n;
  for (int k = 0; k < 3; ++k) n[k] = std::max(1, static_cast<int>(std::floor(region[k] / pitch)));
  for (int z = 0; z < n[2] && out.size() < count; ++z) {
    for (int y = 0; y < n[1] && out.size() < count; ++y) {
      for (int x = 0; x < n[0] && out.size() < count; ++x) {
        const Vec3 idx(x, y, z);
        const Vec3 span = (n.cast<double>() - Vec3::Ones()) * pitch;
        out.push_back((region - span) / 2.0 + idx * pitch);
      }
    }
  }
  return out;
}

class Swarm {
 public:
  explicit Swarm(const SimConfig& config, std::ostream* event_log = nullptr)
      : cfg_((config.validate(), config)),
        params_(PerceptionParams::from(cfg_)),
        log_(event_log),
        mobility_rng_(make_stream(cfg_.seed, 1)),
        beacon_rng_(make_stream(cfg_.seed, 2)),
        sense_rng_(make_stream(cfg_.seed, 3)),
        event_rng_(make_stream(cfg_.seed, 4)),
        channel_rng_(make_stream(cfg_.seed, 5)),
        reply_rng_(make_stream(cfg_.seed, 6)),
        nav_rng_(make_stream(cfg_.seed, 7)) {
    ticks_ = static_cast<std::int64_t>(std::llround(cfg_.duration / cfg_.vd_interval));
    beacon_ticks_ = std::max<std::int64_t>(1, std::llround(cfg_.beacon_interval / cfg_.vd_interval));
    noise_ = {cfg_.sigma_r, cfg_.sigma_theta, cfg_.sigma_phi, cfg_.sigma_app};
    channel_ = {cfg_.tx_airtime, cfg_.proc_jitter_mean, cfg_.contention_slot, &channel_rng_};

    const auto n = static_cast<std::size_t>(cfg_.num_uavs);
    std::vector<Vec3> anchors;
    if (cfg_.mobility == Mobility::kAnchored) {
      anchors = lattice_anchors(cfg_.region, cfg_.anchor_spacing, n);
      if (anchors.size() < n) {
        throw ConfigError("anchored mobility: region holds only " + std::to_string(anchors.size()) +
                              " anchors",
                          {"num_uavs", "anchor_spacing"});
      }
    }
    nodes_.resize(n);
    bounds_.resize(n);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      UavNode& node = nodes_[i];
      node.index = static_cast<std::uint32_t>(i);
      node.did = DigitalIdentity{static_cast<std::uint32_t>(i + 1)};
      auto& b = bounds_[i];
      b.v_min = cfg_.v_min;
      b.v_max = cfg_.v_max;
      if (cfg_.mobility == Mobility::kAnchored) {
        node.anchor = anchors[i];
        const Vec3 h = Vec3::Constant(cfg_.anchor_halfwidth);
        b.lo = (anchors[i] - h).cwiseMax(Vec3::Zero());
        b.hi = (anchors[i] + h).cwiseMin(cfg_.region);
      } else {
        b.lo = Vec3::Zero();
        b.hi = cfg_.region;
      }
      node.position = uniform_in(b.lo, b.hi, mobility_rng_);
      draw_leg(node, b, mobility_rng_);
      node.appearance_truth = FeatureVector{u01(mobility_rng_), u01(mobility_rng_), u01(mobility_rng_)};
      node.beacon_phase = static_cast<int>(
          std::uniform_int_distribution<std::int64_t>(0, beacon_ticks_ - 1)(mobility_rng_));
      node.table.own_fix = emit_beacon(node, 0.0, cfg_.gnss_sigma, nav_rng_);
    }
    dids_.reserve(n);
    for (const auto& node : nodes_) dids_.push_back(node.did);
    positions_.resize(n);
    comm_.resize(n);
    sense_.resize(n);
  }

  bool done() const { return tick_ >= ticks_; }
  double now() const { return static_cast<double>(tick_) * cfg_.vd_interval; }
  const SimConfig& config() const { return cfg_; }
  const std::vector<UavNode>& nodes() const { return nodes_; }
  const MetricsRecord& metrics() const { return metrics_; }
  const std::vector<std::vector<std::uint32_t>>& comm_neighbors() const { return comm_; }

  void run() {
    while (!done()) step();
  }

  void step() {
    ++tick_;
    const double t = now();
    const double dt = cfg_.vd_interval;

    std::vector<Vec3> prev_velocity(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      prev_velocity[i] = nodes_[i].velocity;
      step_mobility(nodes_[i], dt, bounds_[i], mobility_rng_);
      positions_[i] = nodes_[i].position;
    }
    refresh_neighbors();
    // own navigation solution, refreshed every frame
    for (auto& node : nodes_) node.table.own_fix = emit_beacon(node, t, cfg_.gnss_sigma, nav_rng_);

    for (auto& node : nodes_) {
      if ((tick_ - node.beacon_phase) % beacon_ticks_ != 0) continue;
      const Beacon b = emit_beacon(node, t, cfg_.gnss_sigma, beacon_rng_);
      node.tx_free_at = std::max(node.tx_free_at, t) + cfg_.tx_airtime;
      for (std::uint32_t q : comm_[node.index]) {
        const auto range = rssi_range(node.position, nodes_[q].position, cfg_.comm_range,
                                      cfg_.rssi_sigma, beacon_rng_);
        if (!range) continue;
        auto& table = nodes_[q].table;
        table.heard[b.did] = HeardBeacon{b, *range, (node.position - nodes_[q].position).norm(), true};
        table.pending_match = true;
      }
    }

    if (cfg_.protocol == Protocol::kDpi) perceive(t, prev_velocity);
    generate_events(t);
  }

 private:
  void refresh_neighbors() {
    const double rc2 = cfg_.comm_range * cfg_.comm_range;
    const double rs2 = cfg_.sense_range * cfg_.sense_range;
    for (auto& v : comm_) v.clear();
    for (auto& v : sense_) v.clear();
    // ascending pair order keeps every list sorted
    for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
      for (std::uint32_t j = i + 1; j < nodes_.size(); ++j) {
        const double d2 = (positions_[i] - positions_[j]).squaredNorm();
        if (d2 <= rc2) {
          comm_[i].push_back(j);
          comm_[j].push_back(i);
        }
        if (d2 <= rs2) {
          sense_[i].push_back(j);
          sense_[j].push_back(i);
        }
      }
    }
  }

  void perceive(double t, const std::vector<Vec3>& prev_velocity) {
    const bool counting = t >= cfg_.warmup - 1e-9;
    for (auto& node : nodes_) {
      Frame frame;
      for (std::uint32_t q : sense_[node.index]) {
        const auto s = sense_visual(node, nodes_[q], cfg_.sense_range, noise_, sense_rng_);
        if (!s) continue;
        VisualDetection det;
        det.z = unbiased_convert(s->polar);
        det.appearance = s->appearance;
        frame.detections.push_back(std::move(det));
        frame.measured_range.push_back(s->polar.r);
        frame.truth.push_back(q);
      }
      const Vec3 own_dv = node.velocity - prev_velocity[node.index];
      auto report = dpi_pipeline_step(node, frame, tick_, t, own_dv, params_, dids_, positions_);
      if (!counting || !report.ran) continue;
      metrics_.mapping_checked += report.checked;
      metrics_.mapping_correct += report.correct;
      append(metrics_.ad_range_error, report.ad_error);
      append(metrics_.vd_range_error, report.vd_error);
      append(metrics_.fused_range_error, report.fused_error);
    }
  }

  static void append(std::vector<double>& to, const std::vector<double>& from) {
    to.insert(to.end(), from.begin(), from.end());
  }

  void generate_events(double t) {
    if (t < cfg_.warmup - 1e-9 || nodes_.empty()) return;
    event_budget_ += cfg_.ec_rate * cfg_.vd_interval;
    ProtocolContext ctx{nodes_, comm_, &channel_, &reply_rng_, cfg_.gnss_sigma, cfg_.rssi_sigma};
    std::uniform_int_distribution<std::size_t> pick(0, nodes_.size() - 1);
    while (event_budget_ >= 1.0 - 1e-9) {
      event_budget_ -= 1.0;
      const std::size_t s = pick(event_rng_);
      // spread events over the tick so queues see distinct arrival times
      const double created = t + std::uniform_real_distribution<double>(0.0, cfg_.vd_interval)(event_rng_);
      EcEvent e;
      e.sender = nodes_[s].did;
      e.created_at = created;
      for (std::uint32_t q : comm_[s]) e.in_range.push_back(nodes_[q].did);
      e.intended = intended_set(nodes_[s], nodes_, comm_[s]);
      run_protocol(e, cfg_.protocol, ctx);
      settle(e, cfg_.settle_timeout);
      metrics_.add(e);
      if (log_) write_event_log(*log_, e, to_string(cfg_.protocol).c_str());
    }
  }

  SimConfig cfg_;
  PerceptionParams params_;
  std::ostream* log_;
  Rng mobility_rng_, beacon_rng_, sense_rng_, event_rng_, channel_rng_, reply_rng_, nav_rng_;
  std::int64_t tick_ = 0;
  std::int64_t ticks_ = 0;
  std::int64_t beacon_ticks_ = 1;
  VisualNoise noise_;
  Channel channel_;
  std::vector<UavNode> nodes_;
  std::vector<MobilityBounds> bounds_;
  std::vector<DigitalIdentity> dids_;
  std::vector<Vec3> positions_;
  std::vector<std::vector<std::uint32_t>> comm_, sense_;
  double event_budget_ = 0.0;
  MetricsRecord metrics_;
};

// Runs one configured simulation to completion. Writes per-event log lines
// to config.log_path when set.
inline MetricsRecord run(const SimConfig& config) {
  std::unique_ptr<std::ofstream> file;
  if (!config.log_path.empty()) {
    file = std::make_unique<std::ofstream>(config.log_path);
    if (!*file) throw InvalidInput("cannot open log file " + config.log_path);
  }
  Swarm swarm(config, file.get());
  swarm.run();
  return swarm.metrics();
}

}  // namespace dpimap::sim
