#pragma once

// Ground-truth intended receivers, the channel/queue model and the three EC
// dissemination schemes.

#include "dpimap/sim/config.hpp"
#include "dpimap/sim/metrics.hpp"
#include "dpimap/sim/node.hpp"

#include <algorithm>
#include <random>
#include <span>
#include <vector>

namespace dpimap::sim {

// Behind the sender and closing in. A stationary sender has no heading, so
// only the closing test applies. Closing speeds below kZeroNorm m/s count
// as none, so round-off in estimated states is not read as approach.
inline bool is_intended(const Vec3& rel_p, const Vec3& rel_v, const Vec3& sender_velocity) {
  const bool approaching = rel_v.dot(rel_p) < -kZeroNorm * rel_p.norm();
  if (sender_velocity.norm() < kZeroNorm) return approaching;
  const bool behind = rel_p.dot(sender_velocity) < 0.0;
  return behind && approaching;
}

// `in_range` lists node indices within comm range of the sender.
inline std::vector<DigitalIdentity> intended_set(const UavNode& sender, std::span<const UavNode> nodes,
                                                 std::span<const std::uint32_t> in_range) {
  std::vector<DigitalIdentity> out;
  for (std::uint32_t q : in_range) {
    const auto& nb = nodes[q];
    if (is_intended(nb.position - sender.position, nb.velocity - sender.velocity, sender.velocity)) {
      out.push_back(nb.did);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Per-node FIFO transmitter. Channel access waits an exponential time whose
// mean grows with the number of nodes contending in range.
struct Channel {
  double airtime = 0.002;
  double jitter_mean = 0.001;
  double slot = 1e-4;
  Rng* rng = nullptr;

  double access(std::size_t contenders) {
    const double m = slot * static_cast<double>(contenders);
    return m > 0.0 ? std::exponential_distribution<double>(1.0 / m)(*rng) : 0.0;
  }
  double jitter() {
    return jitter_mean > 0.0 ? std::exponential_distribution<double>(1.0 / jitter_mean)(*rng) : 0.0;
  }
  // End-of-airtime for a message queued at `tx` when ready at `ready_at`.
  double transmit(UavNode& tx, double ready_at, std::size_t contenders) {
    const double start = std::max(ready_at, tx.tx_free_at) + access(contenders);
    tx.tx_free_at = start + airtime;
    return tx.tx_free_at;
  }
};

struct ProtocolContext {
  std::span<UavNode> nodes;
  std::span<const std::vector<std::uint32_t>> comm_neighbors;  // per node index, sorted
  Channel* channel = nullptr;
  Rng* sensing_rng = nullptr;  // feedback replies
  double gnss_sigma = 3.0;
  double rssi_sigma = 5.0 / std::sqrt(10.0);
};

inline std::size_t index_of(DigitalIdentity did) { return did.address - 1; }

// Fills `event.deliveries` (unsettled) for the sender's chosen scheme.
inline void run_protocol(EcEvent& event, Protocol protocol, ProtocolContext& ctx) {
  UavNode& s = ctx.nodes[index_of(event.sender)];
  const auto& nb = ctx.comm_neighbors[index_of(event.sender)];
  Channel& ch = *ctx.channel;
  const double t0 = event.created_at;
  auto in_range = [&](std::size_t q) { return std::binary_search(nb.begin(), nb.end(), q); };

  switch (protocol) {
    case Protocol::kBroadcast: {
      const double end = ch.transmit(s, t0, nb.size());
      for (std::uint32_t q : nb) event.deliveries.push_back({ctx.nodes[q].did, end + ch.jitter()});
      break;
    }
    case Protocol::kFeedback: {
      // query, one reply per neighbour carrying beacon-grade kinematics,
      // then unicasts to the neighbours judged intended
      const double query_end = ch.transmit(s, t0, nb.size());
      double decide_at = query_end;
      Rng& rng = *ctx.sensing_rng;
      const Vec3 own_p = s.position + gaussian3(ctx.gnss_sigma, rng);
      const Vec3 own_v = s.velocity + gaussian3(0.1 * ctx.gnss_sigma, rng);
      std::vector<std::uint32_t> chosen;
      for (std::uint32_t q : nb) {
        UavNode& r = ctx.nodes[q];
        const double reply_end = ch.transmit(r, query_end + ch.jitter(), ctx.comm_neighbors[q].size());
        decide_at = std::max(decide_at, reply_end);
        const Vec3 p_hat = r.position + gaussian3(ctx.gnss_sigma, rng);
        const Vec3 v_hat = r.velocity + gaussian3(0.1 * ctx.gnss_sigma, rng);
        const double range =
            std::max(0.0, (r.position - s.position).norm() +
                              (ctx.rssi_sigma > 0 ? std::normal_distribution<double>(0.0, ctx.rssi_sigma)(rng) : 0.0));
        Vec3 dir = p_hat - own_p;
        const double n = dir.norm();
        const Vec3 rel_p = n > kZeroNorm ? Vec3(dir / n * range) : Vec3::Zero();
        if (is_intended(rel_p, v_hat - own_v, s.velocity)) chosen.push_back(q);
      }
      decide_at += ch.jitter();
      for (std::uint32_t q : chosen) {
        const double end = ch.transmit(s, decide_at, nb.size());
        event.deliveries.push_back({ctx.nodes[q].did, end + ch.jitter()});
      }
      break;
    }
    case Protocol::kDpi: {
      // unicast straight to every bound track the sender judges intended
      std::vector<DigitalIdentity> chosen;
      for (const auto& trk : s.table.tracks) {
        if (!trk.state.bound_did) continue;
        if (is_intended(trk.state.position(), trk.state.velocity(), s.velocity)) {
          chosen.push_back(*trk.state.bound_did);
        }
      }
      std::sort(chosen.begin(), chosen.end());
      chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
      for (const auto& did : chosen) {
        const double end = ch.transmit(s, t0, nb.size());
        const double at = end + ch.jitter();
        if (in_range(index_of(did))) event.deliveries.push_back({did, at});
      }
      break;
    }
  }
}

// Keeps deliveries inside the settlement window, then scores the event.
inline void settle(EcEvent& event, double timeout) {
  std::erase_if(event.deliveries,
                [&](const Delivery& d) { return d.received_at - event.created_at > timeout; });
  std::sort(event.deliveries.begin(), event.deliveries.end(),
            [](const Delivery& a, const Delivery& b) { return a.receiver < b.receiver; });
  score_event(event);
}

}  // namespace dpimap::sim
