#pragma once

#include "dpimap/common.hpp"
#include "dpimap/identity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <vector>

namespace dpimap::sim {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Linear-interpolated percentile, q in [0, 1]. NaN on empty input.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double hit_rate(std::uint64_t ri, std::uint64_t ni) {
  return ri + ni == 0 ? kNaN : static_cast<double>(ri) / static_cast<double>(ri + ni);
}

inline double disturbance_rate(std::uint64_t ru, std::uint64_t ri) {
  return ru + ri == 0 ? kNaN : static_cast<double>(ru) / static_cast<double>(ru + ri);
}

struct Delivery {
  DigitalIdentity receiver;
  double received_at = 0.0;
  bool operator==(const Delivery&) const = default;
};

struct EcEvent {
  DigitalIdentity sender;
  double created_at = 0.0;
  std::vector<DigitalIdentity> intended;   // sorted
  std::vector<DigitalIdentity> in_range;   // sorted, ground truth at creation
  std::vector<Delivery> deliveries;        // settled deliveries only
  std::uint64_t ri = 0, ru = 0, ni = 0, nu = 0;
  bool operator==(const EcEvent&) const = default;
};

// Classifies settled deliveries against the ground-truth sets.
inline void score_event(EcEvent& e) {
  e.ri = e.ru = 0;
  for (const auto& d : e.deliveries) {
    if (std::binary_search(e.intended.begin(), e.intended.end(), d.receiver)) {
      ++e.ri;
    } else {
      ++e.ru;
    }
  }
  e.ni = e.intended.size() - e.ri;
  e.nu = e.in_range.size() - e.intended.size() - e.ru;
}

inline void write_event_log(std::ostream& os, const EcEvent& e, const char* protocol) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "sender=%u created_at=%.6f protocol=%s intended=%zu RI=%llu RU=%llu",
                e.sender.address, e.created_at, protocol, e.intended.size(),
                static_cast<unsigned long long>(e.ri), static_cast<unsigned long long>(e.ru));
  os << buf << " latencies_ms=";
  bool first = true;
  for (const auto& d : e.deliveries) {
    if (!std::binary_search(e.intended.begin(), e.intended.end(), d.receiver)) continue;
    std::snprintf(buf, sizeof buf, "%s%.6g", first ? "" : ";", (d.received_at - e.created_at) * 1e3);
    os << buf;
    first = false;
  }
  os << '\n';
}

struct MetricsRecord {
  std::uint64_t events = 0;
  std::uint64_t ri = 0, ru = 0, ni = 0, nu = 0;
  std::vector<double> latency_ms;  // one per RI delivery
  std::uint64_t mapping_checked = 0, mapping_correct = 0;
  std::vector<double> ad_range_error, vd_range_error, fused_range_error;  // m

  void add(const EcEvent& e) {
    ++events;
    ri += e.ri;
    ru += e.ru;
    ni += e.ni;
    nu += e.nu;
    for (const auto& d : e.deliveries) {
      if (std::binary_search(e.intended.begin(), e.intended.end(), d.receiver)) {
        latency_ms.push_back((d.received_at - e.created_at) * 1e3);
      }
    }
  }

  double hit_rate() const { return sim::hit_rate(ri, ni); }
  double disturbance_rate() const { return sim::disturbance_rate(ru, ri); }
  double latency_mean_ms() const { return mean(latency_ms); }
  double latency_p50_ms() const { return percentile(latency_ms, 0.5); }
  double latency_p90_ms() const { return percentile(latency_ms, 0.9); }
  double mapping_accuracy() const {
    return mapping_checked == 0 ? kNaN
                                : static_cast<double>(mapping_correct) / static_cast<double>(mapping_checked);
  }
  double ad_range_p90() const { return percentile(ad_range_error, 0.9); }
  double vd_range_p90() const { return percentile(vd_range_error, 0.9); }
  double fused_range_p90() const { return percentile(fused_range_error, 0.9); }

  bool operator==(const MetricsRecord&) const = default;
};

}  // namespace dpimap::sim
