#pragma once

// Physical/digital identity types and the similarity measures the matcher
// is built on: clamped cosine, per-feature distinguishability, dynamic
// feature weights and the weighted harmonic-mean pair similarity.

#include "dpimap/common.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace dpimap {

// One vector-valued physical feature (relative position, relative velocity,
// appearance, ...). Scalars are rejected: their cosine is always +-1.
class FeatureVector {
 public:
  FeatureVector() = default;

  explicit FeatureVector(VecX values) : values_(std::move(values)) {
    if (values_.size() < 2) {
      throw InvalidInput("FeatureVector: dimension must be >= 2, got " +
                         std::to_string(values_.size()));
    }
    if (!values_.allFinite()) {
      throw InvalidInput("FeatureVector: entries must be finite");
    }
  }

  FeatureVector(std::initializer_list<double> values)
      : FeatureVector(VecX(Eigen::Map<const VecX>(values.begin(),
                                                  static_cast<Eigen::Index>(values.size())))) {}

  static FeatureVector from(const Vec3& v) { return FeatureVector(VecX(v)); }

  const VecX& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }
  double norm() const { return values_.norm(); }

 private:
  VecX values_;
};

enum class Domain : std::uint8_t { kVisual, kAuditory };

struct DigitalIdentity {
  std::uint32_t address = 0;
  auto operator<=>(const DigitalIdentity&) const = default;
};

struct PhysicalIdentity {
  std::vector<FeatureVector> features;
  Domain domain = Domain::kVisual;
  std::int64_t epoch = 0;
};

struct ObservationSet {
  Domain domain = Domain::kVisual;
  std::int64_t epoch = 0;
  std::vector<PhysicalIdentity> identities;
  // One per identity for auditory sets, empty for visual sets.
  std::vector<DigitalIdentity> digital_ids;

  std::size_t size() const { return identities.size(); }
  bool empty() const { return identities.empty(); }

  // Feature slot k of every member, in member order.
  std::vector<FeatureVector> slot(std::size_t k) const {
    std::vector<FeatureVector> out;
    out.reserve(identities.size());
    for (const auto& id : identities) out.push_back(id.features.at(k));
    return out;
  }

  void validate() const {
    if (domain == Domain::kAuditory && digital_ids.size() != identities.size()) {
      throw InvalidInput("ObservationSet: auditory set needs one digital identity per member");
    }
    if (domain == Domain::kVisual && !digital_ids.empty()) {
      throw InvalidInput("ObservationSet: visual set cannot carry digital identities");
    }
    for (const auto& id : identities) {
      if (id.domain != domain || id.epoch != epoch) {
        throw InvalidInput("ObservationSet: members must share domain and epoch");
      }
      if (id.features.empty()) throw InvalidInput("ObservationSet: identity with no features");
      if (id.features.size() != identities.front().features.size()) {
        throw InvalidInput("ObservationSet: inconsistent feature count");
      }
      for (std::size_t k = 0; k < id.features.size(); ++k) {
        if (id.features[k].dim() != identities.front().features[k].dim()) {
          throw InvalidInput("ObservationSet: inconsistent feature dimension in slot " +
                             std::to_string(k));
        }
      }
    }
  }
};

struct WeightVector {
  std::vector<double> raw;
  std::vector<double> normalized;
  std::size_t size() const { return normalized.size(); }
};

enum class DistinguishabilityRule : std::uint8_t {
  // sum_j D(i,j) prod_{m != i,j} (1 - D(i,m))
  kLiteral,
  // prod_{j != i} (1 - D(i,j)): probability of differing from every other member
  kComplementProduct,
};

struct SimilarityOptions {
  DistinguishabilityRule distinguishability = DistinguishabilityRule::kLiteral;
  // Multiplies the cosine by exp(-| |a| - |b| | / scale) per slot when on.
  bool magnitude_aware = false;
  std::vector<double> magnitude_scale;  // per slot; missing slots use 10.0

  double scale_for(std::size_t slot) const {
    return slot < magnitude_scale.size() ? magnitude_scale[slot] : 10.0;
  }
};

inline void require_same_dim(const FeatureVector& a, const FeatureVector& b) {
  if (a.dim() != b.dim()) {
    throw InvalidInput("feature dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                       std::to_string(b.dim()));
  }
}

// Cosine similarity clamped to [0, 1]. Two zero vectors are identical (1),
// a zero vector against a non-zero one shares nothing (0).
inline double cosine_similarity(const FeatureVector& a, const FeatureVector& b) {
  require_same_dim(a, b);
  const double na = a.norm();
  const double nb = b.norm();
  const bool za = na < kZeroNorm;
  const bool zb = nb < kZeroNorm;
  if (za && zb) return 1.0;
  if (za || zb) return 0.0;
  const double c = a.values().dot(b.values()) / (na * nb);
  return std::clamp(c, 0.0, 1.0);
}

inline double magnitude_aware_similarity(const FeatureVector& a, const FeatureVector& b,
                                         double scale) {
  if (!(scale > 0.0)) throw InvalidInput("magnitude scale must be > 0");
  return cosine_similarity(a, b) * std::exp(-std::abs(a.norm() - b.norm()) / scale);
}

inline double feature_similarity(const FeatureVector& a, const FeatureVector& b,
                                 const SimilarityOptions& opts, std::size_t slot) {
  return opts.magnitude_aware ? magnitude_aware_similarity(a, b, opts.scale_for(slot))
                              : cosine_similarity(a, b);
}

// Distinguishability of members[i] within its feature slot.
inline double distinguishability(std::span<const FeatureVector> members, std::size_t i,
                                 const SimilarityOptions& opts = {}, std::size_t slot = 0) {
  const std::size_t n = members.size();
  if (n == 0 || i >= n) throw InvalidInput("distinguishability: index out of range");
  if (n == 1) return 1.0;

  std::vector<double> d;  // similarity of member i to every other member
  d.reserve(n - 1);
  for (std::size_t m = 0; m < n; ++m) {
    if (m != i) d.push_back(feature_similarity(members[i], members[m], opts, slot));
  }

  if (opts.distinguishability == DistinguishabilityRule::kComplementProduct) {
    double p = 1.0;
    for (double x : d) p *= 1.0 - x;
    return p;
  }

  // prefix/suffix products of (1 - d) so every "all but j" product is O(1)
  const std::size_t k = d.size();
  std::vector<double> prefix(k + 1, 1.0), suffix(k + 1, 1.0);
  for (std::size_t j = 0; j < k; ++j) prefix[j + 1] = prefix[j] * (1.0 - d[j]);
  for (std::size_t j = k; j-- > 0;) suffix[j] = suffix[j + 1] * (1.0 - d[j]);
  double p = 0.0;
  for (std::size_t j = 0; j < k; ++j) p += d[j] * prefix[j] * suffix[j + 1];
  return std::clamp(p, 0.0, 1.0);
}

inline WeightVector dynamic_weights(const ObservationSet& set, const SimilarityOptions& opts = {}) {
  if (set.empty()) throw InvalidInput("dynamic_weights: empty observation set");
  set.validate();
  const std::size_t slots = set.identities.front().features.size();
  const auto n = static_cast<double>(set.size());

  WeightVector w;
  w.raw.assign(slots, 0.0);
  for (std::size_t k = 0; k < slots; ++k) {
    const auto members = set.slot(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < members.size(); ++i) {
      sum += distinguishability(members, i, opts, k);
    }
    w.raw[k] = sum / n;
  }

  double total = 0.0;
  for (double x : w.raw) total += x;
  w.normalized.resize(slots);
  for (std::size_t k = 0; k < slots; ++k) {
    w.normalized[k] = total > 0.0 ? w.raw[k] / total : 1.0 / static_cast<double>(slots);
  }
  return w;
}

inline WeightVector uniform_weights(std::size_t slots) {
  if (slots == 0) throw InvalidInput("uniform_weights: zero slots");
  return {std::vector<double>(slots, 1.0), std::vector<double>(slots, 1.0 / static_cast<double>(slots))};
}

// Weighted harmonic mean of the per-slot similarities.
inline double pairwise_similarity(const PhysicalIdentity& vf, const PhysicalIdentity& af,
                                  const WeightVector& w, const SimilarityOptions& opts = {}) {
  const std::size_t slots = vf.features.size();
  if (af.features.size() != slots || w.size() != slots) {
    throw InvalidInput("pairwise_similarity: feature count mismatch");
  }
  double denom = 0.0;
  for (std::size_t k = 0; k < slots; ++k) {
    const double d = std::max(feature_similarity(vf.features[k], af.features[k], opts, k),
                              kSimilarityFloor);
    denom += w.normalized[k] / d;
  }
  return 1.0 / denom;
}

inline double matching_cost(double similarity) {
  if (!(similarity > 0.0)) throw InvalidInput("matching_cost: similarity must be > 0");
  return std::min(1.0 / similarity, kCostMax);
}

}  // namespace dpimap
