#pragma once

// Oracle suites behind `dpimap validate`: the matcher against exhaustive
// search, the polar conversion against Monte Carlo, and filter consistency.

#include "dpimap/bim.hpp"
#include "dpimap/track.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace dpimap::validation {

struct Check {
  std::string name;
  double metric = 0.0;
  std::string relation;  // how metric compares to threshold when passing
  double threshold = 0.0;
  bool pass = false;
};

struct SuiteReport {
  std::string suite;
  std::vector<Check> checks;
  bool passed() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

inline Check at_least(std::string name, double metric, double threshold) {
  return {std::move(name), metric, ">=", threshold, metric >= threshold};
}
inline Check at_most(std::string name, double metric, double threshold) {
  return {std::move(name), metric, "<=", threshold, metric <= threshold};
}

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Uniform in (0, 1], reciprocated.
inline MatX reciprocal_matrix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatX m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = 1.0 / (1.0 - u(rng));
  }
  return m;
}

}  // namespace detail

inline SuiteReport matcher_suite(std::uint64_t seed = 2024) {
  SuiteReport rep{"matcher", {}};
  constexpr std::size_t kN = 5;
  const BimOptions opts;
  const double slack = static_cast<double>(kN) * opts.auction.alpha * opts.auction.epsilon;

  std::mt19937_64 rng(seed);
  const auto t0 = std::chrono::steady_clock::now();
  int bounded = 0, max_kept = 0, f2_kept = 0;
  constexpr int kRandom = 1000;
  for (int k = 0; k < kRandom; ++k) {
    const CostMatrix c(detail::reciprocal_matrix(kN, rng));
    const auto r = bim_match(c, opts);
    const double best = brute_force_match(c, MatchObjective::kSum).total_cost();
    bounded += r.total_cost() <= best + slack + 1e-9;
    max_kept += r.max_cost() <= r.max_cost_before_exchange + 1e-12;
    f2_kept += r.f2 <= r.f2_before_exchange + 1e-12;
  }
  const double elapsed = detail::seconds_since(t0);
  rep.checks.push_back(at_least("optimality bound instances", bounded, kRandom));
  rep.checks.push_back(at_least("exchange keeps max pair cost", max_kept, kRandom));
  rep.checks.push_back(at_least("exchange keeps f2", f2_kept, kRandom));
  rep.checks.push_back(at_most("random suite seconds", elapsed, 10.0));

  std::uniform_real_distribution<double> diag(1.0, 2.0), off(50.0, 100.0);
  constexpr int kSeparated = 500;
  int exact = 0;
  for (int k = 0; k < kSeparated; ++k) {
    MatX m(kN, kN);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = i == j ? diag(rng) : off(rng);
    }
    const auto r = bim_match(CostMatrix(m), opts);
    bool ok = r.pairs.size() == kN;
    for (const auto& p : r.pairs) ok = ok && p.visual == p.auditory;
    exact += ok;
  }
  rep.checks.push_back(at_least("separated instances on diagonal", exact, kSeparated));
  return rep;
}

// Conversion moments at one polar truth point.
struct ConversionMoments {
  Vec3 truth = Vec3::Zero();
  Vec3 mean = Vec3::Zero();
  Mat3 cov = Mat3::Zero();
  Mat3 R = Mat3::Zero();  // analytic, at the truth point
  int draws = 0;
};

inline ConversionMoments conversion_moments(const PolarMeasurement& truth, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nr(0.0, truth.sigma_r), nt(0.0, truth.sigma_theta),
      np(0.0, truth.sigma_phi);
  ConversionMoments out;
  out.truth = polar_to_cartesian(truth.r, truth.theta, truth.phi);
  out.R = unbiased_convert(truth).R;
  out.draws = draws;
  Vec3 sum = Vec3::Zero();
  Mat3 outer = Mat3::Zero();
  for (int k = 0; k < draws; ++k) {
    PolarMeasurement m = truth;
    m.r = std::max(0.0, truth.r + nr(rng));
    m.theta = truth.theta + nt(rng);
    m.phi = std::clamp(truth.phi + np(rng), -std::numbers::pi / 2, std::numbers::pi / 2);
    const Vec3 d = unbiased_convert(m).p - out.truth;
    sum += d;
    outer += d * d.transpose();
  }
  const Vec3 bias = sum / draws;
  out.mean = out.truth + bias;
  out.cov = outer / draws - bias * bias.transpose();
  return out;
}

struct ConsistencyStats {
  double mean_nees = 0.0;
  int filtered_wins = 0;  // tracks whose filtered RMSE beats the raw conversion
  int tracks = 0;
};

// Constant-velocity truths observed in polar coordinates; the filter runs
// with the model that generated them.
inline ConsistencyStats filter_consistency(int tracks, int steps, int burn_in, std::uint64_t seed,
                                           double dt = 0.1, double q = 0.5, double sigma_r = 0.5,
                                           double sigma_angle = 0.02) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto model = MotionModel::constant_velocity(dt, q);
  const Eigen::LLT<Mat6> q_chol(model.Q);
  const Mat6 q_l = q_chol.matrixL();

  ConsistencyStats out;
  out.tracks = tracks;
  double nees_sum = 0.0;
  long nees_count = 0;
  for (int k = 0; k < tracks; ++k) {
    Vec6 x;
    x << 100.0 * u(rng), 100.0 * u(rng), 30.0 * u(rng), 10.0 * u(rng), 10.0 * u(rng), 2.0 * u(rng);
    std::optional<TrackState> trk;
    double se_filtered = 0.0, se_raw = 0.0;
    int counted = 0;
    for (int s = 0; s < steps; ++s) {
      if (s > 0) {
        Vec6 w;
        for (int i = 0; i < 6; ++i) w[i] = n01(rng);
        x = model.F * x + q_l * w;
      }
      const Vec3 p = x.head<3>();
      const double r = p.norm();
      PolarMeasurement m;
      m.r = std::max(0.0, r + sigma_r * n01(rng));
      m.theta = std::atan2(p.y(), p.x()) + sigma_angle * n01(rng);
      m.phi = std::clamp(std::asin(p.z() / r) + sigma_angle * n01(rng), -std::numbers::pi / 2,
                         std::numbers::pi / 2);
      m.sigma_r = sigma_r;
      m.sigma_theta = m.sigma_phi = sigma_angle;
      const auto z = unbiased_convert(m);
      trk = trk ? kf_update(kf_predict(*trk, model), z) : track_from_measurement(z, 400.0);
      if (s < burn_in) continue;
      const Vec6 e = trk->x - x;
      nees_sum += e.dot(trk->P.ldlt().solve(e));
      ++nees_count;
      se_filtered += e.head<3>().squaredNorm();
      se_raw += (z.corrected() - p).squaredNorm();
      ++counted;
    }
    if (counted > 0 && se_filtered < se_raw) ++out.filtered_wins;
  }
  out.mean_nees = nees_count > 0 ? nees_sum / static_cast<double>(nees_count) : 0.0;
  return out;
}

inline SuiteReport filter_suite(std::uint64_t seed = 2024) {
  SuiteReport rep{"filter", {}};
  const auto t0 = std::chrono::steady_clock::now();
  const PolarMeasurement truth{100.0, std::numbers::pi / 4, std::numbers::pi / 6, 1.0, 0.1, 0.1};
  const auto mc = conversion_moments(truth, 1'000'000, seed);
  double worst_se = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(mc.cov(k, k) / mc.draws);
    worst_se = std::max(worst_se, std::abs(mc.mean[k] - mc.truth[k]) / se);
  }
  rep.checks.push_back(at_most("conversion bias (standard errors)", worst_se, 4.0));
  rep.checks.push_back(at_most("covariance relative Frobenius error", (mc.cov - mc.R).norm() / mc.R.norm(), 0.03));
  rep.checks.push_back(at_most("conversion suite seconds", detail::seconds_since(t0), 30.0));

  const auto fc = filter_consistency(100, 100, 10, seed + 1);
  rep.checks.push_back(at_least("mean NEES lower", fc.mean_nees, 5.0));
  rep.checks.push_back(at_most("mean NEES upper", fc.mean_nees, 7.0));
  rep.checks.push_back(at_least("tracks beating raw conversion", fc.filtered_wins, 95));
  return rep;
}

}  // namespace dpimap::validation
