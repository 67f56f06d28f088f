#pragma once

// Converted-measurement Kalman filter for neighbour tracks.
//
// Polar detections (range, azimuth, elevation) are converted to Cartesian
// with multiplicative debiasing; the conversion also yields the
// measurement-conditioned error mean mu and covariance R, and the filter
// consumes p - mu with noise R under a constant-velocity model.

#include "dpimap/common.hpp"
#include "dpimap/identity.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>

namespace dpimap {

struct PolarMeasurement {
  double r = 0.0;      // m
  double theta = 0.0;  // azimuth, rad
  double phi = 0.0;    // elevation, rad
  double sigma_r = 0.0;
  double sigma_theta = 0.0;
  double sigma_phi = 0.0;

  void validate() const {
    if (!(r >= 0.0)) throw InvalidInput("PolarMeasurement: range must be >= 0");
    if (!(sigma_r >= 0.0) || !(sigma_theta >= 0.0) || !(sigma_phi >= 0.0)) {
      throw InvalidInput("PolarMeasurement: sigmas must be >= 0");
    }
    if (!(std::abs(phi) <= std::numbers::pi / 2 + 1e-12)) {
      throw InvalidInput("PolarMeasurement: |elevation| must be <= pi/2");
    }
  }
};

struct ConvertedMeasurement {
  Vec3 p = Vec3::Zero();   // debiased Cartesian position, m
  Mat3 R = Mat3::Zero();   // covariance, m^2
  Vec3 mu = Vec3::Zero();  // conditional error mean, m

  // What the filter consumes.
  Vec3 corrected() const { return p - mu; }
};

struct TrackState {
  Vec6 x = Vec6::Zero();  // [position; velocity]
  Mat6 P = Mat6::Identity();
  std::optional<DigitalIdentity> bound_did;
  std::int64_t epoch = 0;
  std::optional<FeatureVector> appearance;

  Vec3 position() const { return x.head<3>(); }
  Vec3 velocity() const { return x.tail<3>(); }
};

struct MotionModel {
  double dt = 0.1;
  Mat6 F = Mat6::Identity();
  Mat36 H = Mat36::Zero();
  Mat6 Q = Mat6::Zero();

  // Constant velocity with continuous white-acceleration noise of spectral
  // density q (m^2/s^3) on each axis.
  static MotionModel constant_velocity(double dt, double q) {
    if (!(dt > 0.0)) throw InvalidInput("MotionModel: dt must be > 0");
    if (!(q >= 0.0)) throw InvalidInput("MotionModel: q must be >= 0");
    MotionModel m;
    m.dt = dt;
    m.F.setIdentity();
    m.F.topRightCorner<3, 3>() = dt * Mat3::Identity();
    m.H.leftCols<3>() = Mat3::Identity();
    m.Q.setZero();
    m.Q.topLeftCorner<3, 3>() = (q * dt * dt * dt / 3.0) * Mat3::Identity();
    m.Q.topRightCorner<3, 3>() = (q * dt * dt / 2.0) * Mat3::Identity();
    m.Q.bottomLeftCorner<3, 3>() = (q * dt * dt / 2.0) * Mat3::Identity();
    m.Q.bottomRightCorner<3, 3>() = (q * dt) * Mat3::Identity();
    return m;
  }
};

inline ConvertedMeasurement unbiased_convert(const PolarMeasurement& m) {
  m.validate();
  const double r = m.r;
  const double st2 = m.sigma_theta * m.sigma_theta;
  const double sp2 = m.sigma_phi * m.sigma_phi;
  const double lt = std::exp(-st2 / 2.0);
  const double lp = std::exp(-sp2 / 2.0);
  const double lt2 = std::exp(-2.0 * st2);  // lambda'
  const double lp2 = std::exp(-2.0 * sp2);
  const double ct = std::cos(m.theta), s_t = std::sin(m.theta);
  const double cp = std::cos(m.phi), sp = std::sin(m.phi);
  const double c2t = std::cos(2.0 * m.theta), s2t = std::sin(2.0 * m.theta);
  const double c2p = std::cos(2.0 * m.phi), s2p = std::sin(2.0 * m.phi);

  ConvertedMeasurement out;
  const double inv_tp = 1.0 / (lt * lp);
  out.p = Vec3(inv_tp * r * cp * ct, inv_tp * r * cp * s_t, r * sp / lp);
  out.mu = Vec3((inv_tp - lt * lp) * r * ct * cp, (inv_tp - lt * lp) * r * s_t * cp,
                (1.0 / lp - lp) * r * sp);

  const double a = r * r + m.sigma_r * m.sigma_r;
  const double r2 = r * r;
  const double ltp2 = lt * lt * lp * lp;
  Mat3& R = out.R;
  R(0, 0) = a * (1 + lt2 * c2t) * (1 + lp2 * c2p) / 4 - ltp2 * r2 * ct * ct * cp * cp;
  R(0, 1) = a * lt2 * s2t * (1 + lp2 * c2p) / 4 - ltp2 * r2 * s_t * ct * cp * cp;
  R(0, 2) = a * lt * lp2 * ct * s2p / 2 - lt * lp * lp * r2 * ct * sp * cp;
  R(1, 1) = a * (1 - lt2 * c2t) * (1 + lp2 * c2p) / 4 - ltp2 * r2 * s_t * s_t * cp * cp;
  R(1, 2) = a * lt * lp2 * s_t * s2p / 2 - lt * lp * lp * r2 * s_t * sp * cp;
  R(2, 2) = a * (1 - lp2 * c2p) / 2 - lp * lp * r2 * sp * sp;
  R(1, 0) = R(0, 1);
  R(2, 0) = R(0, 2);
  R(2, 1) = R(1, 2);
  return out;
}

// Exact spherical -> Cartesian map, no debiasing.
inline Vec3 polar_to_cartesian(double r, double theta, double phi) {
  return {r * std::cos(phi) * std::cos(theta), r * std::cos(phi) * std::sin(theta), r * std::sin(phi)};
}

inline TrackState kf_predict(const TrackState& t, const MotionModel& model) {
  TrackState out = t;
  out.x = model.F * t.x;
  out.P = model.F * t.P * model.F.transpose() + model.Q;
  out.P = 0.5 * (out.P + out.P.transpose());
  ++out.epoch;
  return out;
}

// Linear update with observation matrix H (M x 6), measurement z and noise R.
template <int M>
TrackState kf_update_linear(const TrackState& t, const Eigen::Matrix<double, M, 6>& H,
                            const Eigen::Matrix<double, M, 1>& z, const Eigen::Matrix<double, M, M>& R) {
  using MatM = Eigen::Matrix<double, M, M>;
  using Mat6M = Eigen::Matrix<double, 6, M>;
  const MatM S = H * t.P * H.transpose() + R;
  const MatM S_sym = 0.5 * (S + S.transpose());
  Eigen::LLT<MatM> llt(S_sym);
  if (llt.info() != Eigen::Success) throw NumericalError("kf_update: innovation covariance is singular");
  // K = P H^T S^-1, computed as (S^-1 H P)^T with S symmetric
  const Mat6M K = llt.solve(H * t.P).transpose();
  TrackState out = t;
  out.x = t.x + K * (z - H * t.x);
  const Mat6 I_KH = Mat6::Identity() - K * H;
  out.P = I_KH * t.P * I_KH.transpose() + K * R * K.transpose();
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

inline TrackState kf_update(const TrackState& t, const ConvertedMeasurement& z) {
  Mat36 H = Mat36::Zero();
  H.leftCols<3>() = Mat3::Identity();
  return kf_update_linear<3>(t, H, z.corrected(), z.R);
}

// Beacon-derived relative kinematics used as a direct state observation.
struct KinematicObservation {
  Vec6 z = Vec6::Zero();
  Mat6 R = Mat6::Identity();
};

inline TrackState kf_update(const TrackState& t, const KinematicObservation& z) {
  return kf_update_linear<6>(t, Mat6::Identity(), z.z, z.R);
}

inline TrackState fuse_domains(const TrackState& t, const ConvertedMeasurement& vd,
                               const ConvertedMeasurement& ad) {
  return kf_update(kf_update(t, vd), ad);
}

inline TrackState fuse_domains(const TrackState& t, const ConvertedMeasurement& vd,
                               const KinematicObservation& ad) {
  return kf_update(kf_update(t, vd), ad);
}

// Latest BIM epoch is authoritative.
inline TrackState bind_identity(const TrackState& t, DigitalIdentity did) {
  TrackState out = t;
  out.bound_did = did;
  return out;
}

// New track at the measured position with zero velocity and the given
// velocity variance.
inline TrackState track_from_measurement(const ConvertedMeasurement& z, double velocity_var,
                                         std::int64_t epoch = 0) {
  TrackState t;
  t.x.head<3>() = z.corrected();
  t.x.tail<3>().setZero();
  t.P.setZero();
  t.P.topLeftCorner<3, 3>() = z.R + 1e-6 * Mat3::Identity();
  t.P.bottomRightCorner<3, 3>() = velocity_var * Mat3::Identity();
  t.epoch = epoch;
  return t;
}

}  // namespace dpimap
