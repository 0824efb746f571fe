#pragma once

#include <cmath>
#include <numbers>

#include "lcert/core/linalg.hpp"

namespace lcert::omni {

struct Params {
  double body_radius = 0.2;
  double wheel_radius = 0.02;
  double input_bound = 5.0;        // per-wheel angular velocity bound B_u
  double disturbance_bound = 1.0;  // B_d

  void validate() const {
    if (!(body_radius > 0.0 && wheel_radius > 0.0))
      throw ConfigError("omni: radii must be positive");
    if (!(input_bound >= 0.0 && disturbance_bound >= 0.0))
      throw ConfigError("omni: bounds must be nonnegative");
  }
};

/// State layout (p1x, p1y, theta1, p2x, p2y, theta2).
inline constexpr int kStateDim = 6;
inline constexpr int kInputDim = 3;

/// Planar rotation by theta, extended with a unit heading row.
inline Eigen::Matrix3d rotation(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Eigen::Matrix3d G;
  G << c, -s, 0.0,
       s, c, 0.0,
       0.0, 0.0, 1.0;
  return G;
}

/// Wheel geometry matrix of the three-wheeled omni-directional base.
inline Eigen::Matrix3d wheel_matrix(const Params& p) {
  const double r = p.wheel_radius, l = p.body_radius;
  const double c = std::cos(std::numbers::pi / 6.0), s = std::sin(std::numbers::pi / 6.0);
  Eigen::Matrix3d B;
  B << 0.0, r * c, -r * c,
       -r, r * s, r * s,
       l * r, l * r, l * r;
  return B;
}

/// M(theta) = G(theta) B^{-T}: maps wheel speeds to the pose rate.
inline Eigen::Matrix3d input_map(double theta, const Params& p) {
  const Eigen::Matrix3d Binv_t = wheel_matrix(p).transpose().inverse();
  return rotation(theta) * Binv_t;
}

inline Vec deriv(const Vec& x, const Vec& u, const Vec& d, const Params& p,
                 double tol = 1e-9) {
  if (u.size() != 3 || d.size() != 3 || x.size() != 6)
    throw ContractError("omni::deriv: dimension mismatch");
  if (u.lpNorm<Eigen::Infinity>() > p.input_bound + tol)
    throw ContractError("omni::deriv: input exceeds box bound");
  if (d.norm() > p.disturbance_bound + tol)
    throw ContractError("omni::deriv: disturbance exceeds bound");
  const Eigen::Vector3d q1_dot = input_map(x[2], p) * u + d;
  Vec out(6);
  out << q1_dot, std::cos(x[5]), std::sin(x[5]), 0.0;
  return out;
}

/// Disturbance of norm B_d pushing the active car toward the passive one.
inline Vec adversarial_disturbance(const Vec& x, double bound) {
  const Eigen::Vector2d rel(x[0] - x[3], x[1] - x[4]);
  const double dist = rel.norm();
  if (!(dist > 0.0))
    throw SingularityError("adversarial_disturbance: cars coincide");
  Vec d(3);
  d << -bound * rel / dist, 0.0;
  return d;
}

/// Upper bound on |q1_dot| for Euclidean-bounded inputs |u| <= B_u, using
/// sigma_max(G B^{-T}) = sigma_max(B^{-T}).
inline double active_speed_bound(const Params& p) {
  return sigma_max(wheel_matrix(p).transpose().inverse()) * p.input_bound +
         p.disturbance_bound;
}

}  // namespace lcert::omni
