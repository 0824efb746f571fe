#pragma once

#include <cmath>

#include "lcert/core/linalg.hpp"

namespace lcert::cartpole {

struct Params {
  double gravity = 9.8;
  double cart_mass = 0.5;
  double pole_mass = 0.05;
  double half_length = 0.5;
  double dt = 0.02;
  double u_max = 3.0;

  void validate() const {
    if (!(cart_mass > 0.0 && pole_mass > 0.0 && half_length > 0.0))
      throw ConfigError("cartpole: masses and length must be positive");
    if (!(dt > 0.0)) throw ConfigError("cartpole: dt must be positive");
    if (!(u_max >= 0.0)) throw ConfigError("cartpole: u_max must be >= 0");
  }
};

/// State layout (x, x_dot, theta, theta_dot); theta = 0 is upright.
inline constexpr int kStateDim = 4;
inline constexpr int kInputDim = 1;

/// Time derivative of the state under horizontal cart force u.
inline Vec deriv(const Vec& s, double u, const Params& p) {
  const double theta = s[2], theta_dot = s[3];
  const double total = p.cart_mass + p.pole_mass;
  const double sin_t = std::sin(theta), cos_t = std::cos(theta);
  const double theta_acc =
      (p.gravity * sin_t +
       cos_t * (-u - p.pole_mass * p.half_length * theta_dot * theta_dot * sin_t / total)) /
      (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total));
  const double x_acc =
      (u + p.pole_mass * p.half_length *
               (theta_dot * theta_dot * sin_t - theta_acc * cos_t)) /
      total;
  Vec out(4);
  out << s[1], x_acc, theta_dot, theta_acc;
  return out;
}

inline VectorField vector_field(const Params& p) {
  return [p](const Vec& s, const Vec& u) { return deriv(s, u[0], p); };
}

/// One RK4 step of length p.dt with u held constant.
inline Vec step(const Vec& s, double u, const Params& p) {
  Vec uv(1);
  uv << u;
  return rk4_step(vector_field(p), s, uv, p.dt);
}

/// Generalized mass matrix M_c for the velocities (x_dot, theta_dot), where
/// c = cos(theta), with kinetic energy T = <q_dot, M q_dot>.
inline Eigen::Matrix2d mass_matrix(double c, const Params& p) {
  const double mp = p.pole_mass, l = p.half_length;
  Eigen::Matrix2d M;
  M << 0.5 * (p.cart_mass + mp), 0.5 * mp * l * c,
       0.5 * mp * l * c, 7.0 * mp * l * l / 12.0;
  return M;
}

/// Total mechanical energy; the potential is shifted so it is nonnegative
/// and vanishes with the pole hanging down.
inline double energy(const Vec& s, const Params& p) {
  const double mp = p.pole_mass, l = p.half_length;
  const double xd = s[1], th = s[2], thd = s[3];
  const double kinetic = 0.5 * (p.cart_mass + mp) * xd * xd +
                         mp * (l * xd * thd * std::cos(th) + 0.5 * l * l * thd * thd +
                               l * l * thd * thd / 12.0);
  return kinetic + mp * p.gravity * l * (std::cos(th) + 1.0);
}

}  // namespace lcert::cartpole
