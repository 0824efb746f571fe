#pragma once

#include <array>
#include <cmath>
#include <limits>

#include "lcert/io/json_io.hpp"
#include "lcert/systems/omni.hpp"

namespace lcert {

struct CbfQpSpec {
  double alpha = 2.0;
  double beta_prime = 5.0;
  double input_bound = 5.0;  // box |u|_inf <= B_u
  double theta2 = 0.0;
  omni::Params vehicle{};

  void validate() const {
    if (!(alpha > 0.0)) throw ConfigError("cbf: alpha must be positive");
    if (!(beta_prime > 0.0)) throw ConfigError("cbf: beta_prime must be positive");
    if (!(input_bound > 0.0)) throw ConfigError("cbf: input bound must be positive");
    vehicle.validate();
  }
};

/// Halfspace a^T u >= b encoding <grad phi, f_z(z, u)> + alpha phi(z) >= 0
/// for phi(z) = |(z1, z2)| - beta'.
struct CbfConstraint {
  Eigen::Vector3d a;
  double b = 0.0;
};

inline CbfConstraint cbf_constraint(const Vec& z, const CbfQpSpec& spec) {
  if (z.size() != 3) throw ContractError("cbf_constraint: latent state must be 3D");
  const Eigen::Vector2d planar(z[0], z[1]);
  const double radius = planar.norm();
  if (!(radius > 0.0))
    throw SingularityError("cbf_constraint: barrier gradient undefined at (z1, z2) = 0");
  const Eigen::Vector2d n = planar / radius;
  const Eigen::Vector3d grad(n[0], n[1], 0.0);
  CbfConstraint c;
  c.a = omni::input_map(z[2], spec.vehicle).transpose() * grad;
  c.b = n.dot(Eigen::Vector2d(std::cos(spec.theta2), std::sin(spec.theta2))) -
        spec.alpha * (radius - spec.beta_prime);
  return c;
}

/// sup over the box of a^T u - b = B_u |a|_1 - b.
inline double cbf_feasibility_margin(const Vec& z, const CbfQpSpec& spec) {
  const CbfConstraint c = cbf_constraint(z, spec);
  return spec.input_bound * c.a.lpNorm<1>() - c.b;
}

/// Exact minimizer of |u - u_nom|^2 over {a^T u >= b} intersected with the box,
/// by enumerating every active set of the three box coordinates and the
/// halfspace.
inline Vec cbf_qp(const Vec& u_nom, const Vec& z, const CbfQpSpec& spec) {
  if (u_nom.size() != 3) throw ContractError("cbf_qp: input must be 3D");
  const CbfConstraint c = cbf_constraint(z, spec);
  const double B = spec.input_bound;
  const double margin = B * c.a.lpNorm<1>() - c.b;
  if (margin < 0.0)
    throw InfeasibleError("cbf_qp: constraint unreachable within the input box", margin);

  const double tol = 1e-12 * (1.0 + std::abs(c.b) + B * c.a.lpNorm<1>());
  auto feasible = [&](const Eigen::Vector3d& u) {
    return u.cwiseAbs().maxCoeff() <= B * (1.0 + 1e-14) && c.a.dot(u) >= c.b - tol;
  };
  const Eigen::Vector3d nominal = u_nom;
  if (feasible(nominal)) return u_nom;

  Eigen::Vector3d best = Eigen::Vector3d::Zero();
  double best_cost = std::numeric_limits<double>::infinity();
  for (int code = 0; code < 27; ++code) {
    // per coordinate: 0 free, 1 at -B, 2 at +B
    std::array<int, 3> state{code % 3, (code / 3) % 3, code / 9};
    for (int halfspace = 0; halfspace < 2; ++halfspace) {
      Eigen::Vector3d u = nominal;
      double fixed_dot = 0.0, free_norm2 = 0.0, free_dot = 0.0;
      for (int i = 0; i < 3; ++i) {
        if (state[i] == 1) u[i] = -B;
        if (state[i] == 2) u[i] = B;
        if (state[i] == 0) {
          free_norm2 += c.a[i] * c.a[i];
          free_dot += c.a[i] * nominal[i];
        } else {
          fixed_dot += c.a[i] * u[i];
        }
      }
      if (halfspace == 1) {
        if (free_norm2 == 0.0) continue;
        const double lambda = (c.b - fixed_dot - free_dot) / free_norm2;
        for (int i = 0; i < 3; ++i)
          if (state[i] == 0) u[i] = nominal[i] + lambda * c.a[i];
      }
      if (!feasible(u)) continue;
      const double cost = (u - nominal).squaredNorm();
      if (cost < best_cost) {
        best_cost = cost;
        best = u;
      }
    }
  }
  if (!std::isfinite(best_cost))
    throw InfeasibleError("cbf_qp: no feasible active set", margin);
  return best;
}

/// u_nom = clamp(gain B^T G(theta1)^T (goal - p1, 0)), so that unclamped
/// p1_dot = gain (goal - p1).
inline Vec nominal_proportional(const Vec& x, const Eigen::Vector2d& goal, double gain,
                                const omni::Params& p) {
  const Eigen::Vector3d w(goal[0] - x[0], goal[1] - x[1], 0.0);
  Vec u = gain * omni::wheel_matrix(p).transpose() * omni::rotation(x[2]).transpose() * w;
  return u.cwiseMax(-p.input_bound).cwiseMin(p.input_bound);
}

inline Json cbf_spec_to_json(const CbfQpSpec& s) {
  return Json{{"alpha", s.alpha},
              {"beta_prime", s.beta_prime},
              {"input_bound", s.input_bound},
              {"theta2", s.theta2},
              {"body_radius", s.vehicle.body_radius},
              {"wheel_radius", s.vehicle.wheel_radius}};
}

}  // namespace lcert
