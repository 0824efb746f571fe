#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "lcert/systems/cartpole.hpp"

namespace lcert::cartpole {

/// min over c in [-1, 1] of lambda_min(M_c), scanned on `samples` points.
inline double min_mass_eigenvalue(const Params& p, int samples = 10000) {
  double mu = std::numeric_limits<double>::infinity();
  for (double c : linspace(-1.0, 1.0, samples)) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(mass_matrix(c, p),
                                                       Eigen::EigenvaluesOnly);
    mu = std::min(mu, eig.eigenvalues()(0));
  }
  return mu;
}

/// Velocity envelope sqrt(2/mu) (sqrt(E0) + u_max t / sqrt(2 mu)) implied by
/// the energy growth bound under |u| <= u_max.
inline double velocity_envelope(double initial_energy, double u_max, double mu,
                                double t) {
  return std::sqrt(2.0 / mu) *
         (std::sqrt(initial_energy) + u_max * t / std::sqrt(2.0 * mu));
}

/// Per-step mismatch between the discrete power (E_{t+1} - E_t)/dt and the
/// trapezoidal input power u_t (x_dot_t + x_dot_{t+1}) / 2 along a rollout.
/// `states` has one more entry than `inputs`.
inline std::vector<double> power_residuals(const std::vector<Vec>& states,
                                           const std::vector<double>& inputs,
                                           const Params& p, double dt) {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const double de = (energy(states[t + 1], p) - energy(states[t], p)) / dt;
    const double power = inputs[t] * 0.5 * (states[t][1] + states[t + 1][1]);
    out.push_back(std::abs(de - power));
  }
  return out;
}

}  // namespace lcert::cartpole
