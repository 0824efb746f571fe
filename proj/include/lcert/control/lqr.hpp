#pragma once

#include "lcert/io/json_io.hpp"
#include "lcert/models/latent_model.hpp"

namespace lcert {

/// pi(z) = -K (z - z_eq), for latent dynamics in which u enters as +B(z) u.
struct LqrController {
  Mat K;
  Vec z_eq;
  Mat P;
  double closed_loop_radius = 0.0;

  Vec operator()(const Vec& z) const { return -K * (z - z_eq); }
};

inline LqrController lqr_from_matrices(const Mat& A, const Mat& B, const Vec& z_eq,
                                       const Mat& Q, const Mat& R) {
  if (B.norm() == 0.0) throw SynthesisError("lqr: B(z_eq) vanishes, pair is not stabilizable");
  DareSolution sol;
  try {
    sol = dare_solve(A, B, Q, R);
  } catch (const DivergenceError& e) {
    throw SynthesisError(std::string("lqr: ") + e.what());
  }
  LqrController c{sol.K, z_eq, sol.P, spectral_radius(A - B * sol.K)};
  if (!(c.closed_loop_radius < 1.0))
    throw SynthesisError("lqr: closed loop is not Schur stable");
  return c;
}

/// LQR about z_eq = E(0) using A(z_eq), B(z_eq).
inline LqrController lqr_from_latent(const LatentModel& m, const Mat& Q, const Mat& R) {
  const Vec z_eq = m.encode(Vec::Zero(m.state_dim()));
  return lqr_from_matrices(m.drift_matrix(z_eq), m.input_matrix(z_eq), z_eq, Q, R);
}

inline LqrController lqr_from_latent(const LatentModel& m) {
  return lqr_from_latent(m, Mat::Identity(m.latent_dim(), m.latent_dim()),
                         Mat::Identity(m.input_dim(), m.input_dim()));
}

inline Json lqr_to_json(const LqrController& c) {
  return Json{{"K", to_json(c.K)},
              {"z_eq", to_json(c.z_eq)},
              {"P", to_json(c.P)},
              {"closed_loop_spectral_radius", c.closed_loop_radius},
              {"sign", "u = -K (z - z_eq)"}};
}

inline LqrController lqr_from_json(const Json& j) {
  return {mat_from_json(j.at("K")), vec_from_json(j.at("z_eq")), mat_from_json(j.at("P")),
          j.at("closed_loop_spectral_radius").get<double>()};
}

}  // namespace lcert
