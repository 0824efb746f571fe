#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lcert/control/cbf.hpp"
#include "lcert/pipeline/config.hpp"

namespace lcert {

struct OmniSample {
  double t = 0.0;
  Vec x;
  Vec u_nom;
  Vec u;
  double distance = 0.0;
  double margin = 0.0;  // cbf_feasibility_margin at the latent state
  bool modified = false;
};

struct OmniRun {
  std::vector<OmniSample> samples;
  double min_distance = std::numeric_limits<double>::infinity();
  double safe_radius = 0.0;  // beta' - B_d / alpha
  bool stayed_in_Cx = true;   // |p1 - p2| >= beta' - B_d / alpha throughout
  bool stayed_in_Sx = true;   // |p1 - p2| >= beta throughout
  int infeasible_steps = 0;
  std::vector<std::string> events;
  double final_goal_distance = 0.0;
};

inline Vec omni_encode(const Vec& x) {
  Vec z(3);
  z << x[0] - x[3], x[1] - x[4], x[2];
  return z;
}

/// Closed loop under the CBF-QP filtered proportional controller (or the
/// nominal controller alone), with the adversarial disturbance evaluated
/// inside every RK4 stage and the input held over each step.
inline OmniRun simulate_omni(const OmniConfig& cfg) {
  cfg.validate();
  const omni::Params& p = cfg.vehicle;
  Vec x(6);
  x << cfg.active_start, cfg.passive_start;
  CbfQpSpec spec{cfg.alpha, cfg.beta_prime, p.input_bound, x[5], p};
  OmniRun run;
  run.safe_radius = cfg.beta_prime - p.disturbance_bound / cfg.alpha;
  const int steps = static_cast<int>(std::llround(cfg.duration / cfg.dt));

  for (int k = 0; k <= steps; ++k) {
    OmniSample s;
    s.t = k * cfg.dt;
    s.x = x;
    s.distance = Eigen::Vector2d(x[0] - x[3], x[1] - x[4]).norm();
    run.min_distance = std::min(run.min_distance, s.distance);
    if (s.distance < run.safe_radius) run.stayed_in_Cx = false;
    if (s.distance < cfg.beta) run.stayed_in_Sx = false;
    spec.theta2 = x[5];
    const Vec z = omni_encode(x);
    s.u_nom = nominal_proportional(x, cfg.goal, cfg.gain, p);
    s.margin = cbf_feasibility_margin(z, spec);
    if (cfg.nominal_only) {
      s.u = s.u_nom;
    } else {
      try {
        s.u = cbf_qp(s.u_nom, z, spec);
      } catch (const InfeasibleError& e) {
        ++run.infeasible_steps;
        std::ostringstream msg;
        msg << "t=" << s.t << " infeasible, margin " << e.margin() << ", state";
        for (Eigen::Index i = 0; i < x.size(); ++i) msg << ' ' << x[i];
        run.events.push_back(msg.str());
        const CbfConstraint c = cbf_constraint(z, spec);
        s.u = c.a.unaryExpr([&](double a) { return a >= 0.0 ? p.input_bound : -p.input_bound; });
      }
    }
    s.modified = (s.u - s.u_nom).norm() > 0.0;
    run.samples.push_back(s);
    if (k == steps) break;
    const Vec u = s.u;
    const VectorField field = [&](const Vec& state, const Vec& input) {
      return omni::deriv(state, input, omni::adversarial_disturbance(state, p.disturbance_bound),
                         p);
    };
    x = rk4_step(field, x, u, cfg.dt);
  }
  run.final_goal_distance = (x.head<2>() - cfg.goal).norm();
  return run;
}

inline std::string omni_csv(const OmniRun& run) {
  std::ostringstream os;
  os << "t[s],p1x[m],p1y[m],theta1[rad],p2x[m],p2y[m],theta2[rad],distance[m],"
        "feasibility_margin[1/s],u_nom1[rad/s],u_nom2[rad/s],u_nom3[rad/s],u1[rad/s],"
        "u2[rad/s],u3[rad/s],filtered\n";
  for (const auto& s : run.samples) {
    os << fmt(s.t);
    for (Eigen::Index i = 0; i < 6; ++i) os << ',' << fmt(s.x[i]);
    os << ',' << fmt(s.distance) << ',' << fmt(s.margin);
    for (Eigen::Index i = 0; i < 3; ++i) os << ',' << fmt(s.u_nom[i]);
    for (Eigen::Index i = 0; i < 3; ++i) os << ',' << fmt(s.u[i]);
    os << ',' << (s.modified ? 1 : 0) << '\n';
  }
  return os.str();
}

inline Json omni_report(const OmniRun& run, const OmniConfig& cfg) {
  return Json{{"alpha", cfg.alpha},
              {"beta", cfg.beta},
              {"beta_prime", cfg.beta_prime},
              {"input_bound", cfg.vehicle.input_bound},
              {"disturbance_bound", cfg.vehicle.disturbance_bound},
              {"dt", cfg.dt},
              {"duration", cfg.duration},
              {"nominal_only", cfg.nominal_only},
              {"min_distance", run.min_distance},
              {"safe_radius", run.safe_radius},
              {"stayed_in_Cx_gamma", run.stayed_in_Cx},
              {"stayed_in_Sx", run.stayed_in_Sx},
              {"robust_margin_ok", cfg.beta_prime >= cfg.beta + cfg.vehicle.disturbance_bound / cfg.alpha},
              {"infeasible_steps", run.infeasible_steps},
              {"events", run.events},
              {"final_goal_distance", run.final_goal_distance}};
}

}  // namespace lcert
