#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcert/control/cbf.hpp"
#include "lcert/io/json_io.hpp"
#include "lcert/systems/cartpole.hpp"
#include "lcert/training/train.hpp"

namespace lcert {

struct CertifyConfig {
  double r1 = 1.5;
  int dz_horizon = 300;  // T
  int dz_points = 21;
  double r2 = 0.5;
  int dx_horizon = 100;  // T'
  int dx_points = 7;
  double eps = 0.01;
  int check_points = 101;       // per latent axis, for the D_z certificate grid
  int probe_points = 13;        // per state axis, for alpha0
  double probe_scale = 1.5;
  double alpha0_tolerance = 1e-3;
  int lipschitz_pairs = 10000;
  int trajectories = 100;
  int boundary_seeds = 20;
  int horizon = 300;
  int invariance_probes = 1000;
  double zero_set_tol = 0.05;
  int zero_set_points = 21;
  int slice_points = 61;
  double slice_radius = 1.0;

  void validate() const {
    if (!(r1 > 0.0 && r2 > 0.0)) throw ConfigError("certify: r1 and r2 must be positive");
    if (dz_horizon < 0 || dx_horizon < 0 || horizon < 0)
      throw ConfigError("certify: horizons must be >= 0");
    if (dz_points < 1 || dx_points < 1 || check_points < 1 || probe_points < 2 ||
        zero_set_points < 1 || slice_points < 1)
      throw ConfigError("certify: grid sizes must be positive");
    if (!(eps >= 0.0)) throw ConfigError("certify: eps must be >= 0");
    if (!(probe_scale > 1.0)) throw ConfigError("certify: probe box must be strictly larger than D_x");
    if (trajectories < 0 || boundary_seeds < 0 || lipschitz_pairs < 0 || invariance_probes < 0)
      throw ConfigError("certify: counts must be >= 0");
  }
};

struct OmniConfig {
  omni::Params vehicle{};
  double alpha = 2.0;
  double beta = 4.5;
  double beta_prime = 5.0;
  double dt = 0.01;
  double duration = 30.0;
  double gain = 1.0;
  Vec active_start = (Vec(3) << 10.0, 0.5, 0.0).finished();
  Vec passive_start = (Vec(3) << 0.0, 0.0, 0.0).finished();
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  bool nominal_only = false;

  void validate() const {
    vehicle.validate();
    if (!(alpha > 0.0 && beta > 0.0 && beta_prime > 0.0))
      throw ConfigError("omni: alpha, beta and beta_prime must be positive");
    if (!(dt > 0.0 && duration > 0.0)) throw ConfigError("omni: dt and duration must be positive");
    if (!(gain >= 0.0)) throw ConfigError("omni: gain must be >= 0");
    if (active_start.size() != 3 || passive_start.size() != 3)
      throw ConfigError("omni: starts are (x, y, heading)");
  }
};

struct RunConfig {
  std::string experiment = "cartpole";
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  cartpole::Params cartpole{};
  CollectionSpec collection{};
  LatentArch arch{};
  LossWeights weights{};
  TrainConfig train{};
  LyapunovSampleSpec lyapunov{};
  TrainConfig lyapunov_train{1e-3, 1000, 0, OptimizerKind::kAdam, 0.85};
  CertifyConfig certify{};
  OmniConfig omni{};

  void validate() const {
    if (experiment != "cartpole" && experiment != "omni")
      throw ConfigError("experiment must be 'cartpole' or 'omni'");
    cartpole.validate();
    collection.validate();
    weights.validate();
    train.validate();
    lyapunov.validate();
    lyapunov_train.validate();
    if (!(lyapunov_train.rho < 1.0)) throw ConfigError("lyapunov: rho must be < 1");
    certify.validate();
    omni.validate();
    if (arch.latent_dim < 1 || arch.latent_dim > arch.state_dim)
      throw ConfigError("model: latent_dim must lie in [1, state_dim]");
  }
};

namespace detail {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

inline void read_vec(const Json& j, const char* key, Vec& out) {
  if (j.contains(key)) out = vec_from_json(j.at(key));
}

inline void check_keys(const Json& j, const std::vector<std::string>& allowed,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == k;
    if (!ok) throw ConfigError("unknown config field '" + where + "." + k + "'");
  }
}

}  // namespace detail

inline RunConfig config_from_json(const Json& j) {
  using detail::read;
  RunConfig c;
  detail::check_keys(j, {"experiment", "seed", "output_dir", "cartpole", "collection", "model",
                         "loss_weights", "train", "lyapunov", "certify", "omni"},
                     "config");
  read(j, "experiment", c.experiment);
  read(j, "seed", c.seed);
  read(j, "output_dir", c.output_dir);
  if (j.contains("cartpole")) {
    const auto& s = j["cartpole"];
    detail::check_keys(s, {"gravity", "cart_mass", "pole_mass", "half_length", "dt", "u_max"},
                       "cartpole");
    read(s, "gravity", c.cartpole.gravity);
    read(s, "cart_mass", c.cartpole.cart_mass);
    read(s, "pole_mass", c.cartpole.pole_mass);
    read(s, "half_length", c.cartpole.half_length);
    read(s, "dt", c.cartpole.dt);
    read(s, "u_max", c.cartpole.u_max);
  }
  if (j.contains("collection")) {
    const auto& s = j["collection"];
    detail::check_keys(s, {"center", "radius", "points_per_dim", "u_min", "u_max", "u_points",
                           "horizon"},
                       "collection");
    detail::read_vec(s, "center", c.collection.center);
    read(s, "radius", c.collection.radius);
    read(s, "points_per_dim", c.collection.points_per_dim);
    read(s, "u_min", c.collection.u_min);
    read(s, "u_max", c.collection.u_max);
    read(s, "u_points", c.collection.u_points);
    read(s, "horizon", c.collection.horizon);
  }
  if (j.contains("model")) {
    const auto& s = j["model"];
    detail::check_keys(s, {"latent_dim", "encoder_hidden", "decoder_hidden", "dynamics_hidden"},
                       "model");
    read(s, "latent_dim", c.arch.latent_dim);
    read(s, "encoder_hidden", c.arch.encoder_hidden);
    read(s, "decoder_hidden", c.arch.decoder_hidden);
    read(s, "dynamics_hidden", c.arch.dynamics_hidden);
  }
  if (j.contains("loss_weights")) {
    const auto& s = j["loss_weights"];
    detail::check_keys(s, {"fwd", "bwd", "left", "right", "ori", "iso"}, "loss_weights");
    for (auto k : kAllLosses) read(s, to_string(k).c_str(), c.weights[k]);
  }
  if (j.contains("train")) {
    const auto& s = j["train"];
    detail::check_keys(s, {"learning_rate", "epochs", "optimizer"}, "train");
    read(s, "learning_rate", c.train.learning_rate);
    read(s, "epochs", c.train.epochs);
    if (s.contains("optimizer"))
      c.train.optimizer = optimizer_from_string(s["optimizer"].get<std::string>());
  }
  if (j.contains("lyapunov")) {
    const auto& s = j["lyapunov"];
    detail::check_keys(s, {"rho", "radius", "points_per_dim", "horizon", "hidden", "quad_weight",
                           "learning_rate", "epochs", "optimizer"},
                       "lyapunov");
    read(s, "rho", c.lyapunov_train.rho);
    read(s, "radius", c.lyapunov.radius);
    read(s, "points_per_dim", c.lyapunov.points_per_dim);
    read(s, "horizon", c.lyapunov.horizon);
    read(s, "hidden", c.lyapunov.hidden);
    read(s, "quad_weight", c.lyapunov.quad_weight);
    read(s, "learning_rate", c.lyapunov_train.learning_rate);
    read(s, "epochs", c.lyapunov_train.epochs);
    if (s.contains("optimizer"))
      c.lyapunov_train.optimizer = optimizer_from_string(s["optimizer"].get<std::string>());
  }
  if (j.contains("certify")) {
    const auto& s = j["certify"];
    auto& k = c.certify;
    detail::check_keys(s, {"r1", "dz_horizon", "dz_points", "r2", "dx_horizon", "dx_points",
                           "eps", "check_points", "probe_points", "probe_scale",
                           "alpha0_tolerance", "lipschitz_pairs", "trajectories",
                           "boundary_seeds", "horizon", "invariance_probes", "zero_set_tol",
                           "zero_set_points", "slice_points", "slice_radius"},
                       "certify");
    read(s, "r1", k.r1);
    read(s, "dz_horizon", k.dz_horizon);
    read(s, "dz_points", k.dz_points);
    read(s, "r2", k.r2);
    read(s, "dx_horizon", k.dx_horizon);
    read(s, "dx_points", k.dx_points);
    read(s, "eps", k.eps);
    read(s, "check_points", k.check_points);
    read(s, "probe_points", k.probe_points);
    read(s, "probe_scale", k.probe_scale);
    read(s, "alpha0_tolerance", k.alpha0_tolerance);
    read(s, "lipschitz_pairs", k.lipschitz_pairs);
    read(s, "trajectories", k.trajectories);
    read(s, "boundary_seeds", k.boundary_seeds);
    read(s, "horizon", k.horizon);
    read(s, "invariance_probes", k.invariance_probes);
    read(s, "zero_set_tol", k.zero_set_tol);
    read(s, "zero_set_points", k.zero_set_points);
    read(s, "slice_points", k.slice_points);
    read(s, "slice_radius", k.slice_radius);
  }
  if (j.contains("omni")) {
    const auto& s = j["omni"];
    auto& o = c.omni;
    detail::check_keys(s, {"body_radius", "wheel_radius", "input_bound", "disturbance_bound",
                           "alpha", "beta", "beta_prime", "dt", "duration", "gain",
                           "active_start", "passive_start", "goal", "nominal_only"},
                       "omni");
    read(s, "body_radius", o.vehicle.body_radius);
    read(s, "wheel_radius", o.vehicle.wheel_radius);
    read(s, "input_bound", o.vehicle.input_bound);
    read(s, "disturbance_bound", o.vehicle.disturbance_bound);
    read(s, "alpha", o.alpha);
    read(s, "beta", o.beta);
    read(s, "beta_prime", o.beta_prime);
    read(s, "dt", o.dt);
    read(s, "duration", o.duration);
    read(s, "gain", o.gain);
    detail::read_vec(s, "active_start", o.active_start);
    detail::read_vec(s, "passive_start", o.passive_start);
    if (s.contains("goal")) {
      const Vec g = vec_from_json(s["goal"]);
      if (g.size() != 2) throw ConfigError("omni.goal must have 2 entries");
      o.goal = g;
    }
    read(s, "nominal_only", o.nominal_only);
  }
  c.train.seed = c.seed;
  c.lyapunov_train.seed = c.seed + 1;
  c.train.rho = c.lyapunov_train.rho;
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path));
}

}  // namespace lcert
