#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lcert/core/random.hpp"
#include "lcert/io/json_io.hpp"
#include "lcert/systems/cartpole.hpp"

namespace lcert {

/// States x_1..x_T with inputs u_1..u_T. The final input is never applied and
/// is stored as zero.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> inputs;

  std::size_t length() const { return states.size(); }
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  bool empty() const { return trajectories.empty(); }

  std::size_t state_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.length();
    return n;
  }

  void validate() const {
    for (const auto& t : trajectories) {
      if (t.states.size() != t.inputs.size() || t.states.empty())
        throw ContractError("dataset: states and inputs must have equal, nonzero length");
      for (const auto& s : t.states)
        if (!s.allFinite()) throw NumericDomainError("dataset: non-finite state");
    }
  }
};

/// D' = D_a followed by D_b.
inline TrajectoryDataset concat(const TrajectoryDataset& a, const TrajectoryDataset& b) {
  TrajectoryDataset out = a;
  out.trajectories.insert(out.trajectories.end(), b.trajectories.begin(),
                          b.trajectories.end());
  return out;
}

struct CollectionSpec {
  Vec center = Vec::Zero(4);
  double radius = 0.1;      // initial states grid {|x - center|_inf <= radius}
  int points_per_dim = 3;
  double u_min = -3.0;
  double u_max = 3.0;
  int u_points = 7;
  int horizon = 16;         // T_1
  double angle_limit = std::numbers::pi / 2.0;

  void validate() const {
    if (center.size() != cartpole::kStateDim)
      throw ConfigError("collection: center must be 4-dimensional");
    if (!(radius >= 0.0)) throw ConfigError("collection: radius must be >= 0");
    if (points_per_dim < 1 || u_points < 1)
      throw ConfigError("collection: grid counts must be >= 1");
    if (!(u_min <= u_max)) throw ConfigError("collection: u_min must not exceed u_max");
    if (horizon < 2) throw ConfigError("collection: horizon must be >= 2");
  }
};

/// Grid of initial (x, u) pairs followed by T_1 - 2 uniform random inputs.
/// Trajectories are kept only if |theta| < angle_limit at every state.
inline TrajectoryDataset collect_random_dataset(const cartpole::Params& p,
                                                const CollectionSpec& spec,
                                                std::uint64_t seed) {
  p.validate();
  spec.validate();
  Rng rng(seed);
  const Vec lo = spec.center.array() - spec.radius;
  const Vec hi = spec.center.array() + spec.radius;
  TrajectoryDataset out;
  for (const Vec& x0 : box_grid(lo, hi, spec.points_per_dim)) {
    for (double u0 : linspace(spec.u_min, spec.u_max, spec.u_points)) {
      Trajectory traj;
      traj.states.push_back(x0);
      traj.inputs.push_back(Vec::Constant(1, u0));
      for (int t = 1; t < spec.horizon; ++t) {
        traj.states.push_back(cartpole::step(traj.states.back(), traj.inputs.back()[0], p));
        const double u = t + 1 < spec.horizon ? rng.uniform(spec.u_min, spec.u_max) : 0.0;
        traj.inputs.push_back(Vec::Constant(1, u));
      }
      bool upright = true;
      for (const auto& s : traj.states)
        if (!(std::abs(s[2]) < spec.angle_limit)) upright = false;
      if (upright) out.trajectories.push_back(std::move(traj));
    }
  }
  if (out.empty())
    throw CollectionError("collect_random_dataset: upright filter rejected every trajectory");
  return out;
}

/// Every state of `base` evolved one step with zero input.
inline TrajectoryDataset collect_drift_dataset(const TrajectoryDataset& base,
                                               const cartpole::Params& p) {
  TrajectoryDataset out;
  out.trajectories.reserve(base.state_count());
  const Vec zero = Vec::Zero(1);
  for (const auto& traj : base.trajectories)
    for (const auto& s : traj.states)
      out.trajectories.push_back({{s, cartpole::step(s, 0.0, p)}, {zero, zero}});
  return out;
}

inline Json dataset_to_json(const TrajectoryDataset& d) {
  Json trajs = Json::array();
  for (const auto& t : d.trajectories) {
    Json states = Json::array(), inputs = Json::array();
    for (const auto& s : t.states) states.push_back(to_json(s));
    for (const auto& u : t.inputs) inputs.push_back(to_json(u));
    trajs.push_back({{"states", states}, {"inputs", inputs}});
  }
  return Json{{"trajectories", trajs}};
}

inline TrajectoryDataset dataset_from_json(const Json& j) {
  TrajectoryDataset d;
  for (const auto& jt : j.at("trajectories")) {
    Trajectory t;
    for (const auto& s : jt.at("states")) t.states.push_back(vec_from_json(s));
    for (const auto& u : jt.at("inputs")) t.inputs.push_back(vec_from_json(u));
    d.trajectories.push_back(std::move(t));
  }
  d.validate();
  return d;
}

}  // namespace lcert
