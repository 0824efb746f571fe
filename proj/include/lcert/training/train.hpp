#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "lcert/training/losses.hpp"
#include "lcert/training/optim.hpp"

namespace lcert {

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 2000;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double rho = 0.85;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("train: rho must lie in (0, 1]");
  }
};

struct LatentTrainResult {
  LatentModel model;
  std::vector<LossBreakdown> curve;  // one entry per evaluated epoch, epochs + 1 total
  int best_epoch = 0;
  double best_loss = 0.0;
};

/// Full-batch descent on total_loss. Returns the parameters with the lowest
/// recorded loss.
inline LatentTrainResult train_latent(const TrainConfig& cfg, LatentModel model,
                                      const LatentObjective& objective) {
  cfg.validate();
  Vec params = model.pack();
  Optimizer opt(cfg.optimizer, cfg.learning_rate, params.size());
  LatentTrainResult out{model, {}, 0, std::numeric_limits<double>::infinity()};
  Vec best = params;
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    LatentGrad grad(model);
    const LossBreakdown loss = objective.evaluate(model, &grad);
    if (!std::isfinite(loss.total)) {
      out.model.unpack(best);
      throw TrainingError("train_latent: non-finite loss at epoch " + std::to_string(epoch),
                          std::vector<double>(best.data(), best.data() + best.size()));
    }
    out.curve.push_back(loss);
    if (loss.total < out.best_loss) {
      out.best_loss = loss.total;
      out.best_epoch = epoch;
      best = params;
    }
    if (epoch == cfg.epochs) break;
    opt.step(params, grad.flatten(model));
    model.unpack(params);
  }
  out.model.unpack(best);
  return out;
}

inline LatentTrainResult train_latent(const TrajectoryDataset& rand,
                                      const TrajectoryDataset& drift,
                                      const LossWeights& weights, const LatentArch& arch,
                                      const TrainConfig& cfg) {
  Rng rng(cfg.seed);
  return train_latent(cfg, LatentModel::make(arch, rng), LatentObjective(rand, drift, weights));
}

using LatentPolicy = std::function<Vec(const Vec&)>;

/// Closed-loop latent map z -> f_z(z, pi(z)).
inline std::function<Vec(const Vec&)> latent_closed_loop(const LatentModel& m,
                                                         LatentPolicy pi) {
  return [&m, pi = std::move(pi)](const Vec& z) { return m.step(z, pi(z)); };
}

struct LyapunovSampleSpec {
  double radius = 1.5;       // seeds grid {|z - z_eq|_inf <= radius}
  int points_per_dim = 15;
  int horizon = 30;
  std::vector<int> hidden{256, 256};
  double quad_weight = 0.1;

  void validate() const {
    if (!(radius > 0.0)) throw ConfigError("lyapunov: radius must be positive");
    if (points_per_dim < 1 || horizon < 1)
      throw ConfigError("lyapunov: grid and horizon must be >= 1");
  }
};

/// Pairs (z_t, z_{t+1}) from closed-loop rollouts seeded on a grid.
struct TransitionSet {
  Mat from;
  Mat to;
};

inline TransitionSet closed_loop_transitions(const std::function<Vec(const Vec&)>& fz,
                                             const Vec& z_eq,
                                             const LyapunovSampleSpec& spec) {
  std::vector<Vec> from, to;
  const Vec lo = z_eq.array() - spec.radius, hi = z_eq.array() + spec.radius;
  for (const Vec& seed : box_grid(lo, hi, spec.points_per_dim)) {
    Vec z = seed;
    for (int t = 0; t < spec.horizon; ++t) {
      Vec next = fz(z);
      if (!next.allFinite()) break;
      from.push_back(z);
      to.push_back(next);
      z = std::move(next);
    }
  }
  TransitionSet s{Mat(z_eq.size(), from.size()), Mat(z_eq.size(), to.size())};
  for (std::size_t i = 0; i < from.size(); ++i) {
    s.from.col(static_cast<Eigen::Index>(i)) = from[i];
    s.to.col(static_cast<Eigen::Index>(i)) = to[i];
  }
  return s;
}

struct LyapunovLoss {
  double value = 0.0;
  int satisfied = 0;
};

/// sum max(0, V(z+) - rho V(z))^2 with the parameter gradient added to `grad`.
inline LyapunovLoss lyapunov_hinge(const LyapunovNet& V, const TransitionSet& s, double rho,
                                   MlpGrad* grad) {
  const Mat D = s.from.colwise() - V.z_eq;
  const Mat Dp = s.to.colwise() - V.z_eq;
  MlpTape tape, tape_p;
  const Eigen::RowVectorXd F = grad ? V.net.forward(D, tape).row(0) : V.net.forward(D).row(0);
  const Eigen::RowVectorXd Fp =
      grad ? V.net.forward(Dp, tape_p).row(0) : V.net.forward(Dp).row(0);
  const Eigen::RowVectorXd v = F.array().square() + V.quad_weight * D.colwise().squaredNorm().array();
  const Eigen::RowVectorXd vp =
      Fp.array().square() + V.quad_weight * Dp.colwise().squaredNorm().array();
  const Eigen::RowVectorXd h = (vp - rho * v).cwiseMax(0.0);
  LyapunovLoss out;
  out.value = h.squaredNorm();
  for (Eigen::Index i = 0; i < h.size(); ++i)
    if (h[i] == 0.0) ++out.satisfied;
  if (grad && out.value > 0.0) {
    // d/dF of h^2 through V = F^2 + w|d|^2
    Mat up = (2.0 * h.array() * 2.0 * Fp.array()).matrix();
    V.net.backward(tape_p, up, *grad);
    up = (-2.0 * rho * h.array() * 2.0 * F.array()).matrix();
    V.net.backward(tape, up, *grad);
  }
  return out;
}

struct LyapunovTrainResult {
  LyapunovNet net;
  double satisfied_fraction = 0.0;
  std::vector<double> curve;
};

/// Fits V with the latent model frozen. The returned fraction counts training
/// transitions with zero hinge.
inline LyapunovTrainResult train_lyapunov(const LatentModel& model, LatentPolicy pi,
                                          const Vec& z_eq, const LyapunovSampleSpec& spec,
                                          const TrainConfig& cfg) {
  cfg.validate();
  spec.validate();
  const TransitionSet s = closed_loop_transitions(latent_closed_loop(model, std::move(pi)),
                                                  z_eq, spec);
  if (s.from.cols() == 0)
    throw ContractError("train_lyapunov: no finite closed-loop transitions");
  Rng rng(cfg.seed);
  LyapunovTrainResult out{LyapunovNet::make(model.latent_dim(), z_eq, rng, spec.hidden,
                                            spec.quad_weight),
                          0.0,
                          {}};
  Vec params(static_cast<Eigen::Index>(out.net.net.parameter_count()));
  out.net.net.pack(params.data());
  Vec best = params, flat(params.size());
  double best_loss = std::numeric_limits<double>::infinity();
  Optimizer opt(cfg.optimizer, cfg.learning_rate, params.size());
  for (int epoch = 0; epoch <= cfg.epochs; ++epoch) {
    MlpGrad g = out.net.net.zero_grad();
    const LyapunovLoss loss = lyapunov_hinge(out.net, s, cfg.rho, &g);
    if (!std::isfinite(loss.value)) break;
    out.curve.push_back(loss.value);
    if (loss.value < best_loss) {
      best_loss = loss.value;
      best = params;
    }
    if (loss.value == 0.0 || epoch == cfg.epochs) break;
    Mlp::pack_grad(g, flat.data());
    opt.step(params, flat);
    out.net.net.unpack(params.data());
  }
  out.net.net.unpack(best.data());
  const LyapunovLoss final_loss = lyapunov_hinge(out.net, s, cfg.rho, nullptr);
  out.satisfied_fraction = static_cast<double>(final_loss.satisfied) / s.from.cols();
  return out;
}

}  // namespace lcert
