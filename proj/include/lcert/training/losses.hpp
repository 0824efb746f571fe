#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "lcert/models/latent_model.hpp"
#include "lcert/training/dataset.hpp"

namespace lcert {

enum class LossKind { kFwd, kBwd, kLeft, kRight, kOri, kIso };

inline constexpr std::array<LossKind, 6> kAllLosses{LossKind::kFwd,  LossKind::kBwd,
                                                    LossKind::kLeft, LossKind::kRight,
                                                    LossKind::kOri,  LossKind::kIso};

inline std::string to_string(LossKind k) {
  switch (k) {
    case LossKind::kFwd: return "fwd";
    case LossKind::kBwd: return "bwd";
    case LossKind::kLeft: return "left";
    case LossKind::kRight: return "right";
    case LossKind::kOri: return "ori";
    case LossKind::kIso: return "iso";
  }
  return "?";
}

inline LossKind loss_kind_from_string(const std::string& s) {
  for (auto k : kAllLosses)
    if (to_string(k) == s) return k;
  throw ConfigError("unknown loss '" + s + "'");
}

struct LossWeights {
  std::array<double, 6> lambda{5.0, 1.0, 1.0, 1.0, 1.0, 1.0};

  double& operator[](LossKind k) { return lambda[static_cast<int>(k)]; }
  double operator[](LossKind k) const { return lambda[static_cast<int>(k)]; }

  void validate() const {
    for (double l : lambda)
      if (!(l >= 0.0)) throw ConfigError("loss weights must be nonnegative");
  }
};

struct LossBreakdown {
  std::array<double, 6> term{};
  double total = 0.0;

  double operator[](LossKind k) const { return term[static_cast<int>(k)]; }
};

/// Parameter gradients of a LatentModel, one block per network.
struct LatentGrad {
  MlpGrad encoder, decoder, a_net, b_net;

  explicit LatentGrad(const LatentModel& m)
      : encoder(m.encoder.zero_grad()),
        decoder(m.decoder.zero_grad()),
        a_net(m.a_net.zero_grad()),
        b_net(m.b_net.zero_grad()) {}

  /// Same flat order as LatentModel::pack.
  Vec flatten(const LatentModel& m) const {
    Vec out(static_cast<Eigen::Index>(m.parameter_count()));
    double* p = out.data();
    Mlp::pack_grad(encoder, p);
    p += m.encoder.parameter_count();
    Mlp::pack_grad(decoder, p);
    p += m.decoder.parameter_count();
    Mlp::pack_grad(a_net, p);
    p += m.a_net.parameter_count();
    Mlp::pack_grad(b_net, p);
    return out;
  }
};

namespace detail {

/// Trajectories of equal length T stored k-major: column k * n + i holds
/// step k of the i-th trajectory in the group.
struct LengthGroup {
  int length = 0;
  int count = 0;
  Mat states;
  Mat inputs;
};

/// Groups of at most `chunk` trajectories, so a rollout batch stays in cache.
inline std::vector<LengthGroup> group_by_length(const TrajectoryDataset& d, int chunk = 16) {
  std::map<int, std::vector<const Trajectory*>> by_len;
  for (const auto& t : d.trajectories) by_len[static_cast<int>(t.length())].push_back(&t);
  std::vector<LengthGroup> out;
  for (const auto& [len, all] : by_len) {
    for (std::size_t first = 0; first < all.size(); first += static_cast<std::size_t>(chunk)) {
      const std::size_t last = std::min(all.size(), first + static_cast<std::size_t>(chunk));
      LengthGroup g;
      g.length = len;
      g.count = static_cast<int>(last - first);
      const auto nx = all.front()->states.front().size();
      const auto nu = all.front()->inputs.front().size();
      g.states.resize(nx, static_cast<Eigen::Index>(len) * g.count);
      g.inputs.resize(nu, static_cast<Eigen::Index>(len) * g.count);
      for (int k = 0; k < len; ++k)
        for (int i = 0; i < g.count; ++i) {
          g.states.col(k * g.count + i) = all[first + i]->states[k];
          g.inputs.col(k * g.count + i) = all[first + i]->inputs[k];
        }
      out.push_back(std::move(g));
    }
  }
  return out;
}

}  // namespace detail

/// L(phi) = l1 L_fwd(D') + l2 L_bwd(D') + l3 L_left(D_rand) + l4 L_right(D_rand)
///        + l5 L_ori + l6 L_iso(D_rand),   D' = D_rand u D_drift,
/// with exact gradients by batched reverse mode through the latent rollouts.
class LatentObjective {
 public:
  LatentObjective(const TrajectoryDataset& rand, const TrajectoryDataset& drift,
                  LossWeights weights)
      : weights_(weights) {
    weights_.validate();
    if (rand.empty()) throw ContractError("LatentObjective: empty D_rand");
    rand.validate();
    drift.validate();
    const auto both = concat(rand, drift);
    dynamics_groups_ = detail::group_by_length(both);
    dynamics_count_ = static_cast<double>(both.size());
    static_groups_ = detail::group_by_length(rand);
    static_count_ = static_cast<double>(rand.size());
  }

  const LossWeights& weights() const { return weights_; }

  /// Evaluates every term. Gradients of the weighted total are added to
  /// `grad` when it is non-null. Terms with zero weight are still reported.
  LossBreakdown evaluate(const LatentModel& m, LatentGrad* grad = nullptr) const {
    LossBreakdown out;
    for (const auto& g : dynamics_groups_) dynamics_terms(m, g, out, grad);
    for (const auto& g : static_groups_) static_terms(m, g, out, grad);
    iso_term(m, out, grad);
    ori_term(m, out, grad);
    out.total = 0.0;
    for (auto k : kAllLosses) out.total += weights_[k] * out[k];
    return out;
  }

 private:
  void dynamics_terms(const LatentModel& m, const detail::LengthGroup& g,
                      LossBreakdown& out, LatentGrad* grad) const {
    const int T = g.length, n = g.count;
    if (T < 2) return;
    const double w_fwd = weights_[LossKind::kFwd] / dynamics_count_;
    const double w_bwd = weights_[LossKind::kBwd] / dynamics_count_;

    MlpTape enc_tape;
    const Mat Z_all = grad ? m.encoder.forward(g.states, enc_tape) : m.encoder.forward(g.states);
    Mat dZ_all = grad ? Mat::Zero(Z_all.rows(), Z_all.cols()) : Mat();

    std::vector<LatentStepTape> step_tapes(grad ? T - 1 : 0);
    std::vector<Mat> dz_direct(grad ? T - 1 : 0);
    Mat z = Z_all.leftCols(static_cast<Eigen::Index>(T - 1) * n);
    double fwd = 0.0, bwd = 0.0;
    for (int t = 1; t < T; ++t) {
      const Eigen::Index cols = static_cast<Eigen::Index>(T - t) * n;
      const Mat u = g.inputs.middleCols(static_cast<Eigen::Index>(t - 1) * n, cols);
      z = latent_step_batch(m, z.leftCols(cols), u, grad ? &step_tapes[t - 1] : nullptr);

      const Mat z_err = z - Z_all.middleCols(static_cast<Eigen::Index>(t) * n, cols);
      fwd += z_err.squaredNorm();

      MlpTape dec_tape;
      const Mat x_hat = grad ? m.decoder.forward(z, dec_tape) : m.decoder.forward(z);
      const Mat x_err = x_hat - g.states.middleCols(static_cast<Eigen::Index>(t) * n, cols);
      bwd += x_err.squaredNorm();

      if (grad) {
        Mat dz = 2.0 * w_fwd * z_err;
        dZ_all.middleCols(static_cast<Eigen::Index>(t) * n, cols) -= dz;
        if (w_bwd != 0.0) dz += m.decoder.backward(dec_tape, 2.0 * w_bwd * x_err, grad->decoder);
        dz_direct[t - 1] = std::move(dz);
      }
    }
    out.term[static_cast<int>(LossKind::kFwd)] += fwd / dynamics_count_;
    out.term[static_cast<int>(LossKind::kBwd)] += bwd / dynamics_count_;
    if (!grad) return;

    Mat carry;
    for (int t = T - 1; t >= 1; --t) {
      Mat g_t = dz_direct[t - 1];
      if (carry.size() > 0) g_t.leftCols(carry.cols()) += carry;
      carry = latent_step_backward(m, step_tapes[t - 1], g_t, grad->a_net, grad->b_net);
    }
    dZ_all.leftCols(carry.cols()) += carry;
    m.encoder.backward(enc_tape, dZ_all, grad->encoder);
  }

  /// L_left and L_right over D_rand, weighted 1/(N T_i) per sample.
  void static_terms(const LatentModel& m, const detail::LengthGroup& g,
                    LossBreakdown& out, LatentGrad* grad) const {
    const double w = 1.0 / (static_count_ * g.length);
    MlpTape enc_tape, dec_tape, enc2_tape;
    const Mat Z = grad ? m.encoder.forward(g.states, enc_tape) : m.encoder.forward(g.states);
    const Mat X_hat = grad ? m.decoder.forward(Z, dec_tape) : m.decoder.forward(Z);
    const Mat Z_hat = grad ? m.encoder.forward(X_hat, enc2_tape) : m.encoder.forward(X_hat);
    const Mat left_err = X_hat - g.states;
    const Mat right_err = Z_hat - Z;
    out.term[static_cast<int>(LossKind::kLeft)] += w * left_err.squaredNorm();
    out.term[static_cast<int>(LossKind::kRight)] += w * right_err.squaredNorm();
    if (!grad) return;
    const double wl = weights_[LossKind::kLeft] * w, wr = weights_[LossKind::kRight] * w;
    Mat dX_hat = 2.0 * wl * left_err;
    dX_hat += m.encoder.backward(enc2_tape, 2.0 * wr * right_err, grad->encoder);
    Mat dZ = -2.0 * wr * right_err;
    dZ += m.decoder.backward(dec_tape, dX_hat, grad->decoder);
    m.encoder.backward(enc_tape, dZ, grad->encoder);
  }

  /// || I - sum E E^T / (N T_i) ||_F over D_rand.
  void iso_term(const LatentModel& m, LossBreakdown& out, LatentGrad* grad) const {
    const int nz = m.latent_dim();
    Mat S = Mat::Zero(nz, nz);
    std::vector<MlpTape> tapes(static_groups_.size());
    std::vector<Mat> Zs;
    for (std::size_t gi = 0; gi < static_groups_.size(); ++gi) {
      const auto& g = static_groups_[gi];
      Zs.push_back(grad ? m.encoder.forward(g.states, tapes[gi]) : m.encoder.forward(g.states));
      S += Zs.back() * Zs.back().transpose() / (static_count_ * g.length);
    }
    const Mat D = Mat::Identity(nz, nz) - S;
    const double value = D.norm();
    out.term[static_cast<int>(LossKind::kIso)] = value;
    if (!grad || value == 0.0 || weights_[LossKind::kIso] == 0.0) return;
    const Mat dS = -weights_[LossKind::kIso] * D / value;
    for (std::size_t gi = 0; gi < static_groups_.size(); ++gi) {
      const double w = 1.0 / (static_count_ * static_groups_[gi].length);
      const Mat dZ = w * (dS + dS.transpose()) * Zs[gi];
      m.encoder.backward(tapes[gi], dZ, grad->encoder);
    }
  }

  /// || E(0) ||, unsquared.
  void ori_term(const LatentModel& m, LossBreakdown& out, LatentGrad* grad) const {
    MlpTape tape;
    const Mat origin = Mat::Zero(m.state_dim(), 1);
    const Mat z0 = m.encoder.forward(origin, tape);
    const double value = z0.norm();
    out.term[static_cast<int>(LossKind::kOri)] = value;
    if (!grad || value == 0.0 || weights_[LossKind::kOri] == 0.0) return;
    m.encoder.backward(tape, weights_[LossKind::kOri] * z0 / value, grad->encoder);
  }

  LossWeights weights_;
  std::vector<detail::LengthGroup> dynamics_groups_;
  std::vector<detail::LengthGroup> static_groups_;
  double dynamics_count_ = 0.0;
  double static_count_ = 0.0;
};

/// Single loss term on one dataset, with D serving as both D' and D_rand.
inline double reconstruction_loss(const LatentModel& m, const TrajectoryDataset& d,
                                  LossKind kind) {
  LossWeights w;
  w.lambda.fill(0.0);
  return LatentObjective(d, TrajectoryDataset{}, w).evaluate(m)[kind];
}

inline LossBreakdown total_loss(const LatentModel& m, const TrajectoryDataset& rand,
                                const TrajectoryDataset& drift, const LossWeights& w) {
  return LatentObjective(rand, drift, w).evaluate(m);
}

}  // namespace lcert
