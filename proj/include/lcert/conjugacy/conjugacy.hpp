#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcert/io/json_io.hpp"
#include "lcert/systems/omni.hpp"

namespace lcert {

enum class ConjugacyMode { kForward, kBackward };
enum class TimeModel { kContinuous, kDiscrete };

inline std::string to_string(ConjugacyMode m) {
  return m == ConjugacyMode::kForward ? "forward" : "backward";
}
inline std::string to_string(TimeModel t) {
  return t == TimeModel::kContinuous ? "continuous" : "discrete";
}

/// Closed-loop maps are vector fields in continuous time and one-step maps in
/// discrete time.
struct ConjugacySpec {
  ConjugacyMode mode = ConjugacyMode::kForward;
  TimeModel time = TimeModel::kDiscrete;
  Map f_cl;
  Map fz_cl;
  Map encoder;
  std::function<Mat(const Vec&)> encoder_jacobian;
  std::optional<Map> right_inverse;
  double right_inverse_tolerance = 1e-3;
};

/// Pointwise error of the selected definition at x.
///   forward  continuous: |dE(x) f(x) - f_z(E(x))|
///   backward continuous: |f(x) - dE(x)^+ f_z(E(x))|
///   forward  discrete:   |E(f(x)) - f_z(E(x))|
///   backward discrete:   |f(x) - E^{-1}(f_z(E(x)))|
inline double conjugacy_error_at(const Vec& x, const ConjugacySpec& spec) {
  const Vec z = spec.encoder(x);
  const Vec fz = spec.fz_cl(z);
  if (spec.time == TimeModel::kContinuous) {
    if (!spec.encoder_jacobian)
      throw ContractError("conjugacy: continuous time needs the encoder Jacobian");
    const Mat J = spec.encoder_jacobian(x);
    if (spec.mode == ConjugacyMode::kForward) return (J * spec.f_cl(x) - fz).norm();
    return (spec.f_cl(x) - pinv_row_fullrank(J) * fz).norm();
  }
  if (spec.mode == ConjugacyMode::kForward) return (spec.encoder(spec.f_cl(x)) - fz).norm();
  if (!spec.right_inverse)
    throw ContractError("conjugacy: backward discrete mode needs a right inverse");
  return (spec.f_cl(x) - (*spec.right_inverse)(fz)).norm();
}

/// max over samples of |E(E^{-1}(z)) - z| with z = E(x).
inline double right_inverse_residual(const std::vector<Vec>& samples,
                                     const ConjugacySpec& spec) {
  if (!spec.right_inverse) throw ContractError("conjugacy: no right inverse configured");
  double worst = 0.0;
  for (const auto& x : samples) {
    const Vec z = spec.encoder(x);
    worst = std::max(worst, (spec.encoder((*spec.right_inverse)(z)) - z).norm());
  }
  return worst;
}

struct ConjugacyEstimate {
  ConjugacyMode mode = ConjugacyMode::kForward;
  TimeModel time = TimeModel::kDiscrete;
  double gamma = 0.0;
  std::size_t sample_count = 0;
  std::size_t argmax_index = 0;
  Vec argmax_state;
  double median = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
  std::optional<double> right_inverse_residual;
  std::vector<double> pointwise;
};

/// Nearest-rank quantile of an ascending-sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

/// Sample sup of the pointwise error. When `member` is given, every sample must
/// pass it; the backward discrete mode also requires the right-inverse residual
/// to stay within tolerance.
inline ConjugacyEstimate estimate_gamma(const std::vector<Vec>& samples,
                                        const ConjugacySpec& spec,
                                        const std::function<bool(const Vec&)>& member = {}) {
  if (samples.empty()) throw ContractError("estimate_gamma: empty sample set");
  if (member)
    for (const auto& x : samples)
      if (!member(x)) throw ContractError("estimate_gamma: sample outside the D_x estimate");
  ConjugacyEstimate est;
  est.mode = spec.mode;
  est.time = spec.time;
  if (spec.mode == ConjugacyMode::kBackward && spec.time == TimeModel::kDiscrete) {
    const double res = right_inverse_residual(samples, spec);
    est.right_inverse_residual = res;
    if (res > spec.right_inverse_tolerance)
      throw RightInverseError("estimate_gamma: right-inverse residual " + fmt(res) +
                                  " exceeds tolerance",
                              res);
  }
  est.pointwise.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double e = conjugacy_error_at(samples[i], spec);
    if (!std::isfinite(e)) throw NumericDomainError("estimate_gamma: non-finite error");
    est.pointwise.push_back(e);
    if (i == 0 || e > est.gamma) {
      est.gamma = e;
      est.argmax_index = i;
    }
  }
  est.sample_count = samples.size();
  est.argmax_state = samples[est.argmax_index];
  std::vector<double> sorted = est.pointwise;
  std::sort(sorted.begin(), sorted.end());
  est.median = sorted_quantile(sorted, 0.5);
  est.q90 = sorted_quantile(sorted, 0.9);
  est.q99 = sorted_quantile(sorted, 0.99);
  return est;
}

inline Json conjugacy_to_json(const ConjugacyEstimate& e) {
  Json j{{"mode", to_string(e.mode)},
         {"time", to_string(e.time)},
         {"gamma", e.gamma},
         {"sample_count", e.sample_count},
         {"argmax_index", e.argmax_index},
         {"argmax_state", to_json(e.argmax_state)},
         {"quantiles", {{"p50", e.median}, {"p90", e.q90}, {"p99", e.q99}, {"max", e.gamma}}}};
  j["right_inverse_residual"] =
      e.right_inverse_residual ? Json(*e.right_inverse_residual) : Json(nullptr);
  return j;
}

/// E(q) = (p1 - p2, theta1) with f_z(z, u; theta2) = G(z3) B^{-T} u - (cos theta2, sin theta2, 0),
/// in closed loop with the latent policy u = pi(z) and disturbance d(x).
inline ConjugacySpec omni_analytic_spec(const omni::Params& p, double theta2, Map latent_policy,
                                        Map disturbance) {
  Mat J = Mat::Zero(3, 6);
  J(0, 0) = 1.0;
  J(0, 3) = -1.0;
  J(1, 1) = 1.0;
  J(1, 4) = -1.0;
  J(2, 2) = 1.0;
  ConjugacySpec s;
  s.mode = ConjugacyMode::kForward;
  s.time = TimeModel::kContinuous;
  s.encoder = [J](const Vec& x) -> Vec { return J * x; };
  s.encoder_jacobian = [J](const Vec&) -> Mat { return J; };
  s.f_cl = [p, J, latent_policy, disturbance](const Vec& x) -> Vec {
    return omni::deriv(x, latent_policy(J * x), disturbance(x), p);
  };
  s.fz_cl = [p, theta2, latent_policy](const Vec& z) -> Vec {
    Vec out = omni::input_map(z[2], p) * latent_policy(z);
    out[0] -= std::cos(theta2);
    out[1] -= std::sin(theta2);
    return out;
  };
  return s;
}

}  // namespace lcert
