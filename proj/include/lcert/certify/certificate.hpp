#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lcert/conjugacy/conjugacy.hpp"
#include "lcert/core/random.hpp"
#include "lcert/io/json_io.hpp"

namespace lcert {

using ScalarFn = std::function<double(const Vec&)>;
using GradientFn = std::function<Vec(const Vec&)>;

enum class CertificateKind {
  kLyapunovDiscrete,
  kLyapunovContinuous,
  kBarrierDiscrete,
  kBarrierContinuous
};

inline std::string to_string(CertificateKind k) {
  switch (k) {
    case CertificateKind::kLyapunovDiscrete: return "lyapunov-discrete";
    case CertificateKind::kLyapunovContinuous: return "lyapunov-continuous";
    case CertificateKind::kBarrierDiscrete: return "barrier-discrete";
    case CertificateKind::kBarrierContinuous: return "barrier-continuous";
  }
  return "?";
}

inline bool is_discrete(CertificateKind k) {
  return k == CertificateKind::kLyapunovDiscrete || k == CertificateKind::kBarrierDiscrete;
}

struct CertificateCheck {
  std::size_t count = 0;
  std::size_t satisfied = 0;
  double satisfied_fraction = 0.0;
  double worst_violation = -std::numeric_limits<double>::infinity();
  std::size_t worst_index = 0;
};

/// Signed violation of the defining inequality at z; <= 0 means satisfied.
///   lyapunov-discrete:    V(f(z)) - rho V(z)
///   lyapunov-continuous:  <grad V, f(z)> + rho V(z)
///   barrier-discrete:     -(h(f(z)) - h(z)) - alpha h(z)
///   barrier-continuous:   -<grad h, f(z)> - alpha h(z)
/// For continuous kinds `fz_cl` is the latent vector field.
inline double certificate_violation(const Vec& z, CertificateKind kind, const ScalarFn& fn,
                                    const GradientFn& grad, const Map& fz_cl, double rate) {
  const double v = fn(z);
  switch (kind) {
    case CertificateKind::kLyapunovDiscrete: return fn(fz_cl(z)) - rate * v;
    case CertificateKind::kLyapunovContinuous: return grad(z).dot(fz_cl(z)) + rate * v;
    case CertificateKind::kBarrierDiscrete: return -(fn(fz_cl(z)) - v) - rate * v;
    case CertificateKind::kBarrierContinuous: return -grad(z).dot(fz_cl(z)) - rate * v;
  }
  return 0.0;
}

inline CertificateCheck check_certificate(const std::vector<Vec>& grid, CertificateKind kind,
                                          const ScalarFn& fn, const GradientFn& grad,
                                          const Map& fz_cl, double rate, double tol = 0.0) {
  if (grid.empty()) throw ContractError("check_certificate: empty grid");
  if (!is_discrete(kind) && !grad)
    throw ContractError("check_certificate: continuous kinds need a gradient");
  CertificateCheck out;
  out.count = grid.size();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double v = certificate_violation(grid[i], kind, fn, grad, fz_cl, rate);
    if (v <= tol) ++out.satisfied;
    if (v > out.worst_violation) {
      out.worst_violation = v;
      out.worst_index = i;
    }
  }
  out.satisfied_fraction = static_cast<double>(out.satisfied) / static_cast<double>(out.count);
  return out;
}

/// max over samples of |grad fn|.
inline double estimate_lipschitz(const GradientFn& grad, const std::vector<Vec>& samples) {
  if (samples.empty()) throw ContractError("estimate_lipschitz: empty sample set");
  double L = 0.0;
  for (const auto& s : samples) L = std::max(L, grad(s).norm());
  return L;
}

/// max |fn(a) - fn(b)| / |a - b| over random sample pairs.
inline double difference_quotient_lipschitz(const ScalarFn& fn, const std::vector<Vec>& samples,
                                            int pairs, Rng& rng) {
  if (samples.size() < 2) throw ContractError("difference_quotient_lipschitz: need two samples");
  double L = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const auto& a = samples[rng.index(samples.size())];
    const auto& b = samples[rng.index(samples.size())];
    const double d = (a - b).norm();
    if (d == 0.0) continue;
    L = std::max(L, std::abs(fn(a) - fn(b)) / d);
  }
  return L;
}

/// sup{alpha > 0 : every probe with value <= alpha is inside}, by bisection
/// to relative tolerance `tol`.
inline double compute_alpha0(const std::vector<double>& values, const std::vector<char>& inside,
                             double tol = 1e-3) {
  if (values.empty() || values.size() != inside.size())
    throw ContractError("compute_alpha0: empty or mismatched probe set");
  const double top = *std::max_element(values.begin(), values.end());
  auto passes = [&](double alpha) {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] <= alpha && !inside[i]) return false;
    return true;
  };
  if (passes(top)) return top;
  double lo = 0.0, hi = top;
  while (hi - lo > tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (passes(mid))
      lo = mid;
    else
      hi = mid;
    if (hi < std::numeric_limits<double>::min()) break;
  }
  if (!(lo > 0.0)) throw DegenerateDomainError("compute_alpha0: no positive level set fits in D_x");
  return lo;
}

inline double compute_alpha0(const ScalarFn& vbar, const std::function<bool(const Vec&)>& member,
                             const std::vector<Vec>& probes, double tol = 1e-3) {
  std::vector<double> values(probes.size());
  std::vector<char> inside(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    values[i] = vbar(probes[i]);
    inside[i] = member(probes[i]) ? 1 : 0;
  }
  return compute_alpha0(values, inside, tol);
}

/// Grid over the D_x bounding box scaled by `scale` about its center.
inline std::vector<Vec> probe_grid(const Vec& lo, const Vec& hi, double scale,
                                   int points_per_dim) {
  const Vec mid = 0.5 * (lo + hi), half = 0.5 * scale * (hi - lo);
  return box_grid(mid - half, mid + half, points_per_dim);
}

enum class Guarantee { kStability, kSafety };

struct TransferInputs {
  double L = 0.0;
  double gamma = 0.0;
  double rate = 0.0;  // rho for stability, alpha for safety
  TimeModel time = TimeModel::kDiscrete;
  Guarantee guarantee = Guarantee::kStability;
  std::optional<double> alpha0;
  std::optional<double> beta;        // safety: S_z radius
  std::optional<double> beta_prime;  // safety: barrier radius
  double quad_weight = 0.1;          // kappa(s) = quad_weight s^2
};

struct TransferBounds {
  TransferInputs inputs;
  double threshold = 0.0;
  std::string formula;
  std::optional<bool> vacuous;
  std::optional<double> kappa_inverse;
  std::optional<double> required_beta_prime;
  std::optional<bool> robust_inclusion;
};

///   continuous stability: L gamma / rho
///   discrete stability:   L gamma / (1 - rho)
///   safety (both):        -L gamma / alpha, with C_z^gamma in S_z iff beta' >= beta + L gamma / alpha
inline TransferBounds transfer_bounds(const TransferInputs& in) {
  if (!(std::isfinite(in.L) && std::isfinite(in.gamma) && in.L >= 0.0 && in.gamma >= 0.0))
    throw ContractError("transfer_bounds: L and gamma must be finite and nonnegative");
  TransferBounds out;
  out.inputs = in;
  const double Lg = in.L * in.gamma;
  if (in.guarantee == Guarantee::kStability) {
    if (in.time == TimeModel::kDiscrete) {
      if (!(in.rate >= 0.0 && in.rate < 1.0))
        throw ContractError("transfer_bounds: discrete rho must lie in [0, 1)");
      out.threshold = Lg / (1.0 - in.rate);
      out.formula = "L*gamma/(1-rho)";
    } else {
      if (!(in.rate > 0.0)) throw ContractError("transfer_bounds: continuous rho must be > 0");
      out.threshold = Lg / in.rate;
      out.formula = "L*gamma/rho";
    }
    if (in.alpha0) out.vacuous = out.threshold > *in.alpha0;
    out.kappa_inverse = std::sqrt(out.threshold / in.quad_weight);
  } else {
    if (!(in.rate > 0.0)) throw ContractError("transfer_bounds: alpha must be > 0");
    if (in.time == TimeModel::kDiscrete && in.rate > 1.0)
      throw ContractError("transfer_bounds: discrete alpha must lie in (0, 1]");
    out.threshold = -Lg / in.rate;
    out.formula = "-L*gamma/alpha";
    if (in.beta) {
      out.required_beta_prime = *in.beta + Lg / in.rate;
      if (in.beta_prime) out.robust_inclusion = *in.beta_prime >= *out.required_beta_prime;
    }
  }
  return out;
}

inline Json transfer_to_json(const TransferBounds& b) {
  Json j{{"L", b.inputs.L},
         {"gamma", b.inputs.gamma},
         {"rate", b.inputs.rate},
         {"time", to_string(b.inputs.time)},
         {"guarantee", b.inputs.guarantee == Guarantee::kStability ? "stability" : "safety"},
         {"threshold", b.threshold},
         {"formula", b.formula}};
  if (b.inputs.alpha0) j["alpha0"] = *b.inputs.alpha0;
  if (b.vacuous) {
    j["vacuous"] = *b.vacuous;
    if (*b.vacuous) j["note"] = "no nontrivial invariant band: threshold exceeds alpha0";
  }
  if (b.kappa_inverse) j["encoded_radius_bound"] = *b.kappa_inverse;
  if (b.required_beta_prime) j["required_beta_prime"] = *b.required_beta_prime;
  if (b.robust_inclusion) j["robust_inclusion"] = *b.robust_inclusion;
  return j;
}

/// R(x) = V(E(f(x))) - V(f_z(E(x))).
inline double residual_R(const Vec& x, const ScalarFn& V, const Map& encoder, const Map& f_cl,
                         const Map& fz_cl) {
  return V(encoder(f_cl(x))) - V(fz_cl(encoder(x)));
}

struct TrajectoryCheck {
  bool passed = true;
  int first_violation = -1;
  double max_excess = -std::numeric_limits<double>::infinity();
  std::vector<double> values;  // Vbar(x_t)
  std::vector<double> bounds;
  std::vector<Vec> states;
};

/// Simulates x_{t+1} = f(x_t) and compares Vbar(x_t) with
///   discrete:   rho^t Vbar(x0) + L gamma / (1 - rho)
///   continuous: (Vbar(x0) - L gamma / rho) exp(-rho t dt) + L gamma / rho
inline TrajectoryCheck trajectory_bound_check(const Vec& x0, int horizon, const Map& f_cl,
                                              const ScalarFn& vbar, double rho, double L,
                                              double gamma, TimeModel time, double tol = 1e-9,
                                              double dt = 1.0) {
  TrajectoryCheck out;
  const double v0 = vbar(x0);
  Vec x = x0;
  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) x = f_cl(x);
    const double v = vbar(x);
    double bound;
    if (time == TimeModel::kDiscrete)
      bound = std::pow(rho, t) * v0 + L * gamma / (1.0 - rho);
    else
      bound = (v0 - L * gamma / rho) * std::exp(-rho * t * dt) + L * gamma / rho;
    const double excess = std::isfinite(v) ? v - bound : std::numeric_limits<double>::infinity();
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > tol && out.passed) {
      out.passed = false;
      out.first_violation = t;
    }
    out.values.push_back(v);
    out.bounds.push_back(bound);
    out.states.push_back(x);
  }
  return out;
}

struct InvarianceCheck {
  bool passed = true;
  int first_exit = -1;
  double max_value = 0.0;
};

/// Vbar(x_t) <= alpha for t = 0..horizon.
inline InvarianceCheck forward_invariance_check(const Vec& x0, double alpha, int horizon,
                                                const Map& f_cl, const ScalarFn& vbar,
                                                double tol = 1e-9) {
  InvarianceCheck out;
  Vec x = x0;
  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) x = f_cl(x);
    const double v = vbar(x);
    out.max_value = std::max(out.max_value, std::isfinite(v) ? v : std::numeric_limits<double>::infinity());
    if (!(v <= alpha + tol) && out.passed) {
      out.passed = false;
      out.first_exit = t;
    }
  }
  return out;
}

/// Points with Vbar = alpha found along random rays from `origin`: the first
/// crossing of the level within `max_radius`, refined by bisection.
inline std::vector<Vec> level_set_seeds(const ScalarFn& vbar, double alpha, const Vec& origin,
                                        int count, double max_radius, Rng& rng,
                                        int max_attempts = 0) {
  if (!(vbar(origin) < alpha))
    throw ContractError("level_set_seeds: origin must lie strictly inside the level set");
  std::vector<Vec> out;
  const int attempts = max_attempts > 0 ? max_attempts : 50 * count;
  const int marches = 400;
  for (int a = 0; a < attempts && static_cast<int>(out.size()) < count; ++a) {
    Vec dir(origin.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
    dir.normalize();
    double lo = 0.0, hi = -1.0;
    for (int k = 1; k <= marches; ++k) {
      const double r = max_radius * k / marches;
      if (vbar(origin + r * dir) >= alpha) {
        hi = r;
        break;
      }
      lo = r;
    }
    if (hi < 0.0) continue;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (vbar(origin + mid * dir) >= alpha ? hi : lo) = mid;
    }
    out.push_back(origin + lo * dir);
  }
  return out;
}

/// Grid points with |E(x) - center| <= tol.
inline std::vector<Vec> zero_set_scan(const Map& encoder, const std::vector<Vec>& grid,
                                      double tol, const Vec& center = Vec()) {
  std::vector<Vec> out;
  for (const auto& x : grid) {
    const Vec z = encoder(x);
    const double r = center.size() ? (z - center).norm() : z.norm();
    if (r <= tol) out.push_back(x);
  }
  return out;
}

inline Json check_to_json(const CertificateCheck& c, CertificateKind kind, double rate) {
  return Json{{"kind", to_string(kind)},
              {"rate", rate},
              {"grid_points", c.count},
              {"satisfied", c.satisfied},
              {"satisfied_fraction", c.satisfied_fraction},
              {"worst_violation", c.worst_violation},
              {"worst_index", c.worst_index}};
}

}  // namespace lcert
