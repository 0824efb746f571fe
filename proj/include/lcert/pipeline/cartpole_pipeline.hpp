#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "lcert/certify/certificate.hpp"
#include "lcert/certify/domain.hpp"
#include "lcert/conjugacy/conjugacy.hpp"
#include "lcert/control/lqr.hpp"
#include "lcert/models/checkpoint.hpp"
#include "lcert/pipeline/config.hpp"

namespace lcert {

struct CartpoleDatasets {
  TrajectoryDataset rand;
  TrajectoryDataset drift;
};

inline CartpoleDatasets collect_cartpole(const RunConfig& cfg) {
  CartpoleDatasets d;
  d.rand = collect_random_dataset(cfg.cartpole, cfg.collection, cfg.seed);
  d.drift = collect_drift_dataset(d.rand, cfg.cartpole);
  return d;
}

struct CartpoleModels {
  LatentModel model;
  LqrController lqr;
  LyapunovNet V;
  std::vector<LossBreakdown> latent_curve;
  std::vector<double> lyapunov_curve;
  double lyapunov_satisfied = 0.0;
};

/// Latent model, then LQR about z_eq = E(0), then V with the model frozen.
inline CartpoleModels train_cartpole(const RunConfig& cfg, const CartpoleDatasets& data) {
  CartpoleModels out;
  LatentTrainResult latent = train_latent(data.rand, data.drift, cfg.weights, cfg.arch, cfg.train);
  out.model = std::move(latent.model);
  out.latent_curve = std::move(latent.curve);
  out.lqr = lqr_from_latent(out.model);
  const LqrController lqr = out.lqr;
  LyapunovTrainResult lyap = train_lyapunov(
      out.model, [lqr](const Vec& z) { return lqr(z); }, lqr.z_eq, cfg.lyapunov,
      cfg.lyapunov_train);
  out.V = std::move(lyap.net);
  out.lyapunov_curve = std::move(lyap.curve);
  out.lyapunov_satisfied = lyap.satisfied_fraction;
  return out;
}

inline std::string latent_curve_csv(const std::vector<LossBreakdown>& curve) {
  std::ostringstream os;
  os << "epoch,fwd,bwd,left,right,ori,iso,total\n";
  for (std::size_t e = 0; e < curve.size(); ++e) {
    os << e;
    for (auto k : kAllLosses) os << ',' << fmt(curve[e][k]);
    os << ',' << fmt(curve[e].total) << '\n';
  }
  return os.str();
}

inline std::string lyapunov_curve_csv(const std::vector<double>& curve) {
  std::ostringstream os;
  os << "epoch,hinge_loss\n";
  for (std::size_t e = 0; e < curve.size(); ++e) os << e << ',' << fmt(curve[e]) << '\n';
  return os.str();
}

/// Closed-loop maps of the learned cartpole controller.
struct CartpoleClosedLoop {
  const LatentModel* model;
  LqrController lqr;
  LyapunovNet V;
  cartpole::Params params;

  Vec encode(const Vec& x) const { return model->encode(x); }
  Vec policy(const Vec& z) const { return lqr(z); }
  Vec f(const Vec& x) const { return cartpole::step(x, lqr(model->encode(x))[0], params); }
  Vec fz(const Vec& z) const { return model->step(z, lqr(z)); }
  double vbar(const Vec& x) const { return V.value(model->encode(x)); }

  Mat fz_batch(const Mat& Z) const {
    const Mat U = -lqr.K * (Z.colwise() - lqr.z_eq);
    return latent_step_batch(*model, Z, U, nullptr);
  }
  Eigen::RowVectorXd vbar_batch(const Mat& X) const {
    return V.values(model->encoder.forward(X));
  }

  Map f_map() const { return [this](const Vec& x) { return f(x); }; }
  Map fz_map() const { return [this](const Vec& z) { return fz(z); }; }
  Map encoder_map() const { return [this](const Vec& x) { return encode(x); }; }
  ScalarFn vbar_fn() const { return [this](const Vec& x) { return vbar(x); }; }
  ScalarFn v_fn() const { return [this](const Vec& z) { return V.value(z); }; }
};

inline Mat columns(const std::vector<Vec>& pts) {
  if (pts.empty()) return Mat();
  Mat M(pts.front().size(), static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = pts[i];
  return M;
}

struct CartpoleCertificate {
  Json report;
  std::string trajectories_csv;
  std::string slice_theta_csv;
  std::string slice_x_theta_csv;
  std::string zero_set_csv;
  std::string dz_hull_csv;

  // Figures used by the acceptance checks.
  double L = 0.0, L_pairs = 0.0, gamma = 0.0, rho = 0.0, alpha0 = 0.0, threshold = 0.0;
  double dz_satisfied = 0.0;
  double residual_bound = 0.0;  // max |R| / (1 - rho)
  int trajectories_passed = 0, trajectories_total = 0;
  int invariance_passed_threshold = 0, invariance_total_threshold = 0;
  int invariance_passed_alpha0 = 0, invariance_total_alpha0 = 0;
  double lemma2_fraction = 0.0;
};

namespace detail {

/// `count` members of `pool` spread evenly over its index range.
inline std::vector<Vec> spread_pick(const std::vector<Vec>& pool, int count) {
  std::vector<Vec> out;
  if (pool.empty() || count <= 0) return out;
  const auto n = pool.size();
  const auto k = std::min<std::size_t>(n, static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < k; ++i) out.push_back(pool[(i * n) / k]);
  return out;
}

inline std::string slice_csv(const CartpoleClosedLoop& cl, int a, int b, const char* name_a,
                             const char* name_b, double radius, int points) {
  std::ostringstream os;
  os << name_a << ',' << name_b << ",Vbar\n";
  const auto axis = linspace(-radius, radius, points);
  Mat X = Mat::Zero(4, static_cast<Eigen::Index>(axis.size() * axis.size()));
  Eigen::Index c = 0;
  for (double va : axis)
    for (double vb : axis) {
      X(a, c) = va;
      X(b, c) = vb;
      ++c;
    }
  const Eigen::RowVectorXd v = cl.vbar_batch(X);
  for (Eigen::Index i = 0; i < X.cols(); ++i)
    os << fmt(X(a, i)) << ',' << fmt(X(b, i)) << ',' << fmt(v[i]) << '\n';
  return os.str();
}

}  // namespace detail

/// Domain estimation, constants, certificate checks and transfer bounds for
/// the learned cartpole controller.
inline CartpoleCertificate certify_cartpole(const RunConfig& cfg, const CartpoleModels& m) {
  const CertifyConfig& k = cfg.certify;
  const double rho = cfg.lyapunov_train.rho;
  CartpoleClosedLoop cl{&m.model, m.lqr, m.V, cfg.cartpole};
  const Vec z_eq = m.lqr.z_eq;
  Rng rng(cfg.seed + 2);
  CartpoleCertificate out;
  out.rho = rho;
  Json rep;
  rep["experiment"] = "cartpole";
  rep["seed"] = cfg.seed;
  rep["z_eq"] = to_json(z_eq);
  rep["lqr"] = lqr_to_json(m.lqr);

  // D_z
  const LatentDomain Dz = estimate_Dz(cl.fz_map(), z_eq, k.r1, k.dz_horizon, k.dz_points);
  {
    Json d{{"representation", Dz.is_hull() ? "convex-hull" : "bounding-box"},
           {"r1", k.r1},
           {"T", k.dz_horizon},
           {"seed_grid", k.dz_points},
           {"center", to_json(z_eq)},
           {"lo", to_json(Dz.lo())},
           {"hi", to_json(Dz.hi())}};
    std::ostringstream hull;
    hull << "z1,z2\n";
    if (Dz.is_hull()) {
      d["hull_vertices"] = Dz.hull().size();
      d["hull_area"] = Dz.hull().area();
      for (const auto& v : Dz.hull().vertices()) hull << fmt(v[0]) << ',' << fmt(v[1]) << '\n';
    }
    out.dz_hull_csv = hull.str();
    rep["D_z"] = d;
  }

  // D_x
  const DxEstimate Dx = estimate_Dx(cl.encoder_map(), cl.f_map(), Dz, cartpole::kStateDim, k.r2,
                                    k.dx_horizon, k.eps, k.dx_points);
  const auto& cloud = Dx.domain.points();
  const Mat Xc = columns(cloud);
  const Mat Zc = m.model.encoder.forward(Xc);
  {
    std::size_t encoded_inside = 0;
    for (Eigen::Index i = 0; i < Zc.cols(); ++i)
      if (Dz.contains(Zc.col(i))) ++encoded_inside;
    Rng probe_rng(cfg.seed + 3);
    const double invariant =
        k.invariance_probes > 0
            ? dx_invariance_fraction(Dx.domain, cl.f_map(), k.dx_horizon, k.invariance_probes,
                                     probe_rng)
            : 1.0;
    rep["D_x"] = Json{{"r2", k.r2},
                      {"T_prime", k.dx_horizon},
                      {"eps", k.eps},
                      {"grid", k.dx_points},
                      {"initial_conditions", Dx.initial.size()},
                      {"points", cloud.size()},
                      {"lo", to_json(Dx.domain.lo())},
                      {"hi", to_json(Dx.domain.hi())},
                      {"encoded_in_D_z_fraction",
                       static_cast<double>(encoded_inside) / static_cast<double>(cloud.size())},
                      {"forward_invariance_fraction", invariant}};
  }

  // gamma, forward discrete, over the D_x points
  ConjugacySpec spec;
  spec.mode = ConjugacyMode::kForward;
  spec.time = TimeModel::kDiscrete;
  spec.f_cl = cl.f_map();
  spec.fz_cl = cl.fz_map();
  spec.encoder = cl.encoder_map();
  spec.encoder_jacobian = [&m](const Vec& x) { return m.model.encoder_jacobian(x); };
  spec.right_inverse = Map([&m](const Vec& z) { return m.model.decode(z); });
  const ConjugacyEstimate gamma =
      estimate_gamma(cloud, spec, [&Dx](const Vec& x) { return Dx.domain.contains(x); });
  out.gamma = gamma.gamma;
  rep["conjugacy"] = conjugacy_to_json(gamma);
  try {
    ConjugacySpec back = spec;
    back.mode = ConjugacyMode::kBackward;
    const ConjugacyEstimate b = estimate_gamma(cloud, back);
    rep["conjugacy_backward"] = conjugacy_to_json(b);
  } catch (const RightInverseError& e) {
    rep["conjugacy_backward"] = Json{{"mode", "backward"},
                                     {"time", "discrete"},
                                     {"refused", e.what()},
                                     {"right_inverse_residual", e.residual()}};
  }

  // Certificate grid over D_z
  const std::vector<Vec> zgrid = Dz.grid(k.check_points);
  const CertificateCheck check =
      check_certificate(zgrid, CertificateKind::kLyapunovDiscrete, cl.v_fn(),
                        [&m](const Vec& z) { return m.V.gradient(z); }, cl.fz_map(), rho);
  out.dz_satisfied = check.satisfied_fraction;
  rep["certificate"] = check_to_json(check, CertificateKind::kLyapunovDiscrete, rho);
  rep["certificate"]["training_satisfied_fraction"] = m.lyapunov_satisfied;

  // L over the D_z grid and the encoded D_x points
  {
    std::vector<Vec> lip_samples = zgrid;
    for (Eigen::Index i = 0; i < Zc.cols(); ++i) lip_samples.push_back(Zc.col(i));
    const Mat G = m.V.gradients(columns(lip_samples));
    out.L = G.colwise().norm().maxCoeff();
    Rng pair_rng(cfg.seed + 4);
    out.L_pairs = k.lipschitz_pairs > 0
                      ? difference_quotient_lipschitz(cl.v_fn(), lip_samples, k.lipschitz_pairs,
                                                      pair_rng)
                      : 0.0;
    rep["lipschitz"] = Json{{"L", out.L},
                            {"samples", lip_samples.size()},
                            {"pairwise_quotient_max", out.L_pairs},
                            {"cross_check_ok", out.L_pairs <= out.L * (1.0 + 1e-9)}};
  }

  // alpha0
  const std::vector<Vec> probes =
      probe_grid(Dx.domain.lo(), Dx.domain.hi(), k.probe_scale, k.probe_points);
  {
    const Eigen::RowVectorXd pv = cl.vbar_batch(columns(probes));
    std::vector<char> inside(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) inside[i] = Dx.domain.contains(probes[i]);
    out.alpha0 = compute_alpha0(std::vector<double>(pv.data(), pv.data() + pv.size()), inside,
                                k.alpha0_tolerance);
    rep["alpha0"] = Json{{"alpha0", out.alpha0},
                         {"probe_points", probes.size()},
                         {"probe_scale", k.probe_scale},
                         {"tolerance", k.alpha0_tolerance}};
  }

  // Transfer bounds
  TransferInputs ti;
  ti.L = out.L;
  ti.gamma = out.gamma;
  ti.rate = rho;
  ti.time = TimeModel::kDiscrete;
  ti.alpha0 = out.alpha0;
  ti.quad_weight = m.V.quad_weight;
  const TransferBounds tb = transfer_bounds(ti);
  out.threshold = tb.threshold;
  rep["transfer"] = transfer_to_json(tb);

  // R(x) and the pointwise Lemma-2 inequality over D_x
  {
    const Mat Xn = [&] {
      Mat N(Xc.rows(), Xc.cols());
      for (Eigen::Index i = 0; i < Xc.cols(); ++i) N.col(i) = cl.f(Xc.col(i));
      return N;
    }();
    const Mat Zn = m.model.encoder.forward(Xn);
    const Mat Zp = cl.fz_batch(Zc);
    const Eigen::RowVectorXd v_true = m.V.values(Zn), v_latent = m.V.values(Zp);
    const Eigen::RowVectorXd v_now = m.V.values(Zc);
    double max_R = 0.0;
    std::size_t lemma_ok = 0;
    for (Eigen::Index i = 0; i < Xc.cols(); ++i) {
      max_R = std::max(max_R, std::abs(v_true[i] - v_latent[i]));
      const double lhs = v_true[i] - rho * v_now[i];
      const double latent_part = v_latent[i] - rho * v_now[i];
      const double gamma_i = (Zn.col(i) - Zp.col(i)).norm();
      if (lhs <= std::max(latent_part, 0.0) + out.L * gamma_i + 1e-12) ++lemma_ok;
    }
    out.residual_bound = max_R / (1.0 - rho);
    out.lemma2_fraction = static_cast<double>(lemma_ok) / static_cast<double>(Xc.cols());
    rep["residual"] = Json{{"max_abs_R", max_R},
                           {"max_abs_R_over_1_minus_rho", out.residual_bound},
                           {"L_gamma_over_1_minus_rho", out.threshold},
                           {"dominated", out.residual_bound <= out.threshold},
                           {"lemma2_pointwise_fraction", out.lemma2_fraction}};
  }

  // Trajectories from V_{alpha0}
  std::ostringstream traj_csv;
  traj_csv << "trajectory,t[step],x[m],x_dot[m/s],theta[rad],theta_dot[rad/s],Vbar,bound\n";
  {
    std::vector<Vec> pool;
    const Eigen::RowVectorXd vc = m.V.values(Zc);
    for (Eigen::Index i = 0; i < Xc.cols(); ++i)
      if (vc[i] <= out.alpha0) pool.push_back(Xc.col(i));
    const std::vector<Vec> starts = detail::spread_pick(pool, k.trajectories);
    for (std::size_t i = 0; i < starts.size(); ++i) {
      const TrajectoryCheck tc = trajectory_bound_check(starts[i], k.horizon, cl.f_map(),
                                                        cl.vbar_fn(), rho, out.L, out.gamma,
                                                        TimeModel::kDiscrete, 1e-6);
      if (tc.passed) ++out.trajectories_passed;
      for (std::size_t t = 0; t < tc.states.size(); ++t) {
        traj_csv << i << ',' << t;
        for (Eigen::Index j = 0; j < 4; ++j) traj_csv << ',' << fmt(tc.states[t][j]);
        traj_csv << ',' << fmt(tc.values[t]) << ',' << fmt(tc.bounds[t]) << '\n';
      }
    }
    out.trajectories_total = static_cast<int>(starts.size());
    rep["trajectory_check"] = Json{{"candidates_in_V_alpha0", pool.size()},
                                   {"trajectories", out.trajectories_total},
                                   {"passed", out.trajectories_passed},
                                   {"horizon", k.horizon},
                                   {"tolerance", 1e-6}};
  }
  out.trajectories_csv = traj_csv.str();

  // Forward invariance of V_alpha from boundary seeds
  {
    const Vec x_origin = Vec::Zero(4);
    auto run_level = [&](double alpha, int& passed, int& total) {
      Json j{{"alpha", alpha}};
      if (!(alpha > cl.vbar(x_origin))) {
        j["skipped"] = "level does not enclose the origin";
        return j;
      }
      Rng seed_rng(cfg.seed + 5);
      const auto seeds = level_set_seeds(cl.vbar_fn(), alpha, x_origin, k.boundary_seeds,
                                         4.0 * k.r2, seed_rng);
      total = static_cast<int>(seeds.size());
      double worst = 0.0;
      for (const auto& s : seeds) {
        const InvarianceCheck ic = forward_invariance_check(s, alpha, k.horizon, cl.f_map(),
                                                            cl.vbar_fn());
        if (ic.passed) ++passed;
        worst = std::max(worst, ic.max_value);
      }
      j["seeds"] = total;
      j["passed"] = passed;
      j["max_Vbar"] = worst;
      return j;
    };
    rep["forward_invariance"] = Json::array();
    rep["forward_invariance"].push_back(
        run_level(out.threshold, out.invariance_passed_threshold, out.invariance_total_threshold));
    rep["forward_invariance"].push_back(
        run_level(out.alpha0, out.invariance_passed_alpha0, out.invariance_total_alpha0));
  }

  // Zero set E^{-1}(z_eq) on H_{r2}, and level-set slices
  {
    const auto grid = box_grid(Vec::Constant(4, -k.r2), Vec::Constant(4, k.r2), k.zero_set_points);
    const auto zs = zero_set_scan(cl.encoder_map(), grid, k.zero_set_tol, z_eq);
    std::ostringstream os;
    os << "x[m],x_dot[m/s],theta[rad],theta_dot[rad/s]\n";
    for (const auto& x : zs) os << fmt(x[0]) << ',' << fmt(x[1]) << ',' << fmt(x[2]) << ',' << fmt(x[3]) << '\n';
    out.zero_set_csv = os.str();
    rep["zero_set"] = Json{{"center", to_json(z_eq)}, {"tol", k.zero_set_tol}, {"points", zs.size()}};
    out.slice_theta_csv =
        detail::slice_csv(cl, 2, 3, "theta[rad]", "theta_dot[rad/s]", k.slice_radius, k.slice_points);
    out.slice_x_theta_csv =
        detail::slice_csv(cl, 0, 2, "x[m]", "theta[rad]", k.slice_radius, k.slice_points);
  }

  out.report = std::move(rep);
  return out;
}

}  // namespace lcert
