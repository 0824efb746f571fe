// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--report-only] [--only N[,N...]] [--out DIR]
//
// --report-only always exits 0; otherwise the exit code is the number of
// failed criteria. --out keeps the cartpole artifacts of criterion 4.

#include <algorithm>
#include <chrono>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lcert/pipeline/cartpole_pipeline.hpp"
#include "lcert/pipeline/omni_demo.hpp"
#include "lcert/systems/mechanics.hpp"

using namespace lcert;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(clk::time_point t0) {
  return std::chrono::duration<double>(clk::now() - t0).count();
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

Vec random_vec(Rng& rng, int n, double scale) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

Mat central_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
  const Vec f0 = f(x);
  Mat J(f0.size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

double rel_err(const Mat& a, const Mat& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-8});
}

// ---------------------------------------------------------------- 1
Verdict omni_safety() {
  OmniConfig c;
  c.vehicle.input_bound = 5.0;
  c.vehicle.disturbance_bound = 1.0;
  c.alpha = 2.0;
  c.beta = 4.5;
  c.beta_prime = 5.0;
  c.duration = 30.0;
  const auto t0 = clk::now();
  const OmniRun filtered = simulate_omni(c);
  c.nominal_only = true;
  const OmniRun nominal = simulate_omni(c);
  const double elapsed = seconds_since(t0);
  Verdict v;
  v.pass = filtered.min_distance >= 4.5 - 1e-3 && nominal.min_distance < 4.5 && elapsed < 10.0;
  v.detail = "min distance " + num(filtered.min_distance) + " (nominal only " +
             num(nominal.min_distance) + "), " + num(elapsed) + " s";
  return v;
}

// ---------------------------------------------------------------- 2
Verdict cbf_feasibility() {
  CbfQpSpec spec;
  spec.alpha = 2.0;
  spec.beta_prime = 5.0;
  spec.vehicle.wheel_radius = 0.02;
  spec.vehicle.body_radius = 0.2;
  const double r = spec.vehicle.wheel_radius, l = spec.vehicle.body_radius;
  spec.input_bound = r * std::sqrt(3.0 * (1.0 + l * l)) * (1.0 + spec.alpha * spec.beta_prime);
  // Direction aligned with the passive heading maximizes b; the heading z3
  // sweeps every relative orientation of the wheel frame.
  spec.theta2 = 0.0;
  double worst = std::numeric_limits<double>::infinity();
  int points = 0;
  for (double z3 : linspace(0.0, 2.0 * std::numbers::pi, 100))
    for (double radius : linspace(0.1, 20.0, 100)) {
      Vec z(3);
      z << radius, 0.0, z3;
      worst = std::min(worst, cbf_feasibility_margin(z, spec));
      ++points;
    }
  return {worst >= -1e-9 && points == 10000,
          "B_u " + num(spec.input_bound) + ", worst margin " + num(worst) + " over " +
              std::to_string(points) + " points"};
}

// ---------------------------------------------------------------- 3
Verdict transfer_arithmetic() {
  TransferInputs in;
  in.L = 25.60;
  in.gamma = 0.0183;
  in.rate = 0.85;
  in.time = TimeModel::kDiscrete;
  const double t = transfer_bounds(in).threshold;
  return {std::abs(t - 3.1232) <= 0.005, "L*gamma/(1-rho) = " + num(t)};
}

// ---------------------------------------------------------------- 4
Verdict cartpole_pipeline(const std::string& out_dir) {
  RunConfig cfg = load_config(std::string(LCERT_SOURCE_DIR) + "/configs/cartpole.json");
  const auto t0 = clk::now();
  CartpoleCertificate c;
  double lyap_fraction = 0.0;
  try {
    const CartpoleDatasets d = collect_cartpole(cfg);
    const CartpoleModels m = train_cartpole(cfg, d);
    lyap_fraction = m.lyapunov_satisfied;
    if (!out_dir.empty()) {
      fs::create_directories(out_dir);
      write_json_file(out_dir + "/latent_model.json", latent_model_to_json(m.model, m.lqr.z_eq));
      write_json_file(out_dir + "/lqr.json", lqr_to_json(m.lqr));
      write_json_file(out_dir + "/lyapunov.json", lyapunov_to_json(m.V));
      write_text_file(out_dir + "/latent_loss.csv", latent_curve_csv(m.latent_curve));
    }
    c = certify_cartpole(cfg, m);
    if (!out_dir.empty()) {
      write_json_file(out_dir + "/certificate.json", c.report);
      write_text_file(out_dir + "/trajectories.csv", c.trajectories_csv);
    }
  } catch (const Error& e) {
    return {false, std::string("pipeline error after ") + num(seconds_since(t0)) + " s: " + e.what()};
  }
  const double elapsed = seconds_since(t0);
  const bool a = c.dz_satisfied >= 0.99;
  const bool b = c.trajectories_total == cfg.certify.trajectories &&
                 c.trajectories_passed == c.trajectories_total;
  const bool inv = c.invariance_total_threshold == cfg.certify.boundary_seeds &&
                   c.invariance_passed_threshold == c.invariance_total_threshold &&
                   c.invariance_total_alpha0 == cfg.certify.boundary_seeds &&
                   c.invariance_passed_alpha0 == c.invariance_total_alpha0;
  const bool d = c.residual_bound <= c.threshold;
  const bool fast = elapsed < 900.0;
  std::ostringstream os;
  os << "(a) D_z satisfied " << num(c.dz_satisfied) << (a ? "" : " [fail]")
     << "; (b) trajectories " << c.trajectories_passed << "/" << c.trajectories_total
     << (b ? "" : " [fail]") << "; (c) invariance " << c.invariance_passed_threshold << "/"
     << c.invariance_total_threshold << " at " << num(c.threshold) << ", "
     << c.invariance_passed_alpha0 << "/" << c.invariance_total_alpha0 << " at alpha0 "
     << num(c.alpha0) << (inv ? "" : " [fail]") << "; (d) max|R|/(1-rho) "
     << num(c.residual_bound) << " vs L*gamma/(1-rho) " << num(c.threshold)
     << (d ? "" : " [fail]") << "; L " << num(c.L) << ", gamma " << num(c.gamma)
     << ", V training fraction " << num(lyap_fraction) << "; " << num(elapsed) << " s"
     << (fast ? "" : " [fail]");
  return {a && b && inv && d && fast, os.str()};
}

// ---------------------------------------------------------------- 5
// Stabilizing DARE solution from the stable invariant subspace of the
// symplectic pencil, independent of value iteration.
Mat dare_symplectic(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
  const auto n = A.rows();
  const Mat Ait = A.transpose().inverse();
  const Mat G = B * R.inverse() * B.transpose();
  Mat Z(2 * n, 2 * n);
  Z << A + G * Ait * Q, -G * Ait, -Ait * Q, Ait;
  Eigen::ComplexEigenSolver<Mat> es(Z);
  Eigen::MatrixXcd U(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i)
    if (std::abs(es.eigenvalues()[i]) < 1.0 && k < n) U.col(k++) = es.eigenvectors().col(i);
  return (U.bottomRows(n) * U.topRows(n).inverse()).real();
}

Verdict oracle_equivalence() {
  std::ostringstream os;
  bool ok = true;

  // DARE
  Rng rng(101);
  double dare_worst = 0.0;
  int systems = 0;
  while (systems < 100) {
    Mat A(2, 2), B(2, 1);
    for (Eigen::Index i = 0; i < 4; ++i) A.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < 2; ++i) B.data()[i] = rng.normal();
    Mat ctrb(2, 2);
    ctrb << B, A * B;
    if (std::abs(ctrb.determinant()) < 1e-2 || std::abs(A.determinant()) < 1e-2) continue;
    const Mat Q = Mat::Identity(2, 2), R = Mat::Identity(1, 1);
    const Mat P = dare_symplectic(A, B, Q, R);
    const Mat Pv = dare_solve(A, B, Q, R).P;
    dare_worst = std::max(dare_worst, (Pv - P).norm() / std::max(1.0, P.norm()));
    ++systems;
  }
  ok = ok && dare_worst <= 1e-8;
  os << "DARE worst " << num(dare_worst);

  // CBF-QP vs 41^3 grid
  constexpr int kGrid = 41;
  int qp_bad = 0, qp_compared = 0;
  for (int inst = 0; inst < 200; ++inst) {
    CbfQpSpec spec;
    spec.input_bound = rng.uniform(0.02, 0.2);
    spec.theta2 = rng.uniform(0, 2 * std::numbers::pi);
    const double radius = rng.uniform(4.0, 6.0), ang = rng.uniform(0, 2 * std::numbers::pi);
    Vec z(3);
    z << radius * std::cos(ang), radius * std::sin(ang), rng.uniform(0, 2 * std::numbers::pi);
    const CbfConstraint c = cbf_constraint(z, spec);
    const double Bu = spec.input_bound;
    Vec u_nom(3);
    for (int k = 0; k < 3; ++k) u_nom[k] = rng.uniform(-2 * Bu, 2 * Bu);
    const double h = 2.0 * Bu / (kGrid - 1);
    double grid_best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i)
      for (int j = 0; j < kGrid; ++j)
        for (int k = 0; k < kGrid; ++k) {
          const Eigen::Vector3d u(-Bu + i * h, -Bu + j * h, -Bu + k * h);
          if (c.a.dot(u) >= c.b) grid_best = std::min(grid_best, (u - Eigen::Vector3d(u_nom)).squaredNorm());
        }
    if (cbf_feasibility_margin(z, spec) < 0.0) {
      bool threw = false;
      try {
        cbf_qp(u_nom, z, spec);
      } catch (const InfeasibleError&) {
        threw = true;
      }
      if (!threw || !std::isinf(grid_best)) ++qp_bad;
      continue;
    }
    const Vec u = cbf_qp(u_nom, z, spec);
    const double cost = (u - u_nom).squaredNorm();
    const bool feasible = u.cwiseAbs().maxCoeff() <= Bu && c.a.dot(Eigen::Vector3d(u)) >= c.b - 1e-9;
    if (!feasible) ++qp_bad;
    if (std::isinf(grid_best)) continue;
    const double d = 2.0 * std::sqrt(3.0) * h;  // one-cell diagonal
    if (cost > grid_best + 1e-12 || cost < grid_best - (2.0 * std::sqrt(cost) * d + d * d)) ++qp_bad;
    ++qp_compared;
  }
  ok = ok && qp_bad == 0;
  os << "; QP mismatches " << qp_bad << "/200 (" << qp_compared << " graded)";

  // Gradients and Jacobians at 200 probes each
  double grad_worst = 0.0;
  const LatentModel model = LatentModel::make(LatentArch{}, rng);
  const LyapunovNet V = LyapunovNet::make(2, random_vec(rng, 2, 0.5), rng);
  for (int i = 0; i < 200; ++i) {
    const Vec x = random_vec(rng, 4, 2.0);
    grad_worst = std::max(grad_worst, rel_err(model.encoder_jacobian(x),
                                              central_jacobian([&](const Vec& y) { return model.encode(y); }, x)));
    const Vec z = random_vec(rng, 2, 2.0);
    grad_worst = std::max(grad_worst, rel_err(model.decoder.jacobian(z),
                                              central_jacobian([&](const Vec& y) { return model.decode(y); }, z)));
    grad_worst = std::max(grad_worst, rel_err(V.gradient(z).transpose(),
                                              central_jacobian([&](const Vec& y) { return Vec::Constant(1, V.value(y)); }, z)));
  }
  {
    const Mlp net = Mlp::make({4, 16, 16, 3}, Activation::kTanh, Activation::kLinear, true, rng);
    Vec params(static_cast<Eigen::Index>(net.parameter_count()));
    net.pack(params.data());
    for (int i = 0; i < 200; ++i) {
      const Vec x = random_vec(rng, 4, 1.0), up = random_vec(rng, 3, 1.0);
      const auto r = mlp_backward(net, x, up);
      Vec analytic(params.size());
      Mlp::pack_grad(r.params, analytic.data());
      const auto idx = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(params.size())));
      Mlp probe = net;
      Vec p = params;
      p[idx] += 1e-6;
      probe.unpack(p.data());
      const double hi = up.dot(probe.forward(x));
      p[idx] -= 2e-6;
      probe.unpack(p.data());
      const double lo = up.dot(probe.forward(x));
      const double fd = (hi - lo) / 2e-6;
      grad_worst = std::max(grad_worst, std::abs(fd - analytic[idx]) /
                                            std::max({std::abs(fd), std::abs(analytic[idx]), 1e-6}));
    }
  }
  {
    RunConfig cfg;
    cfg.collection.points_per_dim = 2;
    cfg.collection.u_points = 3;
    const CartpoleDatasets d = collect_cartpole(cfg);
    LatentModel m = model;
    const LatentObjective obj(d.rand, d.drift, LossWeights{});
    LatentGrad g(m);
    obj.evaluate(m, &g);
    const Vec analytic = g.flatten(m);
    const Vec params = m.pack();
    for (int i = 0; i < 200; ++i) {
      const auto idx = static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(params.size())));
      Vec p = params;
      p[idx] += 1e-6;
      m.unpack(p);
      const double hi = obj.evaluate(m).total;
      p[idx] -= 2e-6;
      m.unpack(p);
      const double lo = obj.evaluate(m).total;
      const double fd = (hi - lo) / 2e-6;
      grad_worst = std::max(grad_worst, std::abs(fd - analytic[idx]) /
                                            std::max({std::abs(fd), std::abs(analytic[idx]), 1e-6}));
    }
  }
  ok = ok && grad_worst <= 1e-4;
  os << "; gradient worst relative " << num(grad_worst);
  return {ok, os.str()};
}

// ---------------------------------------------------------------- 6
Verdict conjugacy_sanity() {
  Rng rng(202);
  Mat F(3, 3);
  for (Eigen::Index i = 0; i < 9; ++i) F.data()[i] = rng.uniform(-1, 1);
  std::vector<Vec> xs;
  for (int i = 0; i < 200; ++i) xs.push_back(random_vec(rng, 3, 3.0));
  double identity_worst = 0.0;
  for (auto mode : {ConjugacyMode::kForward, ConjugacyMode::kBackward})
    for (auto time : {TimeModel::kContinuous, TimeModel::kDiscrete}) {
      ConjugacySpec s;
      s.mode = mode;
      s.time = time;
      s.f_cl = [F](const Vec& x) -> Vec { return F * x; };
      s.fz_cl = s.f_cl;
      s.encoder = [](const Vec& x) { return x; };
      s.encoder_jacobian = [](const Vec&) -> Mat { return Mat::Identity(3, 3); };
      s.right_inverse = Map([](const Vec& z) { return z; });
      identity_worst = std::max(identity_worst, estimate_gamma(xs, s).gamma);
    }

  omni::Params p;
  p.disturbance_bound = 1.0;
  double omni_gamma = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const double theta2 = rng.uniform(0, 2 * std::numbers::pi);
    CbfQpSpec spec;
    spec.theta2 = theta2;
    const Map policy = [spec](const Vec& z) -> Vec {
      const Vec u_nom = (-0.05 * Vec::Constant(3, z[0] - z[1])).cwiseMax(-5.0).cwiseMin(5.0);
      try {
        return cbf_qp(u_nom, z, spec);
      } catch (const Error&) {
        return u_nom;
      }
    };
    const ConjugacySpec s = omni_analytic_spec(
        p, theta2, policy, [&p](const Vec& x) { return omni::adversarial_disturbance(x, p.disturbance_bound); });
    std::vector<Vec> states;
    for (int i = 0; i < 200; ++i) {
      Vec x = random_vec(rng, 6, 10.0);
      x[5] = theta2;
      states.push_back(x);
    }
    omni_gamma = std::max(omni_gamma, estimate_gamma(states, s).gamma);
  }
  return {identity_worst == 0.0 && omni_gamma <= p.disturbance_bound + 1e-9,
          "identity witness gamma " + num(identity_worst) + " in 4 modes; omni gamma " +
              num(omni_gamma) + " vs B_d " + num(p.disturbance_bound)};
}

// ---------------------------------------------------------------- 7
double max_power_residual(double dt, const cartpole::Params& base) {
  cartpole::Params p = base;
  p.dt = dt;
  Rng rng(303);
  double worst = 0.0;
  const int steps = static_cast<int>(std::lround(2.0 / dt));
  for (int r = 0; r < 50; ++r) {
    std::vector<Vec> states{random_vec(rng, 4, 0.3)};
    std::vector<double> inputs;
    for (int t = 0; t < steps; ++t) {
      inputs.push_back(rng.uniform(-p.u_max, p.u_max));
      states.push_back(cartpole::step(states.back(), inputs.back(), p));
    }
    for (double v : cartpole::power_residuals(states, inputs, p, dt)) worst = std::max(worst, v);
  }
  return worst;
}

Verdict physics_invariants() {
  const cartpole::Params p;
  const double r_coarse = max_power_residual(0.02, p);
  const double C = r_coarse / (0.02 * 0.02);
  const double r_fine = max_power_residual(0.01, p);
  const bool power_ok = r_fine <= C * 0.01 * 0.01;

  const double mu = cartpole::min_mass_eigenvalue(p, 10000);
  Rng rng(304);
  bool envelope_ok = true;
  for (int r = 0; r < 50 && envelope_ok; ++r) {
    Vec s = random_vec(rng, 4, 0.5);
    const double e0 = cartpole::energy(s, p);
    for (int t = 1; t <= 500; ++t) {
      s = cartpole::step(s, rng.uniform(-p.u_max, p.u_max), p);
      if (Eigen::Vector2d(s[1], s[3]).norm() > cartpole::velocity_envelope(e0, p.u_max, mu, t * p.dt)) {
        envelope_ok = false;
        break;
      }
    }
  }
  const bool pd_ok = mu > 0.0;
  std::ostringstream os;
  os << "power residual " << num(r_coarse) << " at dt=0.02 (C=" << num(C) << "), " << num(r_fine)
     << " at dt=0.01 vs C*dt^2=" << num(C * 1e-4) << (power_ok ? "" : " [fail]")
     << "; velocity envelope " << (envelope_ok ? "held" : "violated [fail]")
     << "; min eigenvalue of M over 10^4 cos values " << num(mu) << (pd_ok ? "" : " [fail]");
  return {power_ok && envelope_ok && pd_ok, os.str()};
}

// ---------------------------------------------------------------- 8
int run_cli(const std::string& args) {
  const int status = std::system((std::string(LCERT_CLI_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Verdict numerics() {
  std::ostringstream os;
  const VectorField decay = [](const Vec& x, const Vec&) -> Vec { return -x; };
  auto err = [&](double dt) {
    return std::abs(rk4_step(decay, Vec::Ones(1), Vec(), dt)[0] - std::exp(-dt));
  };
  // Local error O(dt^5): halving dt divides it by 32.
  const double ratio = err(0.02) / err(0.01);
  const bool order_ok = std::abs(std::log2(ratio) - 5.0) < 0.1;
  os << "RK4 one-step error ratio " << num(ratio);

  Rng rng(405);
  std::vector<Point2> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(rng.normal(), rng.normal());
  const Polygon2D hull = convex_hull_2d(pts);
  int inside = 0;
  for (const auto& q : pts) inside += point_in_hull(hull, q) ? 1 : 0;
  const bool hull_ok = inside == static_cast<int>(pts.size());
  os << "; hull covers " << inside << "/" << pts.size();

  const std::string smoke = std::string(LCERT_SOURCE_DIR) + "/configs/smoke.json";
  const fs::path root = fs::temp_directory_path() / "lcert_acceptance_repro";
  fs::remove_all(root);
  bool repro_ok = true;
  int files = 0;
  std::vector<int> codes;
  for (const char* run : {"a", "b"}) {
    const std::string out = (root / run).string();
    for (const char* cmd : {"collect", "train", "certify", "simulate-omni", "report"})
      codes.push_back(run_cli(std::string(cmd) + " --config " + smoke + " --out " + out));
  }
  for (int c : codes) repro_ok = repro_ok && c == 0;
  if (repro_ok) {
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(root / "a")) names.insert(e.path().filename().string());
    for (const auto& e : fs::directory_iterator(root / "b")) names.insert(e.path().filename().string());
    for (const auto& n : names) {
      ++files;
      if (!fs::exists(root / "a" / n) || !fs::exists(root / "b" / n) ||
          slurp(root / "a" / n) != slurp(root / "b" / n)) {
        repro_ok = false;
        os << "; differs: " << n;
      }
    }
  }
  os << "; CLI outputs byte-identical across reruns: " << (repro_ok ? "yes" : "no") << " (" << files
     << " files)";
  return {order_ok && hull_ok && repro_ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  bool report_only = false;
  std::string out_dir;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--report-only") {
      report_only = true;
    } else if (a == "--out" && i + 1 < argc) {
      out_dir = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::cerr << "usage: acceptance [--report-only] [--only N[,N...]] [--out DIR]\n";
      return 2;
    }
  }
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"omni safety", omni_safety},
      {"CBF feasibility", cbf_feasibility},
      {"transfer arithmetic", transfer_arithmetic},
      {"cartpole pipeline", [&] { return cartpole_pipeline(out_dir); }},
      {"oracle equivalence", oracle_equivalence},
      {"conjugacy sanity", conjugacy_sanity},
      {"physics invariants", physics_invariants},
      {"numerics", numerics},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    if (!v.pass) ++failed;
    std::printf("criterion %d %-20s %s  %s\n", id, criteria[i].first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
  }
  return report_only ? 0 : failed;
}
