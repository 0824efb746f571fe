#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "lcert/certify/certificate.hpp"
#include "lcert/certify/domain.hpp"
#include "lcert/control/cbf.hpp"

using namespace lcert;

namespace {

const Map kHalf = [](const Vec& z) -> Vec { return 0.5 * z; };
const Map kIdentity = [](const Vec& x) -> Vec { return x; };
const ScalarFn kSquare = [](const Vec& z) { return z.squaredNorm(); };
const GradientFn kSquareGrad = [](const Vec& z) -> Vec { return 2.0 * z; };

std::vector<Vec> square_grid(double r, int n, bool skip_origin) {
  std::vector<Vec> out;
  for (Vec& z : box_grid(Vec::Constant(2, -r), Vec::Constant(2, r), n))
    if (!skip_origin || z.norm() > 0.0) out.push_back(std::move(z));
  return out;
}

}  // namespace

TEST(Dz, ContractiveHullInsideSeedSquare) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Zero(2), 1.0, 20, 11);
  ASSERT_TRUE(Dz.is_hull());
  EXPECT_TRUE(Dz.contains(Vec::Zero(2)));
  for (const auto& v : Dz.hull().vertices()) EXPECT_LE(v.cwiseAbs().maxCoeff(), 1.0 + 1e-15);
  for (const auto& z : Dz.visited()) EXPECT_TRUE(Dz.contains(z));
  EXPECT_EQ(Dz.visited().size(), 11u * 11u * 21u);
}

TEST(Dz, ZeroHorizonGivesSeedCorners) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Zero(2), 1.0, 0, 5);
  ASSERT_EQ(Dz.hull().size(), 4u);
  for (const auto& v : Dz.hull().vertices()) {
    EXPECT_EQ(std::abs(v.x()), 1.0);
    EXPECT_EQ(std::abs(v.y()), 1.0);
  }
  EXPECT_NEAR(Dz.hull().area(), 4.0, 1e-15);
}

TEST(Dz, EveryRolledPointInsideHull) {
  // A rotation-contraction whose orbits leave the seed square.
  Mat A(2, 2);
  A << 0.9, -0.8, 0.8, 0.9;
  const Map f = [A](const Vec& z) -> Vec { return A * z; };
  const LatentDomain Dz = estimate_Dz(f, Vec::Constant(2, 0.3), 1.0, 40, 9);
  EXPECT_GT(Dz.hi().maxCoeff(), 1.3);
  for (const auto& z : Dz.visited()) EXPECT_TRUE(point_in_hull(Dz.hull(), Point2(z[0], z[1])));
}

TEST(Dz, ThreeDimensionalUsesBox) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Zero(3), 1.0, 3, 3);
  EXPECT_FALSE(Dz.is_hull());
  EXPECT_TRUE(Dz.contains(Vec::Constant(3, 0.99)));
  EXPECT_FALSE(Dz.contains(Vec::Constant(3, 1.01)));
}

TEST(Dz, DivergenceIsReported) {
  const Map blow = [](const Vec& z) -> Vec { return 1e200 * z; };
  EXPECT_THROW(estimate_Dz(blow, Vec::Zero(2), 1.0, 10, 3), NumericDomainError);
}

TEST(Dx, EquilibriumRetainedAndExactCloud) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Zero(2), 1.0, 10, 11);
  const DxEstimate Dx = estimate_Dx(kIdentity, kHalf, Dz, 2, 0.5, 3, 0.0, 5);
  bool has_origin = false;
  for (const auto& x : Dx.initial) has_origin |= x.norm() == 0.0;
  EXPECT_TRUE(has_origin);
  EXPECT_EQ(Dx.initial.size(), 25u);
  EXPECT_EQ(Dx.domain.points().size(), 25u * 4u);
  for (const auto& p : Dx.domain.points()) EXPECT_TRUE(Dx.domain.contains(p));
  Vec off = Dx.domain.points()[1];
  off[0] += 1e-9;
  bool any = false;
  for (const auto& p : Dx.domain.points()) any |= (p - off).norm() == 0.0;
  EXPECT_EQ(Dx.domain.contains(off), any);
}

TEST(Dx, EmptyInitialSetIsDegenerate) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Constant(2, 10.0), 0.5, 0, 3);
  EXPECT_THROW(estimate_Dx(kIdentity, kHalf, Dz, 2, 0.5, 3, 0.0, 5), DegenerateDomainError);
}

TEST(Dx, ApproximatelyForwardInvariant) {
  const LatentDomain Dz = estimate_Dz(kHalf, Vec::Zero(2), 1.0, 10, 11);
  const DxEstimate Dx = estimate_Dx(kIdentity, kHalf, Dz, 2, 0.5, 10, 0.05, 5);
  Rng rng(1);
  EXPECT_GE(dx_invariance_fraction(Dx.domain, kHalf, 10, 1000, rng), 0.99);
  for (int i = 0; i < 100; ++i) EXPECT_TRUE(Dx.domain.contains(Dx.domain.sample(rng)));
}

TEST(PointCloud, MembershipMatchesBruteForce) {
  Rng rng(2);
  std::vector<Vec> pts;
  for (int i = 0; i < 300; ++i) {
    Vec p(4);
    for (int k = 0; k < 4; ++k) p[k] = rng.uniform(-1, 1);
    pts.push_back(p);
  }
  const PointCloudDomain cloud(pts, 0.2);
  for (int i = 0; i < 2000; ++i) {
    Vec x(4);
    for (int k = 0; k < 4; ++k) x[k] = rng.uniform(-1.3, 1.3);
    bool brute = false;
    for (const auto& p : pts) brute |= (p - x).lpNorm<Eigen::Infinity>() <= 0.2;
    EXPECT_EQ(cloud.contains(x), brute);
  }
}

TEST(Certificate, ContractionSatisfiesDiscreteLyapunov) {
  const auto grid = square_grid(1.0, 21, true);
  const auto c = check_certificate(grid, CertificateKind::kLyapunovDiscrete, kSquare, nullptr,
                                   kHalf, 0.85);
  EXPECT_EQ(c.satisfied_fraction, 1.0);
  double min_sq = std::numeric_limits<double>::infinity();
  for (const auto& z : grid) min_sq = std::min(min_sq, z.squaredNorm());
  EXPECT_NEAR(c.worst_violation, -0.6 * min_sq, 1e-15);
}

TEST(Certificate, ZeroRateFailsAwayFromOrigin) {
  const auto grid = square_grid(1.0, 21, true);
  const auto c = check_certificate(grid, CertificateKind::kLyapunovDiscrete, kSquare, nullptr,
                                   kHalf, 0.0);
  EXPECT_EQ(c.satisfied_fraction, 0.0);
  const auto with_origin = check_certificate(square_grid(1.0, 21, false),
                                             CertificateKind::kLyapunovDiscrete, kSquare,
                                             nullptr, kHalf, 0.0);
  EXPECT_EQ(with_origin.satisfied, 1u);
}

TEST(Certificate, ContinuousLyapunovUsesGradient) {
  // z_dot = -z with V = |z|^2: <grad V, f> = -2V, so rho up to 2 is certified.
  const Map field = [](const Vec& z) -> Vec { return -z; };
  const auto grid = square_grid(2.0, 11, true);
  EXPECT_EQ(check_certificate(grid, CertificateKind::kLyapunovContinuous, kSquare, kSquareGrad,
                              field, 1.9)
                .satisfied_fraction,
            1.0);
  EXPECT_EQ(check_certificate(grid, CertificateKind::kLyapunovContinuous, kSquare, kSquareGrad,
                              field, 2.1)
                .satisfied_fraction,
            0.0);
  EXPECT_THROW(check_certificate(grid, CertificateKind::kLyapunovContinuous, kSquare, nullptr,
                                 field, 1.0),
               ContractError);
  EXPECT_THROW(check_certificate({}, CertificateKind::kLyapunovDiscrete, kSquare, nullptr,
                                 kHalf, 1.0),
               ContractError);
}

TEST(Certificate, CbfPolicyGivesContinuousBarrier) {
  CbfQpSpec spec;
  spec.theta2 = 0.4;
  const Eigen::Vector2d goal(0, 0);
  const Map field = [&](const Vec& z) -> Vec {
    // nominal: head straight at the other car
    Vec u_nom = 5.0 * omni::wheel_matrix(spec.vehicle).transpose() *
                omni::rotation(z[2]).transpose() * Eigen::Vector3d(-z[0], -z[1], 0.0);
    u_nom = u_nom.cwiseMax(-spec.input_bound).cwiseMin(spec.input_bound);
    Vec out = omni::input_map(z[2], spec.vehicle) * cbf_qp(u_nom, z, spec);
    out[0] -= std::cos(spec.theta2);
    out[1] -= std::sin(spec.theta2);
    return out;
  };
  const ScalarFn h = [&](const Vec& z) { return z.head<2>().norm() - spec.beta_prime; };
  const GradientFn grad = [](const Vec& z) -> Vec {
    Vec g = Vec::Zero(3);
    g.head<2>() = z.head<2>() / z.head<2>().norm();
    return g;
  };
  std::vector<Vec> grid;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j)
      for (int k = 0; k < 6; ++k) {
        const double r = 0.5 + 19.5 * i / 29.0, a = 2.0 * std::numbers::pi * j / 30.0;
        Vec z(3);
        z << r * std::cos(a), r * std::sin(a), 2.0 * std::numbers::pi * k / 6.0;
        grid.push_back(z);
      }
  // The QP enforces a^T u >= b up to 1e-9.
  const auto c = check_certificate(grid, CertificateKind::kBarrierContinuous, h, grad, field,
                                   spec.alpha, 1e-9);
  EXPECT_EQ(c.satisfied_fraction, 1.0) << "worst " << c.worst_violation;
}

TEST(Lipschitz, Examples) {
  Rng rng(3);
  std::vector<Vec> ball;
  for (int i = 0; i < 5000; ++i) {
    Vec z(2);
    z << rng.normal(), rng.normal();
    ball.push_back(z / z.norm() * std::sqrt(rng.uniform01()));
  }
  const double L = estimate_lipschitz(kSquareGrad, ball);
  EXPECT_LE(L, 2.0);
  EXPECT_GE(L, 1.99);
  EXPECT_LE(difference_quotient_lipschitz(kSquare, ball, 10000, rng), 2.0 + 1e-12);

  const GradientFn phi_grad = [](const Vec& z) -> Vec {
    Vec g = Vec::Zero(3);
    g.head<2>() = z.head<2>() / z.head<2>().norm();
    return g;
  };
  std::vector<Vec> zs;
  for (int i = 0; i < 100; ++i) {
    Vec z(3);
    z << rng.uniform(-9, 9), rng.uniform(-9, 9), rng.uniform(-9, 9);
    zs.push_back(z);
  }
  EXPECT_NEAR(estimate_lipschitz(phi_grad, zs), 1.0, 1e-15);

  Vec g(3);
  g << 1, -2, 2;
  EXPECT_EQ(estimate_lipschitz([g](const Vec&) { return g; }, zs), 3.0);
  EXPECT_EQ(estimate_lipschitz([g](const Vec&) { return g; }, {zs[0]}), 3.0);
  EXPECT_THROW(estimate_lipschitz(phi_grad, {}), ContractError);
}

TEST(Alpha0, BallLevelSets) {
  const auto probes = box_grid(Vec::Constant(2, -3.0), Vec::Constant(2, 3.0), 301);
  for (double radius : {2.0, 1.0}) {
    const auto member = [radius](const Vec& x) { return x.norm() <= radius; };
    double closest = std::numeric_limits<double>::infinity();
    for (const auto& p : probes)
      if (!member(p)) closest = std::min(closest, p.squaredNorm());
    const double a0 = compute_alpha0(kSquare, member, probes);
    EXPECT_LE(a0, closest);
    EXPECT_GE(a0, closest * (1.0 - 1e-3));
    EXPECT_NEAR(a0, radius * radius, 0.05 * radius * radius);
  }
}

TEST(Alpha0, MonotoneInDomain) {
  const auto probes = box_grid(Vec::Constant(2, -3.0), Vec::Constant(2, 3.0), 101);
  const auto small = [](const Vec& x) { return x.lpNorm<Eigen::Infinity>() <= 1.0; };
  const auto large = [](const Vec& x) {
    return x.lpNorm<Eigen::Infinity>() <= 1.0 || (x[0] > 0 && x.norm() <= 2.0);
  };
  EXPECT_GE(compute_alpha0(kSquare, large, probes), compute_alpha0(kSquare, small, probes));
  const auto none = [](const Vec&) { return false; };
  EXPECT_THROW(compute_alpha0(kSquare, none, probes), DegenerateDomainError);
}

TEST(Transfer, StabilityThreshold) {
  TransferInputs in;
  in.L = 25.60;
  in.gamma = 0.0183;
  in.rate = 0.85;
  in.alpha0 = 6.71;
  const TransferBounds b = transfer_bounds(in);
  EXPECT_NEAR(b.threshold, 3.1232, 1e-4);
  EXPECT_EQ(b.threshold, 25.60 * 0.0183 / (1.0 - 0.85));
  EXPECT_EQ(b.vacuous, false);
  EXPECT_EQ(*b.kappa_inverse, std::sqrt(b.threshold / 0.1));
  in.time = TimeModel::kContinuous;
  EXPECT_EQ(transfer_bounds(in).threshold, 25.60 * 0.0183 / 0.85);
  in.alpha0 = 0.1;
  EXPECT_EQ(transfer_bounds(in).vacuous, true);
}

TEST(Transfer, ExactConjugacyGivesZero) {
  for (auto time : {TimeModel::kDiscrete, TimeModel::kContinuous})
    for (auto g : {Guarantee::kStability, Guarantee::kSafety}) {
      TransferInputs in;
      in.L = 7.0;
      in.gamma = 0.0;
      in.rate = 0.5;
      in.time = time;
      in.guarantee = g;
      EXPECT_EQ(transfer_bounds(in).threshold, 0.0);
    }
}

TEST(Transfer, SafetyMargin) {
  TransferInputs in;
  in.L = 1.0;
  in.gamma = 1.0;
  in.rate = 2.0;
  in.time = TimeModel::kContinuous;
  in.guarantee = Guarantee::kSafety;
  in.beta = 4.5;
  in.beta_prime = 5.0;
  const TransferBounds b = transfer_bounds(in);
  EXPECT_EQ(b.threshold, -0.5);
  EXPECT_EQ(*b.required_beta_prime, 5.0);
  EXPECT_EQ(b.robust_inclusion, true);
  in.beta_prime = 4.99;
  EXPECT_EQ(transfer_bounds(in).robust_inclusion, false);
}

TEST(Transfer, RateOutOfRange) {
  TransferInputs in;
  in.L = 1.0;
  in.gamma = 0.1;
  in.rate = 1.0;
  EXPECT_THROW(transfer_bounds(in), ContractError);
  in.rate = -0.1;
  EXPECT_THROW(transfer_bounds(in), ContractError);
  in.time = TimeModel::kContinuous;
  in.rate = 0.0;
  EXPECT_THROW(transfer_bounds(in), ContractError);
  in.L = std::nan("");
  in.rate = 1.0;
  EXPECT_THROW(transfer_bounds(in), ContractError);
}

TEST(Transfer, JsonRecomputes) {
  TransferInputs in;
  in.L = 3.3;
  in.gamma = 0.07;
  in.rate = 0.85;
  in.alpha0 = 1.0;
  const Json j = Json::parse(transfer_to_json(transfer_bounds(in)).dump());
  const double L = j["L"], gamma = j["gamma"], rate = j["rate"], thr = j["threshold"];
  EXPECT_EQ(L * gamma / (1.0 - rate), thr);
}

namespace {

// E = identity, f(x) = 0.5x, f_z(z) = 0.5z + 0.01 sin(z): a slightly mismatched latent model.
const Map kMismatched = [](const Vec& z) -> Vec {
  return (0.5 * z.array() + 0.01 * z.array().sin()).matrix();
};

}  // namespace

TEST(Residual, ZeroOnWitnessAndBoundedByLipschitz) {
  Rng rng(4);
  std::vector<Vec> xs, images;
  for (int i = 0; i < 500; ++i) {
    Vec x(2);
    x << rng.uniform(-2, 2), rng.uniform(-2, 2);
    xs.push_back(x);
    EXPECT_EQ(residual_R(x, kSquare, kIdentity, kHalf, kHalf), 0.0);
    images.push_back(kHalf(x));
    images.push_back(kMismatched(x));
  }
  ConjugacySpec spec;
  spec.f_cl = kHalf;
  spec.fz_cl = kMismatched;
  spec.encoder = kIdentity;
  const ConjugacyEstimate est = estimate_gamma(xs, spec);
  const double L = estimate_lipschitz(kSquareGrad, images);
  const double rho = 0.85;
  double worst = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double R = residual_R(xs[i], kSquare, kIdentity, kHalf, kMismatched);
    worst = std::max(worst, std::abs(R));
    EXPECT_LE(std::abs(R), L * est.pointwise[i] + 1e-15);
    // Combined inequality: Vbar(f(x)) - rho Vbar(x) <= L gamma(x) where V certifies f_z.
    ASSERT_LE(kSquare(kMismatched(xs[i])), rho * kSquare(xs[i]));
    EXPECT_LE(kSquare(kHalf(xs[i])) - rho * kSquare(xs[i]), L * est.pointwise[i] + 1e-15);
  }
  EXPECT_LE(worst / (1.0 - rho), L * est.gamma / (1.0 - rho));
}

TEST(Trajectory, OriginStaysInsideAttractiveSet) {
  const auto r = trajectory_bound_check(Vec::Zero(2), 50, kHalf, kSquare, 0.85, 2.0, 0.01,
                                        TimeModel::kDiscrete);
  EXPECT_TRUE(r.passed);
  for (double v : r.values) EXPECT_LE(v, 2.0 * 0.01 / 0.15);
}

TEST(Trajectory, WitnessDecaysGeometrically) {
  Vec x0(2);
  x0 << 1.0, -0.5;
  const auto r = trajectory_bound_check(x0, 40, kHalf, kSquare, 0.85, 0.0, 0.0,
                                        TimeModel::kDiscrete);
  EXPECT_TRUE(r.passed);
  ASSERT_EQ(r.values.size(), 41u);
  for (int t = 0; t <= 40; ++t) EXPECT_LE(r.values[t], std::pow(0.85, t) * kSquare(x0));

  const Map grow = [](const Vec& x) -> Vec { return 1.1 * x; };
  const auto bad = trajectory_bound_check(x0, 40, grow, kSquare, 0.85, 0.0, 0.0,
                                          TimeModel::kDiscrete);
  EXPECT_FALSE(bad.passed);
  EXPECT_EQ(bad.first_violation, 1);
}

TEST(Trajectory, ContinuousBound) {
  // x_dot = -x under a dt = 0.01 Euler map, V = |x|^2 decays like exp(-2t).
  const Map step = [](const Vec& x) -> Vec { return 0.99 * x; };
  Vec x0 = Vec::Ones(2);
  const auto r = trajectory_bound_check(x0, 200, step, kSquare, 1.9, 0.0, 0.0,
                                        TimeModel::kContinuous, 1e-9, 0.01);
  EXPECT_TRUE(r.passed);
  EXPECT_NEAR(r.bounds[100], 2.0 * std::exp(-1.9), 1e-12);
}

TEST(Invariance, BoundarySeedsStayInside) {
  Rng rng(5);
  const double rho = 0.85, L = 2.0, gamma = 0.05, threshold = L * gamma / (1.0 - rho);
  for (double alpha : {threshold, 1.0, 4.0}) {
    const auto seeds = level_set_seeds(kSquare, alpha, Vec::Zero(2), 100, 5.0, rng);
    ASSERT_EQ(seeds.size(), 100u);
    for (const auto& s : seeds) {
      EXPECT_NEAR(kSquare(s), alpha, 1e-9 * alpha);
      EXPECT_TRUE(forward_invariance_check(s, alpha, 50, kMismatched, kSquare).passed);
    }
  }
  const Map grow = [](const Vec& x) -> Vec { return 1.1 * x; };
  const auto seeds = level_set_seeds(kSquare, 1.0, Vec::Zero(2), 5, 5.0, rng);
  const auto out = forward_invariance_check(seeds[0], 1.0, 10, grow, kSquare);
  EXPECT_FALSE(out.passed);
  EXPECT_EQ(out.first_exit, 1);
  EXPECT_THROW(level_set_seeds(kSquare, 0.0, Vec::Zero(2), 5, 5.0, rng), ContractError);
}

TEST(ZeroSet, Examples) {
  const auto grid = box_grid(Vec::Constant(2, -1.0), Vec::Constant(2, 1.0), 11);
  const auto zs = zero_set_scan(kIdentity, grid, 1e-12);
  ASSERT_EQ(zs.size(), 1u);
  EXPECT_EQ(zs[0], Vec::Zero(2));
  EXPECT_EQ(zero_set_scan(kIdentity, grid, std::numeric_limits<double>::infinity()).size(),
            grid.size());
  for (const auto& x : zero_set_scan(kIdentity, grid, 0.45)) EXPECT_LE(x.norm(), 0.45);
  Vec c(2);
  c << 0.2, 0.2;
  const auto shifted = zero_set_scan(kIdentity, grid, 1e-12, c);
  ASSERT_EQ(shifted.size(), 1u);
  EXPECT_LE((shifted[0] - c).norm(), 1e-12);
}
