#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lcert/core/errors.hpp"

namespace lcert {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Continuous-time vector field x' = f(x, u).
using VectorField = std::function<Vec(const Vec&, const Vec&)>;
using Map = std::function<Vec(const Vec&)>;

inline bool all_finite(const Vec& v) { return v.allFinite(); }
inline bool all_finite(const Mat& m) { return m.allFinite(); }

/// Classical fourth-order Runge-Kutta step with the input held constant.
inline Vec rk4_step(const VectorField& deriv, const Vec& x, const Vec& u,
                    double dt) {
  if (!(dt > 0.0)) throw ContractError("rk4_step: dt must be positive");
  auto eval = [&](const Vec& at) {
    Vec d = deriv(at, u);
    if (!d.allFinite())
      throw NumericDomainError("rk4_step: non-finite derivative");
    return d;
  };
  const Vec k1 = eval(x);
  const Vec k2 = eval(x + 0.5 * dt * k1);
  const Vec k3 = eval(x + 0.5 * dt * k2);
  const Vec k4 = eval(x + dt * k3);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct DareOptions {
  double tolerance = 1e-10;
  int max_iterations = 100000;
};

struct DareSolution {
  Mat P;
  Mat K;
  int iterations = 0;
};

/// Infinite-horizon discrete Riccati solution by value iteration from P = Q.
///
/// Iterates P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA until the Frobenius
/// change drops below `tolerance * max(1, |P|_F)`. The returned gain is
/// K = (R + B'PB)^{-1} B'PA, so the optimal input is u = -K x.
inline DareSolution dare_solve(const Mat& A, const Mat& B, const Mat& Q,
                               const Mat& R, const DareOptions& opts = {}) {
  const auto n = A.rows();
  const auto m = B.cols();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
      R.rows() != m || R.cols() != m)
    throw ContractError("dare_solve: inconsistent dimensions");
  Eigen::LLT<Mat> r_llt(R);
  if (r_llt.info() != Eigen::Success)
    throw ContractError("dare_solve: R must be positive definite");

  Mat P = Q;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Mat PB = P * B;
    const Mat S = R + B.transpose() * PB;
    const Mat gain = S.ldlt().solve(PB.transpose() * A);
    Mat next = Q + A.transpose() * P * A - A.transpose() * PB * gain;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite())
      throw DivergenceError("dare_solve: value iteration diverged");
    const double change = (next - P).stableNorm();
    P = std::move(next);
    if (change <= opts.tolerance * std::max(1.0, P.stableNorm())) {
      const Mat PBf = P * B;
      const Mat Sf = R + B.transpose() * PBf;
      return {P, Sf.ldlt().solve(PBf.transpose() * A), it};
    }
  }
  throw DivergenceError("dare_solve: no convergence after " +
                        std::to_string(opts.max_iterations) + " iterations");
}

/// Right pseudo-inverse J^T (J J^T)^{-1} of a full-row-rank matrix.
inline Mat pinv_row_fullrank(const Mat& J, double condition_cap = 1e12) {
  if (J.rows() > J.cols())
    throw ContractError("pinv_row_fullrank: more rows than columns");
  const Mat gram = J * J.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(hi > 0.0) || lo <= hi / condition_cap || lo <= 1e-300)
    throw RankError("pinv_row_fullrank: J J^T is singular or ill-conditioned");
  return J.transpose() * gram.ldlt().solve(Mat::Identity(J.rows(), J.rows()));
}

/// Central-difference Jacobian; column j is (f(x+h e_j) - f(x-h e_j)) / 2h.
inline Mat finite_diff_jacobian(const std::function<Vec(const Vec&)>& f,
                                const Vec& x, double h = 1e-5) {
  if (!(h > 0.0)) throw ContractError("finite_diff_jacobian: h must be > 0");
  Mat J;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const Vec fp = f(xp), fm = f(xm);
    if (!fp.allFinite() || !fm.allFinite())
      throw NumericDomainError("finite_diff_jacobian: non-finite evaluation");
    if (j == 0) J.resize(fp.size(), x.size());
    J.col(j) = (fp - fm) / (2.0 * h);
  }
  return J;
}

inline double spectral_radius(const Mat& A) {
  Eigen::EigenSolver<Mat> es(A, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double sigma_max(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(0);
}

inline double sigma_min(const Mat& A) {
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Evenly spaced points on [lo, hi]; a single point sits at the midpoint.
inline std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out;
  if (count <= 0) return out;
  if (count == 1) return {0.5 * (lo + hi)};
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / (count - 1));
  return out;
}

/// Cartesian grid over the box [lo, hi] with `count` points per axis, in
/// lexicographic order (last axis fastest).
inline std::vector<Vec> box_grid(const Vec& lo, const Vec& hi, int count) {
  const auto n = lo.size();
  std::vector<std::vector<double>> axes;
  for (Eigen::Index d = 0; d < n; ++d) axes.push_back(linspace(lo[d], hi[d], count));
  std::vector<Vec> out;
  if (count <= 0) return out;
  std::vector<int> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    Vec p(n);
    for (Eigen::Index d = 0; d < n; ++d) p[d] = axes[d][idx[d]];
    out.push_back(std::move(p));
    Eigen::Index d = n - 1;
    while (d >= 0 && ++idx[d] == static_cast<int>(axes[d].size())) {
      idx[d] = 0;
      --d;
    }
    if (d < 0) break;
  }
  return out;
}

}  // namespace lcert
