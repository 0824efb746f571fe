#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <unordered_map>
#include <vector>

#include "lcert/core/geometry.hpp"
#include "lcert/core/random.hpp"
#include "lcert/io/json_io.hpp"

namespace lcert {

/// Convex hull of the visited latent states when n_z = 2, otherwise their
/// axis-aligned bounding box.
class LatentDomain {
 public:
  LatentDomain(std::vector<Vec> visited, Vec lo, Vec hi, std::optional<Polygon2D> hull)
      : visited_(std::move(visited)), lo_(std::move(lo)), hi_(std::move(hi)),
        hull_(std::move(hull)) {}

  bool is_hull() const { return hull_.has_value(); }
  const Polygon2D& hull() const { return *hull_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }
  const std::vector<Vec>& visited() const { return visited_; }
  int dim() const { return static_cast<int>(lo_.size()); }

  bool contains(const Vec& z) const {
    if (z.size() != lo_.size()) throw ContractError("LatentDomain: dimension mismatch");
    if (hull_) return point_in_hull(*hull_, Point2(z[0], z[1]));
    for (Eigen::Index i = 0; i < z.size(); ++i)
      if (z[i] < lo_[i] || z[i] > hi_[i]) return false;
    return true;
  }

  /// Grid over the bounding box restricted to members.
  std::vector<Vec> grid(int points_per_dim) const {
    std::vector<Vec> out;
    for (Vec& z : box_grid(lo_, hi_, points_per_dim))
      if (contains(z)) out.push_back(std::move(z));
    return out;
  }

 private:
  std::vector<Vec> visited_;
  Vec lo_, hi_;
  std::optional<Polygon2D> hull_;
};

/// Seeds on the grid {|z - center|_inf <= r1}, rolled T steps under fz_cl.
inline LatentDomain estimate_Dz(const Map& fz_cl, const Vec& center, double r1, int T,
                                int points_per_dim) {
  if (!(r1 > 0.0) || T < 0 || points_per_dim < 1)
    throw ConfigError("estimate_Dz: need r1 > 0, T >= 0 and a nonempty grid");
  const Vec lo0 = center.array() - r1, hi0 = center.array() + r1;
  std::vector<Vec> visited;
  for (const Vec& seed : box_grid(lo0, hi0, points_per_dim)) {
    Vec z = seed;
    visited.push_back(z);
    for (int t = 0; t < T; ++t) {
      z = fz_cl(z);
      if (!z.allFinite()) throw NumericDomainError("estimate_Dz: latent rollout diverged");
      visited.push_back(z);
    }
  }
  Vec lo = visited.front(), hi = visited.front();
  for (const auto& z : visited) {
    lo = lo.cwiseMin(z);
    hi = hi.cwiseMax(z);
  }
  std::optional<Polygon2D> hull;
  if (center.size() == 2) {
    std::vector<Point2> pts;
    pts.reserve(visited.size());
    for (const auto& z : visited) pts.emplace_back(z[0], z[1]);
    hull = convex_hull_2d(std::move(pts));
  }
  return LatentDomain(std::move(visited), lo, hi, std::move(hull));
}

/// Finite point cloud inflated by infinity-norm balls of radius eps, with a
/// uniform spatial hash for membership queries.
class PointCloudDomain {
 public:
  PointCloudDomain(std::vector<Vec> points, double eps)
      : points_(std::move(points)), eps_(eps) {
    if (points_.empty()) throw DegenerateDomainError("PointCloudDomain: no points");
    if (!(eps_ >= 0.0)) throw ConfigError("PointCloudDomain: eps must be >= 0");
    dim_ = points_.front().size();
    cell_ = eps_ > 0.0 ? eps_ : 1.0;
    lo_ = points_.front();
    hi_ = points_.front();
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (points_[i].size() != dim_) throw ContractError("PointCloudDomain: ragged points");
      lo_ = lo_.cwiseMin(points_[i]);
      hi_ = hi_.cwiseMax(points_[i]);
      cells_[key(cell_of(points_[i]))].push_back(i);
    }
    lo_.array() -= eps_;
    hi_.array() += eps_;
  }

  const std::vector<Vec>& points() const { return points_; }
  double eps() const { return eps_; }
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

  bool contains(const Vec& x) const {
    if (x.size() != dim_) throw ContractError("PointCloudDomain: dimension mismatch");
    for (Eigen::Index i = 0; i < dim_; ++i)
      if (x[i] < lo_[i] || x[i] > hi_[i]) return false;
    const std::vector<std::int64_t> base = cell_of(x);
    std::vector<std::int64_t> probe(base.size());
    const auto n = static_cast<std::size_t>(dim_);
    std::size_t combos = 1;
    for (std::size_t i = 0; i < n; ++i) combos *= 3;
    for (std::size_t c = 0; c < combos; ++c) {
      std::size_t code = c;
      for (std::size_t i = 0; i < n; ++i) {
        probe[i] = base[i] + static_cast<std::int64_t>(code % 3) - 1;
        code /= 3;
      }
      const auto it = cells_.find(key(probe));
      if (it == cells_.end()) continue;
      for (std::size_t idx : it->second)
        if ((points_[idx] - x).lpNorm<Eigen::Infinity>() <= eps_) return true;
    }
    return false;
  }

  /// Uniform draw from a random member's eps-ball.
  Vec sample(Rng& rng) const {
    Vec x = points_[rng.index(points_.size())];
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] += rng.uniform(-eps_, eps_);
    return x;
  }

 private:
  std::vector<std::int64_t> cell_of(const Vec& x) const {
    std::vector<std::int64_t> c(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i)
      c[static_cast<std::size_t>(i)] = static_cast<std::int64_t>(std::floor(x[i] / cell_));
    return c;
  }

  static std::uint64_t key(const std::vector<std::int64_t>& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (auto v : c) {
      h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return h;
  }

  std::vector<Vec> points_;
  double eps_;
  Eigen::Index dim_ = 0;
  double cell_ = 1.0;
  Vec lo_, hi_;
  // Colliding keys only merge buckets; membership still tests real distances.
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

struct DxEstimate {
  PointCloudDomain domain;
  std::vector<Vec> initial;  // X_0
  int horizon = 0;           // T'
};

/// X_0 = grid over {|x|_inf <= r2} with E(x) in D_z; D_x = union of T'-step
/// closed-loop rollouts from X_0, inflated by eps.
inline DxEstimate estimate_Dx(const Map& encoder, const Map& f_cl, const LatentDomain& Dz,
                              int state_dim, double r2, int horizon, double eps,
                              int points_per_dim) {
  if (!(r2 > 0.0) || horizon < 0 || points_per_dim < 1)
    throw ConfigError("estimate_Dx: need r2 > 0, T' >= 0 and a nonempty grid");
  const Vec lo = Vec::Constant(state_dim, -r2), hi = Vec::Constant(state_dim, r2);
  std::vector<Vec> initial, cloud;
  for (const Vec& x0 : box_grid(lo, hi, points_per_dim)) {
    if (!Dz.contains(encoder(x0))) continue;
    initial.push_back(x0);
    Vec x = x0;
    cloud.push_back(x);
    for (int t = 0; t < horizon; ++t) {
      x = f_cl(x);
      if (!x.allFinite()) throw NumericDomainError("estimate_Dx: closed-loop rollout diverged");
      cloud.push_back(x);
    }
  }
  if (initial.empty()) throw DegenerateDomainError("estimate_Dx: X_0 is empty");
  return {PointCloudDomain(std::move(cloud), eps), std::move(initial), horizon};
}

/// Fraction of random draws from D_x whose T'-step rollouts stay in D_x.
inline double dx_invariance_fraction(const PointCloudDomain& Dx, const Map& f_cl, int horizon,
                                     int samples, Rng& rng) {
  if (samples <= 0) throw ConfigError("dx_invariance_fraction: samples must be positive");
  int kept = 0;
  for (int s = 0; s < samples; ++s) {
    Vec x = Dx.sample(rng);
    bool inside = true;
    for (int t = 0; t < horizon && inside; ++t) {
      x = f_cl(x);
      inside = x.allFinite() && Dx.contains(x);
    }
    if (inside) ++kept;
  }
  return static_cast<double>(kept) / samples;
}

}  // namespace lcert
