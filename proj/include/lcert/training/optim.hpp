#pragma once

#include <cmath>
#include <string>

#include "lcert/core/linalg.hpp"

namespace lcert {

enum class OptimizerKind { kSgd, kMomentum, kAdam };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::kSgd;
  if (s == "momentum") return OptimizerKind::kMomentum;
  if (s == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

/// First-order optimizer over a flat parameter vector.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, Eigen::Index size)
      : kind_(kind), lr_(lr), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {
    if (!(lr > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
  }

  void step(Vec& params, const Vec& grad) {
    switch (kind_) {
      case OptimizerKind::kSgd:
        params -= lr_ * grad;
        break;
      case OptimizerKind::kMomentum:
        m_ = momentum_ * m_ + grad;
        params -= lr_ * m_;
        break;
      case OptimizerKind::kAdam: {
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
        v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, t_);
        const double c2 = 1.0 - std::pow(beta2_, t_);
        params.array() -=
            lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
        break;
      }
    }
  }

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_ = 0.9;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  int t_ = 0;
  Vec m_, v_;
};

}  // namespace lcert
