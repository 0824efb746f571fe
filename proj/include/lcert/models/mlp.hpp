#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lcert/core/linalg.hpp"
#include "lcert/core/random.hpp"

namespace lcert {

enum class Activation { kTanh, kLinear };

/// Elementwise tanh as (e - 1) / (e + 1), e = exp(2x). Eigen 3.4 only
/// vectorizes tanh for float; this keeps double batches on the packet path.
template <class Derived>
Mat tanh_of(const Eigen::ArrayBase<Derived>& x) {
  const Eigen::ArrayXXd e = (2.0 * x.min(20.0).max(-20.0)).exp();
  return ((e - 1.0) / (e + 1.0)).matrix();
}

inline std::string to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "linear";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "linear") return Activation::kLinear;
  throw ConfigError("unknown activation '" + s + "'");
}

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // empty when the layer is bias-free
  Activation activation = Activation::kLinear;

  bool has_bias() const { return bias.size() > 0; }
  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

/// Parameter gradients laid out like the layers of an Mlp.
struct MlpGrad {
  std::vector<Mat> weight;
  std::vector<Vec> bias;

  void set_zero() {
    for (auto& w : weight) w.setZero();
    for (auto& b : bias) b.setZero();
  }
};

/// Per-call activations retained for the backward pass.
struct MlpTape {
  std::vector<Mat> inputs;   // input to each layer
  std::vector<Mat> outputs;  // post-activation output of each layer
};

/// Dense feed-forward network evaluated column-wise: each column of a batch
/// is an independent sample.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
    check_chain();
  }

  /// dims = {in, hidden..., out}. Hidden layers use `hidden`, the last layer
  /// uses `output`. Weights and biases are drawn from
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static Mlp make(const std::vector<int>& dims, Activation hidden,
                  Activation output, bool with_bias, Rng& rng) {
    if (dims.size() < 2) throw ConfigError("Mlp::make: need at least 2 dims");
    std::vector<DenseLayer> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      DenseLayer layer;
      const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
      layer.weight.resize(dims[i + 1], dims[i]);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
          layer.weight(r, c) = rng.uniform(-bound, bound);
      if (with_bias) {
        layer.bias.resize(dims[i + 1]);
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r)
          layer.bias[r] = rng.uniform(-bound, bound);
      }
      layer.activation = (i + 2 == dims.size()) ? output : hidden;
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  Eigen::Index input_dim() const { return layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.back().out_dim(); }

  Mat forward(const Mat& X) const {
    check_input(X.rows());
    Mat h = X;
    for (const auto& layer : layers_) h = apply(layer, h);
    return h;
  }

  Vec forward(const Vec& x) const { return forward(Mat(x)).col(0); }

  Mat forward(const Mat& X, MlpTape& tape) const {
    check_input(X.rows());
    tape.inputs.clear();
    tape.outputs.clear();
    Mat h = X;
    for (const auto& layer : layers_) {
      tape.inputs.push_back(h);
      h = apply(layer, h);
      tape.outputs.push_back(h);
    }
    return h;
  }

  MlpGrad zero_grad() const {
    MlpGrad g;
    for (const auto& layer : layers_) {
      g.weight.push_back(Mat::Zero(layer.weight.rows(), layer.weight.cols()));
      g.bias.push_back(Vec::Zero(layer.bias.size()));
    }
    return g;
  }

  /// Reverse pass for sum_j upstream_j^T y_j. Parameter gradients are added
  /// into `grad`; the input gradient is returned.
  Mat backward(const MlpTape& tape, const Mat& upstream, MlpGrad& grad) const {
    Mat delta = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& layer = layers_[i];
      if (layer.activation == Activation::kTanh)
        delta.array() *= 1.0 - tape.outputs[i].array().square();
      grad.weight[i].noalias() += delta * tape.inputs[i].transpose();
      if (layer.has_bias()) grad.bias[i] += delta.rowwise().sum();
      delta = layer.weight.transpose() * delta;
    }
    return delta;
  }

  /// Input gradient only; parameter gradients are skipped.
  Mat backward_input(const MlpTape& tape, const Mat& upstream) const {
    Mat delta = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (layers_[i].activation == Activation::kTanh)
        delta.array() *= 1.0 - tape.outputs[i].array().square();
      delta = layers_[i].weight.transpose() * delta;
    }
    return delta;
  }

  /// Exact Jacobian dy/dx at a single point.
  Mat jacobian(const Vec& x) const {
    check_input(x.size());
    Mat J = Mat::Identity(x.size(), x.size());
    Vec h = x;
    for (const auto& layer : layers_) {
      Vec pre = layer.weight * h;
      if (layer.has_bias()) pre += layer.bias;
      J = layer.weight * J;
      if (layer.activation == Activation::kTanh) {
        h = tanh_of(pre.array());
        J = (1.0 - h.array().square()).matrix().asDiagonal() * J;
      } else {
        h = pre;
      }
    }
    return J;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
      n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  /// Flat parameter order: per layer, weight (column-major) then bias.
  void pack(double* out) const {
    for (const auto& l : layers_) {
      std::copy(l.weight.data(), l.weight.data() + l.weight.size(), out);
      out += l.weight.size();
      std::copy(l.bias.data(), l.bias.data() + l.bias.size(), out);
      out += l.bias.size();
    }
  }

  void unpack(const double* in) {
    for (auto& l : layers_) {
      std::copy(in, in + l.weight.size(), l.weight.data());
      in += l.weight.size();
      std::copy(in, in + l.bias.size(), l.bias.data());
      in += l.bias.size();
    }
  }

  static void pack_grad(const MlpGrad& g, double* out) {
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
      std::copy(g.weight[i].data(), g.weight[i].data() + g.weight[i].size(), out);
      out += g.weight[i].size();
      std::copy(g.bias[i].data(), g.bias[i].data() + g.bias[i].size(), out);
      out += g.bias[i].size();
    }
  }

 private:
  static Mat apply(const DenseLayer& layer, const Mat& h) {
    Mat pre = layer.weight * h;
    if (layer.has_bias()) pre.colwise() += layer.bias;
    if (layer.activation == Activation::kTanh) pre = tanh_of(pre.array());
    return pre;
  }

  void check_input(Eigen::Index rows) const {
    if (layers_.empty()) throw ContractError("Mlp: no layers");
    if (rows != input_dim())
      throw ContractError("Mlp: input dimension " + std::to_string(rows) +
                          " does not match " + std::to_string(input_dim()));
  }

  void check_chain() const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.has_bias() && l.bias.size() != l.out_dim())
        throw ContractError("Mlp: bias size mismatch");
      if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
        throw ContractError("Mlp: layer dimensions do not chain");
    }
  }

  std::vector<DenseLayer> layers_;
};

struct MlpBackwardResult {
  MlpGrad params;
  Vec input;
};

/// Gradients of upstream^T m(v) with respect to parameters and input.
inline MlpBackwardResult mlp_backward(const Mlp& m, const Vec& v,
                                      const Vec& upstream) {
  MlpTape tape;
  m.forward(Mat(v), tape);
  MlpBackwardResult r{m.zero_grad(), Vec()};
  r.input = m.backward(tape, Mat(upstream), r.params).col(0);
  return r;
}

}  // namespace lcert
