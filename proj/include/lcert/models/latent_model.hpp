#pragma once

#include <vector>

#include "lcert/models/mlp.hpp"

namespace lcert {

struct LatentArch {
  int state_dim = 4;
  int latent_dim = 2;
  int input_dim = 1;
  std::vector<int> encoder_hidden{64};
  std::vector<int> decoder_hidden{64};
  std::vector<int> dynamics_hidden{64};
};

/// Encoder, decoder and input-affine latent dynamics
/// z+ = A(z) z + B(z) u, where A(z) and B(z) are network outputs reshaped
/// row-major into n_z x n_z and n_z x n_u.
struct LatentModel {
  Mlp encoder;
  Mlp decoder;
  Mlp a_net;
  Mlp b_net;

  int state_dim() const { return static_cast<int>(encoder.input_dim()); }
  int latent_dim() const { return static_cast<int>(encoder.output_dim()); }
  int input_dim() const {
    return static_cast<int>(b_net.output_dim() / b_net.input_dim());
  }

  static LatentModel make(const LatentArch& arch, Rng& rng) {
    if (arch.latent_dim > arch.state_dim)
      throw ConfigError("LatentModel: latent_dim must not exceed state_dim");
    auto dims = [](int in, const std::vector<int>& hidden, int out) {
      std::vector<int> d{in};
      d.insert(d.end(), hidden.begin(), hidden.end());
      d.push_back(out);
      return d;
    };
    const int nz = arch.latent_dim;
    LatentModel m;
    m.encoder = Mlp::make(dims(arch.state_dim, arch.encoder_hidden, nz),
                          Activation::kTanh, Activation::kLinear, true, rng);
    m.decoder = Mlp::make(dims(nz, arch.decoder_hidden, arch.state_dim),
                          Activation::kTanh, Activation::kLinear, true, rng);
    m.a_net = Mlp::make(dims(nz, arch.dynamics_hidden, nz * nz),
                        Activation::kTanh, Activation::kLinear, true, rng);
    m.b_net = Mlp::make(dims(nz, arch.dynamics_hidden, nz * arch.input_dim),
                        Activation::kTanh, Activation::kLinear, true, rng);
    m.validate();
    return m;
  }

  void validate() const {
    const auto nz = encoder.output_dim();
    if (decoder.input_dim() != nz || decoder.output_dim() != encoder.input_dim() ||
        a_net.input_dim() != nz || a_net.output_dim() != nz * nz ||
        b_net.input_dim() != nz || b_net.output_dim() % nz != 0)
      throw ContractError("LatentModel: inconsistent network dimensions");
    if (nz > encoder.input_dim())
      throw ContractError("LatentModel: latent_dim exceeds state_dim");
  }

  Vec encode(const Vec& x) const { return encoder.forward(x); }
  Vec decode(const Vec& z) const { return decoder.forward(z); }
  Mat encoder_jacobian(const Vec& x) const { return encoder.jacobian(x); }

  Mat drift_matrix(const Vec& z) const {
    const Vec flat = a_net.forward(z);
    const int nz = latent_dim();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(flat.data(), nz, nz);
  }

  Mat input_matrix(const Vec& z) const {
    const Vec flat = b_net.forward(z);
    const int nz = latent_dim(), nu = input_dim();
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(flat.data(), nz, nu);
  }

  Vec step(const Vec& z, const Vec& u) const {
    return drift_matrix(z) * z + input_matrix(z) * u;
  }

  std::size_t parameter_count() const {
    return encoder.parameter_count() + decoder.parameter_count() +
           a_net.parameter_count() + b_net.parameter_count();
  }

  Vec pack() const {
    Vec out(static_cast<Eigen::Index>(parameter_count()));
    double* p = out.data();
    for (const Mlp* m : {&encoder, &decoder, &a_net, &b_net}) {
      m->pack(p);
      p += m->parameter_count();
    }
    return out;
  }

  void unpack(const Vec& flat) {
    if (flat.size() != static_cast<Eigen::Index>(parameter_count()))
      throw ContractError("LatentModel::unpack: size mismatch");
    const double* p = flat.data();
    for (Mlp* m : {&encoder, &decoder, &a_net, &b_net}) {
      m->unpack(p);
      p += m->parameter_count();
    }
  }
};

/// Batch form of LatentModel::step with the tapes needed for reverse mode.
struct LatentStepTape {
  Mat z;
  Mat u;
  Mat a_out;
  Mat b_out;
  MlpTape a_tape;
  MlpTape b_tape;
};

inline Mat latent_step_batch(const LatentModel& m, const Mat& Z, const Mat& U,
                             LatentStepTape* tape) {
  const int nz = m.latent_dim(), nu = m.input_dim();
  Mat a_out, b_out;
  if (tape) {
    a_out = m.a_net.forward(Z, tape->a_tape);
    b_out = m.b_net.forward(Z, tape->b_tape);
  } else {
    a_out = m.a_net.forward(Z);
    b_out = m.b_net.forward(Z);
  }
  Mat next = Mat::Zero(nz, Z.cols());
  for (int r = 0; r < nz; ++r) {
    for (int c = 0; c < nz; ++c)
      next.row(r).array() += a_out.row(r * nz + c).array() * Z.row(c).array();
    for (int c = 0; c < nu; ++c)
      next.row(r).array() += b_out.row(r * nu + c).array() * U.row(c).array();
  }
  if (tape) {
    tape->z = Z;
    tape->u = U;
    tape->a_out = std::move(a_out);
    tape->b_out = std::move(b_out);
  }
  return next;
}

/// Reverse pass of latent_step_batch; returns d/dZ and accumulates the
/// parameter gradients of the two dynamics networks.
inline Mat latent_step_backward(const LatentModel& m, const LatentStepTape& tape,
                                const Mat& upstream, MlpGrad& a_grad,
                                MlpGrad& b_grad) {
  const int nz = m.latent_dim(), nu = m.input_dim();
  Mat d_a(nz * nz, upstream.cols()), d_b(nz * nu, upstream.cols());
  Mat dz = Mat::Zero(nz, upstream.cols());
  for (int r = 0; r < nz; ++r) {
    for (int c = 0; c < nz; ++c) {
      d_a.row(r * nz + c) = upstream.row(r).cwiseProduct(tape.z.row(c));
      dz.row(c).array() += upstream.row(r).array() * tape.a_out.row(r * nz + c).array();
    }
    for (int c = 0; c < nu; ++c)
      d_b.row(r * nu + c) = upstream.row(r).cwiseProduct(tape.u.row(c));
  }
  dz += m.a_net.backward(tape.a_tape, d_a, a_grad);
  dz += m.b_net.backward(tape.b_tape, d_b, b_grad);
  return dz;
}

/// z_1, f(z_1, u_1), f(f(z_1, u_1), u_2), ...; returns |inputs| + 1 states.
inline std::vector<Vec> rollout_latent(const LatentModel& m, const Vec& z1,
                                       const std::vector<Vec>& inputs) {
  std::vector<Vec> out{z1};
  out.reserve(inputs.size() + 1);
  for (const auto& u : inputs) out.push_back(m.step(out.back(), u));
  return out;
}

/// V(z) = F(z - z_eq)^2 + w |z - z_eq|^2 with a bias-free network F, so
/// V(z_eq) = 0 and V(z) >= w |z - z_eq|^2.
struct LyapunovNet {
  Mlp net;
  Vec z_eq;
  double quad_weight = 0.1;

  static LyapunovNet make(int latent_dim, const Vec& z_eq, Rng& rng,
                          std::vector<int> hidden = {256, 256},
                          double quad_weight = 0.1) {
    std::vector<int> dims{latent_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(1);
    return {Mlp::make(dims, Activation::kTanh, Activation::kLinear, false, rng), z_eq,
            quad_weight};
  }

  double value(const Vec& z) const {
    const Vec d = z - z_eq;
    const double f = net.forward(d)[0];
    return f * f + quad_weight * d.squaredNorm();
  }

  Vec gradient(const Vec& z) const {
    const Vec d = z - z_eq;
    MlpTape tape;
    const double f = net.forward(Mat(d), tape)(0, 0);
    Mat up(1, 1);
    up(0, 0) = 2.0 * f;
    return net.backward_input(tape, up).col(0) + 2.0 * quad_weight * d;
  }

  /// Gradients of V at the columns of Z.
  Mat gradients(const Mat& Z) const {
    const Mat D = Z.colwise() - z_eq;
    MlpTape tape;
    const Mat F = net.forward(D, tape);
    return net.backward_input(tape, 2.0 * F) + 2.0 * quad_weight * D;
  }

  /// Row vector of V over the columns of Z.
  Eigen::RowVectorXd values(const Mat& Z) const {
    const Mat D = Z.colwise() - z_eq;
    const Eigen::RowVectorXd f = net.forward(D).row(0);
    return f.array().square() + quad_weight * D.colwise().squaredNorm().array();
  }
};

}  // namespace lcert
