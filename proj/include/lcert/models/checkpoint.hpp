#pragma once

#include <string>

#include "lcert/io/json_io.hpp"
#include "lcert/models/latent_model.hpp"

namespace lcert {

inline Json mlp_to_json(const Mlp& m) {
  Json layers = Json::array();
  for (const auto& l : m.layers()) {
    Json jl;
    jl["in"] = l.in_dim();
    jl["out"] = l.out_dim();
    jl["activation"] = to_string(l.activation);
    jl["weight"] = to_json(l.weight);
    jl["bias"] = l.has_bias() ? to_json(l.bias) : Json(nullptr);
    layers.push_back(std::move(jl));
  }
  return Json{{"layers", layers}};
}

inline Mlp mlp_from_json(const Json& j) {
  std::vector<DenseLayer> layers;
  for (const auto& jl : j.at("layers")) {
    DenseLayer l;
    l.weight = mat_from_json(jl.at("weight"));
    if (!jl.at("bias").is_null()) l.bias = vec_from_json(jl.at("bias"));
    l.activation = activation_from_string(jl.at("activation").get<std::string>());
    if (l.weight.rows() != jl.at("out").get<Eigen::Index>() ||
        l.weight.cols() != jl.at("in").get<Eigen::Index>())
      throw ConfigError("checkpoint: layer shape disagrees with recorded dims");
    layers.push_back(std::move(l));
  }
  return Mlp(std::move(layers));
}

inline Json latent_model_to_json(const LatentModel& m, const Vec& z_eq) {
  return Json{{"n_x", m.state_dim()},
              {"n_z", m.latent_dim()},
              {"n_u", m.input_dim()},
              {"z_eq", to_json(z_eq)},
              {"reshape", "row-major"},
              {"encoder", mlp_to_json(m.encoder)},
              {"decoder", mlp_to_json(m.decoder)},
              {"a_net", mlp_to_json(m.a_net)},
              {"b_net", mlp_to_json(m.b_net)}};
}

inline LatentModel latent_model_from_json(const Json& j) {
  LatentModel m{mlp_from_json(j.at("encoder")), mlp_from_json(j.at("decoder")),
                mlp_from_json(j.at("a_net")), mlp_from_json(j.at("b_net"))};
  m.validate();
  if (m.latent_dim() != j.at("n_z").get<int>())
    throw ConfigError("checkpoint: n_z disagrees with encoder");
  return m;
}

inline Json lyapunov_to_json(const LyapunovNet& v) {
  return Json{{"n_z", v.z_eq.size()},
              {"z_eq", to_json(v.z_eq)},
              {"quad_weight", v.quad_weight},
              {"F", mlp_to_json(v.net)}};
}

inline LyapunovNet lyapunov_from_json(const Json& j) {
  return {mlp_from_json(j.at("F")), vec_from_json(j.at("z_eq")),
          j.at("quad_weight").get<double>()};
}

}  // namespace lcert
