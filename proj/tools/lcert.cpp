#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lcert/pipeline/cartpole_pipeline.hpp"
#include "lcert/pipeline/omni_demo.hpp"

namespace fs = std::filesystem;
using namespace lcert;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Options& o) {
  Json j = o.config.empty() ? Json::object() : read_json_file(o.config);
  if (o.seed) j["seed"] = *o.seed;
  RunConfig cfg = config_from_json(j);
  if (!o.out.empty()) cfg.output_dir = o.out;
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + cfg.output_dir + "'");
  return cfg;
}

std::string path(const RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void log(const std::string& msg) { std::cerr << "lcert: " << msg << '\n'; }

int cmd_collect(const RunConfig& cfg) {
  CartpoleDatasets d;
  try {
    d = collect_cartpole(cfg);
  } catch (const CollectionError& e) {
    throw CollectionError(std::string("collect: ") + e.what());
  }
  write_json_file(path(cfg, "dataset_rand.json"), dataset_to_json(d.rand));
  write_json_file(path(cfg, "dataset_drift.json"), dataset_to_json(d.drift));
  log("D_rand: " + std::to_string(d.rand.size()) + " trajectories, " +
      std::to_string(d.rand.state_count()) + " states");
  log("D_drift: " + std::to_string(d.drift.size()) + " pairs");
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  CartpoleDatasets d{dataset_from_json(read_json_file(path(cfg, "dataset_rand.json"))),
                     dataset_from_json(read_json_file(path(cfg, "dataset_drift.json")))};
  const CartpoleModels m = train_cartpole(cfg, d);
  write_json_file(path(cfg, "latent_model.json"), latent_model_to_json(m.model, m.lqr.z_eq));
  write_json_file(path(cfg, "lqr.json"), lqr_to_json(m.lqr));
  write_json_file(path(cfg, "lyapunov.json"), lyapunov_to_json(m.V));
  write_text_file(path(cfg, "latent_loss.csv"), latent_curve_csv(m.latent_curve));
  write_text_file(path(cfg, "lyapunov_loss.csv"), lyapunov_curve_csv(m.lyapunov_curve));
  log("latent loss " + fmt(m.latent_curve.front().total) + " -> " +
      fmt(m.latent_curve.back().total));
  log("LQR closed-loop spectral radius " + fmt(m.lqr.closed_loop_radius));
  log("V satisfied fraction on training transitions " + fmt(m.lyapunov_satisfied));
  return 0;
}

CartpoleModels load_models(const RunConfig& cfg) {
  CartpoleModels m;
  m.model = latent_model_from_json(read_json_file(path(cfg, "latent_model.json")));
  m.lqr = lqr_from_json(read_json_file(path(cfg, "lqr.json")));
  m.V = lyapunov_from_json(read_json_file(path(cfg, "lyapunov.json")));
  return m;
}

int cmd_certify(const RunConfig& cfg) {
  const CartpoleCertificate c = certify_cartpole(cfg, load_models(cfg));
  write_json_file(path(cfg, "certificate.json"), c.report);
  write_text_file(path(cfg, "trajectories.csv"), c.trajectories_csv);
  write_text_file(path(cfg, "slice_theta_thetadot.csv"), c.slice_theta_csv);
  write_text_file(path(cfg, "slice_x_theta.csv"), c.slice_x_theta_csv);
  write_text_file(path(cfg, "zero_set.csv"), c.zero_set_csv);
  write_text_file(path(cfg, "dz_hull.csv"), c.dz_hull_csv);
  log("L " + fmt(c.L) + ", gamma " + fmt(c.gamma) + ", alpha0 " + fmt(c.alpha0) +
      ", L*gamma/(1-rho) " + fmt(c.threshold));
  log("D_z grid satisfied fraction " + fmt(c.dz_satisfied));
  return 0;
}

int cmd_omni(const RunConfig& cfg) {
  const OmniRun run = simulate_omni(cfg.omni);
  write_text_file(path(cfg, "omni_trajectory.csv"), omni_csv(run));
  write_json_file(path(cfg, "omni_report.json"), omni_report(run, cfg.omni));
  for (const auto& e : run.events) log(e);
  log("min inter-vehicle distance " + fmt(run.min_distance));
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  Json summary = Json::object();
  for (const char* name : {"certificate.json", "omni_report.json"}) {
    const std::string p = path(cfg, name);
    if (fs::exists(p)) summary[fs::path(name).stem().string()] = read_json_file(p);
  }
  if (summary.empty()) throw ConfigError("report: no certificate.json or omni_report.json in '" +
                                         cfg.output_dir + "'");
  Json brief = Json::object();
  if (summary.contains("certificate")) {
    const Json& c = summary["certificate"];
    brief["cartpole"] = Json{{"L", c["lipschitz"]["L"]},
                             {"gamma", c["conjugacy"]["gamma"]},
                             {"rho", c["transfer"]["rate"]},
                             {"alpha0", c["alpha0"]["alpha0"]},
                             {"threshold", c["transfer"]["threshold"]},
                             {"vacuous", c["transfer"]["vacuous"]},
                             {"D_z_satisfied_fraction", c["certificate"]["satisfied_fraction"]}};
  }
  if (summary.contains("omni_report")) {
    const Json& o = summary["omni_report"];
    brief["omni"] = Json{{"min_distance", o["min_distance"]},
                         {"stayed_in_Sx", o["stayed_in_Sx"]},
                         {"infeasible_steps", o["infeasible_steps"]}};
  }
  write_json_file(path(cfg, "summary.json"), brief);
  std::cout << brief.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space Lyapunov and barrier certification"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  auto add = [&](const char* name, const char* help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", opt.out, "output directory");
    return sub;
  };
  CLI::App* collect = add("collect", "collect D_rand and D_drift");
  CLI::App* train = add("train", "train the latent model, LQR and V");
  CLI::App* certify = add("certify", "estimate domains and constants, check the certificate");
  CLI::App* omni = add("simulate-omni", "simulate the two-vehicle CBF-QP experiment");
  CLI::App* report = add("report", "summarize the reports in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  for (CLI::App* sub : app.get_subcommands())
    if (sub->count("--seed") > 0) opt.seed = seed;

  try {
    const RunConfig cfg = resolve(opt);
    if (collect->parsed()) return cmd_collect(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (certify->parsed()) return cmd_certify(cfg);
    if (omni->parsed()) return cmd_omni(cfg);
    if (report->parsed()) return cmd_report(cfg);
  } catch (const ConfigError& e) {
    log(std::string("config error: ") + e.what());
    return kExitConfig;
  } catch (const Error& e) {
    log(e.what());
    return kExitNumeric;
  } catch (const Json::exception& e) {
    log(std::string("malformed JSON: ") + e.what());
    return kExitConfig;
  }
  return 0;
}
