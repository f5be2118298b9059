#include "kendama/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace kendama::config {

namespace {

using nlohmann::json;

void allow_only(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <int N>
void read_vec(const json& j, const char* key, Eigen::Matrix<double, N, 1>& out, const std::string& where) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  read(j, key, v, where);
  if (v.size() != static_cast<std::size_t>(N)) {
    throw ConfigError(where + "." + key + ": expected " + std::to_string(N) + " entries");
  }
  for (int i = 0; i < N; ++i) out(i) = v[static_cast<std::size_t>(i)];
}

template <int N>
json vec_json(const Eigen::Matrix<double, N, 1>& v) {
  return std::vector<double>(v.data(), v.data() + N);
}

sets::ConvexSet read_set(const json& j, const char* key, const std::string& where) {
  try {
    return sets::convex_set_from_json(j.at(key));
  } catch (const std::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

sets::Box read_box(const json& j, const char* key, const std::string& where) {
  const sets::ConvexSet s = read_set(j, key, where);
  if (!std::holds_alternative<sets::Box>(s)) throw ConfigError(where + "." + key + ": expected a box");
  return std::get<sets::Box>(s);
}

void parse_physical(const json& j, dynamics::PhysicalParams& p) {
  const std::string w = "physical";
  allow_only(j, {"cup_mass", "ball_mass", "length", "gravity"}, w);
  read(j, "cup_mass", p.cup_mass, w);
  read(j, "ball_mass", p.ball_mass, w);
  read(j, "length", p.length, w);
  read(j, "gravity", p.gravity, w);
}

void parse_swingup(const json& j, swingup::SwingupProblem& s) {
  const std::string w = "swingup";
  allow_only(j, {"N", "Ts", "Q_diag", "R_diag", "x_lo", "x_hi", "F_lo", "F_hi", "x_init", "x_f"}, w);
  read(j, "N", s.N, w);
  read(j, "Ts", s.Ts, w);
  if (j.contains("Q_diag")) {
    dynamics::Vector6d q;
    read_vec(j, "Q_diag", q, w);
    s.Q = q.asDiagonal();
  }
  if (j.contains("R_diag")) {
    Eigen::Vector3d r;
    read_vec(j, "R_diag", r, w);
    s.R = r.asDiagonal();
  }
  read_vec(j, "x_lo", s.x_lo, w);
  read_vec(j, "x_hi", s.x_hi, w);
  read_vec(j, "F_lo", s.F_lo, w);
  read_vec(j, "F_hi", s.F_hi, w);
  if (j.contains("x_init")) {
    dynamics::Vector6d x = s.x_init.stacked();
    read_vec(j, "x_init", x, w);
    s.x_init = dynamics::GeneralizedState::from(x);
  }
  if (j.contains("x_f")) {
    dynamics::Vector6d x = s.x_f.stacked();
    read_vec(j, "x_f", x, w);
    s.x_f = dynamics::GeneralizedState::from(x);
  }
}

void parse_solver(const json& j, swingup::SolverOptions& o) {
  const std::string w = "solver";
  allow_only(j, {"tol", "term_tol", "bound_tol", "max_outer", "max_inner", "rho_init", "rho_growth", "rho_max"}, w);
  read(j, "tol", o.tol, w);
  read(j, "term_tol", o.term_tol, w);
  read(j, "bound_tol", o.bound_tol, w);
  read(j, "max_outer", o.max_outer, w);
  read(j, "max_inner", o.max_inner, w);
  read(j, "rho_init", o.rho_init, w);
  read(j, "rho_growth", o.rho_growth, w);
  read(j, "rho_max", o.rho_max, w);
}

void parse_perturbation(const json& j, swingup::PerturbationSpec& p) {
  const std::string w = "perturbation";
  allow_only(j, {"mass_rel", "length_rel", "force_std", "sim_dt"}, w);
  read(j, "mass_rel", p.mass_rel, w);
  read(j, "length_rel", p.length_rel, w);
  read(j, "force_std", p.force_std, w);
  read(j, "sim_dt", p.sim_dt, w);
}

void parse_controller(const json& j, RunConfig& c) {
  const std::string w = "controller";
  allow_only(j, {"T", "dt", "observer_pole", "feedback_pole", "E", "U", "W", "Vhat", "q_e", "r_u", "rpi_tol"}, w);
  auto& k = c.controller;
  read(j, "T", k.T, w);
  read(j, "dt", k.dt, w);
  read(j, "observer_pole", c.observer_pole, w);
  read(j, "feedback_pole", c.feedback_pole, w);
  if (j.contains("E")) k.E = read_box(j, "E", w);
  if (j.contains("U")) k.U = sets::to_hpolytope(read_set(j, "U", w));
  if (j.contains("W")) k.W = read_set(j, "W", w);
  if (j.contains("Vhat")) k.Vhat = read_box(j, "Vhat", w);
  read(j, "q_e", k.q_e, w);
  read(j, "r_u", k.r_u, w);
  read(j, "rpi_tol", k.rpi_tol, w);
}

void parse_experiment(const json& j, harness::ExperimentConfig& e) {
  const std::string w = "experiment";
  allow_only(j,
             {"n_schedule", "rollouts_per_n", "epsilon", "epsilon_growth", "epsilon_max", "seed", "W_m", "E_tr",
              "cup_radius", "ball_radius", "center_radius", "max_impact_vz", "threads", "paired_rollouts"},
             w);
  read(j, "n_schedule", e.n_schedule, w);
  read(j, "rollouts_per_n", e.rollouts_per_n, w);
  read(j, "epsilon", e.epsilon, w);
  read(j, "epsilon_growth", e.epsilon_growth, w);
  read(j, "epsilon_max", e.epsilon_max, w);
  read(j, "seed", e.seed, w);
  if (j.contains("W_m")) e.W_m = read_box(j, "W_m", w);
  if (j.contains("E_tr")) e.E_tr = read_box(j, "E_tr", w);
  read(j, "cup_radius", e.cup_radius, w);
  read(j, "ball_radius", e.ball_radius, w);
  read(j, "center_radius", e.center_radius, w);
  read(j, "max_impact_vz", e.max_impact_vz, w);
  read(j, "threads", e.threads, w);
  read(j, "paired_rollouts", e.paired_rollouts, w);
}

}  // namespace

void RunConfig::validate() const {
  try {
    if (schema_version != kSchemaVersion) {
      throw std::invalid_argument("unsupported schema_version " + std::to_string(schema_version));
    }
    if (output_dir.empty()) throw std::invalid_argument("output_dir must not be empty");
    physical.validate();
    try {
      swingup.validate();
    } catch (const swingup::InfeasibleBounds&) {
      // Left to the planner, which reports it as non-convergence.
    }
    const auto& p = perturbation;
    if (!(p.mass_rel >= 0.0 && p.length_rel >= 0.0 && p.force_std >= 0.0 && p.sim_dt > 0.0)) {
      throw std::invalid_argument("perturbation spreads must be non-negative and sim_dt positive");
    }
    if (!(observer_pole >= 0.0 && observer_pole < 1.0) || !(feedback_pole >= 0.0 && feedback_pole < 1.0)) {
      throw std::invalid_argument("observer_pole and feedback_pole must lie in [0, 1)");
    }
    controller.validate();
    experiment.validate();
    if (!sets::is_subset(experiment.W_m, controller.W)) throw std::invalid_argument("experiment.W_m must lie inside controller.W");
    if (calibration.n < 8) throw std::invalid_argument("calibration.n must be at least 8");
    if (rollout.count < 1) throw std::invalid_argument("rollout.count must be at least 1");
    if (e0.source != "uniform" && e0.source != "swingup") throw std::invalid_argument("e0.source must be 'uniform' or 'swingup'");
    if (e0.swingup_rollouts < 1) throw std::invalid_argument("e0.swingup_rollouts must be at least 1");
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
}

RunConfig from_json(const json& j) {
  allow_only(j,
             {"schema_version", "output_dir", "physical", "swingup", "solver", "perturbation", "noise", "controller",
              "experiment", "calibration", "rollout", "e0"},
             "config");
  if (!j.contains("schema_version")) throw ConfigError("config: schema_version is required");
  RunConfig c;
  read(j, "schema_version", c.schema_version, "config");
  read(j, "output_dir", c.output_dir, "config");
  if (j.contains("physical")) parse_physical(j["physical"], c.physical);
  if (j.contains("swingup")) parse_swingup(j["swingup"], c.swingup);
  if (j.contains("solver")) parse_solver(j["solver"], c.solver);
  if (j.contains("perturbation")) parse_perturbation(j["perturbation"], c.perturbation);
  if (j.contains("noise")) {
    allow_only(j["noise"], {"mu", "sigma"}, "noise");
    try {
      c.experiment.truth = noise::noise_model_from_json(j["noise"]);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("noise: ") + e.what());
    }
  }
  if (j.contains("controller")) parse_controller(j["controller"], c);
  c.controller.L = controller::observer_gain(c.observer_pole);
  c.controller.K = controller::feedback_gain(c.feedback_pole, c.controller.dt);
  if (j.contains("experiment")) parse_experiment(j["experiment"], c.experiment);
  if (j.contains("calibration")) {
    const auto& s = j["calibration"];
    allow_only(s, {"n", "samples_path"}, "calibration");
    read(s, "n", c.calibration.n, "calibration");
    read(s, "samples_path", c.calibration.samples_path, "calibration");
  }
  if (j.contains("rollout")) {
    const auto& s = j["rollout"];
    allow_only(s, {"count", "traces", "support_path"}, "rollout");
    read(s, "count", c.rollout.count, "rollout");
    read(s, "traces", c.rollout.traces, "rollout");
    read(s, "support_path", c.rollout.support_path, "rollout");
  }
  if (j.contains("e0")) {
    const auto& s = j["e0"];
    allow_only(s, {"source", "swingup_rollouts"}, "e0");
    read(s, "source", c.e0.source, "e0");
    read(s, "swingup_rollouts", c.e0.swingup_rollouts, "e0");
  }
  c.validate();
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["output_dir"] = c.output_dir;
  j["physical"] = {{"cup_mass", c.physical.cup_mass},
                   {"ball_mass", c.physical.ball_mass},
                   {"length", c.physical.length},
                   {"gravity", c.physical.gravity}};
  const auto& s = c.swingup;
  j["swingup"] = {{"N", s.N},
                  {"Ts", s.Ts},
                  {"Q_diag", vec_json<6>(s.Q.diagonal())},
                  {"R_diag", vec_json<3>(s.R.diagonal())},
                  {"x_lo", vec_json<6>(s.x_lo)},
                  {"x_hi", vec_json<6>(s.x_hi)},
                  {"F_lo", vec_json<3>(s.F_lo)},
                  {"F_hi", vec_json<3>(s.F_hi)},
                  {"x_init", vec_json<6>(s.x_init.stacked())},
                  {"x_f", vec_json<6>(s.x_f.stacked())}};
  const auto& o = c.solver;
  j["solver"] = {{"tol", o.tol},           {"term_tol", o.term_tol},     {"bound_tol", o.bound_tol},
                 {"max_outer", o.max_outer}, {"max_inner", o.max_inner},   {"rho_init", o.rho_init},
                 {"rho_growth", o.rho_growth}, {"rho_max", o.rho_max}};
  const auto& p = c.perturbation;
  j["perturbation"] = {
      {"mass_rel", p.mass_rel}, {"length_rel", p.length_rel}, {"force_std", p.force_std}, {"sim_dt", p.sim_dt}};
  j["noise"] = noise::to_json(c.experiment.truth);
  const auto& k = c.controller;
  j["controller"] = {{"T", k.T},
                     {"dt", k.dt},
                     {"observer_pole", c.observer_pole},
                     {"feedback_pole", c.feedback_pole},
                     {"E", sets::to_json(k.E)},
                     {"U", sets::to_json(k.U)},
                     {"W", sets::to_json(k.W)},
                     {"Vhat", sets::to_json(k.Vhat)},
                     {"q_e", k.q_e},
                     {"r_u", k.r_u},
                     {"rpi_tol", k.rpi_tol}};
  const auto& e = c.experiment;
  j["experiment"] = {{"n_schedule", e.n_schedule},
                     {"rollouts_per_n", e.rollouts_per_n},
                     {"epsilon", e.epsilon},
                     {"epsilon_growth", e.epsilon_growth},
                     {"epsilon_max", e.epsilon_max},
                     {"seed", e.seed},
                     {"W_m", sets::to_json(e.W_m)},
                     {"E_tr", sets::to_json(e.E_tr)},
                     {"cup_radius", e.cup_radius},
                     {"ball_radius", e.ball_radius},
                     {"center_radius", e.center_radius},
                     {"max_impact_vz", e.max_impact_vz},
                     {"threads", e.threads},
                     {"paired_rollouts", e.paired_rollouts}};
  j["calibration"] = {{"n", c.calibration.n}, {"samples_path", c.calibration.samples_path}};
  j["rollout"] = {{"count", c.rollout.count}, {"traces", c.rollout.traces}, {"support_path", c.rollout.support_path}};
  j["e0"] = {{"source", c.e0.source}, {"swingup_rollouts", c.e0.swingup_rollouts}};
  return j;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace kendama::config
