#include "pushlab/jsonio.hpp"

namespace pushlab::sim {

void to_json(nlohmann::json& j, const SimConfig& c) {
  j = {{"dt", c.dt},
       {"restitution", c.restitution},
       {"contact_mu", c.contact_mu},
       {"penetration_tolerance", c.penetration_tolerance},
       {"baumgarte_beta", c.baumgarte_beta},
       {"solver_iterations", c.solver_iterations},
       {"velocity_deadband", c.velocity_deadband}};
}

void from_json(const nlohmann::json& j, SimConfig& c) {
  j.at("dt").get_to(c.dt);
  j.at("restitution").get_to(c.restitution);
  j.at("contact_mu").get_to(c.contact_mu);
  j.at("penetration_tolerance").get_to(c.penetration_tolerance);
  j.at("baumgarte_beta").get_to(c.baumgarte_beta);
  j.at("solver_iterations").get_to(c.solver_iterations);
  j.at("velocity_deadband").get_to(c.velocity_deadband);
}

void to_json(nlohmann::json& j, const NominalSpec& n) {
  j = {{"mu", n.mu},
       {"gravity", n.gravity},
       {"masses", n.masses},
       {"radii", n.radii},
       {"sim", n.sim}};
}

void from_json(const nlohmann::json& j, NominalSpec& n) {
  j.at("mu").get_to(n.mu);
  j.at("gravity").get_to(n.gravity);
  j.at("masses").get_to(n.masses);
  j.at("radii").get_to(n.radii);
  j.at("sim").get_to(n.sim);
}

void to_json(nlohmann::json& j, const MuField& f) {
  j = {{"x0", f.x0}, {"y0", f.y0}, {"h", f.h}, {"nx", f.nx}, {"ny", f.ny}, {"values", f.values}};
}

void from_json(const nlohmann::json& j, MuField& f) {
  j.at("x0").get_to(f.x0);
  j.at("y0").get_to(f.y0);
  j.at("h").get_to(f.h);
  j.at("nx").get_to(f.nx);
  j.at("ny").get_to(f.ny);
  j.at("values").get_to(f.values);
  require(f.nx >= 2 && f.ny >= 2 && static_cast<int>(f.values.size()) == f.nx * f.ny,
          "mu field: inconsistent grid");
}

void to_json(nlohmann::json& j, const SurfaceModel& s) {
  j = {{"mode", s.mode == SurfaceModel::Mode::kUniform ? "uniform" : "field"},
       {"mu_nominal", s.mu_nominal},
       {"gravity", s.gravity}};
  if (s.mode == SurfaceModel::Mode::kSpatialField) j["field"] = s.field;
}

void from_json(const nlohmann::json& j, SurfaceModel& s) {
  const std::string mode = j.at("mode").get<std::string>();
  require(mode == "uniform" || mode == "field", "surface: unknown mode");
  s.mode = mode == "uniform" ? SurfaceModel::Mode::kUniform : SurfaceModel::Mode::kSpatialField;
  j.at("mu_nominal").get_to(s.mu_nominal);
  j.at("gravity").get_to(s.gravity);
  if (s.mode == SurfaceModel::Mode::kSpatialField) j.at("field").get_to(s.field);
}

}  // namespace pushlab::sim

namespace pushlab::nn {

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr0", c.lr0},
       {"decay_factor", c.decay_factor},
       {"decay_every", c.decay_every},
       {"iterations", c.iterations},
       {"batch_size", c.batch_size},
       {"l2_lambda", c.l2_lambda},
       {"rollout_length", c.rollout_length},
       {"grad_clip", c.grad_clip},
       {"seed", c.seed},
       {"eval_every", c.eval_every}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("lr0").get_to(c.lr0);
  j.at("decay_factor").get_to(c.decay_factor);
  j.at("decay_every").get_to(c.decay_every);
  j.at("iterations").get_to(c.iterations);
  j.at("batch_size").get_to(c.batch_size);
  j.at("l2_lambda").get_to(c.l2_lambda);
  j.at("rollout_length").get_to(c.rollout_length);
  j.at("grad_clip").get_to(c.grad_clip);
  j.at("seed").get_to(c.seed);
  j.at("eval_every").get_to(c.eval_every);
}

}  // namespace pushlab::nn

namespace pushlab::data {

void to_json(nlohmann::json& j, const SceneSpec& s) {
  j = {{"n_disks", s.n_disks},
       {"mu_min", s.mu_min},
       {"mu_max", s.mu_max},
       {"mass_min", s.mass_min},
       {"mass_max", s.mass_max},
       {"radius_min", s.radius_min},
       {"radius_max", s.radius_max},
       {"placement_angle", s.placement_angle},
       {"pusher_angle", s.pusher_angle},
       {"push_dir_angle", s.push_dir_angle},
       {"fixed_masses", s.fixed_masses},
       {"fixed_radii", s.fixed_radii},
       {"fixed_mu", s.fixed_mu},
       {"pusher_radius", s.pusher_radius},
       {"pusher_mass", s.pusher_mass}};
}

void from_json(const nlohmann::json& j, SceneSpec& s) {
  j.at("n_disks").get_to(s.n_disks);
  j.at("mu_min").get_to(s.mu_min);
  j.at("mu_max").get_to(s.mu_max);
  j.at("mass_min").get_to(s.mass_min);
  j.at("mass_max").get_to(s.mass_max);
  j.at("radius_min").get_to(s.radius_min);
  j.at("radius_max").get_to(s.radius_max);
  j.at("placement_angle").get_to(s.placement_angle);
  j.at("pusher_angle").get_to(s.pusher_angle);
  j.at("push_dir_angle").get_to(s.push_dir_angle);
  j.at("fixed_masses").get_to(s.fixed_masses);
  j.at("fixed_radii").get_to(s.fixed_radii);
  j.at("fixed_mu").get_to(s.fixed_mu);
  j.at("pusher_radius").get_to(s.pusher_radius);
  j.at("pusher_mass").get_to(s.pusher_mass);
}

void to_json(nlohmann::json& j, const PushSpec& p) {
  j = {{"setup", p.setup == PushSpec::Setup::kDirectForce ? "direct_force" : "position_control"},
       {"duration", p.duration},
       {"target_displacement", p.target_displacement},
       {"push_speed", p.push_speed}};
}

void from_json(const nlohmann::json& j, PushSpec& p) {
  const std::string setup = j.at("setup").get<std::string>();
  require(setup == "direct_force" || setup == "position_control", "push spec: unknown setup");
  p.setup = setup == "direct_force" ? PushSpec::Setup::kDirectForce
                                    : PushSpec::Setup::kPositionControl;
  j.at("duration").get_to(p.duration);
  j.at("target_displacement").get_to(p.target_displacement);
  j.at("push_speed").get_to(p.push_speed);
}

void to_json(nlohmann::json& j, const SurrogateRealSpec& s) {
  j = {{"enabled", s.enabled},
       {"field_mean", s.field_mean},
       {"field_amplitude", s.field_amplitude},
       {"field_corr_len", s.field_corr_len},
       {"contact_mu_scale", s.contact_mu_scale},
       {"sigma_pos", s.sigma_pos},
       {"sigma_rot", s.sigma_rot}};
}

void from_json(const nlohmann::json& j, SurrogateRealSpec& s) {
  j.at("enabled").get_to(s.enabled);
  j.at("field_mean").get_to(s.field_mean);
  j.at("field_amplitude").get_to(s.field_amplitude);
  j.at("field_corr_len").get_to(s.field_corr_len);
  j.at("contact_mu_scale").get_to(s.contact_mu_scale);
  j.at("sigma_pos").get_to(s.sigma_pos);
  j.at("sigma_rot").get_to(s.sigma_rot);
}

void to_json(nlohmann::json& j, const Scene& s) {
  j = {{"masses", s.masses},
       {"radii", s.radii},
       {"mu", s.mu},
       {"place_angles", s.place_angles},
       {"theta_p", s.theta_p},
       {"alpha_p", s.alpha_p}};
}

void from_json(const nlohmann::json& j, Scene& s) {
  j.at("masses").get_to(s.masses);
  j.at("radii").get_to(s.radii);
  j.at("mu").get_to(s.mu);
  j.at("place_angles").get_to(s.place_angles);
  j.at("theta_p").get_to(s.theta_p);
  j.at("alpha_p").get_to(s.alpha_p);
}

}  // namespace pushlab::data

namespace pushlab {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (long r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, long expected_cols) {
  require(j.is_array(), "matrix: expected an array of rows");
  const long rows = static_cast<long>(j.size());
  if (rows == 0) return {};
  const long cols = static_cast<long>(j[0].size());
  require(expected_cols < 0 || cols == expected_cols, "matrix: unexpected column count");
  Eigen::MatrixXd m(rows, cols);
  for (long r = 0; r < rows; ++r) {
    require(static_cast<long>(j[r].size()) == cols, "matrix: ragged rows");
    for (long c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace pushlab
