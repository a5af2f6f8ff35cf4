#include "pushlab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "pushlab/jsonio.hpp"
#include "pushlab/parallel.hpp"

namespace pushlab::data {

namespace {

// Chain placement: disk 0 at the origin, each next disk tangent to its
// predecessor in a direction rotated off the previous link.
std::vector<Vec2> disk_centers(const std::vector<double>& radii,
                               const std::vector<double>& place_angles) {
  std::vector<Vec2> c{Vec2::Zero()};
  Vec2 link(1.0, 0.0);
  for (std::size_t k = 1; k < radii.size(); ++k) {
    Vec2 dir = rotate(link, place_angles[k - 1]);
    c.push_back(c[k - 1] + (radii[k - 1] + radii[k]) * dir);
    link = dir;
  }
  return c;
}

bool chain_overlaps(const std::vector<Vec2>& centers, const std::vector<double>& radii) {
  for (std::size_t i = 0; i < centers.size(); ++i)
    for (std::size_t j = i + 2; j < centers.size(); ++j)
      if ((centers[i] - centers[j]).norm() < radii[i] + radii[j] - 1e-12) return true;
  return false;
}

double pick(double fixed, double lo, double hi, Rng& rng) {
  return fixed >= 0.0 ? fixed : rng.uniform(lo, hi);
}

}  // namespace

Scene sample_scene(const SceneSpec& spec, Rng& rng) {
  require(spec.n_disks >= 2, "scene: need at least two disks");
  Scene s;
  s.mu = pick(spec.fixed_mu, spec.mu_min, spec.mu_max, rng);
  s.masses.resize(spec.n_disks);
  s.radii.resize(spec.n_disks);
  for (int i = 0; i < spec.n_disks; ++i) {
    if (!spec.fixed_masses.empty())
      s.masses[i] = spec.fixed_masses[std::min<std::size_t>(i, spec.fixed_masses.size() - 1)];
    else
      s.masses[i] = rng.uniform(spec.mass_min, spec.mass_max);
    if (!spec.fixed_radii.empty())
      s.radii[i] = spec.fixed_radii[std::min<std::size_t>(i, spec.fixed_radii.size() - 1)];
    else
      s.radii[i] = rng.uniform(spec.radius_min, spec.radius_max);
  }
  for (int attempt = 0; attempt < 100; ++attempt) {
    s.place_angles.clear();
    for (int k = 1; k < spec.n_disks; ++k)
      s.place_angles.push_back(rng.uniform(-spec.placement_angle, spec.placement_angle));
    if (!chain_overlaps(disk_centers(s.radii, s.place_angles), s.radii)) break;
    require(attempt < 99, "scene: could not place non-overlapping disks");
  }
  s.theta_p = rng.uniform(-spec.pusher_angle, spec.pusher_angle);
  s.alpha_p = rng.uniform(-spec.push_dir_angle, spec.push_dir_angle);
  return s;
}

sim::WorldState build_world(const SceneSpec& spec, const Scene& scene,
                            const sim::SurfaceModel& surface) {
  const int n = static_cast<int>(scene.masses.size());
  require(n == spec.n_disks && static_cast<int>(scene.radii.size()) == n,
          "scene: size mismatch");
  std::vector<Vec2> centers = disk_centers(scene.radii, scene.place_angles);

  sim::WorldState w;
  w.surface = surface;
  w.disks.resize(n);
  for (int i = 0; i < n; ++i) {
    w.disks[i].pose = {centers[i].x(), centers[i].y(), 0.0};
    w.disks[i].twist = {0.0, 0.0, 0.0};
    w.disks[i].mass = scene.masses[i];
    w.disks[i].radius = scene.radii[i];
  }
  // pusher resting on the rim of disk 0, opposite the chain direction
  Vec2 back = rotate(Vec2(1.0, 0.0), scene.theta_p);
  w.pusher.position = centers[0] - (scene.radii[0] + spec.pusher_radius) * back;
  w.pusher.velocity = Vec2::Zero();
  w.pusher.radius = spec.pusher_radius;
  w.pusher.mass = spec.pusher_mass;
  return w;
}

Vec2 push_direction(const Scene& scene) {
  return rotate(Vec2(1.0, 0.0), scene.theta_p + scene.alpha_p);
}

void apply_observation_noise(Eigen::MatrixXd& states, int n_disks, double sigma_pos,
                             double sigma_rot, double dt, Rng& rng) {
  const long T1 = states.rows();
  require(T1 >= 2 && states.cols() >= n_disks * 6 + 4, "observation noise: bad state matrix");
  for (long t = 0; t < T1; ++t)
    for (int i = 0; i < n_disks; ++i) {
      states(t, i * 6 + 0) += sigma_pos * rng.normal();
      states(t, i * 6 + 1) += sigma_pos * rng.normal();
      states(t, i * 6 + 2) = wrap_angle(states(t, i * 6 + 2) + sigma_rot * rng.normal());
    }
  // velocities are not observed; re-estimate from the noisy poses
  for (int i = 0; i < n_disks; ++i)
    for (long t = 0; t < T1; ++t) {
      const long a = t == 0 ? 0 : t - 1;
      const long b = t == T1 - 1 ? T1 - 1 : t + 1;
      const double span = double(b - a) * dt;
      states(t, i * 6 + 3) = (states(b, i * 6 + 0) - states(a, i * 6 + 0)) / span;
      states(t, i * 6 + 4) = (states(b, i * 6 + 1) - states(a, i * 6 + 1)) / span;
      states(t, i * 6 + 5) = wrap_angle(states(b, i * 6 + 2) - states(a, i * 6 + 2)) / span;
    }
}

namespace {

void record_row(Eigen::MatrixXd& states, long t, const sim::WorldState& w) {
  const int n = static_cast<int>(w.disks.size());
  for (int i = 0; i < n; ++i) {
    const auto& d = w.disks[i];
    states(t, i * 6 + 0) = d.pose.x;
    states(t, i * 6 + 1) = d.pose.y;
    states(t, i * 6 + 2) = d.pose.theta;
    states(t, i * 6 + 3) = d.twist.vx;
    states(t, i * 6 + 4) = d.twist.vy;
    states(t, i * 6 + 5) = d.twist.omega;
  }
  states(t, n * 6 + 0) = w.pusher.position.x();
  states(t, n * 6 + 1) = w.pusher.position.y();
  states(t, n * 6 + 2) = w.pusher.velocity.x();
  states(t, n * 6 + 3) = w.pusher.velocity.y();
}

double pusher_displacement(const sim::WorldState& start, double force, const Vec2& dir,
                           const sim::SimConfig& cfg, int T) {
  sim::WorldState w = start;
  const Vec2 f = force * dir;
  for (int t = 0; t < T; ++t) sim::advance_forced(w, f, cfg);
  return (w.pusher.position - start.pusher.position).norm();
}

// Smallest force whose 2 s push moves the pusher by the target distance, found by
// doubling then bisection; displacement grows monotonically with force.
double calibrate_force(const sim::WorldState& start, const Vec2& dir, const sim::SimConfig& cfg,
                       int T, double target) {
  double hi = 0.25;
  while (pusher_displacement(start, hi, dir, cfg, T) < target) {
    hi *= 2.0;
    require(hi <= 1024.0, "force calibration: target displacement unreachable");
  }
  double lo = 0.0;
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double d = pusher_displacement(start, mid, dir, cfg, T);
    if (std::abs(d - target) <= 1e-3 * target) return mid;
    (d < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Internal-engine rollout restarted from the observed state at t0, kinematically
// replaying the recorded pusher velocities.
TrajectoryRecord::Segment nominal_segment(const sim::NominalSpec& nominal,
                                          const SceneSpec& spec, const TrajectoryRecord& rec,
                                          int n, int t0, int len) {
  sim::WorldState w;
  w.disks.resize(n);
  for (int i = 0; i < n; ++i) {
    w.disks[i].pose = {rec.states(t0, i * 6 + 0), rec.states(t0, i * 6 + 1),
                       wrap_angle(rec.states(t0, i * 6 + 2))};
    w.disks[i].twist = {rec.states(t0, i * 6 + 3), rec.states(t0, i * 6 + 4),
                        rec.states(t0, i * 6 + 5)};
    w.disks[i].mass = rec.scene.masses[i];
    w.disks[i].radius = rec.scene.radii[i];
  }
  w.pusher.position = Vec2(rec.states(t0, n * 6 + 0), rec.states(t0, n * 6 + 1));
  w.pusher.velocity = Vec2(rec.states(t0, n * 6 + 2), rec.states(t0, n * 6 + 3));
  w.pusher.radius = spec.pusher_radius;
  w.pusher.mass = spec.pusher_mass;
  sim::WorldState nom = nominal.substitute(w);

  TrajectoryRecord::Segment seg;
  seg.t0 = t0;
  seg.states.resize(len + 1, n * 6);
  for (int i = 0; i < n; ++i) {
    seg.states(0, i * 6 + 0) = nom.disks[i].pose.x;
    seg.states(0, i * 6 + 1) = nom.disks[i].pose.y;
    seg.states(0, i * 6 + 2) = nom.disks[i].pose.theta;
    seg.states(0, i * 6 + 3) = nom.disks[i].twist.vx;
    seg.states(0, i * 6 + 4) = nom.disks[i].twist.vy;
    seg.states(0, i * 6 + 5) = nom.disks[i].twist.omega;
  }
  for (int t = 0; t < len; ++t) {
    sim::advance(nom, Vec2(rec.actions(t0 + t, 0), rec.actions(t0 + t, 1)), nominal.sim);
    for (int i = 0; i < n; ++i) {
      seg.states(t + 1, i * 6 + 0) = nom.disks[i].pose.x;
      seg.states(t + 1, i * 6 + 1) = nom.disks[i].pose.y;
      seg.states(t + 1, i * 6 + 2) = nom.disks[i].pose.theta;
      seg.states(t + 1, i * 6 + 3) = nom.disks[i].twist.vx;
      seg.states(t + 1, i * 6 + 4) = nom.disks[i].twist.vy;
      seg.states(t + 1, i * 6 + 5) = nom.disks[i].twist.omega;
    }
  }
  return seg;
}

}  // namespace

Dataset generate_dataset(const SceneSpec& scene_spec, const PushSpec& push,
                         const sim::SimConfig& cfg, const sim::NominalSpec& nominal,
                         const SurrogateRealSpec& surrogate, int count, std::uint64_t seed,
                         int segment_length, int threads) {
  require(count >= 1 && segment_length >= 1, "dataset: bad sizes");
  Dataset ds;
  ds.setup = push.setup == PushSpec::Setup::kDirectForce ? "direct_force" : "position_control";
  ds.surrogate = surrogate.enabled;
  ds.n_disks = scene_spec.n_disks;
  ds.seed = seed;
  ds.segment_length = segment_length;
  ds.sim = cfg;
  if (surrogate.enabled) ds.sim.contact_mu = cfg.contact_mu * surrogate.contact_mu_scale;
  ds.nominal = nominal;
  ds.scene_spec = scene_spec;
  ds.push = push;
  ds.surrogate_spec = surrogate;
  if (surrogate.enabled) {
    ds.field_surface.mode = sim::SurfaceModel::Mode::kSpatialField;
    ds.field_surface.mu_nominal = surrogate.field_mean;
    ds.field_surface.field =
        sim::make_mu_field(derive_seed(seed, 0xF1E1D), surrogate.field_mean,
                           surrogate.field_amplitude, surrogate.field_corr_len);
  }

  const int T = static_cast<int>(std::lround(push.duration / cfg.dt));
  const int n = scene_spec.n_disks;
  ds.trajectories.resize(count);

  parallel_for_indexed(count, threads, [&](int idx) {
    TrajectoryRecord rec;
    rec.index = idx;
    rec.seed = derive_seed(seed, static_cast<std::uint64_t>(idx));
    Rng rng(rec.seed);
    rec.scene = sample_scene(scene_spec, rng);

    sim::SurfaceModel surface;
    if (surrogate.enabled) {
      surface = ds.field_surface;
    } else {
      surface.mode = sim::SurfaceModel::Mode::kUniform;
      surface.mu_nominal = rec.scene.mu;
    }
    sim::WorldState world = build_world(scene_spec, rec.scene, surface);
    const Vec2 dir = push_direction(rec.scene);
    rec.push_dir = dir;

    rec.states.resize(T + 1, n * 6 + 4);
    rec.actions.resize(T, 2);
    record_row(rec.states, 0, world);
    if (push.setup == PushSpec::Setup::kDirectForce) {
      rec.force_mag = calibrate_force(world, dir, ds.sim, T, push.target_displacement);
      const Vec2 f = rec.force_mag * dir;
      for (int t = 0; t < T; ++t) {
        sim::advance_forced(world, f, ds.sim);
        record_row(rec.states, t + 1, world);
        rec.actions.row(t) << world.pusher.velocity.x(), world.pusher.velocity.y();
      }
    } else {
      const Vec2 cmd = push.push_speed * dir;
      for (int t = 0; t < T; ++t) {
        sim::advance(world, cmd, ds.sim);
        record_row(rec.states, t + 1, world);
        rec.actions.row(t) << cmd.x(), cmd.y();
      }
    }

    if (surrogate.enabled)
      apply_observation_noise(rec.states, n, surrogate.sigma_pos, surrogate.sigma_rot,
                              ds.sim.dt, rng);

    for (int t0 = 0; t0 < T; t0 += segment_length)
      rec.nominal.push_back(
          nominal_segment(nominal, scene_spec, rec, n, t0, std::min(segment_length, T - t0)));

    ds.trajectories[idx] = std::move(rec);
  });
  return ds;
}

namespace {

nlohmann::json record_to_json(const TrajectoryRecord& rec) {
  nlohmann::json j = {{"index", rec.index},
                      {"seed", rec.seed},
                      {"scene", rec.scene},
                      {"force_mag", rec.force_mag},
                      {"push_dir", {rec.push_dir.x(), rec.push_dir.y()}},
                      {"states", matrix_to_json(rec.states)},
                      {"actions", matrix_to_json(rec.actions)}};
  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : rec.nominal)
    segs.push_back({{"t0", s.t0}, {"states", matrix_to_json(s.states)}});
  j["nominal"] = std::move(segs);
  return j;
}

TrajectoryRecord record_from_json(const nlohmann::json& j, int n_disks) {
  TrajectoryRecord rec;
  j.at("index").get_to(rec.index);
  j.at("seed").get_to(rec.seed);
  j.at("scene").get_to(rec.scene);
  j.at("force_mag").get_to(rec.force_mag);
  rec.push_dir = Vec2(j.at("push_dir")[0].get<double>(), j.at("push_dir")[1].get<double>());
  rec.states = matrix_from_json(j.at("states"), n_disks * 6 + 4);
  rec.actions = matrix_from_json(j.at("actions"), 2);
  require(rec.states.rows() == rec.actions.rows() + 1, "record: state/action length mismatch");
  require(rec.states.allFinite() && rec.actions.allFinite(), "record: non-finite values");
  require(static_cast<int>(rec.scene.masses.size()) == n_disks &&
              static_cast<int>(rec.scene.radii.size()) == n_disks,
          "record: scene size mismatch");
  for (const auto& s : j.at("nominal")) {
    TrajectoryRecord::Segment seg;
    s.at("t0").get_to(seg.t0);
    seg.states = matrix_from_json(s.at("states"), n_disks * 6);
    require(seg.states.allFinite(), "record: non-finite shadow segment");
    rec.nominal.push_back(std::move(seg));
  }
  return rec;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "dataset: cannot open " + path + " for writing");
  nlohmann::json header = {{"format", "pushlab-dataset"},
                           {"version", ds.format_version},
                           {"setup", ds.setup},
                           {"surrogate", ds.surrogate},
                           {"n_disks", ds.n_disks},
                           {"seed", ds.seed},
                           {"segment_length", ds.segment_length},
                           {"count", ds.trajectories.size()},
                           {"sim", ds.sim},
                           {"nominal", ds.nominal},
                           {"scene_spec", ds.scene_spec},
                           {"push", ds.push},
                           {"surrogate_spec", ds.surrogate_spec}};
  if (ds.surrogate) header["field_surface"] = ds.field_surface;
  out << header.dump() << '\n';
  for (const auto& rec : ds.trajectories) out << record_to_json(rec).dump() << '\n';
  require(out.good(), "dataset: write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "dataset: cannot open " + path);
  std::string line;
  long line_no = 0;
  auto next_line = [&]() {
    ++line_no;
    require(static_cast<bool>(std::getline(in, line)), "dataset: " + path + " truncated at line " +
                                                           std::to_string(line_no));
  };

  Dataset ds;
  std::size_t count = 0;
  try {
    next_line();
    nlohmann::json header = nlohmann::json::parse(line);
    require(header.at("format") == "pushlab-dataset", "not a dataset file");
    require(header.at("version").get<int>() == 1, "unsupported dataset version");
    header.at("setup").get_to(ds.setup);
    header.at("surrogate").get_to(ds.surrogate);
    header.at("n_disks").get_to(ds.n_disks);
    header.at("seed").get_to(ds.seed);
    header.at("segment_length").get_to(ds.segment_length);
    header.at("count").get_to(count);
    header.at("sim").get_to(ds.sim);
    header.at("nominal").get_to(ds.nominal);
    header.at("scene_spec").get_to(ds.scene_spec);
    header.at("push").get_to(ds.push);
    header.at("surrogate_spec").get_to(ds.surrogate_spec);
    if (ds.surrogate) header.at("field_surface").get_to(ds.field_surface);
  } catch (const std::exception& e) {
    fail("dataset " + path + ": line " + std::to_string(line_no) + ": " + e.what());
  }

  ds.trajectories.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    try {
      next_line();
      ds.trajectories.push_back(record_from_json(nlohmann::json::parse(line), ds.n_disks));
    } catch (const std::exception& e) {
      fail("dataset " + path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
    if (i > 0)
      require(ds.trajectories[i].actions.rows() == ds.trajectories[0].actions.rows(),
              "dataset: mixed trajectory lengths");
  }
  return ds;
}

sim::SurfaceModel dataset_surface(const Dataset& ds, const TrajectoryRecord& rec) {
  if (ds.surrogate) return ds.field_surface;
  sim::SurfaceModel s;
  s.mode = sim::SurfaceModel::Mode::kUniform;
  s.mu_nominal = rec.scene.mu;
  return s;
}

sim::WorldState world_at(const Dataset& ds, const TrajectoryRecord& rec, int t) {
  const int n = ds.n_disks;
  require(t >= 0 && t < rec.states.rows(), "world_at: step out of range");
  sim::WorldState w;
  w.surface = dataset_surface(ds, rec);
  w.disks.resize(n);
  for (int i = 0; i < n; ++i) {
    w.disks[i].pose = {rec.states(t, i * 6 + 0), rec.states(t, i * 6 + 1),
                       wrap_angle(rec.states(t, i * 6 + 2))};
    w.disks[i].twist = {rec.states(t, i * 6 + 3), rec.states(t, i * 6 + 4),
                        rec.states(t, i * 6 + 5)};
    w.disks[i].mass = rec.scene.masses[i];
    w.disks[i].radius = rec.scene.radii[i];
  }
  w.pusher.position = Vec2(rec.states(t, n * 6 + 0), rec.states(t, n * 6 + 1));
  w.pusher.velocity = Vec2(rec.states(t, n * 6 + 2), rec.states(t, n * 6 + 3));
  w.pusher.radius = ds.scene_spec.pusher_radius;
  w.pusher.mass = ds.scene_spec.pusher_mass;
  return w;
}

}  // namespace pushlab::data
