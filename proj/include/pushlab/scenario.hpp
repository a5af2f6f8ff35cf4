#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pushlab/common.hpp"
#include "pushlab/rng.hpp"
#include "pushlab/sim.hpp"

namespace pushlab::data {

// Sampling ranges for a randomized scene. Disk 1 sits at the origin; each further
// disk is placed tangent to its predecessor. When fixed_* entries are present they
// override the sampled value for that disk (used by the control benchmark, which
// fixes geometry and varies only placement and goal).
struct SceneSpec {
  int n_disks = 2;
  double mu_min = 0.05;
  double mu_max = 0.25;
  double mass_min = 0.85;
  double mass_max = 1.15;
  double radius_min = 0.05;
  double radius_max = 0.06;
  double placement_angle = kPi / 3.0;   // tangency direction ~ U(-a, a)
  double pusher_angle = kPi / 3.0;      // pusher rim angle ~ U(-a, a)
  double push_dir_angle = kPi / 6.0;    // push direction offset ~ U(-a, a)
  std::vector<double> fixed_masses;     // empty -> sample per disk
  std::vector<double> fixed_radii;
  double fixed_mu = -1.0;               // < 0 -> sample
  double pusher_radius = 0.0048;
  double pusher_mass = 0.1;
};

// One sampled scene (world geometry + push placement), before any dynamics.
struct Scene {
  std::vector<double> masses;
  std::vector<double> radii;
  double mu = 0.15;                    // uniform ground friction of the true world
  std::vector<double> place_angles;    // size n_disks - 1
  double theta_p = 0.0;                // pusher rim angle behind disk 1
  double alpha_p = 0.0;                // push direction offset
};

struct PushSpec {
  enum class Setup { kDirectForce, kPositionControl };
  Setup setup = Setup::kDirectForce;
  double duration = 2.0;               // seconds per trajectory
  double target_displacement = 0.01;   // m of pusher travel (direct force calibration)
  double push_speed = 0.005;           // m/s (position control)
};

// Surrogate-real worlds: one spatially varying friction field shared by every
// trajectory of a dataset, stiffer contact friction, and observation noise on the
// recorded disk poses (velocities re-estimated by finite differences).
struct SurrogateRealSpec {
  bool enabled = false;
  double field_mean = 0.15;
  double field_amplitude = 0.05;
  double field_corr_len = 0.1;
  double contact_mu_scale = 1.3;
  double sigma_pos = 5e-4;             // m
  double sigma_rot = 5e-3;             // rad
};

struct TrajectoryRecord {
  int index = 0;
  std::uint64_t seed = 0;
  Scene scene;
  double force_mag = 0.0;              // calibrated push force (direct force setup)
  Vec2 push_dir = Vec2::Zero();
  // (T+1) x (n_disks*6 + 4): per disk x,y,theta,vx,vy,omega then px,py,pvx,pvy.
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;             // T x 2, realized pusher velocity per step
  // Internal-engine shadow segments restarted from the observed state at t0.
  struct Segment {
    int t0 = 0;
    Eigen::MatrixXd states;            // (len+1) x (n_disks*6), disks only
  };
  std::vector<Segment> nominal;
};

struct Dataset {
  int format_version = 1;
  std::string setup;                   // "direct_force" | "position_control"
  bool surrogate = false;
  int n_disks = 2;
  std::uint64_t seed = 0;
  int segment_length = 200;
  sim::SimConfig sim;                  // config the true world ran under
  sim::NominalSpec nominal;            // shadow-rollout engine belief
  SceneSpec scene_spec;
  PushSpec push;
  SurrogateRealSpec surrogate_spec;
  sim::SurfaceModel field_surface;     // shared true surface when surrogate; rebuilt on load
  std::vector<TrajectoryRecord> trajectories;

  int steps() const { return trajectories.empty() ? 0 : int(trajectories[0].actions.rows()); }
};

Scene sample_scene(const SceneSpec& spec, Rng& rng);

// World for a sampled scene: disk 1 at origin, chain tangent, pusher resting on the
// rim of disk 1 opposite the chain, all velocities zero.
sim::WorldState build_world(const SceneSpec& spec, const Scene& scene,
                            const sim::SurfaceModel& surface);

// Push direction for a scene: rotate the rim-contact normal by alpha_p.
Vec2 push_direction(const Scene& scene);

// Replaces disk poses with noisy observations and re-estimates disk velocities by
// central differences (one-sided at the ends). Pusher columns stay exact.
void apply_observation_noise(Eigen::MatrixXd& states, int n_disks, double sigma_pos,
                             double sigma_rot, double dt, Rng& rng);

// Trajectories are generated independently from per-index derived seeds, so the
// result is identical for any worker count.
Dataset generate_dataset(const SceneSpec& scene_spec, const PushSpec& push,
                         const sim::SimConfig& cfg, const sim::NominalSpec& nominal,
                         const SurrogateRealSpec& surrogate, int count, std::uint64_t seed,
                         int segment_length = 200, int threads = 1);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// Reconstructs the world at step t of a record (surface/config from the header).
sim::WorldState world_at(const Dataset& ds, const TrajectoryRecord& rec, int t);

// Surface of the dataset's true world; field datasets share one surface.
sim::SurfaceModel dataset_surface(const Dataset& ds, const TrajectoryRecord& rec);

}  // namespace pushlab::data
