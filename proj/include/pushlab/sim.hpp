#pragma once

#include <span>
#include <vector>

#include "pushlab/common.hpp"

namespace pushlab::sim {

struct Pose2 {
  double x = 0.0, y = 0.0, theta = 0.0;  // theta in (-pi, pi] on engine output
  Vec2 position() const { return Vec2(x, y); }
};

struct Twist2 {
  double vx = 0.0, vy = 0.0, omega = 0.0;
  Vec2 linear() const { return Vec2(vx, vy); }
};

struct DiskState {
  Pose2 pose;
  Twist2 twist;
  double mass = 1.0;    // kg, > 0
  double radius = 0.05; // m, > 0
  double inertia() const { return 0.5 * mass * radius * radius; }  // solid disk about center
};

// Cylindrical pusher. In the position-controlled setup it is kinematic (contact
// impulses never change its velocity); the direct-force setup drives it as a
// `mass` kg dynamic body via step_forced.
struct PusherState {
  Vec2 position = Vec2::Zero();
  Vec2 velocity = Vec2::Zero();
  double radius = 0.0048;  // m
  double mass = 0.1;       // kg, only used by step_forced
};

// Ground friction description. SpatialField interpolates a grid bilinearly and
// clamps lookups outside the grid to the border value.
struct MuField {
  double x0 = 0.0, y0 = 0.0;  // grid origin
  double h = 0.025;           // grid spacing, m
  int nx = 0, ny = 0;
  std::vector<double> values;  // row-major, ny rows of nx

  bool empty() const { return values.empty(); }
  double at(double x, double y) const;
};

struct SurfaceModel {
  enum class Mode { kUniform, kSpatialField };
  Mode mode = Mode::kUniform;
  double mu_nominal = 0.15;  // used directly in Uniform mode
  double gravity = 9.81;     // m/s^2
  MuField field;             // used in SpatialField mode

  double mu_at(double x, double y) const {
    return mode == Mode::kUniform ? mu_nominal : field.at(x, y);
  }
};

// Smooth random field: white noise on the grid smoothed by a Gaussian kernel of
// the given correlation length, rescaled to the requested peak amplitude around
// `mean`, clamped to (0.05, 0.25).
MuField make_mu_field(std::uint64_t seed, double mean, double amplitude, double corr_len,
                      double extent = 0.5, double spacing = 0.025);

struct WorldState {
  std::vector<DiskState> disks;
  PusherState pusher;
  SurfaceModel surface;
};

struct SimConfig {
  double dt = 1.0 / 240.0;
  double restitution = 0.0;
  // Disk-disk/pusher-disk Coulomb coefficient. The tangential cap sets the
  // friction cone, atan(contact_mu), which bounds how far off the contact
  // normal a push can steer the struck disk; 0.5 keeps the whole easy-goal
  // bearing band steerable (measured working window 0.45..0.65).
  double contact_mu = 0.5;
  double penetration_tolerance = 1e-4;  // m
  double baumgarte_beta = 0.2;
  int solver_iterations = 10;
  double velocity_deadband = 1e-6;  // m/s (and rad/s) below which friction is zeroed
};

struct StepDiag {
  int deep_penetration_events = 0;  // overlaps beyond 10x tolerance, fixed by projection
};

// Ground interaction for one disk: force = -mu*m*g*v_hat (zero below the
// deadband), spin torque = -(2/3)*mu*m*g*r*sign(omega).
struct FrictionWrench {
  Vec2 force = Vec2::Zero();
  double torque = 0.0;
};
FrictionWrench coulomb_friction(const DiskState& disk, const SurfaceModel& surface,
                                double deadband = 1e-6);

// Velocity-level contact resolution (restitution + Coulomb cap + Baumgarte bias),
// pusher treated as kinematic (infinite mass). Disk-disk impulses conserve the
// pair's linear momentum; post-impulse normal relative velocities are >= 0.
WorldState resolve_contacts(const WorldState& world, const SimConfig& cfg,
                            StepDiag* diag = nullptr);

// One engine step with a commanded pusher velocity (kinematic pusher):
// ground friction -> pusher command -> contact impulses -> symplectic Euler
// integration -> positional projection so no emitted overlap exceeds tolerance.
WorldState step(const WorldState& world, const Vec2& pusher_cmd, const SimConfig& cfg,
                StepDiag* diag = nullptr);

// One engine step with the pusher as a dynamic body driven by a constant force;
// contacts push back on the pusher. Used by direct-force data generation.
WorldState step_forced(const WorldState& world, const Vec2& force, const SimConfig& cfg,
                       StepDiag* diag = nullptr);

// In-place variants (the value-returning API copies the world, which matters in
// calibration loops that re-simulate thousands of trajectories).
void advance(WorldState& world, const Vec2& pusher_cmd, const SimConfig& cfg,
             StepDiag* diag = nullptr);
void advance_forced(WorldState& world, const Vec2& force, const SimConfig& cfg,
                    StepDiag* diag = nullptr);

// Fixed internal-engine belief: nominal friction and per-disk mass/radius used by
// the hybrid model and the physics baseline regardless of a scene's true values.
// For scenes with more disks than entries the last entry repeats.
struct NominalSpec {
  double mu = 0.15;
  double gravity = 9.81;
  std::vector<double> masses{0.896, 1.1};
  std::vector<double> radii{0.0525, 0.058};
  SimConfig sim;

  // Same poses/velocities/pusher, nominal mass/radius/uniform-mu substituted.
  WorldState substitute(const WorldState& w) const;
};

struct Trajectory {
  double dt = 1.0 / 240.0;
  std::vector<WorldState> states;   // size T+1
  std::vector<Vec2> actions;        // size T, commanded pusher velocity per step
};

// Replays a pusher-velocity plan through the engine (states[0] = world).
Trajectory rollout_physics(const WorldState& world, std::span<const Vec2> plan,
                           const SimConfig& cfg);

double kinetic_energy(const WorldState& world);

}  // namespace pushlab::sim
