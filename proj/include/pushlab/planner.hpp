#pragma once

#include <memory>
#include <vector>

#include "pushlab/common.hpp"
#include "pushlab/models.hpp"
#include "pushlab/rng.hpp"
#include "pushlab/sim.hpp"

namespace pushlab::plan {

// One discrete push: pusher placed on disk 1's rim at contact angle theta
// (measured about the axis pointing away from disk 2), then driven a fixed
// length at fixed speed along the contact normal rotated by alpha.
struct ControlAction {
  int index = 0;                 // enumeration order, used for tie-breaking
  double theta = 0.0;
  double alpha = 0.0;
  double push_length = 0.010;
  double push_speed = 0.050;
};

struct Goal {
  Vec2 position = Vec2::Zero();
  double tolerance = 0.0058;     // r2 / 10
};

struct PlannerConfig {
  int n_theta = 12;
  int n_alpha = 6;
  double theta_range = kPi / 3.0;   // theta bins tile [-range, range]
  double alpha_range = kPi / 6.0;
  double push_length = 0.010;
  double push_speed = 0.050;
  int horizon_near = 3;
  int horizon_far = 2;
  double switch_distance = 0.010;   // m to goal below which the horizon deepens
  int max_episode_actions = 60;
  int queue_capacity = 4096;        // open-list size bound and expansion budget
};

// Bin midpoints, theta-major then alpha, both ascending; always 72 actions for
// the default config.
std::vector<ControlAction> enumerate_actions(const PlannerConfig& cfg);

// Distance of the target disk to the goal plus an alignment penalty,
// 1 - cos(angle between goal - p1 and p2 - p1). Either vector shorter than
// 1e-9 zeroes the alignment term.
double heuristic(const Vec2& p1, const Vec2& p2, const Vec2& goal);

int active_horizon(double dist_to_goal, const PlannerConfig& cfg);

// Pusher teleported tangent to disk 1's rim opposite the disk-1 -> disk-2 axis,
// rotated by the action's contact angle.
sim::WorldState place_pusher(const sim::WorldState& w, const ControlAction& a);
// Push velocity for a placed pusher: toward disk 1, rotated by alpha.
Vec2 push_command(const sim::WorldState& placed, const ControlAction& a);
int push_steps(const ControlAction& a, double dt);

// Candidate evaluator: the predicted world after executing each action from w.
// Implementations must be safe for concurrent const use.
class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual std::vector<sim::WorldState> predict(const sim::WorldState& w,
                                               const std::vector<ControlAction>& actions) const = 0;
  virtual double dt() const = 0;
};

// Plans with the analytical engine under its nominal parameter belief. Each
// candidate push is rolled to rest, matching how episodes execute and observe.
class PhysicsForward final : public ForwardModel {
 public:
  explicit PhysicsForward(sim::NominalSpec nominal) : nominal_(std::move(nominal)) {}
  std::vector<sim::WorldState> predict(const sim::WorldState& w,
                                       const std::vector<ControlAction>& actions) const override;
  double dt() const override { return nominal_.sim.dt; }

 private:
  sim::NominalSpec nominal_;
};

// Plans with a trained forward model; candidates roll out in one batch.
class LearnedForward final : public ForwardModel {
 public:
  explicit LearnedForward(const model::ModelParams& params) : params_(&params) {}
  std::vector<sim::WorldState> predict(const sim::WorldState& w,
                                       const std::vector<ControlAction>& actions) const override;
  double dt() const override { return params_->nominal.sim.dt; }

 private:
  const model::ModelParams* params_;
};

struct PlanResult {
  ControlAction action;
  double cost = 0.0;
  int expansions = 0;
  int depth_reached = 0;
  bool fallback = false;       // budget exhausted; singly-greedy action returned
};

// Best-first search over action sequences up to the active horizon; returns the
// first action of the first full-depth sequence popped. A predicted state within
// goal tolerance is terminal: it is scored by distance alone (the alignment term
// shapes approach, not capture) and its sequence wins immediately. Ties break
// toward the lowest action indices. Scaling every cost by a positive constant
// cannot change the choice.
PlanResult plan_next(const sim::WorldState& observed, const Goal& goal,
                     const ForwardModel& model, const PlannerConfig& cfg,
                     double cost_scale = 1.0);

// Goal three disk-2 radii from disk 2, at an angle off the disk-1 -> disk-2 axis:
// easy U(-pi/6, pi/6), hard the same magnitude band shifted into
// [-pi/3, -pi/6] u [pi/6, pi/3]. Tolerance r2 / 10.
Goal sample_goal(const sim::WorldState& w, bool hard, Rng& rng);

// What the planner sees between pushes: exact states, or noisy poses with
// velocities reported as zero (episodes settle to rest before observing).
struct Observation {
  bool noisy = false;
  double sigma_pos = 5e-4;
  double sigma_rot = 5e-3;
};

struct EpisodeResult {
  bool success = false;
  int actions_used = 0;
  double final_distance = 0.0;
  Goal goal;
  std::vector<ControlAction> actions;
  std::vector<sim::WorldState> checkpoints;   // true world before each push and after the last
};

// Closed loop: check goal on the true state, plan from the observed state,
// execute the chosen push in the true world, settle to rest, repeat.
EpisodeResult run_episode(const sim::WorldState& world0, const Goal& goal,
                          const ForwardModel& model, const PlannerConfig& cfg,
                          const sim::SimConfig& true_cfg, const Observation& obs, Rng& rng);

}  // namespace pushlab::plan
