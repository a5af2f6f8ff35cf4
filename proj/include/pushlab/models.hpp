#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pushlab/codec.hpp"
#include "pushlab/nn.hpp"
#include "pushlab/scenario.hpp"
#include "pushlab/sim.hpp"

namespace pushlab::model {

// Learned forward model: pairwise-effect network feeding a per-object dynamics
// network. The hybrid variant additionally conditions both networks on a nominal
// engine rollout that evolves from its own predictions; gradients never reach the
// engine, its outputs enter as constant features.
struct ModelParams {
  ModelKind kind = ModelKind::kIn;
  nn::Mlp f_rel;                 // pair features -> effect vector
  nn::Mlp f_dyn;                 // object features -> standardized acceleration
  FeatureCodec codec;
  sim::NominalSpec nominal;      // hybrid only: internal engine belief

  int param_count() const;
  Eigen::VectorXd to_flat() const;
  void from_flat(const Eigen::VectorXd& flat);
};

ModelParams make_model(ModelKind kind, std::uint64_t seed);

// One rollout problem for the batched engine: initial objects, a pusher command
// plan, optionally the internal-engine deltas (hybrid) and ground-truth states
// (training loss). All matrices are row-per-step.
struct Window {
  std::vector<ObjState> init;        // objects at the window start
  Vec2 pusher0 = Vec2::Zero();
  double pusher_radius = 0.0048;
  double dt = 1.0 / 240.0;
  Eigen::MatrixXd actions;           // T x 2
  Eigen::MatrixXd eng_dv;            // T x (n*3)  [dvx,dvy,domega] per object
  Eigen::MatrixXd eng_dp;            // T x (n*4)  [dx,dy,sin dth,cos dth] per object
  Eigen::MatrixXd truth;             // (T+1) x (n*6), empty when loss is not needed
};

// Fills eng_dv/eng_dp by rolling the nominal engine from the window's start state
// (poses/velocities from `init`, nominal mass/radius/friction substituted).
void fill_engine_deltas(const sim::NominalSpec& nominal, Window& win);

// Builds a window from recorded states [t0, t0+T]; uses the record's stored shadow
// segment when one starts at t0, otherwise re-rolls the nominal engine.
Window make_window(const data::Dataset& ds, const data::TrajectoryRecord& rec, int t0,
                   int T, ModelKind kind, const sim::NominalSpec& nominal, bool with_truth);

// Rolls every window T steps in lockstep. Returns per-window predicted object
// states, (T+1) x (n*6) each. `data_loss`, if non-null, receives the summed
// per-window mean-per-step loss (positions, velocities, heading sin/cos).
std::vector<Eigen::MatrixXd> batch_rollout(const ModelParams& params,
                                           const std::vector<Window>& windows,
                                           double* data_loss = nullptr);

// Objective over windows: scale * sum of per-window losses + lambda * |theta|^2.
double batch_objective(const ModelParams& params, const std::vector<Window>& windows,
                       double scale, double lambda);

// Gradient of batch_objective via backpropagation through the whole rollout.
Eigen::VectorXd batch_objective_grad(const ModelParams& params,
                                     const std::vector<Window>& windows, double scale,
                                     double lambda, double* objective = nullptr);

// Single-step interfaces. `actions` is the encoded per-object action (zero for
// objects not in pusher contact). The hybrid step takes the nominal engine's
// current and next shadow states to form its extra features.
sim::WorldState in_step(const ModelParams& params, const sim::WorldState& s,
                        const std::vector<Vec2>& actions);
sim::WorldState sain_step(const ModelParams& params, const sim::WorldState& s,
                          const sim::WorldState& shadow_now,
                          const sim::WorldState& shadow_next,
                          const std::vector<Vec2>& actions);

// Full model rollout from a world under a pusher command plan. The hybrid model
// internally rolls its nominal engine from the same start. Returned worlds carry
// predicted poses/velocities, the observed masses/radii, and a uniform surface.
std::vector<sim::WorldState> rollout_model(const ModelParams& params,
                                           const sim::WorldState& s0,
                                           std::span<const Vec2> plan);

// Mean-per-step trajectory loss in SI units plus lambda * |theta|^2.
double trajectory_loss(const std::vector<sim::WorldState>& pred,
                       const std::vector<sim::WorldState>& truth,
                       const Eigen::VectorXd& theta, double lambda);

// The optimizer sees the data term in millimeter-equivalent units; in SI units the
// squared-error term is ~1e-5 and the L2 penalty would swamp it.
inline constexpr double kTrainLossScale = 1e6;

struct TrainResult {
  ModelParams params;
  std::vector<double> loss_curve;      // optimized objective per iteration
  int iterations_run = 0;
  bool diverged = false;
};

// Called every cfg.eval_every iterations (and on the last) with the current
// objective; purely informational.
using ProgressFn = std::function<void(int iteration, double objective)>;

// Trains a fresh model of the given kind on a dataset (windows tiled every
// cfg.rollout_length steps; a partial tail window is dropped). Deterministic for a
// fixed config and dataset.
TrainResult train(ModelKind kind, const data::Dataset& ds, const nn::TrainConfig& cfg,
                  const ProgressFn& progress = {});

// Continues from trained parameters on new data with a fresh optimizer state and
// the learning-rate schedule scaled by 0.1. An empty dataset returns the input
// parameters unchanged.
TrainResult fine_tune(const ModelParams& params, const data::Dataset& ds,
                      const nn::TrainConfig& cfg, const ProgressFn& progress = {});

}  // namespace pushlab::model
