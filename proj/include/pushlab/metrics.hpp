#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pushlab/models.hpp"
#include "pushlab/planner.hpp"
#include "pushlab/scenario.hpp"

namespace pushlab::eval {

// A forward predictor under evaluation: the analytical engine replaying the
// recorded pusher commands under its nominal parameter belief, or a trained model.
struct PredictorRef {
  enum class Kind { kPhysics, kIn, kSain };
  Kind kind = Kind::kPhysics;
  const model::ModelParams* params = nullptr;  // learned kinds
  sim::NominalSpec nominal;                    // physics kind

  std::string name() const;
};

// Final-step errors averaged over trajectories. trans_pct normalizes the position
// error by how far the object actually travelled; trajectories where it barely
// moved are excluded from that average (n_trans counts the rest).
struct ObjectMetrics {
  double trans_pct = 0.0;
  double pos_mm = 0.0;
  double rot_deg = 0.0;
  int n_total = 0;
  int n_trans = 0;
};

struct MetricsReport {
  std::string model;
  int horizon = 0;
  std::vector<ObjectMetrics> objects;  // one per disk
};

// Predicted object states for every trajectory, (horizon+1) x (n*6) each, started
// from the recorded initial state and fed the recorded pusher commands.
// Trajectories are independent; results are identical for any worker count.
std::vector<Eigen::MatrixXd> predict_dataset(const PredictorRef& ref,
                                             const data::Dataset& ds, int horizon,
                                             int threads = 1);

MetricsReport compute_metrics(const std::string& model_name,
                              const std::vector<Eigen::MatrixXd>& pred,
                              const data::Dataset& ds, int horizon);

MetricsReport eval_prediction(const PredictorRef& ref, const data::Dataset& ds,
                              int horizon = 200, int threads = 1);

// A control benchmark world: fixed two-disk geometry, randomized placement and
// goal per episode. "matched" runs the engine's nominal friction; "surrogate"
// runs a spatial friction field, stiffer contact, and noisy observations.
struct ControlWorld {
  std::string name = "matched";
  data::SceneSpec scene;
  sim::SimConfig cfg;
  sim::SurfaceModel surface;
  plan::Observation obs;
};

ControlWorld matched_control_world();
ControlWorld surrogate_control_world(const data::SurrogateRealSpec& spec,
                                     std::uint64_t world_seed);

struct EpisodeOutcome {
  int index = 0;
  bool hard = false;
  bool success = false;
  int actions_used = 0;
  double final_distance = 0.0;
  plan::Goal goal;
  Eigen::MatrixXd disk1_path;  // (pushes+1) x 2 centers, before each push + final
  Eigen::MatrixXd disk2_path;
  std::vector<double> radii;
};

struct ControlReport {
  std::string model;
  std::string world;
  int n_easy = 0;
  int n_hard = 0;
  int easy_success = 0;
  int hard_success = 0;
  std::vector<EpisodeOutcome> episodes;
};

// Runs n_easy + n_hard episodes (easy goals first); episode i draws its scene and
// goal from an rng seeded by (seed, i), so a run is reproducible per episode and
// identical for any worker count.
ControlReport eval_control(const plan::ForwardModel& model, const std::string& model_name,
                           const ControlWorld& world, const plan::PlannerConfig& cfg,
                           int n_easy, int n_hard, std::uint64_t seed, int threads = 1);

}  // namespace pushlab::eval
