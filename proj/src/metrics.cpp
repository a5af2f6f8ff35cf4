#include "pushlab/metrics.hpp"

#include <cmath>

#include "pushlab/parallel.hpp"

namespace pushlab::eval {

using Eigen::MatrixXd;

namespace {

// Objects that never moved have no meaningful relative error; anything that did
// move travels far beyond this floor (a nanometer).
constexpr double kTransFloor = 1e-9;

void write_disk_row(const sim::WorldState& w, MatrixXd& out, int row) {
  for (int i = 0; i < static_cast<int>(w.disks.size()); ++i) {
    const auto& d = w.disks[i];
    out(row, i * 6 + 0) = d.pose.x;
    out(row, i * 6 + 1) = d.pose.y;
    out(row, i * 6 + 2) = d.pose.theta;
    out(row, i * 6 + 3) = d.twist.vx;
    out(row, i * 6 + 4) = d.twist.vy;
    out(row, i * 6 + 5) = d.twist.omega;
  }
}

std::vector<MatrixXd> predict_physics(const sim::NominalSpec& nominal, const data::Dataset& ds,
                                      int horizon, int threads) {
  std::vector<MatrixXd> out(ds.trajectories.size());
  parallel_for_indexed(static_cast<int>(ds.trajectories.size()), threads, [&](int r) {
    const auto& rec = ds.trajectories[r];
    sim::WorldState w = nominal.substitute(data::world_at(ds, rec, 0));
    MatrixXd pred(horizon + 1, ds.n_disks * 6);
    write_disk_row(w, pred, 0);
    for (int t = 0; t < horizon; ++t) {
      const Vec2 cmd = rec.actions.row(t).transpose();
      sim::advance(w, cmd, nominal.sim);
      write_disk_row(w, pred, t + 1);
    }
    out[r] = std::move(pred);
  });
  return out;
}

std::vector<MatrixXd> predict_learned(const model::ModelParams& params, const data::Dataset& ds,
                                      int horizon, int threads) {
  const int count = static_cast<int>(ds.trajectories.size());
  std::vector<model::Window> windows(count);
  parallel_for_indexed(count, threads, [&](int r) {
    windows[r] = model::make_window(ds, ds.trajectories[r], 0, horizon, params.kind,
                                    params.nominal, /*with_truth=*/false);
  });
  if (threads <= 1) return model::batch_rollout(params, windows);

  // Windows never interact inside a rollout, so chunking them across workers is
  // safe; results land in per-index slots.
  std::vector<MatrixXd> out(count);
  const int chunk = (count + threads - 1) / threads;
  const int n_chunks = (count + chunk - 1) / chunk;
  parallel_for_indexed(n_chunks, threads, [&](int c) {
    const int lo = c * chunk, hi = std::min(count, lo + chunk);
    std::vector<model::Window> part(windows.begin() + lo, windows.begin() + hi);
    auto pred = model::batch_rollout(params, part);
    for (int i = lo; i < hi; ++i) out[i] = std::move(pred[i - lo]);
  });
  return out;
}

}  // namespace

std::string PredictorRef::name() const {
  switch (kind) {
    case Kind::kPhysics: return "physics";
    case Kind::kIn: return "in";
    case Kind::kSain: return "sain";
  }
  fail("predictor: bad kind");
}

std::vector<MatrixXd> predict_dataset(const PredictorRef& ref, const data::Dataset& ds,
                                      int horizon, int threads) {
  require(!ds.trajectories.empty(), "predict: empty dataset");
  require(horizon >= 1 && horizon <= ds.steps(),
          "predict: horizon outside the recorded trajectory length");
  if (ref.kind == PredictorRef::Kind::kPhysics)
    return predict_physics(ref.nominal, ds, horizon, threads);
  require(ref.params != nullptr, "predict: learned predictor without parameters");
  const auto want =
      ref.kind == PredictorRef::Kind::kIn ? model::ModelKind::kIn : model::ModelKind::kSain;
  require(ref.params->kind == want, "predict: checkpoint kind does not match predictor kind");
  return predict_learned(*ref.params, ds, horizon, threads);
}

MetricsReport compute_metrics(const std::string& model_name, const std::vector<MatrixXd>& pred,
                              const data::Dataset& ds, int horizon) {
  require(pred.size() == ds.trajectories.size(), "metrics: prediction/trajectory count mismatch");
  const int nd = ds.n_disks;
  MetricsReport rep;
  rep.model = model_name;
  rep.horizon = horizon;
  rep.objects.assign(nd, ObjectMetrics{});

  std::vector<double> sum_pos(nd, 0.0), sum_rot(nd, 0.0), sum_trans(nd, 0.0);
  for (std::size_t r = 0; r < pred.size(); ++r) {
    const auto& rec = ds.trajectories[r];
    require(rec.states.rows() > horizon, "metrics: horizon beyond recorded steps");
    require(pred[r].rows() == horizon + 1 && pred[r].cols() == nd * 6,
            "metrics: prediction shape mismatch");
    for (int i = 0; i < nd; ++i) {
      const int c = i * 6;
      const double dx = rec.states(horizon, c) - pred[r](horizon, c);
      const double dy = rec.states(horizon, c + 1) - pred[r](horizon, c + 1);
      const double pos_err = std::hypot(dx, dy);
      const double rot_err =
          std::abs(wrap_angle(rec.states(horizon, c + 2) - pred[r](horizon, c + 2)));
      sum_pos[i] += pos_err * 1e3;
      sum_rot[i] += rot_err * 180.0 / kPi;
      rep.objects[i].n_total += 1;
      const double disp = std::hypot(rec.states(horizon, c) - rec.states(0, c),
                                     rec.states(horizon, c + 1) - rec.states(0, c + 1));
      if (disp > kTransFloor) {
        sum_trans[i] += pos_err / disp * 100.0;
        rep.objects[i].n_trans += 1;
      }
    }
  }
  for (int i = 0; i < nd; ++i) {
    auto& o = rep.objects[i];
    if (o.n_total > 0) {
      o.pos_mm = sum_pos[i] / o.n_total;
      o.rot_deg = sum_rot[i] / o.n_total;
    }
    if (o.n_trans > 0) o.trans_pct = sum_trans[i] / o.n_trans;
  }
  return rep;
}

MetricsReport eval_prediction(const PredictorRef& ref, const data::Dataset& ds, int horizon,
                              int threads) {
  return compute_metrics(ref.name(), predict_dataset(ref, ds, horizon, threads), ds, horizon);
}

ControlWorld matched_control_world() {
  ControlWorld w;
  w.name = "matched";
  w.scene.n_disks = 2;
  w.scene.fixed_masses = {0.9, 1.0};
  w.scene.fixed_radii = {0.054, 0.059};
  w.scene.fixed_mu = 0.15;
  w.surface.mode = sim::SurfaceModel::Mode::kUniform;
  w.surface.mu_nominal = 0.15;
  w.obs.noisy = false;
  return w;
}

ControlWorld surrogate_control_world(const data::SurrogateRealSpec& spec,
                                     std::uint64_t world_seed) {
  ControlWorld w = matched_control_world();
  w.name = "surrogate";
  w.scene.fixed_mu = spec.field_mean;
  w.cfg.contact_mu *= spec.contact_mu_scale;
  w.surface.mode = sim::SurfaceModel::Mode::kSpatialField;
  w.surface.field = sim::make_mu_field(derive_seed(world_seed, 0xF1E1D), spec.field_mean,
                                       spec.field_amplitude, spec.field_corr_len);
  w.obs.noisy = true;
  w.obs.sigma_pos = spec.sigma_pos;
  w.obs.sigma_rot = spec.sigma_rot;
  return w;
}

ControlReport eval_control(const plan::ForwardModel& model, const std::string& model_name,
                           const ControlWorld& world, const plan::PlannerConfig& cfg,
                           int n_easy, int n_hard, std::uint64_t seed, int threads) {
  ControlReport rep;
  rep.model = model_name;
  rep.world = world.name;
  rep.n_easy = n_easy;
  rep.n_hard = n_hard;
  rep.episodes.resize(n_easy + n_hard);

  parallel_for_indexed(n_easy + n_hard, threads, [&](int i) {
    const bool hard = i >= n_easy;
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    const data::Scene scene = data::sample_scene(world.scene, rng);
    const sim::WorldState w0 = data::build_world(world.scene, scene, world.surface);
    const plan::Goal goal = plan::sample_goal(w0, hard, rng);
    const plan::EpisodeResult ep =
        plan::run_episode(w0, goal, model, cfg, world.cfg, world.obs, rng);

    EpisodeOutcome out;
    out.index = i;
    out.hard = hard;
    out.success = ep.success;
    out.actions_used = ep.actions_used;
    out.final_distance = ep.final_distance;
    out.goal = ep.goal;
    out.radii = scene.radii;
    const int rows = static_cast<int>(ep.checkpoints.size());
    out.disk1_path.resize(rows, 2);
    out.disk2_path.resize(rows, 2);
    for (int r = 0; r < rows; ++r) {
      out.disk1_path.row(r) = ep.checkpoints[r].disks[0].pose.position().transpose();
      out.disk2_path.row(r) = ep.checkpoints[r].disks[1].pose.position().transpose();
    }
    rep.episodes[i] = std::move(out);
  });
  for (const auto& ep : rep.episodes)
    if (ep.success) (ep.hard ? rep.hard_success : rep.easy_success) += 1;
  return rep;
}

}  // namespace pushlab::eval
