#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushlab/checkpoint.hpp"
#include "pushlab/config.hpp"
#include "pushlab/metrics.hpp"
#include "pushlab/report.hpp"

using namespace pushlab;
using nlohmann::json;

namespace {

std::string temp_path(const char* name) { return std::string("/tmp/") + name; }

// Two disks, two steps: disk 1 travels 0.1 m with a 5 mm prediction miss and a
// wrapped rotation error; disk 2 never moves.
void toy_eval_case(data::Dataset& ds, std::vector<Eigen::MatrixXd>& pred) {
  ds.n_disks = 2;
  data::TrajectoryRecord rec;
  rec.scene.masses = {1.0, 1.0};
  rec.scene.radii = {0.05, 0.05};
  rec.states = Eigen::MatrixXd::Zero(3, 16);
  rec.actions = Eigen::MatrixXd::Zero(2, 2);
  for (int t = 0; t <= 2; ++t) {
    rec.states(t, 0) = 0.05 * t;      // disk 1 x: 0 -> 0.1
    rec.states(t, 2) = 3.0;           // disk 1 theta
    rec.states(t, 6) = 0.2;           // disk 2 parked
  }
  ds.trajectories.push_back(rec);

  Eigen::MatrixXd p = rec.states.leftCols(12);
  p(2, 0) = 0.095;                    // 5 mm short
  p(2, 2) = 3.1 - 2.0 * kPi;          // off by 0.1 rad, reported wrapped
  pred.assign(1, p);
}

data::Dataset nominal_world_dataset(int count, std::uint64_t seed) {
  data::SceneSpec scene;
  scene.fixed_masses = {0.896, 1.1};
  scene.fixed_radii = {0.0525, 0.058};
  scene.fixed_mu = 0.15;
  data::PushSpec push;
  push.setup = data::PushSpec::Setup::kPositionControl;
  push.duration = 0.25;
  push.push_speed = 0.05;
  sim::SimConfig cfg;
  sim::NominalSpec nominal;
  data::SurrogateRealSpec sur;
  return data::generate_dataset(scene, push, cfg, nominal, sur, count, seed, 30);
}

}  // namespace

TEST_CASE("translation percentage and wrapped rotation error") {
  data::Dataset ds;
  std::vector<Eigen::MatrixXd> pred;
  toy_eval_case(ds, pred);

  const auto rep = eval::compute_metrics("physics", pred, ds, 2);
  REQUIRE(rep.objects.size() == 2);
  CHECK(rep.model == "physics");
  CHECK(rep.horizon == 2);

  CHECK(rep.objects[0].pos_mm == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(rep.objects[0].trans_pct == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(rep.objects[0].rot_deg == doctest::Approx(0.1 * 180.0 / kPi).epsilon(1e-9));
  CHECK(rep.objects[0].n_total == 1);
  CHECK(rep.objects[0].n_trans == 1);

  // The parked disk contributes no relative-translation sample.
  CHECK(rep.objects[1].n_total == 1);
  CHECK(rep.objects[1].n_trans == 0);
  CHECK(rep.objects[1].trans_pct == 0.0);
  CHECK(rep.objects[1].pos_mm == 0.0);
}

TEST_CASE("metrics CSV bytes are pinned") {
  eval::MetricsReport rep;
  rep.model = "sain";
  rep.horizon = 200;
  rep.objects.resize(2);
  rep.objects[0] = {1.25, 0.5, 0.125, 10, 9};
  rep.objects[1] = {12.5, 3.0625, 1.0, 10, 10};

  const std::string csv = report::metrics_csv({rep});
  CHECK(csv ==
        "model,object,trans_pct,pos_mm,rot_deg\n"
        "sain,1,1.250000,0.500000,0.125000\n"
        "sain,2,12.500000,3.062500,1.000000\n");
}

TEST_CASE("metrics and control reports round trip through json") {
  eval::MetricsReport rep;
  rep.model = "in";
  rep.horizon = 60;
  rep.objects.resize(1);
  rep.objects[0] = {7.5, 2.25, 0.75, 4, 3};
  const auto back = report::metrics_report_from_json(report::metrics_json(rep));
  CHECK(back.model == rep.model);
  CHECK(back.horizon == rep.horizon);
  REQUIRE(back.objects.size() == 1);
  CHECK(back.objects[0].trans_pct == rep.objects[0].trans_pct);
  CHECK(back.objects[0].pos_mm == rep.objects[0].pos_mm);
  CHECK(back.objects[0].n_trans == rep.objects[0].n_trans);

  eval::ControlReport ctl;
  ctl.model = "sain";
  ctl.world = "matched";
  ctl.n_easy = 1;
  ctl.n_hard = 1;
  ctl.easy_success = 1;
  eval::EpisodeOutcome ep;
  ep.index = 4;
  ep.hard = true;
  ep.success = false;
  ep.actions_used = 2;
  ep.final_distance = 0.0123;
  ep.goal.position = Vec2(0.3, -0.05);
  ep.goal.tolerance = 0.0059;
  ep.disk1_path = (Eigen::MatrixXd(3, 2) << 0, 0, 0.01, 0, 0.02, 0.001).finished();
  ep.disk2_path = (Eigen::MatrixXd(3, 2) << 0.1, 0, 0.11, 0, 0.12, 0.002).finished();
  ep.radii = {0.054, 0.059};
  ctl.episodes.push_back(ep);

  const auto cback = report::control_report_from_json(report::control_json(ctl));
  CHECK(cback.model == ctl.model);
  CHECK(cback.world == ctl.world);
  CHECK(cback.easy_success == 1);
  REQUIRE(cback.episodes.size() == 1);
  CHECK(cback.episodes[0].hard);
  CHECK(cback.episodes[0].goal.position.y() == -0.05);
  CHECK(cback.episodes[0].disk2_path == ep.disk2_path);
  CHECK(cback.episodes[0].radii == ep.radii);
}

TEST_CASE("episode drawings carry the expected elements") {
  eval::EpisodeOutcome ep;
  ep.index = 3;
  ep.hard = true;
  ep.success = true;
  ep.actions_used = 2;
  ep.goal.position = Vec2(0.25, 0.01);
  ep.goal.tolerance = 0.0059;
  ep.disk1_path = (Eigen::MatrixXd(3, 2) << 0, 0, 0.01, 0, 0.02, 0.001).finished();
  ep.disk2_path = (Eigen::MatrixXd(3, 2) << 0.11, 0, 0.12, 0, 0.13, 0.002).finished();
  ep.radii = {0.054, 0.059};

  CHECK(report::episode_filename(ep) == "episode_3_hard.svg");
  ep.hard = false;
  CHECK(report::episode_filename(ep) == "episode_3_easy.svg");

  const std::string svg = report::episode_svg(ep);
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("viewBox") != std::string::npos);
  CHECK(svg.find("stroke-dasharray") != std::string::npos);  // initial outlines
  CHECK(svg.find("polyline") != std::string::npos);          // disk 2 path
  CHECK(svg.find("#3aa053") != std::string::npos);           // goal marker
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("fnv1a matches its published test vectors") {
  const std::string empty = temp_path("pushlab_fnv_empty");
  const std::string one = temp_path("pushlab_fnv_a");
  report::write_text(empty, "");
  report::write_text(one, "a");
  CHECK(report::fnv1a_file(empty) == 0xcbf29ce484222325ULL);
  CHECK(report::fnv1a_file(one) == 0xaf63dc4c8601ec8cULL);
  CHECK(report::fnv1a_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
  CHECK(report::fnv1a_hex(0x42ULL) == "0000000000000042");
  CHECK_THROWS_AS(report::fnv1a_file("/tmp/pushlab_no_such_file"), std::runtime_error);
  std::remove(empty.c_str());
  std::remove(one.c_str());
}

TEST_CASE("run configs parse strictly and patch partially") {
  cli::RunConfig defaults;
  json j = defaults;
  const cli::RunConfig back = cli::parse_run_config(j);
  const json echoed = back;
  CHECK(echoed == j);

  const cli::RunConfig patched = cli::parse_run_config(json{
      {"count", 5},
      {"model_kind", "in"},
      {"train", {{"iterations", 7}, {"batch_size", 2}}},
      {"push", {{"setup", "position_control"}}},
  });
  CHECK(patched.count == 5);
  CHECK(patched.model_kind == "in");
  CHECK(patched.train.iterations == 7);
  CHECK(patched.train.batch_size == 2);
  CHECK(patched.train.lr0 == 1e-3);  // untouched keys keep defaults
  CHECK(patched.push.setup == data::PushSpec::Setup::kPositionControl);
  CHECK(patched.horizon == 200);

  CHECK_THROWS_AS(cli::parse_run_config(json{{"bogus", 1}}), std::runtime_error);
  CHECK_THROWS_AS(cli::parse_run_config(json{{"train", {{"bogus", 1}}}}), std::runtime_error);
  CHECK_THROWS_AS(cli::parse_run_config(json{{"model_kind", "mlp"}}), std::runtime_error);
  CHECK_THROWS_AS(cli::parse_run_config(json{{"world", "mars"}}), std::runtime_error);
  CHECK_THROWS_AS(cli::parse_run_config(json{{"threads", 0}}), std::runtime_error);
  CHECK_THROWS_AS(cli::parse_run_config(json{{"count", -3}}), std::runtime_error);

  plan::PlannerConfig pc;
  pc.queue_capacity = 99;
  json pj = pc;
  plan::PlannerConfig pback = pj.get<plan::PlannerConfig>();
  CHECK(pback.queue_capacity == 99);
  CHECK(pback.n_theta == pc.n_theta);
}

TEST_CASE("the engine predicts its own data exactly") {
  const data::Dataset ds = nominal_world_dataset(3, 97);
  eval::PredictorRef physics;
  const auto rep = eval::eval_prediction(physics, ds, ds.steps());
  for (const auto& o : rep.objects) {
    CHECK(o.pos_mm <= 1e-9);
    CHECK(o.rot_deg <= 1e-9);
  }
}

TEST_CASE("prediction metrics ignore the worker count") {
  const data::Dataset ds = nominal_world_dataset(4, 101);
  model::ModelParams params = model::make_model(model::ModelKind::kSain, 7);
  eval::PredictorRef ref;
  ref.kind = eval::PredictorRef::Kind::kSain;
  ref.params = &params;

  const auto a = eval::eval_prediction(ref, ds, 30, 1);
  const auto b = eval::eval_prediction(ref, ds, 30, 3);
  REQUIRE(a.objects.size() == b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    CHECK(a.objects[i].pos_mm == b.objects[i].pos_mm);
    CHECK(a.objects[i].rot_deg == b.objects[i].rot_deg);
    CHECK(a.objects[i].trans_pct == b.objects[i].trans_pct);
  }
  CHECK(report::metrics_csv({a}) == report::metrics_csv({b}));

  // Mismatched checkpoint kinds are refused.
  eval::PredictorRef wrong;
  wrong.kind = eval::PredictorRef::Kind::kIn;
  wrong.params = &params;
  CHECK_THROWS_AS(eval::eval_prediction(wrong, ds, 30), std::runtime_error);
}

TEST_CASE("checkpoints restore parameters bit for bit") {
  model::ModelParams params = model::make_model(model::ModelKind::kSain, 11);
  params.codec.rel_in.mean.setConstant(0.25);
  params.codec.dyn_out.std.setConstant(2.0);
  params.nominal.mu = 0.17;

  nn::TrainConfig train;
  train.iterations = 1234;
  const std::string path = temp_path("pushlab_ckpt.bin");
  model::save_checkpoint(path, params, train, json{{"note", "unit"}});

  json meta;
  const model::ModelParams back = model::load_checkpoint(path, &meta);
  CHECK(back.kind == model::ModelKind::kSain);
  CHECK(back.to_flat() == params.to_flat());
  CHECK(back.codec.rel_in.mean == params.codec.rel_in.mean);
  CHECK(back.codec.dyn_out.std == params.codec.dyn_out.std);
  CHECK(back.nominal.mu == 0.17);
  CHECK(meta["train"]["iterations"] == 1234);
  CHECK(meta["extra"]["note"] == "unit");
  CHECK(meta["kind"] == "sain");

  // Damage is detected, and the message names the offending file.
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    report::write_text(path, bytes.substr(0, bytes.size() - 64));
  }
  CHECK_THROWS_WITH_AS(model::load_checkpoint(path), doctest::Contains("pushlab_ckpt.bin"),
                       std::runtime_error);
  report::write_text(path, "not a checkpoint at all");
  CHECK_THROWS_AS(model::load_checkpoint(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(model::load_checkpoint(path), std::runtime_error);
}

TEST_CASE("control worlds expose their advertised knobs") {
  const eval::ControlWorld m = eval::matched_control_world();
  CHECK(m.name == "matched");
  CHECK(m.scene.fixed_masses == std::vector<double>{0.9, 1.0});
  CHECK(m.scene.fixed_radii == std::vector<double>{0.054, 0.059});
  CHECK(m.scene.fixed_mu == 0.15);
  CHECK(m.surface.mode == sim::SurfaceModel::Mode::kUniform);
  CHECK(!m.obs.noisy);

  data::SurrogateRealSpec spec;
  const eval::ControlWorld s1 = eval::surrogate_control_world(spec, 42);
  const eval::ControlWorld s2 = eval::surrogate_control_world(spec, 42);
  const eval::ControlWorld s3 = eval::surrogate_control_world(spec, 43);
  CHECK(s1.name == "surrogate");
  CHECK(s1.surface.mode == sim::SurfaceModel::Mode::kSpatialField);
  CHECK(s1.cfg.contact_mu == doctest::Approx(0.5 * 1.3).epsilon(1e-12));
  CHECK(s1.obs.noisy);
  CHECK(s1.surface.field.values == s2.surface.field.values);  // the seed is the identity
  CHECK(s1.surface.field.values != s3.surface.field.values);
}

TEST_CASE("control episodes are reproducible across worker counts") {
  const eval::ControlWorld world = eval::matched_control_world();
  const plan::PhysicsForward model{sim::NominalSpec{}};
  plan::PlannerConfig cfg;

  const auto a = eval::eval_control(model, "physics", world, cfg, 1, 1, 5, 1);
  const auto b = eval::eval_control(model, "physics", world, cfg, 1, 1, 5, 2);
  CHECK(a.model == "physics");
  CHECK(a.world == "matched");
  CHECK(a.n_easy == 1);
  CHECK(a.n_hard == 1);
  REQUIRE(a.episodes.size() == 2);
  REQUIRE(b.episodes.size() == 2);
  CHECK(!a.episodes[0].hard);
  CHECK(a.episodes[1].hard);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.episodes[i].success == b.episodes[i].success);
    CHECK(a.episodes[i].actions_used == b.episodes[i].actions_used);
    CHECK(a.episodes[i].final_distance == b.episodes[i].final_distance);
    CHECK(a.episodes[i].disk2_path == b.episodes[i].disk2_path);
    CHECK(a.episodes[i].disk1_path.rows() == a.episodes[i].actions_used + 1);
    CHECK(a.episodes[i].radii == std::vector<double>{0.054, 0.059});
  }
  CHECK(a.easy_success == b.easy_success);
  CHECK(a.hard_success == b.hard_success);
}
