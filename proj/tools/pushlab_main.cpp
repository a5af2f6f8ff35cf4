#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pushlab/checkpoint.hpp"
#include "pushlab/config.hpp"
#include "pushlab/metrics.hpp"
#include "pushlab/models.hpp"
#include "pushlab/report.hpp"

namespace fs = std::filesystem;

namespace pushlab::cli {
namespace {

std::string ensure_parent(const std::string& path) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  return path;
}

std::string out_path(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out_dir);
  return (fs::path(c.out_dir) / name).string();
}

std::string dataset_path(const RunConfig& c) {
  return c.dataset.empty() ? (fs::path(c.out_dir) / "dataset.jsonl").string() : c.dataset;
}

std::string checkpoint_path(const RunConfig& c) {
  return c.checkpoint.empty()
             ? (fs::path(c.out_dir) / ("model_" + c.model_kind + ".ckpt")).string()
             : c.checkpoint;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  report::write_text(path, j.dump(2) + "\n");
}

nlohmann::json config_echo(const RunConfig& c, const std::string& command) {
  nlohmann::json j = c;
  return {{"command", command}, {"config", j}};
}

void print_progress(const char* tag, int iteration, int total, double objective) {
  std::printf("%s iter %d/%d objective %.6e\n", tag, iteration, total, objective);
  std::fflush(stdout);
}

int cmd_gen_data(const RunConfig& c) {
  const data::Dataset ds =
      data::generate_dataset(c.scene, c.push, c.sim, c.nominal, c.surrogate, c.count, c.seed,
                             c.segment_length, c.threads);
  const std::string path = ensure_parent(dataset_path(c));
  data::save_dataset(ds, path);
  std::printf("dataset %s: %d trajectories x %d steps, %s%s, fnv1a %s\n", path.c_str(),
              static_cast<int>(ds.trajectories.size()), ds.steps(), ds.setup.c_str(),
              ds.surrogate ? " (surrogate)" : "",
              report::fnv1a_hex(report::fnv1a_file(path)).c_str());
  return 0;
}

int run_fit(const RunConfig& c, bool fresh) {
  require(c.threads == 1, "training is single-threaded; --threads applies to generation and "
                          "evaluation commands");
  const std::string ds_path = dataset_path(c);
  const data::Dataset ds = data::load_dataset(ds_path);

  model::TrainResult res;
  std::string kind_name;
  const char* tag = fresh ? "train" : "fine-tune";
  auto progress = [&](int it, double obj) {
    print_progress(tag, it, c.train.iterations, obj);
  };
  if (fresh) {
    const auto kind = c.model_kind == "in" ? model::ModelKind::kIn : model::ModelKind::kSain;
    res = model::train(kind, ds, c.train, progress);
    kind_name = c.model_kind;
  } else {
    require(!c.base_checkpoint.empty(), "fine-tune: base_checkpoint required");
    const model::ModelParams base = model::load_checkpoint(c.base_checkpoint);
    res = model::fine_tune(base, ds, c.train, progress);
    kind_name = model::kind_tag(res.params.kind);
  }

  const std::string ckpt = ensure_parent(checkpoint_path(c));
  const std::string ds_hash = report::fnv1a_hex(report::fnv1a_file(ds_path));
  nlohmann::json extra = {{"command", tag},
                          {"dataset", ds_path},
                          {"dataset_hash", ds_hash},
                          {"iterations_run", res.iterations_run},
                          {"diverged", res.diverged}};
  if (!fresh) {
    extra["base_checkpoint"] = c.base_checkpoint;
    extra["base_checkpoint_hash"] = report::fnv1a_hex(report::fnv1a_file(c.base_checkpoint));
  }
  model::save_checkpoint(ckpt, res.params, c.train, extra);

  nlohmann::json summary = config_echo(c, tag);
  summary["dataset"] = ds_path;
  summary["dataset_hash"] = ds_hash;
  summary["checkpoint"] = ckpt;
  summary["checkpoint_hash"] = report::fnv1a_hex(report::fnv1a_file(ckpt));
  summary["model_kind"] = kind_name;
  summary["iterations_run"] = res.iterations_run;
  summary["diverged"] = res.diverged;
  summary["final_objective"] = res.loss_curve.empty() ? 0.0 : res.loss_curve.back();
  summary["loss_curve"] = res.loss_curve;
  write_json(out_path(c, std::string(fresh ? "train_" : "finetune_") + kind_name + ".json"),
             summary);

  std::printf("%s %s: %d iterations, objective %.6e%s -> %s\n", tag, kind_name.c_str(),
              res.iterations_run, res.loss_curve.empty() ? 0.0 : res.loss_curve.back(),
              res.diverged ? " (diverged, snapshot kept)" : "", ckpt.c_str());
  return res.diverged ? 2 : 0;
}

int cmd_eval_pred(const RunConfig& c) {
  const std::string ds_path = dataset_path(c);
  const data::Dataset ds = data::load_dataset(ds_path);

  struct Entry {
    std::string name, path, hash;
  };
  std::vector<Entry> entries;
  std::vector<eval::MetricsReport> reports;
  std::vector<model::ModelParams> loaded;
  loaded.reserve(c.eval_checkpoints.size());

  eval::PredictorRef physics;
  physics.kind = eval::PredictorRef::Kind::kPhysics;
  physics.nominal = c.nominal;
  reports.push_back(eval::eval_prediction(physics, ds, c.horizon, c.threads));
  entries.push_back({"physics", "", ""});

  for (const auto& path : c.eval_checkpoints) {
    loaded.push_back(model::load_checkpoint(path));
    const auto& params = loaded.back();
    eval::PredictorRef ref;
    ref.kind = params.kind == model::ModelKind::kIn ? eval::PredictorRef::Kind::kIn
                                                    : eval::PredictorRef::Kind::kSain;
    ref.params = &params;
    reports.push_back(eval::eval_prediction(ref, ds, c.horizon, c.threads));
    entries.push_back({ref.name(), path, report::fnv1a_hex(report::fnv1a_file(path))});
  }

  const std::string csv = report::metrics_csv(reports);
  report::write_text(out_path(c, "metrics.csv"), csv);

  nlohmann::json j = config_echo(c, "eval-pred");
  j["dataset"] = ds_path;
  j["dataset_hash"] = report::fnv1a_hex(report::fnv1a_file(ds_path));
  nlohmann::json models = nlohmann::json::array();
  for (const auto& e : entries)
    models.push_back({{"model", e.name}, {"checkpoint", e.path}, {"checkpoint_hash", e.hash}});
  j["models"] = models;
  nlohmann::json blobs = nlohmann::json::array();
  for (const auto& rep : reports) blobs.push_back(report::metrics_json(rep));
  j["metrics"] = blobs;
  write_json(out_path(c, "report.json"), j);

  std::fputs(csv.c_str(), stdout);
  return 0;
}

int cmd_eval_control(const RunConfig& c) {
  const eval::ControlWorld world = c.world == "matched"
                                       ? eval::matched_control_world()
                                       : eval::surrogate_control_world(c.surrogate, c.world_seed);

  std::optional<model::ModelParams> params;
  std::unique_ptr<plan::ForwardModel> model;
  std::string name = "physics", ckpt_hash;
  if (c.checkpoint.empty()) {
    model = std::make_unique<plan::PhysicsForward>(c.nominal);
  } else {
    params = model::load_checkpoint(c.checkpoint);
    model = std::make_unique<plan::LearnedForward>(*params);
    name = model::kind_tag(params->kind);
    ckpt_hash = report::fnv1a_hex(report::fnv1a_file(c.checkpoint));
  }

  const eval::ControlReport rep =
      eval::eval_control(*model, name, world, c.planner, c.n_easy, c.n_hard, c.seed, c.threads);

  nlohmann::json j = config_echo(c, "eval-control");
  j["checkpoint"] = c.checkpoint;
  j["checkpoint_hash"] = ckpt_hash;
  j["results"] = report::control_json(rep);
  write_json(out_path(c, "control.json"), j);
  for (const auto& ep : rep.episodes)
    report::write_text(out_path(c, report::episode_filename(ep)), report::episode_svg(ep));

  std::printf("control %s on %s world: easy %d/%d, hard %d/%d\n", rep.model.c_str(),
              rep.world.c_str(), rep.easy_success, rep.n_easy, rep.hard_success, rep.n_hard);
  return 0;
}

int cmd_report(const RunConfig& c) {
  bool produced = false;
  const fs::path dir(c.out_dir);

  const fs::path rp = dir / "report.json";
  if (fs::exists(rp)) {
    std::ifstream in(rp);
    nlohmann::json j = nlohmann::json::parse(in);
    std::vector<eval::MetricsReport> reports;
    for (const auto& blob : j.at("metrics")) reports.push_back(report::metrics_report_from_json(blob));
    report::write_text((dir / "metrics.csv").string(), report::metrics_csv(reports));
    std::printf("rebuilt %s from %s\n", (dir / "metrics.csv").string().c_str(),
                rp.string().c_str());
    produced = true;
  }

  const fs::path cp = dir / "control.json";
  if (fs::exists(cp)) {
    std::ifstream in(cp);
    nlohmann::json j = nlohmann::json::parse(in);
    const eval::ControlReport rep = report::control_report_from_json(j.at("results"));
    for (const auto& ep : rep.episodes)
      report::write_text((dir / report::episode_filename(ep)).string(), report::episode_svg(ep));
    std::printf("rebuilt %d episode plots from %s (easy %d/%d, hard %d/%d)\n",
                static_cast<int>(rep.episodes.size()), cp.string().c_str(), rep.easy_success,
                rep.n_easy, rep.hard_success, rep.n_hard);
    produced = true;
  }

  require(produced, "report: no report.json or control.json under " + c.out_dir);
  return 0;
}

}  // namespace
}  // namespace pushlab::cli

int main(int argc, char** argv) {
  CLI::App app{"planar pushing dynamics lab: datasets, models, and a pushing controller"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "override the run seed (and training seed)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (generation/evaluation only)");
    return sub;
  };

  auto* gen = add_common(app.add_subcommand("gen-data", "generate a pushing dataset"));
  auto* train = add_common(app.add_subcommand("train", "train a model on a dataset"));
  auto* tune = add_common(app.add_subcommand("fine-tune", "continue training from a checkpoint"));
  auto* epred = add_common(app.add_subcommand("eval-pred", "forward-prediction error tables"));
  auto* econtrol = add_common(app.add_subcommand("eval-control", "closed-loop pushing benchmark"));
  auto* report = add_common(app.add_subcommand("report", "rebuild CSV/SVG artifacts from results"));

  CLI11_PARSE(app, argc, argv);

  try {
    pushlab::cli::RunConfig c;
    if (!config_path.empty()) c = pushlab::cli::load_run_config(config_path);
    CLI::App* sub = app.get_subcommands().front();
    if (sub->count("--seed")) {
      c.seed = seed;
      c.train.seed = seed;
    }
    if (sub->count("--out")) c.out_dir = out_dir;
    if (sub->count("--threads")) c.threads = threads;

    if (sub == gen) return pushlab::cli::cmd_gen_data(c);
    if (sub == train) return pushlab::cli::run_fit(c, true);
    if (sub == tune) return pushlab::cli::run_fit(c, false);
    if (sub == epred) return pushlab::cli::cmd_eval_pred(c);
    if (sub == econtrol) return pushlab::cli::cmd_eval_control(c);
    if (sub == report) return pushlab::cli::cmd_report(c);
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
