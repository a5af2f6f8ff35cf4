#include "pushlab/config.hpp"

#include <fstream>

namespace pushlab::plan {

void to_json(nlohmann::json& j, const PlannerConfig& c) {
  j = {{"n_theta", c.n_theta},
       {"n_alpha", c.n_alpha},
       {"theta_range", c.theta_range},
       {"alpha_range", c.alpha_range},
       {"push_length", c.push_length},
       {"push_speed", c.push_speed},
       {"horizon_near", c.horizon_near},
       {"horizon_far", c.horizon_far},
       {"switch_distance", c.switch_distance},
       {"max_episode_actions", c.max_episode_actions},
       {"queue_capacity", c.queue_capacity}};
}

void from_json(const nlohmann::json& j, PlannerConfig& c) {
  j.at("n_theta").get_to(c.n_theta);
  j.at("n_alpha").get_to(c.n_alpha);
  j.at("theta_range").get_to(c.theta_range);
  j.at("alpha_range").get_to(c.alpha_range);
  j.at("push_length").get_to(c.push_length);
  j.at("push_speed").get_to(c.push_speed);
  j.at("horizon_near").get_to(c.horizon_near);
  j.at("horizon_far").get_to(c.horizon_far);
  j.at("switch_distance").get_to(c.switch_distance);
  j.at("max_episode_actions").get_to(c.max_episode_actions);
  j.at("queue_capacity").get_to(c.queue_capacity);
}

}  // namespace pushlab::plan

namespace pushlab::cli {

namespace {

// Patches a struct field from a partial JSON object: present keys override, the
// rest keep their current values, unknown keys are typos and rejected.
template <typename T>
void patch(const nlohmann::json& j, const char* key, T& field) {
  if (!j.contains(key)) return;
  const nlohmann::json& in = j.at(key);
  require(in.is_object(), std::string("config: ") + key + " must be an object");
  nlohmann::json cur = field;
  for (const auto& [k, v] : in.items()) {
    require(cur.contains(k), std::string("config: unknown key ") + key + "." + k);
    cur[k] = v;
  }
  field = cur.template get<T>();
}

template <typename T>
void assign(const nlohmann::json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"dataset", c.dataset},
       {"checkpoint", c.checkpoint},
       {"base_checkpoint", c.base_checkpoint},
       {"eval_checkpoints", c.eval_checkpoints},
       {"out_dir", c.out_dir},
       {"scene", c.scene},
       {"push", c.push},
       {"surrogate", c.surrogate},
       {"sim", c.sim},
       {"nominal", c.nominal},
       {"count", c.count},
       {"segment_length", c.segment_length},
       {"model_kind", c.model_kind},
       {"train", c.train},
       {"horizon", c.horizon},
       {"planner", c.planner},
       {"n_easy", c.n_easy},
       {"n_hard", c.n_hard},
       {"world", c.world},
       {"world_seed", c.world_seed},
       {"seed", c.seed},
       {"threads", c.threads}};
}

RunConfig parse_run_config(const nlohmann::json& j) {
  require(j.is_object(), "config: root must be a JSON object");
  RunConfig c;
  static const char* known[] = {"dataset",     "checkpoint", "base_checkpoint",
                                "eval_checkpoints", "out_dir",    "scene",
                                "push",        "surrogate",  "sim",
                                "nominal",     "count",      "segment_length",
                                "model_kind",  "train",      "horizon",
                                "planner",     "n_easy",     "n_hard",
                                "world",       "world_seed", "seed",
                                "threads"};
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    require(ok, "config: unknown key " + k);
  }

  assign(j, "dataset", c.dataset);
  assign(j, "checkpoint", c.checkpoint);
  assign(j, "base_checkpoint", c.base_checkpoint);
  assign(j, "eval_checkpoints", c.eval_checkpoints);
  assign(j, "out_dir", c.out_dir);
  patch(j, "scene", c.scene);
  patch(j, "push", c.push);
  patch(j, "surrogate", c.surrogate);
  patch(j, "sim", c.sim);
  patch(j, "nominal", c.nominal);
  assign(j, "count", c.count);
  assign(j, "segment_length", c.segment_length);
  assign(j, "model_kind", c.model_kind);
  patch(j, "train", c.train);
  assign(j, "horizon", c.horizon);
  patch(j, "planner", c.planner);
  assign(j, "n_easy", c.n_easy);
  assign(j, "n_hard", c.n_hard);
  assign(j, "world", c.world);
  assign(j, "world_seed", c.world_seed);
  assign(j, "seed", c.seed);
  assign(j, "threads", c.threads);

  require(c.model_kind == "in" || c.model_kind == "sain", "config: model_kind must be in|sain");
  require(c.world == "matched" || c.world == "surrogate",
          "config: world must be matched|surrogate");
  require(c.count > 0 && c.segment_length > 0 && c.horizon > 0, "config: counts must be positive");
  require(c.threads >= 1, "config: threads must be >= 1");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "config: cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    fail("config " + path + ": " + e.what());
  }
  return parse_run_config(j);
}

}  // namespace pushlab::cli
