#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pushlab/jsonio.hpp"
#include "pushlab/planner.hpp"
#include "pushlab/scenario.hpp"

namespace pushlab::cli {

// One JSON document drives every subcommand; unknown keys are rejected and
// omitted keys keep their defaults. Units are fixed (m, rad, s, kg).
struct RunConfig {
  // artifact paths
  std::string dataset;                        // JSONL dataset (gen-data writes, others read)
  std::string checkpoint;                     // model file (train writes, eval reads)
  std::string base_checkpoint;                // fine-tune starting point
  std::vector<std::string> eval_checkpoints;  // models compared by eval-pred
  std::string out_dir = "out";

  // data generation
  data::SceneSpec scene;
  data::PushSpec push;
  data::SurrogateRealSpec surrogate;
  sim::SimConfig sim;
  sim::NominalSpec nominal;
  int count = 200;
  int segment_length = 200;

  // training
  std::string model_kind = "sain";  // "in" | "sain"
  nn::TrainConfig train;

  // evaluation
  int horizon = 200;
  plan::PlannerConfig planner;
  int n_easy = 25;
  int n_hard = 25;
  std::string world = "matched";  // "matched" | "surrogate"
  std::uint64_t world_seed = 0;   // surrogate world's friction field identity

  std::uint64_t seed = 1;
  int threads = 1;
};

void to_json(nlohmann::json& j, const RunConfig& c);

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace pushlab::cli

namespace pushlab::plan {
void to_json(nlohmann::json& j, const PlannerConfig& c);
void from_json(const nlohmann::json& j, PlannerConfig& c);
}
