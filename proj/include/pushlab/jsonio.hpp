#pragma once

#include <nlohmann/json.hpp>

#include "pushlab/nn.hpp"
#include "pushlab/scenario.hpp"
#include "pushlab/sim.hpp"

// ADL serializers shared by dataset files, checkpoints, and run reports.

namespace pushlab::sim {

void to_json(nlohmann::json& j, const SimConfig& c);
void from_json(const nlohmann::json& j, SimConfig& c);
void to_json(nlohmann::json& j, const NominalSpec& n);
void from_json(const nlohmann::json& j, NominalSpec& n);
void to_json(nlohmann::json& j, const MuField& f);
void from_json(const nlohmann::json& j, MuField& f);
void to_json(nlohmann::json& j, const SurfaceModel& s);
void from_json(const nlohmann::json& j, SurfaceModel& s);

}  // namespace pushlab::sim

namespace pushlab::nn {

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace pushlab::nn

namespace pushlab::data {

void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
void to_json(nlohmann::json& j, const PushSpec& p);
void from_json(const nlohmann::json& j, PushSpec& p);
void to_json(nlohmann::json& j, const SurrogateRealSpec& s);
void from_json(const nlohmann::json& j, SurrogateRealSpec& s);
void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);

}  // namespace pushlab::data

namespace pushlab {

// Row-major nested arrays <-> Eigen. expected_cols < 0 skips the width check.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, long expected_cols = -1);

}  // namespace pushlab
