#include "pushlab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "pushlab/jsonio.hpp"

namespace pushlab::model {

namespace {

constexpr char kMagic[8] = {'P', 'U', 'S', 'H', 'C', 'K', 'P', '1'};

nlohmann::json standardizer_to_json(const nn::Standardizer& s) {
  std::vector<double> mean(s.mean.data(), s.mean.data() + s.mean.size());
  std::vector<double> std(s.std.data(), s.std.data() + s.std.size());
  return {{"mean", mean}, {"std", std}};
}

nn::Standardizer standardizer_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto std = j.at("std").get<std::vector<double>>();
  require(mean.size() == std.size() && !mean.empty(), "checkpoint: bad standardizer");
  nn::Standardizer s;
  s.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  s.std = Eigen::Map<const Eigen::VectorXd>(std.data(), std.size());
  for (double v : std) require(v > 0.0, "checkpoint: non-positive feature std");
  return s;
}

std::vector<int> mlp_dims(const nn::Mlp& m) {
  std::vector<int> dims{m.in_dim()};
  for (const auto& W : m.W) dims.push_back(static_cast<int>(W.rows()));
  return dims;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const nn::TrainConfig& train_echo, const nlohmann::json& extra) {
  nlohmann::json header = {{"kind", kind_tag(params.kind)},
                           {"dims_rel", mlp_dims(params.f_rel)},
                           {"dims_dyn", mlp_dims(params.f_dyn)},
                           {"param_count", params.param_count()},
                           {"codec",
                            {{"rel_in", standardizer_to_json(params.codec.rel_in)},
                             {"dyn_in", standardizer_to_json(params.codec.dyn_in)},
                             {"dyn_out", standardizer_to_json(params.codec.dyn_out)}}},
                           {"nominal", params.nominal},
                           {"train", train_echo},
                           {"extra", extra}};
  const std::string head = header.dump();
  require(head.size() < (1u << 30), "checkpoint: header too large");

  std::ofstream out(path, std::ios::binary);
  require(out.good(), "checkpoint: cannot open " + path + " for writing");
  out.write(kMagic, sizeof(kMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  const Eigen::VectorXd flat = params.to_flat();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  require(out.good(), "checkpoint: write failed for " + path);
}

ModelParams load_checkpoint(const std::string& path, nlohmann::json* meta) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  require(in.gcount() == sizeof(magic) && std::memcmp(magic, kMagic, sizeof(magic)) == 0,
          "checkpoint: " + path + " is not a model checkpoint");
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  require(in.gcount() == sizeof(len), "checkpoint " + path + ": truncated header length");
  std::string head(len, '\0');
  in.read(head.data(), len);
  require(in.gcount() == static_cast<std::streamsize>(len),
          "checkpoint " + path + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(head);
  } catch (const std::exception& e) {
    fail("checkpoint " + path + ": bad header: " + e.what());
  }

  ModelParams params;
  const std::string kind = header.at("kind").get<std::string>();
  require(kind == "in" || kind == "sain", "checkpoint " + path + ": unknown model kind " + kind);
  params.kind = kind == "in" ? ModelKind::kIn : ModelKind::kSain;

  const auto dims_rel = header.at("dims_rel").get<std::vector<int>>();
  const auto dims_dyn = header.at("dims_dyn").get<std::vector<int>>();
  require(dims_rel.size() >= 2 && dims_dyn.size() >= 2,
          "checkpoint " + path + ": bad layer dims");
  Rng dummy(0);
  params.f_rel = nn::make_mlp(dims_rel, dummy);
  params.f_dyn = nn::make_mlp(dims_dyn, dummy);
  require(params.f_rel.in_dim() == rel_width(params.kind) &&
              params.f_dyn.in_dim() == dyn_width(params.kind),
          "checkpoint " + path + ": layer widths inconsistent with model kind");

  params.codec.kind = params.kind;
  params.codec.rel_in = standardizer_from_json(header.at("codec").at("rel_in"));
  params.codec.dyn_in = standardizer_from_json(header.at("codec").at("dyn_in"));
  params.codec.dyn_out = standardizer_from_json(header.at("codec").at("dyn_out"));
  require(params.codec.rel_in.size() == rel_width(params.kind) &&
              params.codec.dyn_in.size() == dyn_width(params.kind) &&
              params.codec.dyn_out.size() == kDynOutWidth,
          "checkpoint " + path + ": codec widths inconsistent with model kind");
  header.at("nominal").get_to(params.nominal);

  const int expect = header.at("param_count").get<int>();
  require(expect == params.param_count(), "checkpoint " + path + ": parameter count mismatch");
  Eigen::VectorXd flat(expect);
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(flat.size() * sizeof(double)));
  require(in.gcount() == static_cast<std::streamsize>(flat.size() * sizeof(double)),
          "checkpoint " + path + ": truncated parameter blob");
  require(flat.allFinite(), "checkpoint " + path + ": non-finite parameters");
  params.from_flat(flat);

  if (meta) *meta = std::move(header);
  return params;
}

}  // namespace pushlab::model
