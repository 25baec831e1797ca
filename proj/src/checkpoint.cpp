#include "pasta/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pasta/error.hpp"

namespace pasta {

using json = nlohmann::ordered_json;

ModelConfig CheckpointMeta::model_config() const {
  ModelConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.channels = static_cast<std::size_t>(t_closeness + t_periodic + t_trend);
  cfg.dext = dext;
  cfg.demb = demb;
  return cfg;
}

FragmentSpec CheckpointMeta::fragments() const {
  FragmentSpec spec;
  spec.t_closeness = t_closeness;
  spec.t_periodic = t_periodic;
  spec.t_trend = t_trend;
  return spec;
}

std::string serialize_checkpoint(const ParameterSet& params, const CheckpointMeta& meta) {
  json doc;
  doc["metadata"] = {
      {"n", meta.n},
      {"m", meta.m},
      {"t_closeness", meta.t_closeness},
      {"t_periodic", meta.t_periodic},
      {"t_trend", meta.t_trend},
      {"interval_minutes", meta.interval_minutes},
      {"dext", meta.dext},
      {"demb", meta.demb},
      {"scaler_min", meta.scaler_min},
      {"scaler_max", meta.scaler_max},
      {"seed", meta.seed},
      {"modules", {{"sag", meta.modules.sag}, {"tag", meta.modules.tag}, {"msr", meta.modules.msr}}},
  };
  json& p = doc["parameters"];
  p = json::object();
  for (const auto& e : params.entries()) {
    json entry;
    entry["shape"] = e.value.shape().dims();
    entry["values"] = std::vector<double>(e.value.data().begin(), e.value.data().end());
    p[e.name] = std::move(entry);
  }
  return doc.dump(1) + "\n";
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const CheckpointMeta& meta) {
  write_file_atomic(path, serialize_checkpoint(params, meta));
}

Checkpoint parse_checkpoint(const std::string& text) {
  Checkpoint ck;
  try {
    const json doc = json::parse(text);
    const json& md = doc.at("metadata");
    CheckpointMeta& meta = ck.meta;
    meta.n = md.at("n").get<std::size_t>();
    meta.m = md.at("m").get<std::size_t>();
    meta.t_closeness = md.at("t_closeness").get<int>();
    meta.t_periodic = md.at("t_periodic").get<int>();
    meta.t_trend = md.at("t_trend").get<int>();
    meta.interval_minutes = md.at("interval_minutes").get<int>();
    meta.dext = md.at("dext").get<std::size_t>();
    meta.demb = md.at("demb").get<std::size_t>();
    meta.scaler_min = md.at("scaler_min").get<double>();
    meta.scaler_max = md.at("scaler_max").get<double>();
    meta.seed = md.at("seed").get<std::uint64_t>();
    if (md.contains("modules")) {
      const json& mods = md.at("modules");
      meta.modules = ModuleFlags{mods.at("sag").get<bool>(), mods.at("tag").get<bool>(), mods.at("msr").get<bool>()};
    }

    const json& params = doc.at("parameters");
    const auto expected = parameter_shapes(meta.model_config());
    if (params.size() != expected.size())
      throw DataError("checkpoint", "checkpoint has " + std::to_string(params.size()) + " parameters, expected " +
                                        std::to_string(expected.size()));
    for (const auto& [name, shape] : expected) {
      if (!params.contains(name)) throw DataError("checkpoint", "checkpoint is missing parameter " + name);
      const json& entry = params.at(name);
      const Shape got(entry.at("shape").get<std::vector<std::size_t>>());
      if (got != shape)
        throw DataError("checkpoint", "parameter " + name + " has shape " + got.str() + ", expected " + shape.str());
      ck.params.add(name, Tensor(got, entry.at("values").get<std::vector<double>>()));
    }
  } catch (const json::exception& e) {
    throw DataError("checkpoint", std::string("malformed checkpoint: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError("checkpoint", e.what());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace pasta
