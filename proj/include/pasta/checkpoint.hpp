#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pasta/grid_data.hpp"
#include "pasta/model.hpp"

namespace pasta {

struct CheckpointMeta {
  std::size_t n = 0;
  std::size_t m = 0;
  int t_closeness = 5;
  int t_periodic = 6;
  int t_trend = 4;
  int interval_minutes = 60;
  std::size_t dext = 32;
  std::size_t demb = 10;
  double scaler_min = 0.0;
  double scaler_max = 1.0;
  std::uint64_t seed = 0;
  ModuleFlags modules;

  ModelConfig model_config() const;
  FragmentSpec fragments() const;
  Scaler scaler() const { return Scaler{scaler_min, scaler_max}; }
};

struct Checkpoint {
  ParameterSet params;
  CheckpointMeta meta;
};

/// JSON: {"metadata": {...}, "parameters": {name: {"shape": [...], "values": [...]}}}.
/// Doubles are written in shortest round-trip form, so save/load is bit-exact.
std::string serialize_checkpoint(const ParameterSet& params, const CheckpointMeta& meta);
void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params, const CheckpointMeta& meta);

/// Rejects missing, extra or mis-shaped parameters (DataError "checkpoint").
Checkpoint parse_checkpoint(const std::string& text);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pasta
