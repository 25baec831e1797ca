#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pasta/grid_data.hpp"
#include "pasta/model.hpp"

namespace pasta {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterSet& params);
};

/// One bias-corrected Adam update. `grads` follows ParameterSet order.
/// Throws NumericError naming the parameter on a non-finite gradient.
void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, const AdamConfig& cfg);

struct TrainConfig {
  int epochs = 20;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double huber_delta = 1.0;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;

  void validate() const;
  AdamConfig adam() const { return AdamConfig{learning_rate, beta1, beta2, epsilon}; }
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean Huber loss over the epoch's batches
  double val_rmse = 0.0;    // normalized scale
  double seconds = 0.0;
};

struct TrainResult {
  ParameterSet final_params;
  ParameterSet best_params;  // lowest validation RMSE
  std::vector<EpochRecord> history;
};

/// Mean Huber loss and parameter gradients for one batch.
struct BatchGradient {
  double loss = 0.0;
  std::vector<Tensor> grads;
};
BatchGradient batch_gradient(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                             std::span<const Sample* const> batch, double huber_delta);

/// Root-mean-square error of predictions against normalized targets.
double normalized_rmse(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                       std::span<const Sample> samples);

/// Mini-batch Adam on the mean Huber loss. When `validation` is empty the
/// training set stands in for it. Throws DivergenceError on a non-finite loss.
TrainResult train(std::span<const Sample> training, std::span<const Sample> validation, const ModelConfig& cfg,
                  ModuleFlags flags, const TrainConfig& config);

/// Chronological validation tail: the last floor(10%) of `samples`.
std::size_t validation_count(std::size_t samples);

/// CSV "epoch,train_loss,val_rmse,seconds". With `timing` false the seconds
/// column is written as 0 so repeated runs produce identical files.
std::string history_csv(std::span<const EpochRecord> history, bool timing = true);

}  // namespace pasta
