#include "pasta/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pasta/error.hpp"
#include "pasta/rng.hpp"

namespace pasta {

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(huber_delta > 0.0)) throw InvalidArgument("huber delta must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw InvalidArgument("Adam decay rates must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw InvalidArgument("Adam epsilon must be positive");
}

BatchGradient batch_gradient(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                             std::span<const Sample* const> batch, double huber_delta) {
  Tape tape;
  const BoundParameters bound(tape, params, true);
  const Batch b = make_batch(batch, cfg);
  const ForwardResult fr = forward(tape, b, bound, cfg, flags);
  const Var loss = ops::huber_loss(fr.prediction, tape.constant(b.target), huber_delta);
  tape.backward(loss);
  return BatchGradient{loss.value()[0], bound.gradients(tape)};
}

double normalized_rmse(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                       std::span<const Sample> samples) {
  if (samples.empty()) throw InvalidArgument("normalized_rmse: no samples");
  const auto preds = predict(params, cfg, flags, samples);
  double ss = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& target = samples[s].target;
    for (std::size_t c = 0; c < target.size(); ++c) {
      const double r = preds[s].grid[c] - target[c];
      ss += r * r;
    }
    count += target.size();
  }
  return std::sqrt(ss / static_cast<double>(count));
}

std::size_t validation_count(std::size_t samples) { return samples / 10; }

TrainResult train(std::span<const Sample> training, std::span<const Sample> validation, const ModelConfig& cfg,
                  ModuleFlags flags, const TrainConfig& config) {
  config.validate();
  cfg.validate();
  if (training.empty()) throw DataError("empty-dataset", "training set is empty");

  TrainResult result;
  ParameterSet params = init_parameters(cfg, config.seed);
  AdamState state = AdamState::zeros_like(params);
  const AdamConfig adam = config.adam();
  const auto val = validation.empty() ? training : validation;

  std::vector<std::size_t> order(training.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffler(config.seed ^ 0x5eed5eed5eed5eedULL);

  double best = INFINITY;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    if (config.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffler.below(i)]);

    double loss_sum = 0.0;
    std::vector<const Sample*> batch;
    try {
      for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
        batch.clear();
        for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
          batch.push_back(&training[order[i]]);
        const BatchGradient bg = batch_gradient(params, cfg, flags, batch, config.huber_delta);
        if (!std::isfinite(bg.loss)) throw NumericError("loss is not finite");
        loss_sum += bg.loss * static_cast<double>(batch.size());
        adam_step(params, bg.grads, state, adam);
      }
    } catch (const NumericError& e) {
      throw DivergenceError(epoch, "training diverged in epoch " + std::to_string(epoch) + ": " + e.what());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(training.size());
    try {
      rec.val_rmse = normalized_rmse(params, cfg, flags, val);
    } catch (const NumericError& e) {
      throw DivergenceError(epoch, "validation diverged in epoch " + std::to_string(epoch) + ": " + e.what());
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(rec);
    if (rec.val_rmse < best || epoch == 1) {
      best = rec.val_rmse;
      result.best_params = params;
    }
  }
  result.final_params = std::move(params);
  return result;
}

std::string history_csv(std::span<const EpochRecord> history, bool timing) {
  std::string out = "epoch,train_loss,val_rmse,seconds\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.10g,%.10g,%.3f\n", r.epoch, r.train_loss, r.val_rmse,
                  timing ? r.seconds : 0.0);
    out += buf;
  }
  return out;
}

}  // namespace pasta
