#include <cmath>

#include "pasta/error.hpp"
#include "pasta/train.hpp"

namespace pasta {

AdamState AdamState::zeros_like(const ParameterSet& params) {
  AdamState s;
  for (const auto& e : params.entries()) {
    s.first_moment.push_back(Tensor::zeros_like(e.value));
    s.second_moment.push_back(Tensor::zeros_like(e.value));
  }
  return s;
}

void adam_step(ParameterSet& params, std::span<const Tensor> grads, AdamState& state, const AdamConfig& cfg) {
  auto entries = params.entries();
  if (grads.size() != entries.size() || state.first_moment.size() != entries.size() ||
      state.second_moment.size() != entries.size())
    throw ShapeError("adam_step: gradient/state count does not match parameters");
  for (std::size_t p = 0; p < entries.size(); ++p) {
    if (grads[p].shape() != entries[p].value.shape())
      throw ShapeError("adam_step: gradient shape mismatch for " + entries[p].name);
    if (!grads[p].all_finite()) throw NumericError("non-finite gradient for parameter " + entries[p].name);
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& w = entries[p].value;
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

}  // namespace pasta
