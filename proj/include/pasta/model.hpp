#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pasta/autograd.hpp"
#include "pasta/grid_data.hpp"
#include "pasta/tensor.hpp"

namespace pasta {

/// Which of the three gated blocks are active. A disabled SAG or TAG gate is
/// fixed at 1; a disabled MSR keeps only the 3x3 branch.
struct ModuleFlags {
  bool sag = true;
  bool tag = true;
  bool msr = true;
  bool operator==(const ModuleFlags&) const = default;
};

struct ModelConfig {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t channels = 15;  // T
  std::size_t dext = 32;
  std::size_t demb = 10;
  std::size_t sag_kernel = 3;

  std::size_t tag_hidden() const noexcept { return (channels + 1) / 2; }
  void validate() const;
};

inline constexpr std::size_t kMsrScales[] = {1, 3, 5};

/// Named trainable tensors in a fixed order.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t scalar_count() const noexcept;
  std::span<Entry> entries() noexcept { return entries_; }
  std::span<const Entry> entries() const noexcept { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

/// Every parameter name and shape for `cfg`, in ParameterSet order.
std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg);

/// Closed-form trainable scalar count:
///   SAG  2 (k^2 T + T)
///   TAG  2 (2 T h + h + T),  h = ceil(T / 2)
///   MSR  sum_{l in 1,3,5} (2 (l^2 T^2 + T) + l^2 T + 1) = 70 T^2 + 41 T + 3
///   EXT  Dext Demb + Demb + Demb N M + N M
std::size_t parameter_count(const ModelConfig& cfg);

/// Glorot-uniform weights (bound sqrt(6 / (fan_in + fan_out))), zero biases.
ParameterSet init_parameters(const ModelConfig& cfg, std::uint64_t seed);
ParameterSet zero_parameters(const ModelConfig& cfg);

/// SPE[i, j, l] = sin(i / 10000^(2l/d)) for even l, cos(j / 10000^(2l/d)) for
/// odd l, zero-based. Shape [n, m, d].
Tensor spatial_positional_encoding(std::size_t n, std::size_t m, std::size_t d);

/// Per-batch, per-channel local Moran's I of a [B, N, M, T] tensor.
Tensor moran_channels(const Tensor& x);

/// ParameterSet values placed on a tape.
class BoundParameters {
 public:
  BoundParameters(Tape& tape, const ParameterSet& params, bool trainable);
  const Var& operator[](std::string_view name) const;
  /// Gradient for each parameter in ParameterSet order (after backward).
  std::vector<Tensor> gradients(Tape& tape) const;

 private:
  std::vector<std::pair<std::string, Var>> vars_;
};

struct SagOutput {
  Var gated;     // F'
  Var gate;      // G
  Var features;  // F
};
SagOutput sag_forward(const Var& x_raw, const Var& x_spe, const BoundParameters& p);

struct TagOutput {
  Var features;   // F^TAG
  Var attention;  // T^c, [B, T]
};
TagOutput tag_forward(const Var& f_prime, const BoundParameters& p);

/// Sum of ReLU(outer(ReLU(inner(x)) + skip(x))) over the 1x1, 3x3, 5x5
/// branches (only 3x3 when multi_scale is false). Output [B, N, M, 1].
Var msr_forward(const Var& f_tag, const BoundParameters& p, bool multi_scale = true);

/// FC -> ReLU -> FC, reshaped to [B, N, M, 1].
Var external_head(const Var& features, const BoundParameters& p, std::size_t n, std::size_t m);

struct Batch {
  Tensor input;     // [B, N, M, T]
  Tensor external;  // [B, Dext]
  Tensor target;    // [B, N, M, 1]
};
Batch make_batch(std::span<const Sample* const> samples, const ModelConfig& cfg);

struct ForwardResult {
  Var prediction;  // [B, N, M, 1], tanh range
  Var attention;   // [B, T]; unset when TAG is disabled
};
ForwardResult forward(Tape& tape, const Batch& batch, const BoundParameters& p, const ModelConfig& cfg,
                      ModuleFlags flags = {});

struct Prediction {
  std::size_t target_index = 0;
  std::vector<double> grid;       // N*M, normalized scale
  std::vector<double> attention;  // T entries, all 1 when TAG is disabled
};

/// Inference without gradients.
std::vector<Prediction> predict(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                                std::span<const Sample> samples, std::size_t batch_size = 16);

}  // namespace pasta
