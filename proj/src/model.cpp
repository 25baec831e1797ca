#include "pasta/model.hpp"

#include <cmath>

#include "pasta/error.hpp"
#include "pasta/rng.hpp"
#include "pasta/spatial_stats.hpp"

namespace pasta {

using ops::ConvMode;

void ModelConfig::validate() const {
  if (n == 0 || m == 0) throw InvalidArgument("model grid extents must be positive");
  if (channels == 0) throw InvalidArgument("model needs at least one input channel");
  if (dext == 0 || demb == 0) throw InvalidArgument("external feature widths must be positive");
  if (sag_kernel % 2 == 0) throw InvalidArgument("SAG kernel size must be odd");
}

void ParameterSet::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw InvalidArgument("duplicate parameter " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back(Entry{std::move(name), std::move(value)});
}

bool ParameterSet::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

const Tensor& ParameterSet::at(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InvalidArgument("unknown parameter " + std::string(name));
  return entries_[it->second].value;
}

Tensor& ParameterSet::at(std::string_view name) {
  return const_cast<Tensor&>(static_cast<const ParameterSet&>(*this).at(name));
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.value.size();
  return total;
}

std::vector<std::pair<std::string, Shape>> parameter_shapes(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t t = cfg.channels, k = cfg.sag_kernel, h = cfg.tag_hidden();
  std::vector<std::pair<std::string, Shape>> out{
      {"sag.gate.kernel", Shape{k, k, t}},
      {"sag.gate.bias", Shape{t}},
      {"sag.feat.kernel", Shape{k, k, t}},
      {"sag.feat.bias", Shape{t}},
      {"tag.w0", Shape{t, h}},
      {"tag.b0", Shape{h}},
      {"tag.w1", Shape{h, t}},
      {"tag.b1", Shape{t}},
      {"tag.w2", Shape{t, h}},
      {"tag.b2", Shape{h}},
      {"tag.w3", Shape{h, t}},
      {"tag.b3", Shape{t}},
  };
  for (std::size_t l : kMsrScales) {
    const std::string p = "msr." + std::to_string(l) + ".";
    out.emplace_back(p + "inner.kernel", Shape{l, l, t, t});
    out.emplace_back(p + "inner.bias", Shape{t});
    out.emplace_back(p + "skip.kernel", Shape{l, l, t, t});
    out.emplace_back(p + "skip.bias", Shape{t});
    out.emplace_back(p + "outer.kernel", Shape{l, l, t, 1});
    out.emplace_back(p + "outer.bias", Shape{1});
  }
  out.emplace_back("ext.fc1.weight", Shape{cfg.dext, cfg.demb});
  out.emplace_back("ext.fc1.bias", Shape{cfg.demb});
  out.emplace_back("ext.fc2.weight", Shape{cfg.demb, cfg.n * cfg.m});
  out.emplace_back("ext.fc2.bias", Shape{cfg.n * cfg.m});
  return out;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t t = cfg.channels, k = cfg.sag_kernel, h = cfg.tag_hidden();
  const std::size_t sag = 2 * (k * k * t + t);
  const std::size_t tag = 2 * (2 * t * h + h + t);
  const std::size_t msr = 70 * t * t + 41 * t + 3;
  const std::size_t ext = cfg.dext * cfg.demb + cfg.demb + cfg.demb * cfg.n * cfg.m + cfg.n * cfg.m;
  return sag + tag + msr + ext;
}

ParameterSet zero_parameters(const ModelConfig& cfg) {
  ParameterSet ps;
  for (auto& [name, shape] : parameter_shapes(cfg)) ps.add(name, Tensor(shape));
  return ps;
}

ParameterSet init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  ParameterSet ps;
  for (auto& [name, shape] : parameter_shapes(cfg)) {
    Tensor value(shape);
    if (shape.rank() > 1) {
      double fan_in = 0.0, fan_out = 0.0;
      if (shape.rank() == 2) {
        fan_in = static_cast<double>(shape[0]);
        fan_out = static_cast<double>(shape[1]);
      } else if (shape.rank() == 3) {  // depthwise
        fan_in = fan_out = static_cast<double>(shape[0] * shape[1]);
      } else {
        const double area = static_cast<double>(shape[0] * shape[1]);
        fan_in = area * static_cast<double>(shape[2]);
        fan_out = area * static_cast<double>(shape[3]);
      }
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : value.data()) v = rng.uniform(-bound, bound);
    }
    ps.add(name, std::move(value));
  }
  return ps;
}

Tensor spatial_positional_encoding(std::size_t n, std::size_t m, std::size_t d) {
  Tensor out(Shape{n, m, d});
  for (std::size_t l = 0; l < d; ++l) {
    const double denom = std::pow(10000.0, 2.0 * static_cast<double>(l) / static_cast<double>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j)
        out[(i * m + j) * d + l] =
            l % 2 == 0 ? std::sin(static_cast<double>(i) / denom) : std::cos(static_cast<double>(j) / denom);
  }
  return out;
}

Tensor moran_channels(const Tensor& x) {
  const Shape& s = x.shape();
  if (s.rank() != 4) throw ShapeError("moran_channels expects [B,N,M,T], got " + s.str());
  const std::size_t batch = s[0], n = s[1], m = s[2], t = s[3];
  Tensor out(s);
  std::vector<double> grid(n * m);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < t; ++c) {
      const std::size_t base = b * n * m * t;
      for (std::size_t cell = 0; cell < n * m; ++cell) grid[cell] = x[base + cell * t + c];
      const MoranField f = local_morans_i(GridView{grid, n, m});
      for (std::size_t cell = 0; cell < n * m; ++cell) out[base + cell * t + c] = f.stats[cell];
    }
  return out;
}

BoundParameters::BoundParameters(Tape& tape, const ParameterSet& params, bool trainable) {
  vars_.reserve(params.size());
  for (const auto& e : params.entries())
    vars_.emplace_back(e.name, trainable ? tape.variable(e.value) : tape.constant(e.value));
}

const Var& BoundParameters::operator[](std::string_view name) const {
  for (const auto& [n, v] : vars_)
    if (n == name) return v;
  throw InvalidArgument("parameter not bound: " + std::string(name));
}

std::vector<Tensor> BoundParameters::gradients(Tape& tape) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const auto& [n, v] : vars_) out.push_back(tape.grad(v));
  return out;
}

SagOutput sag_forward(const Var& x_raw, const Var& x_spe, const BoundParameters& p) {
  if (x_raw.shape() != x_spe.shape())
    throw ShapeError("sag_forward: raw " + x_raw.shape().str() + " vs SPE input " + x_spe.shape().str());
  Tape& tape = *x_raw.tape();
  const Var s = tape.constant(moran_channels(x_raw.value()));
  const Var gate = ops::sigmoid(ops::conv2d(s, p["sag.gate.kernel"], p["sag.gate.bias"], ConvMode::Depthwise));
  const Var feat = ops::conv2d(x_spe, p["sag.feat.kernel"], p["sag.feat.bias"], ConvMode::Depthwise);
  return SagOutput{ops::mul(gate, feat), gate, feat};
}

TagOutput tag_forward(const Var& f_prime, const BoundParameters& p) {
  const Shape& s = f_prime.shape();
  if (s.rank() != 4) throw ShapeError("tag_forward expects [B,N,M,T], got " + s.str());
  const std::size_t batch = s[0], t = s[3];
  if (p["tag.w0"].shape()[0] != t)
    throw ShapeError("tag_forward: input has " + std::to_string(t) + " channels, weights expect " +
                     std::to_string(p["tag.w0"].shape()[0]));
  const Var avg = ops::reshape(ops::global_pool(f_prime, ops::Pool::Avg), Shape{batch, t});
  const Var max = ops::reshape(ops::global_pool(f_prime, ops::Pool::Max), Shape{batch, t});
  const Var avg_path = ops::fully_connected(ops::fully_connected(avg, p["tag.w0"], p["tag.b0"]), p["tag.w1"], p["tag.b1"]);
  const Var max_path = ops::fully_connected(ops::fully_connected(max, p["tag.w2"], p["tag.b2"]), p["tag.w3"], p["tag.b3"]);
  const Var attention = ops::sigmoid(ops::add(avg_path, max_path));
  const Var weights = ops::reshape(attention, Shape{batch, 1, 1, t});
  return TagOutput{ops::mul(f_prime, weights), attention};
}

Var msr_forward(const Var& f_tag, const BoundParameters& p, bool multi_scale) {
  Var total;
  bool first = true;
  for (std::size_t l : kMsrScales) {
    if (!multi_scale && l != 3) continue;
    const std::string pre = "msr." + std::to_string(l) + ".";
    const Var inner = ops::relu(ops::conv2d(f_tag, p[pre + "inner.kernel"], p[pre + "inner.bias"], ConvMode::Dense));
    const Var skip = ops::conv2d(f_tag, p[pre + "skip.kernel"], p[pre + "skip.bias"], ConvMode::Dense);
    const Var branch =
        ops::relu(ops::conv2d(ops::add(inner, skip), p[pre + "outer.kernel"], p[pre + "outer.bias"], ConvMode::Dense));
    total = first ? branch : ops::add(total, branch);
    first = false;
  }
  return total;
}

Var external_head(const Var& features, const BoundParameters& p, std::size_t n, std::size_t m) {
  const Shape& s = features.shape();
  if (s.rank() != 2) throw ShapeError("external_head expects [B,Dext], got " + s.str());
  const Var hidden = ops::relu(ops::fully_connected(features, p["ext.fc1.weight"], p["ext.fc1.bias"]));
  const Var out = ops::fully_connected(hidden, p["ext.fc2.weight"], p["ext.fc2.bias"]);
  if (out.shape()[1] != n * m)
    throw ShapeError("external_head: output width " + std::to_string(out.shape()[1]) + " != N*M " +
                     std::to_string(n * m));
  return ops::reshape(out, Shape{s[0], n, m, 1});
}

Batch make_batch(std::span<const Sample* const> samples, const ModelConfig& cfg) {
  if (samples.empty()) throw InvalidArgument("empty batch");
  const std::size_t b = samples.size(), cells = cfg.n * cfg.m, t = cfg.channels;
  Batch batch{Tensor(Shape{b, cfg.n, cfg.m, t}), Tensor(Shape{b, cfg.dext}), Tensor(Shape{b, cfg.n, cfg.m, 1})};
  for (std::size_t i = 0; i < b; ++i) {
    const Sample& s = *samples[i];
    if (s.input.shape() != Shape{cfg.n, cfg.m, t})
      throw ShapeError("sample input " + s.input.shape().str() + " does not match model [" + std::to_string(cfg.n) +
                       "," + std::to_string(cfg.m) + "," + std::to_string(t) + "]");
    if (s.external.size() != cfg.dext)
      throw ShapeError("sample has " + std::to_string(s.external.size()) + " external features, model expects " +
                       std::to_string(cfg.dext));
    if (s.target.size() != cells) throw ShapeError("sample target does not match model grid");
    std::copy(s.input.data().begin(), s.input.data().end(), batch.input.raw() + i * cells * t);
    std::copy(s.external.begin(), s.external.end(), batch.external.raw() + i * cfg.dext);
    std::copy(s.target.data().begin(), s.target.data().end(), batch.target.raw() + i * cells);
  }
  return batch;
}

ForwardResult forward(Tape& tape, const Batch& batch, const BoundParameters& p, const ModelConfig& cfg,
                      ModuleFlags flags) {
  const Shape& s = batch.input.shape();
  if (s.rank() != 4 || s[1] != cfg.n || s[2] != cfg.m || s[3] != cfg.channels)
    throw ShapeError("forward: batch input " + s.str() + " does not match model configuration");
  const std::size_t b = s[0], cells = cfg.n * cfg.m, t = cfg.channels;

  const Tensor spe = spatial_positional_encoding(cfg.n, cfg.m, t);
  Tensor with_spe = batch.input;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t k = 0; k < cells * t; ++k) with_spe[i * cells * t + k] += spe[k];

  const Var x_raw = tape.constant(batch.input);
  const Var x_spe = tape.constant(std::move(with_spe));

  Var f_prime;
  if (flags.sag) {
    f_prime = sag_forward(x_raw, x_spe, p).gated;
  } else {
    f_prime = ops::conv2d(x_spe, p["sag.feat.kernel"], p["sag.feat.bias"], ConvMode::Depthwise);
  }

  ForwardResult result;
  Var f_tag = f_prime;
  if (flags.tag) {
    TagOutput tag = tag_forward(f_prime, p);
    f_tag = tag.features;
    result.attention = tag.attention;
  }

  const Var msr = msr_forward(f_tag, p, flags.msr);
  const Var ext = external_head(tape.constant(batch.external), p, cfg.n, cfg.m);
  result.prediction = ops::tanh(ops::add(msr, ext));
  return result;
}

std::vector<Prediction> predict(const ParameterSet& params, const ModelConfig& cfg, ModuleFlags flags,
                                std::span<const Sample> samples, std::size_t batch_size) {
  if (batch_size == 0) throw InvalidArgument("batch size must be positive");
  std::vector<Prediction> out;
  out.reserve(samples.size());
  const std::size_t cells = cfg.n * cfg.m;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - start);
    std::vector<const Sample*> ptrs;
    for (std::size_t i = 0; i < count; ++i) ptrs.push_back(&samples[start + i]);
    Tape tape;
    const BoundParameters bound(tape, params, false);
    const ForwardResult fr = forward(tape, make_batch(ptrs, cfg), bound, cfg, flags);
    const Tensor& y = fr.prediction.value();
    for (std::size_t i = 0; i < count; ++i) {
      Prediction p;
      p.target_index = samples[start + i].target_index;
      p.grid.assign(y.raw() + i * cells, y.raw() + (i + 1) * cells);
      if (flags.tag) {
        const Tensor& a = fr.attention.value();
        p.attention.assign(a.raw() + i * cfg.channels, a.raw() + (i + 1) * cfg.channels);
      } else {
        p.attention.assign(cfg.channels, 1.0);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

}  // namespace pasta
