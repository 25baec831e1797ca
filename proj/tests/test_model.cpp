#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pasta/error.hpp"
#include "pasta/model.hpp"
#include "pasta/train.hpp"

namespace {

using namespace pasta;

ModelConfig small_config(std::size_t n = 5, std::size_t m = 6, std::size_t t = 4) {
  ModelConfig cfg;
  cfg.n = n;
  cfg.m = m;
  cfg.channels = t;
  cfg.dext = 7;
  cfg.demb = 3;
  return cfg;
}

// Glorot weights plus nonzero biases, so every bias path is exercised.
ParameterSet random_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterSet ps = init_parameters(cfg, seed);
  std::mt19937_64 gen(seed + 1000);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  for (auto& e : ps.entries())
    if (e.value.shape().rank() == 1)
      for (double& v : e.value.data()) v = d(gen);
  return ps;
}

std::vector<double> vec(const ParameterSet& ps, std::string_view name) {
  const auto& d = ps.at(name).data();
  return {d.begin(), d.end()};
}

std::vector<double> vec(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() && std::memcmp(a.raw(), b.raw(), a.size() * sizeof(double)) == 0;
}

Batch random_batch(const ModelConfig& cfg, std::size_t b, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return Batch{gradcheck::random_tensor(gen, Shape{b, cfg.n, cfg.m, cfg.channels}),
               gradcheck::random_tensor(gen, Shape{b, cfg.dext}, 0.0, 1.0),
               gradcheck::random_tensor(gen, Shape{b, cfg.n, cfg.m, 1})};
}

Tensor add_spe(const Tensor& x) {
  const Shape& s = x.shape();
  const Tensor spe = spatial_positional_encoding(s[1], s[2], s[3]);
  Tensor out = x;
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += spe[k % spe.size()];
  return out;
}

Tensor run_forward(const ParameterSet& ps, const ModelConfig& cfg, const Batch& batch, ModuleFlags flags = {}) {
  Tape tape;
  BoundParameters p(tape, ps, false);
  return forward(tape, batch, p, cfg, flags).prediction.value();
}

// ---- spatial positional encoding ----

TEST(Spe, FirstChannelIsSineOfRow) {
  const Tensor spe = spatial_positional_encoding(4, 3, 5);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(spe[(i * 3 + j) * 5], std::sin(double(i)));
}

TEST(Spe, OriginValues) {
  const Tensor spe = spatial_positional_encoding(2, 2, 6);
  for (std::size_t l = 0; l < 6; ++l) EXPECT_EQ(spe[l], l % 2 == 0 ? 0.0 : 1.0) << "l=" << l;
}

TEST(Spe, MatchesOracle) {
  for (auto [n, m, d] : {std::tuple{16, 16, 13}, std::tuple{8, 8, 15}, std::tuple{3, 7, 2}}) {
    const Tensor spe = spatial_positional_encoding(n, m, d);
    ASSERT_EQ(spe.shape(), (Shape{std::size_t(n), std::size_t(m), std::size_t(d)}));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < m; ++j)
        for (int l = 0; l < d; ++l)
          EXPECT_NEAR(spe[(i * m + j) * d + l], oracle::spe(i, j, l, d), 1e-15) << i << "," << j << "," << l;
  }
}

// ---- parameters ----

TEST(Parameters, CountMatchesClosedForm) {
  for (std::size_t t : {1, 4, 13, 15})
    for (auto [n, m, dext] : {std::tuple{16, 16, 32}, std::tuple{8, 5, 56}, std::tuple{1, 1, 1}}) {
      ModelConfig cfg = small_config(n, m, t);
      cfg.dext = dext;
      cfg.demb = 10;
      const std::size_t h = (t + 1) / 2, cells = n * m;
      const std::size_t want = 2 * (9 * t + t) + 2 * (2 * t * h + h + t) + 70 * t * t + 41 * t + 3 +
                               dext * 10 + 10 + 10 * cells + cells;
      EXPECT_EQ(parameter_count(cfg), want);
      EXPECT_EQ(init_parameters(cfg, 1).scalar_count(), want);
    }
}

TEST(Parameters, InitBoundsAndZeroBiases) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = init_parameters(cfg, 3);
  for (const auto& e : ps.entries()) {
    const Shape& s = e.value.shape();
    if (s.rank() == 1) {
      for (double v : e.value.data()) EXPECT_EQ(v, 0.0) << e.name;
      continue;
    }
    double fan_in, fan_out;
    if (s.rank() == 2) {
      fan_in = double(s[0]), fan_out = double(s[1]);
    } else if (s.rank() == 3) {
      fan_in = fan_out = double(s[0] * s[1]);
    } else {
      fan_in = double(s[0] * s[1] * s[2]), fan_out = double(s[0] * s[1] * s[3]);
    }
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    bool nonzero = false;
    for (double v : e.value.data()) {
      EXPECT_LE(std::fabs(v), bound) << e.name;
      nonzero |= v != 0.0;
    }
    EXPECT_TRUE(nonzero) << e.name;
  }
}

TEST(Parameters, InitIsSeeded) {
  const ModelConfig cfg = small_config();
  const ParameterSet a = init_parameters(cfg, 9), b = init_parameters(cfg, 9), c = init_parameters(cfg, 10);
  bool differs = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_TRUE(same_bits(a.entries()[k].value, b.entries()[k].value)) << a.entries()[k].name;
    differs |= !same_bits(a.entries()[k].value, c.entries()[k].value);
  }
  EXPECT_TRUE(differs);
}

TEST(Parameters, UnknownNameThrows) {
  Tape tape;
  const ParameterSet ps = init_parameters(small_config(), 1);
  BoundParameters p(tape, ps, false);
  EXPECT_THROW(p["nope"], InvalidArgument);
}

// ---- SAG ----

TEST(Sag, ZeroGateHalvesFeatures) {
  const ModelConfig cfg = small_config();
  ParameterSet ps = random_params(cfg, 1);
  for (double& v : ps.at("sag.gate.kernel").data()) v = 0.0;
  for (double& v : ps.at("sag.gate.bias").data()) v = 0.0;
  const Batch b = random_batch(cfg, 2, 1);
  Tape tape;
  BoundParameters p(tape, ps, false);
  const SagOutput out = sag_forward(tape.constant(b.input), tape.constant(add_spe(b.input)), p);
  for (std::size_t k = 0; k < out.gated.value().size(); ++k) {
    EXPECT_EQ(out.gate.value()[k], 0.5);
    EXPECT_EQ(out.gated.value()[k], 0.5 * out.features.value()[k]);
  }
}

TEST(Sag, ConstantInputGivesBiasGate) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 2);
  Tensor x(Shape{1, cfg.n, cfg.m, cfg.channels});
  for (double& v : x.data()) v = 0.25;
  Tape tape;
  BoundParameters p(tape, ps, false);
  const SagOutput out = sag_forward(tape.constant(x), tape.constant(add_spe(x)), p);
  const auto bias = vec(ps, "sag.gate.bias");
  for (std::size_t k = 0; k < out.gate.value().size(); ++k)
    EXPECT_NEAR(out.gate.value()[k], oracle::sigmoid(bias[k % cfg.channels]), 1e-15);
}

TEST(Sag, MatchesCompositionOracle) {
  const ModelConfig cfg = small_config(6, 6, 3);
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ParameterSet ps = random_params(cfg, seed);
    const Batch b = random_batch(cfg, 2, seed);
    const Tensor xs = add_spe(b.input);
    Tape tape;
    BoundParameters p(tape, ps, false);
    const SagOutput out = sag_forward(tape.constant(b.input), tape.constant(xs), p);

    const std::size_t n = 6, m = 6, t = 3, cells = 36;
    std::vector<double> s(2 * cells * t);
    for (std::size_t bi = 0; bi < 2; ++bi)
      for (std::size_t c = 0; c < t; ++c) {
        std::vector<double> grid(cells);
        for (std::size_t k = 0; k < cells; ++k) grid[k] = b.input[(bi * cells + k) * t + c];
        const auto st = oracle::moran(grid, n, m);
        for (std::size_t k = 0; k < cells; ++k) s[(bi * cells + k) * t + c] = st[k];
      }
    const auto gate_pre =
        oracle::conv_depthwise(s, 2, n, m, t, vec(ps, "sag.gate.kernel"), 3, vec(ps, "sag.gate.bias"));
    const auto feat = oracle::conv_depthwise(vec(xs), 2, n, m, t, vec(ps, "sag.feat.kernel"), 3, vec(ps, "sag.feat.bias"));
    for (std::size_t k = 0; k < feat.size(); ++k) {
      ASSERT_NEAR(out.features.value()[k], feat[k], 1e-12);
      ASSERT_NEAR(out.gated.value()[k], oracle::sigmoid(gate_pre[k]) * feat[k], 1e-12);
    }
  }
}

// The gate sees only Moran statistics of the raw input, which do not change
// under an affine rescaling of the flows.
TEST(Sag, GateIgnoresAffineRescaling) {
  const ModelConfig cfg = small_config(6, 6, 3);
  const ParameterSet ps = random_params(cfg, 4);
  std::mt19937_64 gen(4);
  std::uniform_int_distribution<int> cell(0, 40);
  Tensor x(Shape{2, 6, 6, 3});
  for (double& v : x.data()) v = cell(gen);
  Tensor y = x;
  for (double& v : y.data()) v = 4.0 * v + 3.0;
  Tape tape;
  BoundParameters p(tape, ps, false);
  const Tensor gx = sag_forward(tape.constant(x), tape.constant(x), p).gate.value();
  const Tensor gy = sag_forward(tape.constant(y), tape.constant(x), p).gate.value();
  EXPECT_TRUE(same_bits(gx, gy));
}

TEST(Sag, ShapeMismatchThrows) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 1);
  Tape tape;
  BoundParameters p(tape, ps, false);
  const Var a = tape.constant(Tensor(Shape{1, cfg.n, cfg.m, cfg.channels}));
  const Var b = tape.constant(Tensor(Shape{1, cfg.n, cfg.m + 1, cfg.channels}));
  EXPECT_THROW(sag_forward(a, b, p), ShapeError);
}

// ---- TAG ----

TEST(Tag, ZeroWeightsGiveHalfAttention) {
  const ModelConfig cfg = small_config();
  ParameterSet ps = random_params(cfg, 5);
  for (auto& e : ps.entries())
    if (e.name.starts_with("tag.")) std::fill(e.value.data().begin(), e.value.data().end(), 0.0);
  std::mt19937_64 gen(5);
  const Tensor f = gradcheck::random_tensor(gen, Shape{2, cfg.n, cfg.m, cfg.channels});
  Tape tape;
  BoundParameters p(tape, ps, false);
  const TagOutput out = tag_forward(tape.constant(f), p);
  for (double a : out.attention.value().data()) EXPECT_EQ(a, 0.5);
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(out.features.value()[k], 0.5 * f[k]);
}

TEST(Tag, SaturatedAttentionIsIdentity) {
  const ModelConfig cfg = small_config();
  ParameterSet ps = random_params(cfg, 6);
  for (double& v : ps.at("tag.b1").data()) v = 1e3;
  for (double& v : ps.at("tag.b3").data()) v = 1e3;
  std::mt19937_64 gen(6);
  const Tensor f = gradcheck::random_tensor(gen, Shape{2, cfg.n, cfg.m, cfg.channels});
  Tape tape;
  BoundParameters p(tape, ps, false);
  const TagOutput out = tag_forward(tape.constant(f), p);
  for (double a : out.attention.value().data()) EXPECT_EQ(a, 1.0);
  EXPECT_TRUE(same_bits(out.features.value(), f));
  // and the whole model then matches the TAG-off variant exactly
  const Batch b = random_batch(cfg, 2, 6);
  EXPECT_TRUE(same_bits(run_forward(ps, cfg, b), run_forward(ps, cfg, b, ModuleFlags{true, false, true})));
}

TEST(Tag, MatchesCompositionOracle) {
  const ModelConfig cfg = small_config(4, 5, 5);
  const std::size_t t = 5, h = cfg.tag_hidden(), cells = 20, batch = 3;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ParameterSet ps = random_params(cfg, seed);
    std::mt19937_64 gen(seed);
    const Tensor f = gradcheck::random_tensor(gen, Shape{batch, 4, 5, t});
    Tape tape;
    BoundParameters p(tape, ps, false);
    const TagOutput out = tag_forward(tape.constant(f), p);

    std::vector<double> avg(batch * t, 0.0), mx(batch * t, -1e300);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t k = 0; k < cells; ++k)
        for (std::size_t c = 0; c < t; ++c) {
          const double v = f[(b * cells + k) * t + c];
          avg[b * t + c] += v / double(cells);
          mx[b * t + c] = std::max(mx[b * t + c], v);
        }
    const auto pa = oracle::fc(oracle::fc(avg, batch, t, vec(ps, "tag.w0"), h, vec(ps, "tag.b0")), batch, h,
                               vec(ps, "tag.w1"), t, vec(ps, "tag.b1"));
    const auto pm = oracle::fc(oracle::fc(mx, batch, t, vec(ps, "tag.w2"), h, vec(ps, "tag.b2")), batch, h,
                               vec(ps, "tag.w3"), t, vec(ps, "tag.b3"));
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t c = 0; c < t; ++c) {
        const double a = oracle::sigmoid(pa[b * t + c] + pm[b * t + c]);
        ASSERT_NEAR(out.attention.value()[b * t + c], a, 1e-12);
        for (std::size_t k = 0; k < cells; ++k)
          ASSERT_NEAR(out.features.value()[(b * cells + k) * t + c], a * f[(b * cells + k) * t + c], 1e-12);
      }
  }
}

TEST(Tag, ChannelMismatchThrows) {
  const ParameterSet ps = random_params(small_config(), 1);
  Tape tape;
  BoundParameters p(tape, ps, false);
  EXPECT_THROW(tag_forward(tape.constant(Tensor(Shape{1, 5, 6, 3})), p), ShapeError);
}

// ---- MSR ----

TEST(Msr, ZeroNetworkIsZero) {
  for (auto [n, m] : {std::pair{5, 7}, std::pair{1, 1}, std::pair{2, 9}}) {
    const ModelConfig cfg = small_config(n, m, 3);
    const ParameterSet ps = zero_parameters(cfg);
    std::mt19937_64 gen(n * 10 + m);
    Tape tape;
    BoundParameters p(tape, ps, false);
    const Var out = msr_forward(tape.constant(gradcheck::random_tensor(gen, Shape{2, cfg.n, cfg.m, 3})), p);
    EXPECT_EQ(out.shape(), (Shape{2, cfg.n, cfg.m, 1}));
    for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Msr, MatchesCompositionOracle) {
  const ModelConfig cfg = small_config(5, 5, 3);
  const std::size_t n = 5, m = 5, t = 3, batch = 2;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ParameterSet ps = random_params(cfg, seed);
    std::mt19937_64 gen(seed);
    const Tensor f = gradcheck::random_tensor(gen, Shape{batch, n, m, t});
    Tape tape;
    BoundParameters p(tape, ps, false);
    const Tensor got = msr_forward(tape.constant(f), p).value();
    const Tensor single = msr_forward(tape.constant(f), p, false).value();

    std::vector<double> want(batch * n * m, 0.0), want3;
    for (std::size_t l : {1, 3, 5}) {
      const std::string pre = "msr." + std::to_string(l) + ".";
      auto inner = oracle::conv_dense(vec(f), batch, n, m, t, vec(ps, pre + "inner.kernel"), l, t, vec(ps, pre + "inner.bias"));
      const auto skip = oracle::conv_dense(vec(f), batch, n, m, t, vec(ps, pre + "skip.kernel"), l, t, vec(ps, pre + "skip.bias"));
      for (std::size_t k = 0; k < inner.size(); ++k) inner[k] = oracle::relu(inner[k]) + skip[k];
      auto outer = oracle::conv_dense(inner, batch, n, m, t, vec(ps, pre + "outer.kernel"), l, 1, vec(ps, pre + "outer.bias"));
      for (double& v : outer) v = oracle::relu(v);
      for (std::size_t k = 0; k < want.size(); ++k) want[k] += outer[k];
      if (l == 3) want3 = outer;
    }
    for (std::size_t k = 0; k < want.size(); ++k) {
      ASSERT_NEAR(got[k], want[k], 1e-12);
      ASSERT_NEAR(single[k], want3[k], 1e-12);
    }
  }
}

TEST(Msr, DisabledKeepsOnlyThreeByThree) {
  const ModelConfig cfg = small_config();
  ParameterSet ps = random_params(cfg, 8);
  for (auto& e : ps.entries())
    if (e.name.starts_with("msr.1.") || e.name.starts_with("msr.5."))
      std::fill(e.value.data().begin(), e.value.data().end(), 0.0);
  const Batch b = random_batch(cfg, 2, 8);
  EXPECT_TRUE(same_bits(run_forward(ps, cfg, b), run_forward(ps, cfg, b, ModuleFlags{true, true, false})));
}

// ---- external head ----

TEST(External, ZeroIsZero) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = zero_parameters(cfg);
  const Batch b = random_batch(cfg, 3, 1);
  Tape tape;
  BoundParameters p(tape, ps, false);
  const Var out = external_head(tape.constant(b.external), p, cfg.n, cfg.m);
  EXPECT_EQ(out.shape(), (Shape{3, cfg.n, cfg.m, 1}));
  for (double v : out.value().data()) EXPECT_EQ(v, 0.0);
}

TEST(External, MatchesCompositionOracle) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 11);
  const Batch b = random_batch(cfg, 3, 11);
  Tape tape;
  BoundParameters p(tape, ps, false);
  const Tensor got = external_head(tape.constant(b.external), p, cfg.n, cfg.m).value();
  auto hidden = oracle::fc(vec(b.external), 3, cfg.dext, vec(ps, "ext.fc1.weight"), cfg.demb, vec(ps, "ext.fc1.bias"));
  for (double& v : hidden) v = oracle::relu(v);
  const auto want = oracle::fc(hidden, 3, cfg.demb, vec(ps, "ext.fc2.weight"), cfg.n * cfg.m, vec(ps, "ext.fc2.bias"));
  for (std::size_t k = 0; k < want.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
}

TEST(External, ScalarChain) {
  ModelConfig cfg = small_config(1, 1, 1);
  cfg.dext = 1;
  cfg.demb = 1;
  ParameterSet ps = zero_parameters(cfg);
  ps.at("ext.fc1.weight")[0] = 2.0;
  ps.at("ext.fc1.bias")[0] = -1.0;
  ps.at("ext.fc2.weight")[0] = 3.0;
  ps.at("ext.fc2.bias")[0] = 0.5;
  Tensor e(Shape{2, 1});
  e[0] = 1.5;  // relu(2) -> 6.5
  e[1] = 0.25; // relu(-0.5) -> 0.5
  Tape tape;
  BoundParameters p(tape, ps, false);
  const Tensor got = external_head(tape.constant(e), p, 1, 1).value();
  EXPECT_EQ(got[0], 6.5);
  EXPECT_EQ(got[1], 0.5);
}

// ---- full model ----

TEST(Forward, ZeroParametersPredictZero) {
  const ModelConfig cfg = small_config();
  const Batch b = random_batch(cfg, 2, 1);
  for (double v : run_forward(zero_parameters(cfg), cfg, b).data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, MatchesCompositionOracle) {
  const ModelConfig cfg = small_config(5, 6, 4);
  const std::size_t n = 5, m = 6, t = 4, cells = 30, batch = 2, h = cfg.tag_hidden();
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const ParameterSet ps = random_params(cfg, seed);
    const Batch b = random_batch(cfg, batch, seed);
    const Tensor got = run_forward(ps, cfg, b);

    std::vector<double> s(batch * cells * t);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t c = 0; c < t; ++c) {
        std::vector<double> grid(cells);
        for (std::size_t k = 0; k < cells; ++k) grid[k] = b.input[(bi * cells + k) * t + c];
        const auto st = oracle::moran(grid, n, m);
        for (std::size_t k = 0; k < cells; ++k) s[(bi * cells + k) * t + c] = st[k];
      }
    std::vector<double> xs = vec(b.input);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
          for (std::size_t l = 0; l < t; ++l) xs[((bi * n + i) * m + j) * t + l] += oracle::spe(i, j, l, t);
    const auto g = oracle::conv_depthwise(s, batch, n, m, t, vec(ps, "sag.gate.kernel"), 3, vec(ps, "sag.gate.bias"));
    auto f = oracle::conv_depthwise(xs, batch, n, m, t, vec(ps, "sag.feat.kernel"), 3, vec(ps, "sag.feat.bias"));
    for (std::size_t k = 0; k < f.size(); ++k) f[k] *= oracle::sigmoid(g[k]);

    std::vector<double> avg(batch * t, 0.0), mx(batch * t, -1e300);
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t k = 0; k < cells; ++k)
        for (std::size_t c = 0; c < t; ++c) {
          avg[bi * t + c] += f[(bi * cells + k) * t + c] / double(cells);
          mx[bi * t + c] = std::max(mx[bi * t + c], f[(bi * cells + k) * t + c]);
        }
    const auto pa = oracle::fc(oracle::fc(avg, batch, t, vec(ps, "tag.w0"), h, vec(ps, "tag.b0")), batch, h,
                               vec(ps, "tag.w1"), t, vec(ps, "tag.b1"));
    const auto pm = oracle::fc(oracle::fc(mx, batch, t, vec(ps, "tag.w2"), h, vec(ps, "tag.b2")), batch, h,
                               vec(ps, "tag.w3"), t, vec(ps, "tag.b3"));
    for (std::size_t bi = 0; bi < batch; ++bi)
      for (std::size_t k = 0; k < cells; ++k)
        for (std::size_t c = 0; c < t; ++c) f[(bi * cells + k) * t + c] *= oracle::sigmoid(pa[bi * t + c] + pm[bi * t + c]);

    std::vector<double> sum(batch * cells, 0.0);
    for (std::size_t l : {1, 3, 5}) {
      const std::string pre = "msr." + std::to_string(l) + ".";
      auto inner = oracle::conv_dense(f, batch, n, m, t, vec(ps, pre + "inner.kernel"), l, t, vec(ps, pre + "inner.bias"));
      const auto skip = oracle::conv_dense(f, batch, n, m, t, vec(ps, pre + "skip.kernel"), l, t, vec(ps, pre + "skip.bias"));
      for (std::size_t k = 0; k < inner.size(); ++k) inner[k] = oracle::relu(inner[k]) + skip[k];
      const auto outer = oracle::conv_dense(inner, batch, n, m, t, vec(ps, pre + "outer.kernel"), l, 1, vec(ps, pre + "outer.bias"));
      for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += oracle::relu(outer[k]);
    }
    auto hidden = oracle::fc(vec(b.external), batch, cfg.dext, vec(ps, "ext.fc1.weight"), cfg.demb, vec(ps, "ext.fc1.bias"));
    for (double& v : hidden) v = oracle::relu(v);
    const auto ext = oracle::fc(hidden, batch, cfg.demb, vec(ps, "ext.fc2.weight"), cells, vec(ps, "ext.fc2.bias"));

    ASSERT_EQ(got.shape(), (Shape{batch, n, m, 1}));
    for (std::size_t k = 0; k < sum.size(); ++k) ASSERT_NEAR(got[k], std::tanh(sum[k] + ext[k]), 1e-12) << "seed " << seed;
  }
}

TEST(Forward, SagOffEqualsOpenGate) {
  const ModelConfig cfg = small_config();
  ParameterSet ps = random_params(cfg, 12);
  for (double& v : ps.at("sag.gate.kernel").data()) v = 0.0;
  for (double& v : ps.at("sag.gate.bias").data()) v = 1e3;
  const Batch b = random_batch(cfg, 2, 12);
  EXPECT_TRUE(same_bits(run_forward(ps, cfg, b), run_forward(ps, cfg, b, ModuleFlags{false, true, true})));
}

TEST(Forward, RangesAndAttention) {
  const ModelConfig cfg = small_config(6, 6, 5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ParameterSet ps = init_parameters(cfg, seed);
    const Batch b = random_batch(cfg, 3, seed);
    Tape tape;
    BoundParameters p(tape, ps, false);
    const ForwardResult r = forward(tape, b, p, cfg);
    for (double v : r.prediction.value().data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
    ASSERT_EQ(r.attention.shape(), (Shape{3, 5}));
    for (double a : r.attention.value().data()) {
      EXPECT_GT(a, 0.0);
      EXPECT_LT(a, 1.0);
    }
  }
}

TEST(Forward, Deterministic) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 13);
  const Batch b = random_batch(cfg, 2, 13);
  EXPECT_TRUE(same_bits(run_forward(ps, cfg, b), run_forward(ps, cfg, b)));
}

TEST(Forward, WrongInputShapeThrows) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 1);
  Batch b = random_batch(small_config(5, 6, 3), 1, 1);
  b.external = Tensor(Shape{1, cfg.dext});
  EXPECT_THROW(run_forward(ps, cfg, b), ShapeError);
}

TEST(Predict, MatchesForward) {
  const ModelConfig cfg = small_config();
  const ParameterSet ps = random_params(cfg, 14);
  std::mt19937_64 gen(14);
  std::vector<Sample> samples(5);
  for (std::size_t k = 0; k < 5; ++k) {
    samples[k].target_index = 100 + k;
    samples[k].input = gradcheck::random_tensor(gen, Shape{cfg.n, cfg.m, cfg.channels});
    samples[k].external = oracle::random_vector(gen, cfg.dext, 0.0, 1.0);
    samples[k].target = Tensor(Shape{cfg.n, cfg.m});
  }
  const auto preds = predict(ps, cfg, {}, samples, 2);
  ASSERT_EQ(preds.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<const Sample*> one{&samples[k]};
    const Batch b = make_batch(one, cfg);
    const Tensor y = run_forward(ps, cfg, b);
    EXPECT_EQ(preds[k].target_index, 100 + k);
    for (std::size_t c = 0; c < y.size(); ++c) EXPECT_EQ(preds[k].grid[c], y[c]);
    EXPECT_EQ(preds[k].attention.size(), cfg.channels);
  }
  const auto off = predict(ps, cfg, ModuleFlags{true, false, true}, samples);
  for (double a : off[0].attention) EXPECT_EQ(a, 1.0);
}

// ---- end-to-end gradients ----

class EndToEndGradient : public ::testing::TestWithParam<std::uint64_t> {};

TEST_P(EndToEndGradient, MatchesFiniteDifferences) {
  const ModelConfig cfg = small_config(6, 6, 4);
  const std::uint64_t seed = GetParam();
  ParameterSet ps = random_params(cfg, seed);
  std::mt19937_64 gen(seed);
  Sample s;
  s.input = gradcheck::random_tensor(gen, Shape{6, 6, 4});
  s.external = oracle::random_vector(gen, cfg.dext, 0.0, 1.0);
  s.target = gradcheck::random_tensor(gen, Shape{6, 6});
  const std::vector<const Sample*> batch{&s};
  const BatchGradient g = batch_gradient(ps, cfg, {}, batch, 1.0);
  ASSERT_EQ(g.grads.size(), ps.size());

  const double h = 1e-6;
  double worst = 0.0;
  std::string where;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    Tensor& value = ps.entries()[k].value;
    for (std::size_t e = 0; e < value.size(); ++e) {
      const double orig = value[e];
      value[e] = orig + h;
      const double up = batch_gradient(ps, cfg, {}, batch, 1.0).loss;
      value[e] = orig - h;
      const double down = batch_gradient(ps, cfg, {}, batch, 1.0).loss;
      value[e] = orig;
      const double err = gradcheck::rel_error(g.grads[k][e], (up - down) / (2.0 * h));
      if (err > worst) worst = err, where = ps.entries()[k].name + "[" + std::to_string(e) + "]";
    }
  }
  EXPECT_LT(worst, 1e-4) << where;
}

INSTANTIATE_TEST_SUITE_P(Seeds, EndToEndGradient, ::testing::Values(1u, 2u, 3u, 4u, 5u));

}  // namespace
