#include <algorithm>
#include <cmath>
#include <numbers>

#include "pasta/error.hpp"
#include "pasta/grid_data.hpp"
#include "pasta/rng.hpp"

namespace pasta {

std::vector<std::pair<std::size_t, std::size_t>> default_hotspots(std::size_t n, std::size_t m) {
  std::vector<std::pair<std::size_t, std::size_t>> out{
      {n / 4, m / 4}, {n / 4, (3 * m) / 4}, {(3 * n) / 4, m / 2}, {n / 2, m / 2}};
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool is_peak(const SyntheticConfig& cfg, Timestamp ts) {
  using namespace std::chrono;
  const auto hour = duration_cast<hours>(ts - floor<days>(ts)).count();
  return std::find(cfg.peak_hours.begin(), cfg.peak_hours.end(), static_cast<int>(hour)) != cfg.peak_hours.end();
}

FlowSequence generate_synthetic(const SyntheticConfig& cfg) {
  using namespace std::chrono;
  if (cfg.n == 0 || cfg.m == 0) throw InvalidArgument("synthetic grid extents must be positive");
  if (cfg.days < 1) throw InvalidArgument("synthetic data needs at least one day");
  if (cfg.interval_minutes <= 0 || 1440 % cfg.interval_minutes != 0)
    throw InvalidArgument("interval must divide a day");
  if (cfg.noise < 0.0) throw InvalidArgument("noise level must be non-negative");
  const auto hotspots = cfg.hotspots.empty() ? default_hotspots(cfg.n, cfg.m) : cfg.hotspots;
  for (const auto& [i, j] : hotspots)
    if (i >= cfg.n || j >= cfg.m)
      throw InvalidArgument("hotspot (" + std::to_string(i) + "," + std::to_string(j) + ") outside " +
                            std::to_string(cfg.n) + "x" + std::to_string(cfg.m) + " grid");

  Rng rng(cfg.seed);
  const std::size_t cells = cfg.n * cfg.m;
  constexpr double two_pi = 2.0 * std::numbers::pi;

  // Smooth positive base level with mild per-cell jitter, plus a per-cell
  // phase shift of the daily cycle.
  const double phase_i = rng.uniform(0.0, two_pi);
  const double phase_j = rng.uniform(0.0, two_pi);
  std::vector<double> base(cells), phase(cells);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = 0; j < cfg.m; ++j) {
      const double wave = std::sin(two_pi * 0.8 * i / cfg.n + phase_i) * std::cos(two_pi * 0.6 * j / cfg.m + phase_j);
      base[i * cfg.m + j] = 100.0 + 45.0 * wave + rng.uniform(-10.0, 10.0);
      phase[i * cfg.m + j] = rng.uniform(-1.0, 1.0);
    }

  std::vector<bool> hot(cells, false);
  for (const auto& [i, j] : hotspots) hot[i * cfg.m + j] = true;
  for (const auto& [hi, hj] : hotspots)
    for (std::size_t i = hi == 0 ? 0 : hi - 1; i <= std::min(hi + 1, cfg.n - 1); ++i)
      for (std::size_t j = hj == 0 ? 0 : hj - 1; j <= std::min(hj + 1, cfg.m - 1); ++j)
        if (!hot[i * cfg.m + j]) base[i * cfg.m + j] *= 0.35;

  FlowSequence seq(cfg.n, cfg.m, cfg.interval_minutes, cfg.start);
  const std::size_t frames = static_cast<std::size_t>(cfg.days) * (1440 / cfg.interval_minutes);
  std::vector<double> frame(cells);
  for (std::size_t t = 0; t < frames; ++t) {
    const Timestamp ts = seq.timestamp(t);
    const sys_days day = floor<days>(ts);
    const double hour = static_cast<double>((ts - day).count()) / 60.0;
    const unsigned dow = weekday{day}.iso_encoding();
    const double weekly = dow >= 6 ? 0.75 : 1.0;
    const bool peak = is_peak(cfg, ts);
    for (std::size_t c = 0; c < cells; ++c) {
      const double daily = 1.0 + 0.5 * std::sin(two_pi * (hour - 9.0 + phase[c]) / 24.0);
      double v = base[c] * daily * weekly;
      if (hot[c] && peak) v *= cfg.spike;
      v *= 1.0 + cfg.noise * rng.normal();
      frame[c] = std::max(0.0, v);
    }
    seq.push_frame(frame);
  }
  return seq;
}

}  // namespace pasta
