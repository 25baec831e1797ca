#include <algorithm>

#include "pasta/error.hpp"
#include "pasta/grid_data.hpp"

namespace pasta {
namespace {

std::string format_lag(long long minutes) {
  if (minutes % 10080 == 0) return std::to_string(minutes / 10080) + "w";
  if (minutes % 1440 == 0) return std::to_string(minutes / 1440) + "d";
  if (minutes % 60 == 0) return std::to_string(minutes / 60) + "h";
  return std::to_string(minutes) + "m";
}

std::size_t step_frames(std::chrono::minutes step, int interval_minutes, const char* which) {
  if (step.count() <= 0) throw InvalidArgument(std::string(which) + " step must be positive");
  if (step.count() % interval_minutes != 0)
    throw DataError("step-resolution", std::string(which) + " step of " + std::to_string(step.count()) +
                                           " minutes is not a whole number of " +
                                           std::to_string(interval_minutes) + "-minute frames");
  return static_cast<std::size_t>(step.count() / interval_minutes);
}

}  // namespace

void FragmentSpec::validate() const {
  if (t_closeness < 0 || t_periodic < 0 || t_trend < 0)
    throw InvalidArgument("fragment counts must be non-negative");
  if (channels() < 1) throw InvalidArgument("fragment spec needs at least one channel");
  if (closeness_step.count() <= 0 || periodic_step.count() <= 0 || trend_step.count() <= 0)
    throw InvalidArgument("fragment steps must be positive");
}

std::vector<std::size_t> FragmentSpec::frame_offsets(int interval_minutes) const {
  validate();
  const std::size_t cs = step_frames(closeness_step, interval_minutes, "closeness");
  const std::size_t ps = step_frames(periodic_step, interval_minutes, "periodic");
  const std::size_t ts = step_frames(trend_step, interval_minutes, "trend");
  std::vector<std::size_t> out;
  out.reserve(static_cast<std::size_t>(channels()));
  // Closeness starts at the last observed frame; periodic and trend start one
  // step behind it.
  for (int k = 0; k < t_closeness; ++k) out.push_back(static_cast<std::size_t>(k) * cs);
  for (int k = 1; k <= t_periodic; ++k) out.push_back(static_cast<std::size_t>(k) * ps);
  for (int k = 1; k <= t_trend; ++k) out.push_back(static_cast<std::size_t>(k) * ts);
  return out;
}

std::vector<std::string> FragmentSpec::channel_labels() const {
  validate();
  std::vector<std::string> out;
  for (int k = 1; k <= t_closeness; ++k) out.push_back("closeness-" + format_lag(k * closeness_step.count()));
  for (int k = 1; k <= t_periodic; ++k) out.push_back("periodic-" + format_lag(k * periodic_step.count()));
  for (int k = 1; k <= t_trend; ++k) out.push_back("trend-" + format_lag(k * trend_step.count()));
  return out;
}

Scaler Scaler::fit(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("cannot fit a scaler on no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) throw DataError("degenerate-scaler", "min-max scaler needs max > min");
  return Scaler{*lo, *hi};
}

std::size_t first_valid_target(const FragmentSpec& spec, int interval_minutes) {
  const auto offsets = spec.frame_offsets(interval_minutes);
  return *std::max_element(offsets.begin(), offsets.end()) + 1;
}

std::vector<Sample> build_samples(const FlowSequence& seq, const FragmentSpec& spec, const Scaler& scaler,
                                  const HolidayCalendar& holidays, std::size_t first, std::size_t last) {
  const auto offsets = spec.frame_offsets(seq.interval_minutes());
  const std::size_t t = offsets.size();
  const std::size_t n = seq.n(), m = seq.m();
  const std::size_t begin = std::max(first, first_valid_target(spec, seq.interval_minutes()));
  const std::size_t end = std::min(last, seq.frame_count());

  std::vector<Sample> out;
  for (std::size_t target = begin; target < end; ++target) {
    Sample s;
    s.target_index = target;
    s.input = Tensor(Shape{n, m, t});
    const std::size_t anchor = target - 1;
    for (std::size_t c = 0; c < t; ++c) {
      const GridView src = seq.frame(anchor - offsets[c]);
      for (std::size_t cell = 0; cell < n * m; ++cell) s.input[cell * t + c] = scaler.apply(src.values[cell]);
    }
    s.external = external_features(seq.timestamp(target), seq.interval_minutes(), holidays);
    const GridView y = seq.frame(target);
    s.raw_target.assign(y.values.begin(), y.values.end());
    s.target = Tensor(Shape{n, m});
    for (std::size_t cell = 0; cell < n * m; ++cell) s.target[cell] = scaler.apply(y.values[cell]);
    out.push_back(std::move(s));
  }
  if (out.empty())
    throw DataError("no-samples", "no target index in range has full history (need index >= " +
                                      std::to_string(begin) + ", sequence has " +
                                      std::to_string(seq.frame_count()) + " frames)");
  return out;
}

DataSplit split_by_test_days(const FlowSequence& seq, int test_days) {
  if (test_days < 0) throw InvalidArgument("test days must be non-negative");
  const std::size_t test_frames = static_cast<std::size_t>(test_days) * seq.frames_per_day();
  if (test_frames >= seq.frame_count())
    throw DataError("split", "test period of " + std::to_string(test_days) + " days leaves no training frames");
  DataSplit split;
  split.test_start = seq.frame_count() - test_frames;
  split.scaler = Scaler::fit(seq.values().subspan(0, split.test_start * seq.cells()));
  return split;
}

}  // namespace pasta
