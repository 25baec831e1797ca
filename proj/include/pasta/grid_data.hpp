#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pasta/spatial_stats.hpp"
#include "pasta/tensor.hpp"

namespace pasta {

using Timestamp = std::chrono::sys_time<std::chrono::minutes>;

/// Parses "YYYY-MM-DD", "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH:MM:SS" (optional
/// trailing 'Z'). Seconds must be zero.
std::optional<Timestamp> parse_timestamp(std::string_view text);
std::string format_timestamp(Timestamp ts);

/// Chronological stack of N x M grids at a fixed interval.
class FlowSequence {
 public:
  FlowSequence() = default;
  FlowSequence(std::size_t n, std::size_t m, int interval_minutes, Timestamp start);

  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::size_t cells() const noexcept { return n_ * m_; }
  int interval_minutes() const noexcept { return interval_; }
  Timestamp start() const noexcept { return start_; }
  std::size_t frame_count() const noexcept { return cells() ? values_.size() / cells() : 0; }
  std::size_t frames_per_day() const noexcept { return static_cast<std::size_t>(1440 / interval_); }

  Timestamp timestamp(std::size_t index) const;
  GridView frame(std::size_t index) const;
  std::span<const double> values() const noexcept { return values_; }

  /// Appends one row-major frame; throws on wrong size or negative values.
  void push_frame(std::span<const double> frame);

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  int interval_ = 60;
  Timestamp start_{};
  std::vector<double> values_;
};

/// Reads the `#pasta-flow v1` text format. Errors are DataError with kinds
/// io, malformed-header, non-monotonic-time, ragged-row, bad-value,
/// negative-value, empty-sequence.
FlowSequence load_flow_sequence(const std::filesystem::path& path);
FlowSequence parse_flow_sequence(std::string_view text);
std::string serialize_flow_sequence(const FlowSequence& seq);
void save_flow_sequence(const FlowSequence& seq, const std::filesystem::path& path);

/// Writes via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

using HolidayCalendar = std::set<std::chrono::sys_days>;
HolidayCalendar load_holidays(const std::filesystem::path& path);
HolidayCalendar parse_holidays(std::string_view text);

/// Channel layout of a model input: closeness, periodic, trend fragments.
/// Lags are durations; build_samples converts them to frame counts.
struct FragmentSpec {
  int t_closeness = 5;
  int t_periodic = 6;
  int t_trend = 4;
  std::chrono::minutes closeness_step{60};
  std::chrono::minutes periodic_step{1440};
  std::chrono::minutes trend_step{10080};

  int channels() const noexcept { return t_closeness + t_periodic + t_trend; }
  void validate() const;

  /// Frame offsets behind the last observed frame (target - 1), one per
  /// channel in channel order. Throws DataError if a step is not a whole
  /// number of frames.
  std::vector<std::size_t> frame_offsets(int interval_minutes) const;

  /// Channel labels such as "closeness-1h", "periodic-3d", "trend-2w".
  std::vector<std::string> channel_labels() const;
};

/// Min-max scaler onto [-1, 1].
struct Scaler {
  double data_min = 0.0;
  double data_max = 1.0;

  static Scaler fit(std::span<const double> values);
  double apply(double x) const { return 2.0 * (x - data_min) / (data_max - data_min) - 1.0; }
  double invert(double y) const { return (y + 1.0) * 0.5 * (data_max - data_min) + data_min; }
};

/// [time-of-day one-hot (24 or 48), day-of-week one-hot (7, Monday first), holiday].
std::vector<double> external_features(Timestamp ts, int interval_minutes,
                                      const HolidayCalendar& holidays);
std::size_t external_dim(int interval_minutes);

struct Sample {
  std::size_t target_index = 0;
  Tensor input;                    // [N, M, T], normalized
  std::vector<double> external;
  Tensor target;                   // [N, M], normalized
  std::vector<double> raw_target;  // N*M, original scale
};

/// Smallest target index with full history under `spec`.
std::size_t first_valid_target(const FragmentSpec& spec, int interval_minutes);

/// One sample per target index in [first, last) that has full history,
/// where last defaults to the sequence end. Throws DataError("no-samples")
/// if none qualify.
std::vector<Sample> build_samples(const FlowSequence& seq, const FragmentSpec& spec,
                                  const Scaler& scaler, const HolidayCalendar& holidays = {},
                                  std::size_t first = 0, std::size_t last = SIZE_MAX);

/// Chronological split: targets before `test_start` train, the rest test.
struct DataSplit {
  std::size_t test_start = 0;  // first test target index
  Scaler scaler;               // fit on frames [0, test_start)
};
DataSplit split_by_test_days(const FlowSequence& seq, int test_days);

struct SyntheticConfig {
  std::size_t n = 16;
  std::size_t m = 16;
  int days = 35;
  int interval_minutes = 60;
  std::vector<std::pair<std::size_t, std::size_t>> hotspots;  // empty: default_hotspots(n, m)
  double noise = 0.1;
  std::uint64_t seed = 0;
  Timestamp start = std::chrono::sys_days{std::chrono::year{2024} / 1 / 1};  // a Monday
  std::vector<int> peak_hours{8, 18};
  double spike = 4.0;
};

/// Hotspots used when none are configured: four cells spread over the map.
std::vector<std::pair<std::size_t, std::size_t>> default_hotspots(std::size_t n, std::size_t m);

/// Whether hour-of-day of `ts` is one of `cfg.peak_hours`.
bool is_peak(const SyntheticConfig& cfg, Timestamp ts);

/// Daily sinusoid with weekend damping and multiplicative noise, clipped at
/// zero. Hotspot cells spike at peak hours while their queen neighbourhood is
/// damped, so hotspots read as high-low cells.
FlowSequence generate_synthetic(const SyntheticConfig& cfg);

}  // namespace pasta
