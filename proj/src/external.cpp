#include "pasta/error.hpp"
#include "pasta/grid_data.hpp"

namespace pasta {

std::size_t external_dim(int interval_minutes) {
  if (interval_minutes == 60) return 24 + 7 + 1;
  if (interval_minutes == 30) return 48 + 7 + 1;
  throw DataError("unsupported-interval", "external features need a 60- or 30-minute interval, got " +
                                              std::to_string(interval_minutes));
}

std::vector<double> external_features(Timestamp ts, int interval_minutes, const HolidayCalendar& holidays) {
  using namespace std::chrono;
  const std::size_t dim = external_dim(interval_minutes);
  const std::size_t slots = dim - 8;
  std::vector<double> out(dim, 0.0);

  const sys_days day = floor<days>(ts);
  const auto minute_of_day = (ts - day).count();
  out[static_cast<std::size_t>(minute_of_day / interval_minutes)] = 1.0;
  // iso_encoding: Monday = 1 ... Sunday = 7.
  out[slots + weekday{day}.iso_encoding() - 1] = 1.0;
  out[dim - 1] = holidays.contains(day) ? 1.0 : 0.0;
  return out;
}

}  // namespace pasta
