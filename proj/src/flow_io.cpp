#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pasta/error.hpp"
#include "pasta/grid_data.hpp"

namespace pasta {
namespace {

using namespace std::chrono;

bool parse_int(std::string_view s, long long& out) {
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  // from_chars rejects a leading '+'; accept it for hand-written files.
  if (s.front() == '+') s.remove_prefix(1);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = s.find(sep, pos);
    out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

std::string_view trim_eol(std::string_view line) {
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
  return line;
}

std::string to_text(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  const std::string str(text);
  int fields = 0;
  if (str.size() == 10) {
    fields = std::sscanf(str.c_str(), "%4d-%2d-%2d%c", &y, &mo, &d, &tail);
    if (fields != 3) return std::nullopt;
  } else if (str.size() == 16) {
    fields = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d%c", &y, &mo, &d, &h, &mi, &tail);
    if (fields != 5) return std::nullopt;
  } else if (str.size() == 19) {
    fields = std::sscanf(str.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
    if (fields != 6 || s != 0) return std::nullopt;
  } else {
    return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59) return std::nullopt;
  return Timestamp{sys_days{ymd}} + hours{h} + minutes{mi};
}

std::string format_timestamp(Timestamp ts) {
  const auto day_point = floor<days>(ts);
  const year_month_day ymd{day_point};
  const auto rem = ts - day_point;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:00", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(duration_cast<hours>(rem).count()), static_cast<int>(rem.count() % 60));
  return buf;
}

FlowSequence::FlowSequence(std::size_t n, std::size_t m, int interval_minutes, Timestamp start)
    : n_(n), m_(m), interval_(interval_minutes), start_(start) {
  if (n == 0 || m == 0) throw InvalidArgument("flow sequence extents must be positive");
  if (interval_minutes <= 0) throw InvalidArgument("interval_minutes must be positive");
}

Timestamp FlowSequence::timestamp(std::size_t index) const {
  return start_ + minutes{static_cast<long long>(index) * interval_};
}

GridView FlowSequence::frame(std::size_t index) const {
  if (index >= frame_count())
    throw InvalidArgument("frame index " + std::to_string(index) + " out of range (" +
                          std::to_string(frame_count()) + " frames)");
  return GridView{std::span<const double>(values_).subspan(index * cells(), cells()), n_, m_};
}

void FlowSequence::push_frame(std::span<const double> frame) {
  if (frame.size() != cells())
    throw DataError("ragged-row", "frame has " + std::to_string(frame.size()) + " values, expected " +
                                      std::to_string(cells()));
  for (double v : frame) {
    if (!std::isfinite(v)) throw DataError("bad-value", "non-finite flow value");
    if (v < 0.0) throw DataError("negative-value", "negative flow value " + to_text(v));
  }
  values_.insert(values_.end(), frame.begin(), frame.end());
}

FlowSequence parse_flow_sequence(std::string_view text) {
  const auto lines = split(text, '\n');
  const std::string_view header = trim_eol(lines.front());
  const auto tokens = split(header, ' ');
  if (tokens.size() != 6 || tokens[0] != "#pasta-flow" || tokens[1] != "v1")
    throw DataError("malformed-header", "expected '#pasta-flow v1 n=.. m=.. interval_minutes=.. start=..'");
  auto field = [&](std::size_t idx, std::string_view key) {
    const std::string_view tok = tokens[idx];
    if (tok.substr(0, key.size()) != key || tok.size() == key.size() || tok[key.size()] != '=')
      throw DataError("malformed-header", "header field " + std::to_string(idx) + " must be " +
                                              std::string(key) + "=<value>");
    return tok.substr(key.size() + 1);
  };
  long long n = 0, m = 0, interval = 0;
  if (!parse_int(field(2, "n"), n) || !parse_int(field(3, "m"), m) || n <= 0 || m <= 0)
    throw DataError("malformed-header", "grid extents must be positive integers");
  if (!parse_int(field(4, "interval_minutes"), interval))
    throw DataError("malformed-header", "interval_minutes must be an integer");
  if (interval <= 0)
    throw DataError("non-monotonic-time", "interval_minutes must be positive for increasing timestamps");
  const auto start = parse_timestamp(field(5, "start"));
  if (!start) throw DataError("malformed-header", "start is not an ISO-8601 timestamp");

  FlowSequence seq(static_cast<std::size_t>(n), static_cast<std::size_t>(m), static_cast<int>(interval), *start);
  std::vector<double> frame;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::string_view line = trim_eol(lines[li]);
    if (line.empty()) {
      if (li + 1 == lines.size()) break;
      throw DataError("ragged-row", "empty frame line " + std::to_string(li + 1));
    }
    const auto cells = split(line, ',');
    if (cells.size() != seq.cells())
      throw DataError("ragged-row", "line " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                                        " values, header declares " + std::to_string(seq.cells()));
    frame.assign(cells.size(), 0.0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], frame[c]) || !std::isfinite(frame[c]))
        throw DataError("bad-value", "line " + std::to_string(li + 1) + ": cannot parse '" +
                                         std::string(cells[c]) + "'");
      if (frame[c] < 0.0)
        throw DataError("negative-value", "line " + std::to_string(li + 1) + ": negative value " +
                                              std::string(cells[c]));
    }
    seq.push_frame(frame);
  }
  if (seq.frame_count() == 0) throw DataError("empty-sequence", "flow file contains no frames");
  return seq;
}

FlowSequence load_flow_sequence(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_flow_sequence(buf.str());
}

std::string serialize_flow_sequence(const FlowSequence& seq) {
  std::string out = "#pasta-flow v1 n=" + std::to_string(seq.n()) + " m=" + std::to_string(seq.m()) +
                    " interval_minutes=" + std::to_string(seq.interval_minutes()) +
                    " start=" + format_timestamp(seq.start()) + "\n";
  for (std::size_t t = 0; t < seq.frame_count(); ++t) {
    const GridView g = seq.frame(t);
    for (std::size_t c = 0; c < g.values.size(); ++c) {
      if (c) out += ',';
      out += to_text(g.values[c]);
    }
    out += '\n';
  }
  return out;
}

void save_flow_sequence(const FlowSequence& seq, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_flow_sequence(seq));
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("io", "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("io", "write failed for " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("io", "cannot rename into " + path.string() + ": " + ec.message());
}

HolidayCalendar parse_holidays(std::string_view text) {
  HolidayCalendar out;
  std::size_t lineno = 0;
  for (std::string_view line : split(text, '\n')) {
    ++lineno;
    line = trim_eol(line);
    while (!line.empty() && (line.front() == ' ' || line.front() == '\t')) line.remove_prefix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto ts = parse_timestamp(line.substr(0, 10));
    if (line.size() != 10 || !ts)
      throw DataError("bad-value", "holiday line " + std::to_string(lineno) + " is not a YYYY-MM-DD date");
    out.insert(floor<days>(*ts));
  }
  return out;
}

HolidayCalendar load_holidays(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("io", "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_holidays(buf.str());
}

}  // namespace pasta
