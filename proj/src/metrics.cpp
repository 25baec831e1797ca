#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>

#include "pasta/error.hpp"
#include "pasta/eval.hpp"

namespace pasta {
namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size())
    throw ShapeError("metric inputs differ in size: " + std::to_string(pred.size()) + " vs " +
                     std::to_string(truth.size()));
  if (pred.empty()) throw DataError("all-masked", "no cells to evaluate");
}

void check_series(const GridSeries& preds, const GridSeries& truths) {
  if (preds.size() != truths.size())
    throw ShapeError("prediction and truth series differ in length");
  if (preds.empty()) throw DataError("all-masked", "no timestamps to evaluate");
}

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

double rmse(std::span<const double> pred, std::span<const double> truth) {
  check_pair(pred, truth);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - truth[i]) * (pred[i] - truth[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

double mape(std::span<const double> pred, std::span<const double> truth, double threshold) {
  check_pair(pred, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] < threshold || truth[i] <= 0.0) continue;
    sum += std::fabs(pred[i] - truth[i]) / truth[i];
    ++count;
  }
  if (count == 0) throw DataError("all-masked", "every cell is below the MAPE threshold");
  return 100.0 * sum / static_cast<double>(count);
}

MetricReport evaluate_all(const GridSeries& preds, const GridSeries& truths, double mape_threshold) {
  check_series(preds, truths);
  std::vector<double> p, t;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    if (preds[s].size() != truths[s].size()) throw ShapeError("grid size mismatch at timestamp " + std::to_string(s));
    p.insert(p.end(), preds[s].begin(), preds[s].end());
    t.insert(t.end(), truths[s].begin(), truths[s].end());
  }
  MetricReport r;
  r.rmse = rmse(p, t);
  r.mape = mape(p, t, mape_threshold);
  r.count = p.size();
  r.mape_count = static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [&](double v) {
    return v >= mape_threshold && v > 0.0;
  }));
  return r;
}

MetricReport segment_metrics(const GridSeries& preds, const GridSeries& truths, std::size_t n, std::size_t m,
                             Quadrant segment, double mape_threshold) {
  if (segment != Quadrant::HL && segment != Quadrant::LH)
    throw InvalidArgument("segment must be HL or LH");
  check_series(preds, truths);
  std::vector<double> p, t;
  for (std::size_t s = 0; s < truths.size(); ++s) {
    if (truths[s].size() != n * m || preds[s].size() != n * m)
      throw ShapeError("grid size mismatch at timestamp " + std::to_string(s));
    const QuadrantMap q = quadrants(GridView{truths[s], n, m});
    for (std::size_t c = 0; c < n * m; ++c)
      if (q.labels[c] == segment) {
        p.push_back(preds[s][c]);
        t.push_back(truths[s][c]);
      }
  }
  if (p.empty())
    throw DataError("empty-segment", "no " + std::string(quadrant_name(segment)) + " cells in the evaluated set");
  MetricReport r;
  r.segment = std::string(quadrant_name(segment));
  r.rmse = rmse(p, t);
  r.mape = mape(p, t, mape_threshold);
  r.count = p.size();
  r.mape_count = static_cast<std::size_t>(std::count_if(t.begin(), t.end(), [&](double v) {
    return v >= mape_threshold && v > 0.0;
  }));
  return r;
}

SegmentCounts segment_counts(const GridSeries& truths, std::size_t n, std::size_t m) {
  SegmentCounts out;
  for (const auto& grid : truths) {
    const QuadrantMap q = quadrants(GridView{grid, n, m});
    std::size_t hl = 0, lh = 0;
    for (Quadrant label : q.labels) {
      hl += label == Quadrant::HL;
      lh += label == Quadrant::LH;
    }
    out.hl.push_back(hl);
    out.lh.push_back(lh);
  }
  return out;
}

GridSeries baseline_predict(Baseline kind, const FlowSequence& seq, std::span<const std::size_t> targets,
                            std::size_t train_end) {
  using namespace std::chrono;
  GridSeries out;
  out.reserve(targets.size());
  const std::size_t cells = seq.cells();

  std::map<long long, std::pair<std::vector<double>, std::size_t>> slot_means;
  const auto slot_of = [&](std::size_t index) {
    const Timestamp ts = seq.timestamp(index);
    const sys_days day = floor<days>(ts);
    return static_cast<long long>(weekday{day}.iso_encoding() - 1) * 1440 + (ts - day).count();
  };
  if (kind == Baseline::HistoricalAverage) {
    const std::size_t end = std::min(train_end, seq.frame_count());
    for (std::size_t t = 0; t < end; ++t) {
      auto& [sum, count] = slot_means[slot_of(t)];
      if (sum.empty()) sum.assign(cells, 0.0);
      const GridView g = seq.frame(t);
      for (std::size_t c = 0; c < cells; ++c) sum[c] += g.values[c];
      ++count;
    }
  }

  for (std::size_t target : targets) {
    if (target >= seq.frame_count())
      throw DataError("missing-history", "target index " + std::to_string(target) + " beyond sequence");
    if (kind == Baseline::Persistence) {
      if (target == 0) throw DataError("missing-history", "persistence needs the frame before index 0");
      const GridView g = seq.frame(target - 1);
      out.emplace_back(g.values.begin(), g.values.end());
    } else {
      auto it = slot_means.find(slot_of(target));
      if (it == slot_means.end())
        throw DataError("missing-history", "no training frame shares the slot of week of index " +
                                               std::to_string(target));
      std::vector<double> grid = it->second.first;
      for (double& v : grid) v /= static_cast<double>(it->second.second);
      out.push_back(std::move(grid));
    }
  }
  return out;
}

GridSeries denormalize(std::span<const Prediction> preds, const Scaler& scaler) {
  GridSeries out;
  out.reserve(preds.size());
  for (const auto& p : preds) {
    std::vector<double> grid(p.grid.size());
    for (std::size_t c = 0; c < grid.size(); ++c) grid[c] = std::max(0.0, scaler.invert(p.grid[c]));
    out.push_back(std::move(grid));
  }
  return out;
}

GridSeries raw_targets(std::span<const Sample> samples) {
  GridSeries out;
  for (const auto& s : samples) out.push_back(s.raw_target);
  return out;
}

std::vector<std::size_t> target_indices(std::span<const Sample> samples) {
  std::vector<std::size_t> out;
  for (const auto& s : samples) out.push_back(s.target_index);
  return out;
}

ExperimentData prepare_experiment(const FlowSequence& seq, const FragmentSpec& fragments, int test_days,
                                  const HolidayCalendar& holidays) {
  const DataSplit split = split_by_test_days(seq, test_days);
  ExperimentData data;
  data.scaler = split.scaler;
  data.fragments = fragments;
  data.test_start = split.test_start;
  std::vector<Sample> pre = build_samples(seq, fragments, split.scaler, holidays, 0, split.test_start);
  const std::size_t nval = validation_count(pre.size());
  data.validation.assign(std::make_move_iterator(pre.end() - static_cast<std::ptrdiff_t>(nval)),
                         std::make_move_iterator(pre.end()));
  pre.resize(pre.size() - nval);
  data.train = std::move(pre);
  data.test = build_samples(seq, fragments, split.scaler, holidays, split.test_start);
  data.model.n = seq.n();
  data.model.m = seq.m();
  data.model.channels = static_cast<std::size_t>(fragments.channels());
  data.model.dext = external_dim(seq.interval_minutes());
  return data;
}

MetricReport evaluate_model(const ParameterSet& params, const ExperimentData& data, ModuleFlags flags,
                            double mape_threshold) {
  const auto preds = predict(params, data.model, flags, data.test);
  return evaluate_all(denormalize(preds, data.scaler), raw_targets(data.test), mape_threshold);
}

std::string metrics_csv(std::span<const std::pair<std::string, MetricReport>> rows) {
  std::string out = "model,segment,rmse,mape,count\n";
  for (const auto& [name, r] : rows)
    out += name + "," + r.segment + "," + fmt(r.rmse, "%.6f") + "," + fmt(r.mape, "%.6f") + "," +
           std::to_string(r.count) + "\n";
  return out;
}

std::string metrics_table(std::span<const std::pair<std::string, MetricReport>> rows) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-22s %-7s %12s %10s %10s\n", "model", "segment", "RMSE", "MAPE", "cells");
  std::string out = buf;
  for (const auto& [name, r] : rows) {
    std::snprintf(buf, sizeof buf, "%-22s %-7s %12.4f %10.4f %10zu\n", name.c_str(), r.segment.c_str(), r.rmse,
                  r.mape, r.count);
    out += buf;
  }
  return out;
}

}  // namespace pasta
