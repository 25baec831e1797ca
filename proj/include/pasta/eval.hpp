#pragma once

#include <span>
#include <string>
#include <vector>

#include "pasta/grid_data.hpp"
#include "pasta/model.hpp"
#include "pasta/spatial_stats.hpp"
#include "pasta/train.hpp"

namespace pasta {

/// One N*M grid per evaluated timestamp, raw scale.
using GridSeries = std::vector<std::vector<double>>;

double rmse(std::span<const double> pred, std::span<const double> truth);

/// Mean |pred - truth| / truth * 100 over cells with truth >= threshold.
/// Throws DataError("all-masked") if no cell qualifies.
double mape(std::span<const double> pred, std::span<const double> truth, double threshold);

struct MetricReport {
  std::string segment = "ALL";
  double rmse = 0.0;
  double mape = 0.0;
  std::size_t count = 0;       // cells in the RMSE
  std::size_t mape_count = 0;  // cells above the MAPE threshold
};

MetricReport evaluate_all(const GridSeries& preds, const GridSeries& truths, double mape_threshold);

/// Metrics restricted to cells labelled `segment` (HL or LH) by quadrants()
/// of the true grid at the same timestamp.
MetricReport segment_metrics(const GridSeries& preds, const GridSeries& truths, std::size_t n, std::size_t m,
                             Quadrant segment, double mape_threshold);

/// Per-timestamp HL/LH cell counts on the true grids.
struct SegmentCounts {
  std::vector<std::size_t> hl;
  std::vector<std::size_t> lh;
  std::size_t overlaps = 0;  // cells labelled both HL and LH; always 0
};
SegmentCounts segment_counts(const GridSeries& truths, std::size_t n, std::size_t m);

enum class Baseline { Persistence, HistoricalAverage };

/// Persistence: frame target-1. Historical average: mean of frames before
/// `train_end` with the same slot of the week as the target.
GridSeries baseline_predict(Baseline kind, const FlowSequence& seq, std::span<const std::size_t> targets,
                            std::size_t train_end);

/// Denormalized predictions, clipped at zero.
GridSeries denormalize(std::span<const Prediction> preds, const Scaler& scaler);

GridSeries raw_targets(std::span<const Sample> samples);
std::vector<std::size_t> target_indices(std::span<const Sample> samples);

/// Train / validation / test samples from a sequence whose last `test_days`
/// days are held out. The scaler is fit on the pre-test frames only.
struct ExperimentData {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
  Scaler scaler;
  ModelConfig model;
  FragmentSpec fragments;
  std::size_t test_start = 0;
};
ExperimentData prepare_experiment(const FlowSequence& seq, const FragmentSpec& fragments, int test_days,
                                  const HolidayCalendar& holidays = {});

/// Raw-scale metrics of `params` on the test samples.
MetricReport evaluate_model(const ParameterSet& params, const ExperimentData& data, ModuleFlags flags,
                            double mape_threshold);

struct AblationVariant {
  std::string label;
  ModuleFlags flags;
};

/// Rows (A)-(F): TAG; MSR; TAG+MSR; SAG+TAG; SAG+MSR; SAG+TAG+MSR.
std::vector<AblationVariant> standard_variants();
/// The variant with every module disabled.
AblationVariant bare_variant();

struct AblationRow {
  std::string label;
  ModuleFlags flags;
  double rmse = 0.0;
  double mape = 0.0;
  double final_train_loss = 0.0;
};

struct AblationReport {
  std::vector<AblationRow> rows;

  /// "sag,tag,msr,rmse,mape" with 1/0 flags.
  std::string csv() const;
  std::string table() const;
  const AblationRow* find(ModuleFlags flags) const;
};

/// Trains every variant with the same config and seed; rows sorted in
/// component-analysis order (fewest modules first, full model last).
AblationReport run_ablation(const ExperimentData& data, const TrainConfig& config,
                            std::span<const AblationVariant> variants, double mape_threshold);

std::string metrics_csv(std::span<const std::pair<std::string, MetricReport>> rows);
std::string metrics_table(std::span<const std::pair<std::string, MetricReport>> rows);

}  // namespace pasta
