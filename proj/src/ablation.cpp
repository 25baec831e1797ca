#include <algorithm>
#include <cstdio>

#include "pasta/eval.hpp"

namespace pasta {
namespace {

// Component-analysis order over all eight on/off combinations.
int table_rank(ModuleFlags f) {
  static constexpr ModuleFlags order[] = {
      {false, false, false}, {true, false, false}, {false, true, false}, {false, false, true},
      {false, true, true},   {true, true, false},  {true, false, true},  {true, true, true},
  };
  for (int i = 0; i < 8; ++i)
    if (order[i] == f) return i;
  return 8;
}

const char* mark(bool on) { return on ? "x" : " "; }

}  // namespace

std::vector<AblationVariant> standard_variants() {
  return {
      {"(A)", {false, true, false}}, {"(B)", {false, false, true}}, {"(C)", {false, true, true}},
      {"(D)", {true, true, false}},  {"(E)", {true, false, true}},  {"(F)", {true, true, true}},
  };
}

AblationVariant bare_variant() { return {"(0)", {false, false, false}}; }

std::string AblationReport::csv() const {
  std::string out = "sag,tag,msr,rmse,mape\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f,%.6f\n", r.flags.sag, r.flags.tag, r.flags.msr, r.rmse, r.mape);
    out += buf;
  }
  return out;
}

std::string AblationReport::table() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %-4s %-4s %-4s %12s %10s\n", "model", "SAG", "TAG", "MSR", "RMSE", "MAPE");
  std::string out = buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-6s %-4s %-4s %-4s %12.4f %10.4f\n", r.label.c_str(), mark(r.flags.sag),
                  mark(r.flags.tag), mark(r.flags.msr), r.rmse, r.mape);
    out += buf;
  }
  return out;
}

const AblationRow* AblationReport::find(ModuleFlags flags) const {
  for (const auto& r : rows)
    if (r.flags == flags) return &r;
  return nullptr;
}

AblationReport run_ablation(const ExperimentData& data, const TrainConfig& config,
                            std::span<const AblationVariant> variants, double mape_threshold) {
  AblationReport report;
  for (const auto& v : variants) {
    const TrainResult tr = train(data.train, data.validation, data.model, v.flags, config);
    const MetricReport m = evaluate_model(tr.final_params, data, v.flags, mape_threshold);
    report.rows.push_back(AblationRow{v.label, v.flags, m.rmse, m.mape, tr.history.back().train_loss});
  }
  std::stable_sort(report.rows.begin(), report.rows.end(), [](const AblationRow& a, const AblationRow& b) {
    return table_rank(a.flags) < table_rank(b.flags);
  });
  return report;
}

}  // namespace pasta
