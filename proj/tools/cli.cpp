#include "pasta/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "pasta/checkpoint.hpp"
#include "pasta/error.hpp"
#include "pasta/eval.hpp"
#include "pasta/kernels.hpp"

namespace pasta::cli {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  const char* env = std::getenv("PASTA_SEED");
  if (env == nullptr || *env == '\0') return 0;
  std::uint64_t v = 0;
  const std::string_view s(env);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw InvalidArgument("PASTA_SEED is not an unsigned integer: " + std::string(s));
  return v;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file_atomic(path, text);
}

std::vector<std::pair<std::size_t, std::size_t>> parse_hotspots(const std::string& text) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    std::size_t i = 0, j = 0;
    char sep = 0;
    std::istringstream is(item);
    if (!(is >> i >> sep >> j) || sep != ',' || !(is >> std::ws).eof())
      throw InvalidArgument("bad hotspot '" + item + "', expected ROW,COL");
    out.emplace_back(i, j);
  }
  return out;
}

struct Inputs {
  std::string data;
  std::string holidays;

  FlowSequence sequence() const { return load_flow_sequence(data); }
  HolidayCalendar calendar() const { return holidays.empty() ? HolidayCalendar{} : load_holidays(holidays); }
};

struct TrainFlags {
  int epochs = 20;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double huber_delta = 1.0;
  std::optional<std::uint64_t> seed;
  int test_days = 7;
  int closeness = 5;
  int periodic = 6;
  int trend = 4;
  std::size_t demb = 10;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    cmd->add_option("--batch-size", batch_size, "Mini-batch size")->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--huber-delta", huber_delta, "Huber loss threshold")->capture_default_str();
    cmd->add_option("--seed", seed, "Seed (falls back to PASTA_SEED, then 0)");
    cmd->add_option("--test-days", test_days, "Trailing days held out for testing")->capture_default_str();
    cmd->add_option("--closeness", closeness, "Closeness fragment length")->capture_default_str();
    cmd->add_option("--periodic", periodic, "Periodic fragment length")->capture_default_str();
    cmd->add_option("--trend", trend, "Trend fragment length")->capture_default_str();
    cmd->add_option("--demb", demb, "External embedding width")->capture_default_str();
  }

  FragmentSpec fragments() const {
    FragmentSpec f;
    f.t_closeness = closeness;
    f.t_periodic = periodic;
    f.t_trend = trend;
    f.validate();
    return f;
  }

  TrainConfig config() const {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = batch_size;
    c.learning_rate = lr;
    c.huber_delta = huber_delta;
    c.seed = resolve_seed(seed);
    return c;
  }
};

struct ModuleSwitches {
  bool no_sag = false;
  bool no_tag = false;
  bool no_msr = false;

  void add_to(CLI::App* cmd) {
    cmd->add_flag("--no-sag", no_sag, "Disable spatial auto-correlation gating");
    cmd->add_flag("--no-tag", no_tag, "Disable temporal attention gating");
    cmd->add_flag("--no-msr", no_msr, "Keep only the 3x3 residual branch");
  }
  ModuleFlags flags() const { return ModuleFlags{!no_sag, !no_tag, !no_msr}; }
};

void check_compatible(const CheckpointMeta& meta, const FlowSequence& seq) {
  if (meta.n != seq.n() || meta.m != seq.m())
    throw DataError("checkpoint-mismatch", "checkpoint grid is " + std::to_string(meta.n) + "x" +
                                               std::to_string(meta.m) + " but data is " + std::to_string(seq.n()) +
                                               "x" + std::to_string(seq.m()));
  if (meta.interval_minutes != seq.interval_minutes())
    throw DataError("checkpoint-mismatch", "checkpoint interval is " + std::to_string(meta.interval_minutes) +
                                               " min but data interval is " +
                                               std::to_string(seq.interval_minutes()) + " min");
  if (meta.dext != external_dim(seq.interval_minutes()))
    throw DataError("checkpoint-mismatch", "checkpoint external width does not match the data interval");
}

// Index of `ts` in `seq`, allowing one step past the last frame.
std::size_t index_of(const FlowSequence& seq, Timestamp ts) {
  const auto delta = (ts - seq.start()).count();
  if (delta < 0 || delta % seq.interval_minutes() != 0)
    throw DataError("misaligned-timestamp", format_timestamp(ts) + " is not on the data's time grid");
  return static_cast<std::size_t>(delta / seq.interval_minutes());
}

int cmd_synth(const SyntheticConfig& base, const std::string& out_path, const std::string& hotspots,
              const std::optional<std::uint64_t>& seed, std::ostream& out) {
  SyntheticConfig cfg = base;
  cfg.seed = resolve_seed(seed);
  cfg.hotspots = parse_hotspots(hotspots);
  const FlowSequence seq = generate_synthetic(cfg);
  save_flow_sequence(seq, out_path);
  out << "wrote " << seq.frame_count() << " frames of " << seq.n() << "x" << seq.m() << " to " << out_path << "\n";
  return kOk;
}

int cmd_moran(const Inputs& in, std::size_t t, const std::string& out_path, std::ostream& out) {
  const FlowSequence seq = in.sequence();
  if (t >= seq.frame_count())
    throw DataError("out-of-range", "frame " + std::to_string(t) + " not in [0, " +
                                        std::to_string(seq.frame_count()) + ")");
  const GridView g = seq.frame(t);
  const MoranField field = local_morans_i(g);
  const QuadrantMap q = quadrants(g);
  std::string text = "# local-morans-i frame=" + std::to_string(t) + " time=" + format_timestamp(seq.timestamp(t)) +
                     " mean=" + num(field.mean) + " sd=" + num(field.sd) + "\n";
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.m; ++j) text += num(field(i, j)) + (j + 1 == g.m ? "\n" : ",");
  text += "# quadrant\n";
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.m; ++j) text += std::string(quadrant_name(q(i, j))) + (j + 1 == g.m ? "\n" : ",");
  emit(out_path, text, out);
  return kOk;
}

int cmd_train(const Inputs& in, const TrainFlags& tf, const ModuleSwitches& mods, const std::string& ckpt_path,
              std::string history_path, std::string best_path, bool no_timing, std::ostream& out) {
  const TrainConfig config = tf.config();
  const FlowSequence seq = in.sequence();
  ExperimentData data = prepare_experiment(seq, tf.fragments(), tf.test_days, in.calendar());
  data.model.demb = tf.demb;
  const TrainResult result = train(data.train, data.validation, data.model, mods.flags(), config);

  CheckpointMeta meta;
  meta.n = seq.n();
  meta.m = seq.m();
  meta.t_closeness = tf.closeness;
  meta.t_periodic = tf.periodic;
  meta.t_trend = tf.trend;
  meta.interval_minutes = seq.interval_minutes();
  meta.dext = data.model.dext;
  meta.demb = data.model.demb;
  meta.scaler_min = data.scaler.data_min;
  meta.scaler_max = data.scaler.data_max;
  meta.seed = config.seed;
  meta.modules = mods.flags();
  if (best_path.empty()) best_path = fs::path(ckpt_path).replace_extension(".best.json").string();
  save_checkpoint(ckpt_path, result.final_params, meta);
  save_checkpoint(best_path, result.best_params, meta);

  if (history_path.empty()) history_path = ckpt_path + ".history.csv";
  write_file_atomic(history_path, history_csv(result.history, !no_timing));
  for (const auto& r : result.history)
    out << "epoch " << r.epoch << " train_loss " << num(r.train_loss) << " val_rmse " << num(r.val_rmse) << "\n";
  out << "samples train=" << data.train.size() << " validation=" << data.validation.size()
      << " test=" << data.test.size() << "\n";
  out << "wrote " << ckpt_path << ", " << best_path << " and " << history_path << "\n";
  return kOk;
}

int cmd_eval(const Inputs& in, const std::string& ckpt_path, int test_days, const std::string& segment,
             double threshold, bool baselines, const std::string& out_path, std::ostream& out) {
  if (ckpt_path.empty()) throw InvalidArgument("--checkpoint is required unless --ablation is given");
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const FlowSequence seq = in.sequence();
  check_compatible(ck.meta, seq);
  const DataSplit split = split_by_test_days(seq, test_days);
  const auto test = build_samples(seq, ck.meta.fragments(), ck.meta.scaler(), in.calendar(), split.test_start);
  const GridSeries truth = raw_targets(test);
  const auto targets = target_indices(test);

  std::vector<std::pair<std::string, GridSeries>> models;
  models.emplace_back("PASTA",
                      denormalize(predict(ck.params, ck.meta.model_config(), ck.meta.modules, test), ck.meta.scaler()));
  if (baselines) {
    models.emplace_back("persistence", baseline_predict(Baseline::Persistence, seq, targets, split.test_start));
    models.emplace_back("historical-average",
                        baseline_predict(Baseline::HistoricalAverage, seq, targets, split.test_start));
  }

  std::vector<std::pair<std::string, MetricReport>> rows;
  for (const auto& [name, preds] : models) {
    if (segment.empty())
      rows.emplace_back(name, evaluate_all(preds, truth, threshold));
    else
      rows.emplace_back(name, segment_metrics(preds, truth, seq.n(), seq.m(),
                                              segment == "HL" ? Quadrant::HL : Quadrant::LH, threshold));
  }
  if (out_path.empty()) {
    out << metrics_table(rows);
  } else {
    write_file_atomic(out_path, metrics_csv(rows));
    out << metrics_table(rows) << "wrote " << out_path << "\n";
  }
  return kOk;
}

int cmd_ablation(const Inputs& in, const TrainFlags& tf, bool bare, double threshold, const std::string& out_path,
                 std::ostream& out) {
  const TrainConfig config = tf.config();
  const FlowSequence seq = in.sequence();
  ExperimentData data = prepare_experiment(seq, tf.fragments(), tf.test_days, in.calendar());
  data.model.demb = tf.demb;
  std::vector<AblationVariant> variants = standard_variants();
  if (bare) variants.push_back(bare_variant());
  const AblationReport report = run_ablation(data, config, variants, threshold);
  out << report.table();
  if (!out_path.empty()) {
    write_file_atomic(out_path, report.csv());
    out << "wrote " << out_path << "\n";
  }
  return kOk;
}

int cmd_predict(const Inputs& in, const std::string& ckpt_path, const std::string& target,
                const std::optional<std::size_t>& index, const std::string& out_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  FlowSequence seq = in.sequence();
  check_compatible(ck.meta, seq);
  if (target.empty() == !index.has_value()) throw InvalidArgument("give exactly one of --target and --index");
  std::size_t idx = 0;
  if (index) {
    idx = *index;
  } else {
    const auto ts = parse_timestamp(target);
    if (!ts) throw InvalidArgument("cannot parse timestamp '" + target + "'");
    idx = index_of(seq, *ts);
  }
  if (idx > seq.frame_count())
    throw DataError("out-of-range", "target " + format_timestamp(seq.timestamp(idx)) +
                                        " is more than one step past the data");
  if (idx == seq.frame_count()) {
    // Forecast one step ahead: the placeholder target frame is never read as input.
    const std::vector<double> blank(seq.cells(), 0.0);
    seq.push_frame(blank);
  }
  const FragmentSpec frag = ck.meta.fragments();
  if (idx < first_valid_target(frag, seq.interval_minutes()))
    throw DataError("missing-history", "target " + format_timestamp(seq.timestamp(idx)) +
                                           " lacks the history its fragments need");
  const auto samples = build_samples(seq, frag, ck.meta.scaler(), in.calendar(), idx, idx + 1);
  const auto preds = predict(ck.params, ck.meta.model_config(), ck.meta.modules, samples);
  const GridSeries grid = denormalize(preds, ck.meta.scaler());

  std::string text = "# prediction time=" + format_timestamp(seq.timestamp(idx)) + "\n";
  for (std::size_t i = 0; i < seq.n(); ++i)
    for (std::size_t j = 0; j < seq.m(); ++j) text += num(grid[0][i * seq.m() + j]) + (j + 1 == seq.m() ? "\n" : ",");
  emit(out_path, text, out);
  return kOk;
}

int cmd_attention(const Inputs& in, const std::string& ckpt_path, int test_days, bool all,
                  const std::string& out_path, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  if (!ck.meta.modules.tag) throw InvalidArgument("checkpoint was trained without TAG; there is no attention to dump");
  const FlowSequence seq = in.sequence();
  check_compatible(ck.meta, seq);
  const std::size_t first = all ? 0 : split_by_test_days(seq, test_days).test_start;
  const FragmentSpec frag = ck.meta.fragments();
  const auto samples = build_samples(seq, frag, ck.meta.scaler(), in.calendar(), first);
  const auto preds = predict(ck.params, ck.meta.model_config(), ck.meta.modules, samples);

  const auto labels = frag.channel_labels();
  std::string text = "target";
  for (const auto& l : labels) text += "," + l;
  text += "\n";
  std::vector<double> mean(labels.size(), 0.0);
  for (const auto& p : preds) {
    text += format_timestamp(seq.timestamp(p.target_index));
    for (std::size_t c = 0; c < labels.size(); ++c) {
      text += "," + num(p.attention[c]);
      mean[c] += p.attention[c];
    }
    text += "\n";
  }
  text += "mean";
  for (double v : mean) text += "," + num(v / static_cast<double>(preds.size()));
  text += "\n";
  emit(out_path, text, out);
  return kOk;
}

int exit_code(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::Usage:
      return kUsage;
    case ErrorClass::Data:
      return kData;
    case ErrorClass::Runtime:
      return kRuntime;
  }
  return kRuntime;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Grid crowd-flow forecasting with spatial and temporal gating", "pasta"};
  app.require_subcommand(1);
  std::string simd;
  app.add_option("--simd", simd, "Kernel set: scalar, avx2 or neon (default: best available)")
      ->check(CLI::IsMember({"scalar", "avx2", "neon"}));

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic hotspot flow sequence");
  SyntheticConfig scfg;
  std::string synth_out, hotspots;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--out", synth_out, "Output flow file")->required();
  synth->add_option("--n", scfg.n, "Grid rows")->capture_default_str()->check(CLI::Range(1, 4096));
  synth->add_option("--m", scfg.m, "Grid columns")->capture_default_str()->check(CLI::Range(1, 4096));
  synth->add_option("--days", scfg.days, "Days to generate")->capture_default_str()->check(CLI::Range(1, 3660));
  synth->add_option("--interval", scfg.interval_minutes, "Minutes per frame (60 or 30)")
      ->capture_default_str()
      ->check(CLI::IsMember({60, 30}));
  synth->add_option("--hotspots", hotspots, "Hotspot cells as ROW,COL;ROW,COL (default: four spread cells)");
  synth->add_option("--noise", scfg.noise, "Multiplicative noise level")->capture_default_str()->check(
      CLI::Range(0.0, 10.0));
  synth->add_option("--seed", synth_seed, "Seed (falls back to PASTA_SEED, then 0)");

  // moran
  auto* moran = app.add_subcommand("moran", "Local Moran's I and LISA quadrants of one frame");
  Inputs moran_in;
  std::size_t moran_t = 0;
  std::string moran_out;
  moran->add_option("--data", moran_in.data, "Flow file")->required();
  moran->add_option("--t", moran_t, "Frame index")->required();
  moran->add_option("--out", moran_out, "Output CSV (default: stdout)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  Inputs train_in;
  TrainFlags train_flags;
  ModuleSwitches train_mods;
  std::string ckpt_out, history_out, best_out;
  bool no_timing = false;
  train_cmd->add_option("--data", train_in.data, "Flow file")->required();
  train_cmd->add_option("--holidays", train_in.holidays, "Holiday list, one YYYY-MM-DD per line");
  train_cmd->add_option("--out", ckpt_out, "Checkpoint path")->required();
  train_cmd->add_option("--history", history_out, "History CSV (default: <out>.history.csv)");
  train_cmd->add_option("--best", best_out, "Checkpoint of the epoch with the lowest validation RMSE (default: <out stem>.best.json)");
  train_cmd->add_flag("--no-timing", no_timing, "Write 0 in the seconds column");
  train_flags.add_to(train_cmd);
  train_mods.add_to(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Test-set metrics, segmented metrics or an ablation report");
  Inputs eval_in;
  TrainFlags eval_flags;
  std::string eval_ckpt, eval_out, segment;
  double threshold = 10.0;
  bool ablation = false, bare = false, no_baselines = false;
  eval_cmd->add_option("--data", eval_in.data, "Flow file")->required();
  eval_cmd->add_option("--holidays", eval_in.holidays, "Holiday list, one YYYY-MM-DD per line");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint to evaluate");
  eval_cmd->add_option("--segment", segment, "Restrict to HL or LH cells of the true grids")
      ->check(CLI::IsMember({"HL", "LH"}));
  eval_cmd->add_option("--mape-threshold", threshold, "Cells below this true value are left out of MAPE")
      ->capture_default_str();
  eval_cmd->add_flag("--no-baselines", no_baselines, "Skip the persistence and historical-average rows");
  eval_cmd->add_flag("--ablation", ablation, "Train and compare module variants (A)-(F)");
  eval_cmd->add_flag("--bare", bare, "With --ablation, also train the variant with every module off");
  eval_cmd->add_option("--out", eval_out, "Output CSV");
  eval_flags.add_to(eval_cmd);

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Predict the grid at one timestamp");
  Inputs predict_in;
  std::string predict_ckpt, predict_target, predict_out;
  std::optional<std::size_t> predict_index;
  predict_cmd->add_option("--data", predict_in.data, "Flow file")->required();
  predict_cmd->add_option("--holidays", predict_in.holidays, "Holiday list, one YYYY-MM-DD per line");
  predict_cmd->add_option("--checkpoint", predict_ckpt, "Checkpoint")->required();
  predict_cmd->add_option("--target", predict_target, "Target time YYYY-MM-DDTHH:MM (up to one step past the data)");
  predict_cmd->add_option("--index", predict_index, "Target frame index instead of --target");
  predict_cmd->add_option("--out", predict_out, "Output CSV (default: stdout)");

  // attention
  auto* attn_cmd = app.add_subcommand("attention", "Dump temporal attention per sample and its mean");
  Inputs attn_in;
  std::string attn_ckpt, attn_out;
  int attn_test_days = 7;
  bool attn_all = false;
  attn_cmd->add_option("--data", attn_in.data, "Flow file")->required();
  attn_cmd->add_option("--holidays", attn_in.holidays, "Holiday list, one YYYY-MM-DD per line");
  attn_cmd->add_option("--checkpoint", attn_ckpt, "Checkpoint")->required();
  attn_cmd->add_option("--test-days", attn_test_days, "Dump the trailing test days")->capture_default_str();
  attn_cmd->add_flag("--all", attn_all, "Dump every sample with full history");
  attn_cmd->add_option("--out", attn_out, "Output CSV (default: stdout)");

  std::vector<std::string> argv_store{"pasta"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (!simd.empty()) kernels::select(simd == "scalar" ? kernels::Isa::Scalar
                                       : simd == "avx2" ? kernels::Isa::Avx2
                                                        : kernels::Isa::Neon);
    if (*synth) return cmd_synth(scfg, synth_out, hotspots, synth_seed, out);
    if (*moran) return cmd_moran(moran_in, moran_t, moran_out, out);
    if (*train_cmd)
      return cmd_train(train_in, train_flags, train_mods, ckpt_out, history_out, best_out, no_timing, out);
    if (*eval_cmd) {
      if (ablation) return cmd_ablation(eval_in, eval_flags, bare, threshold, eval_out, out);
      return cmd_eval(eval_in, eval_ckpt, eval_flags.test_days, segment, threshold, !no_baselines, eval_out, out);
    }
    if (*predict_cmd) return cmd_predict(predict_in, predict_ckpt, predict_target, predict_index, predict_out, out);
    if (*attn_cmd) return cmd_attention(attn_in, attn_ckpt, attn_test_days, attn_all, attn_out, out);
  } catch (const Error& e) {
    err << "error[" << e.kind() << "]: " << e.what() << "\n";
    return exit_code(e.error_class());
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace pasta::cli
