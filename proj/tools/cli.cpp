#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lobsurv/book.hpp"
#include "lobsurv/error.hpp"
#include "lobsurv/interpret.hpp"
#include "lobsurv/lobster_io.hpp"
#include "lobsurv/manifest.hpp"
#include "lobsurv/models.hpp"
#include "lobsurv/probes.hpp"
#include "lobsurv/survival_stats.hpp"
#include "lobsurv/synthgen.hpp"
#include "lobsurv/training.hpp"

namespace lobsurv::cli {

namespace {

using nlohmann::json;

struct Common {
  unsigned threads = 1;
  std::string manifest;  // empty = <primary output>.run.json
};

struct SourceOptions {
  std::vector<std::string> messages;
  std::size_t days = 1;
  std::string preset = "default";
  std::uint64_t synth_seed = 1;
  double horizon = 23400.0;
};

struct TrainOptions {
  std::string encoder = "conv_transformer";
  int epochs = 50;
  std::size_t batch = 32;
  double lr = 1e-3;
  double clip = 5.0;
  int patience = 10;
  int latent = 16;
  int heads = 4;
  int d_k = 4;
  int kernel = 3;
  int dilation = 1;
  int layers = 1;
  std::string mask = "causal";
  int mlp_hidden = 32;
  int cnn_layers = 4;
  std::string pooling = "last";
  std::vector<int> decoder_hidden{16, 16};
  double train_fraction = 0.6;
  double val_fraction = 0.2;
};

SynthConfig preset_config(const std::string& name, std::uint64_t seed) {
  if (name == "default") {
    SynthConfig c;
    c.seed = seed;
    return c;
  }
  if (name == "large_tick") return SynthConfig::large_tick(seed);
  if (name == "small_tick") return SynthConfig::small_tick(seed);
  if (name == "regime_switching") return SynthConfig::regime_switching(seed);
  throw UsageError("unknown preset '" + name + "'");
}

std::vector<std::vector<Message>> load_streams(const SourceOptions& s, std::vector<std::string>& inputs) {
  std::vector<std::vector<Message>> streams;
  if (!s.messages.empty()) {
    for (const auto& path : s.messages) {
      streams.push_back(read_message_file(path));
      inputs.push_back(path);
    }
    return streams;
  }
  for (std::size_t d = 0; d < s.days; ++d) {
    SynthConfig c = preset_config(s.preset, s.synth_seed + d);
    c.horizon_seconds = s.horizon;
    streams.push_back(generate(c));
  }
  return streams;
}

void add_source_options(CLI::App* sub, SourceOptions& s) {
  sub->add_option("--messages", s.messages, "LOBSTER message files, one per day (default: synthesize)");
  sub->add_option("--days", s.days, "Synthetic days when no message files are given")->check(CLI::PositiveNumber);
  sub->add_option("--preset", s.preset, "Synthetic preset: default, large_tick, small_tick, regime_switching");
  sub->add_option("--synth-seed", s.synth_seed, "Seed of the first synthetic day (day d uses seed + d)");
  sub->add_option("--horizon", s.horizon, "Synthetic session length in seconds")->check(CLI::PositiveNumber);
}

void add_train_options(CLI::App* sub, TrainOptions& t, bool with_encoder) {
  if (with_encoder) sub->add_option("--encoder", t.encoder, "Encoder: mlp, cnn, conv_transformer");
  sub->add_option("--epochs", t.epochs, "Maximum training epochs");
  sub->add_option("--batch", t.batch, "Minibatch size")->check(CLI::PositiveNumber);
  sub->add_option("--lr", t.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--clip", t.clip, "Gradient norm clip (0 disables)");
  sub->add_option("--patience", t.patience, "Early-stopping patience on validation negative RCLL");
  sub->add_option("--latent", t.latent, "Latent dimension of the encoder output");
  sub->add_option("--heads", t.heads, "Attention heads H");
  sub->add_option("--dk", t.d_k, "Per-head width d_k");
  sub->add_option("--kernel", t.kernel, "Convolution kernel size s");
  sub->add_option("--dilation", t.dilation, "Convolution dilation p");
  sub->add_option("--layers", t.layers, "Attention layers");
  sub->add_option("--mask", t.mask, "Attention mask: causal, log_sparse");
  sub->add_option("--mlp-hidden", t.mlp_hidden, "MLP hidden width");
  sub->add_option("--cnn-layers", t.cnn_layers, "CNN depth (dilation doubles per layer)");
  sub->add_option("--pooling", t.pooling, "CNN pooling: last, mean");
  sub->add_option("--decoder-hidden", t.decoder_hidden, "Monotone decoder hidden widths");
  sub->add_option("--train-frac", t.train_fraction, "Chronological training fraction");
  sub->add_option("--val-frac", t.val_fraction, "Chronological validation fraction");
}

EncoderConfig encoder_config(const TrainOptions& t) {
  EncoderConfig e;
  e.kind = encoder_kind_from_string(t.encoder);
  e.latent = t.latent;
  e.heads = t.heads;
  e.d_k = t.d_k;
  e.kernel = t.kernel;
  e.dilation = t.dilation;
  e.layers = t.layers;
  e.mask = mask_kind_from_string(t.mask);
  e.mlp_hidden = t.mlp_hidden;
  e.cnn_layers = t.cnn_layers;
  if (t.pooling != "last" && t.pooling != "mean") throw UsageError("pooling must be last or mean");
  e.pooling = t.pooling == "mean" ? Pooling::Mean : Pooling::Last;
  return e;
}

TrainConfig train_config(const TrainOptions& t, std::uint64_t seed) {
  TrainConfig c;
  c.adam.lr = t.lr;
  c.adam.clip_norm = t.clip;
  c.batch_size = t.batch;
  c.epochs = t.epochs;
  c.patience = t.patience;
  c.seed = seed;
  return c;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

std::string single_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '"', '\'');
  return s;
}

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage:
      return "usage";
    case ErrorKind::Data:
      return "data";
    case ErrorKind::Numeric:
      return "numeric";
  }
  return "unknown";
}

int report(std::ostream& err, ErrorKind kind, const std::string& message) {
  err << "lobsurv-error kind=" << kind_name(kind) << " code=" << static_cast<int>(kind) << " message=\""
      << single_line(message) << "\"\n";
  return static_cast<int>(kind);
}

class Runner {
 public:
  Runner(std::vector<std::string> args, std::ostream& out) : args_(std::move(args)), out_(out) {}

  // Records a written artifact for the manifest.
  void output(const std::string& path) { outputs_.push_back(path); }
  void input(const std::string& path) { inputs_.push_back(path); }

  void finish(CLI::App* sub, std::uint64_t seed, const Common& common, const std::string& primary) {
    RunManifest m;
    m.command = sub->get_name();
    m.argv = args_;
    const std::string cfg = sub->config_to_str(true, false);
    m.config = {{"options", cfg}};
    m.config_hash = hex64(fnv1a64(cfg));
    m.seed = seed;
    for (const auto& p : inputs_) m.inputs.push_back(digest_file(p));
    for (const auto& p : outputs_) m.outputs.push_back(digest_file(p));
    const std::string path = common.manifest.empty() ? primary + ".run.json" : common.manifest;
    m.write(path);
    out_ << "manifest: " << path << '\n';
  }

 private:
  std::vector<std::string> args_;
  std::ostream& out_;
  std::vector<std::string> inputs_, outputs_;
};

std::vector<std::size_t> parse_size_list(const std::vector<std::size_t>& v, const char* what) {
  if (v.empty()) throw UsageError(std::string(what) + " list is empty");
  return v;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fill-time survival analysis on limit order books", "lobsurv"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags take precedence");
  Common common;
  app.add_option("--threads", common.threads, "Worker threads for parallel stages")->check(CLI::PositiveNumber);
  app.add_option("--manifest", common.manifest, "Run manifest path (default: <output>.run.json)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic trading day in LOBSTER format");
  std::uint64_t synth_seed = 1;
  std::string synth_out = "day.csv", synth_book;
  std::string synth_preset = "default";
  std::size_t synth_levels = 10;
  double synth_horizon = 23400.0;
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--preset", synth_preset, "Preset: default, large_tick, small_tick, regime_switching");
  synth->add_option("--out", synth_out, "Message file to write");
  synth->add_option("--orderbook", synth_book, "Also write the generator's orderbook file");
  synth->add_option("--levels", synth_levels, "Orderbook levels")->check(CLI::PositiveNumber);
  synth->add_option("--horizon", synth_horizon, "Session length in seconds")->check(CLI::PositiveNumber);

  // replay-check
  auto* replay_cmd = app.add_subcommand("replay-check", "Replay a message file and verify book invariants");
  std::string rc_messages, rc_book, rc_out = "replay_check.json";
  std::size_t rc_levels = 10;
  bool rc_lenient = false;
  replay_cmd->add_option("messages", rc_messages, "LOBSTER message file")->required();
  replay_cmd->add_option("--orderbook", rc_book, "Orderbook file to compare row by row");
  replay_cmd->add_option("--levels", rc_levels, "Levels in the orderbook file")->check(CLI::PositiveNumber);
  replay_cmd->add_flag("--lenient", rc_lenient, "Match crossing submissions instead of rejecting them");
  replay_cmd->add_option("--out", rc_out, "JSON summary to write");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Label orders with fill times and attach feature windows");
  SourceOptions build_src;
  std::string build_mode = "pegged", build_clock = "wall", build_window = "raw", build_side = "bid";
  std::string build_out = "dataset.csv";
  std::size_t build_n = 100, build_T = 50;
  int build_k = 0;
  std::uint64_t build_seed = 0;
  add_source_options(build, build_src);
  build->add_option("--mode", build_mode, "Order type: tracked, pegged, inside");
  build->add_option("--n", build_n, "Orders per day")->check(CLI::PositiveNumber);
  build->add_option("--T", build_T, "Lookback window in trades")->check(CLI::PositiveNumber);
  build->add_option("--clock", build_clock, "Time scale: wall, transaction");
  build->add_option("--window", build_window, "Window representation: raw, orderflow");
  build->add_option("--side", build_side, "Probe side: bid, ask, random");
  build->add_option("--k", build_k, "Ticks inside the spread (inside mode)");
  build->add_option("--seed", build_seed, "Sampling seed");
  build->add_option("--out", build_out, "Dataset CSV to write");

  // km
  auto* km = app.add_subcommand("km", "Kaplan-Meier curve of a dataset");
  std::string km_dataset, km_out = "km.csv";
  bool km_censoring = false;
  km->add_option("--dataset", km_dataset, "Dataset CSV")->required();
  km->add_option("--out", km_out, "Curve CSV to write");
  km->add_flag("--censoring", km_censoring, "Estimate the censoring distribution instead");

  // fill-stats
  auto* fs = app.add_subcommand("fill-stats", "Market statistics and inside-spread fill table");
  SourceOptions fs_src;
  std::string fs_side = "bid", fs_out = "fill_stats.csv";
  std::size_t fs_probes = 200;
  int fs_max_k = 3;
  double fs_window = 60.0;
  std::uint64_t fs_seed = 0;
  Price fs_tick = 100;
  add_source_options(fs, fs_src);
  fs->add_option("--side", fs_side, "Probe side: bid, ask");
  fs->add_option("--probes", fs_probes, "Probes per day and depth")->check(CLI::PositiveNumber);
  fs->add_option("--max-k", fs_max_k, "Deepest inside-spread placement in ticks");
  fs->add_option("--fill-horizon", fs_window, "Fill probability horizon in seconds")->check(CLI::PositiveNumber);
  fs->add_option("--seed", fs_seed, "Probe placement seed");
  fs->add_option("--tick", fs_tick, "Tick size in price units");
  fs->add_option("--out", fs_out, "Fill table CSV to write");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Train a survival model");
  std::string fit_dataset, fit_out = "model.json", fit_history;
  std::uint64_t fit_seed = 0;
  TrainOptions fit_opts;
  fit_cmd->add_option("--dataset", fit_dataset, "Dataset CSV")->required();
  fit_cmd->add_option("--seed", fit_seed, "Initialization and shuffling seed");
  fit_cmd->add_option("--out", fit_out, "Checkpoint path");
  fit_cmd->add_option("--history", fit_history, "Per-epoch loss CSV");
  add_train_options(fit_cmd, fit_opts, true);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a checkpoint on a dataset");
  std::string ev_ckpt, ev_dataset, ev_split = "test", ev_out = "report.json";
  double ev_train = 0.6, ev_val = 0.2;
  eval_cmd->add_option("--checkpoint", ev_ckpt, "Checkpoint path")->required();
  eval_cmd->add_option("--dataset", ev_dataset, "Dataset CSV")->required();
  eval_cmd->add_option("--split", ev_split, "Samples to score: train, val, test, all");
  eval_cmd->add_option("--train-frac", ev_train, "Chronological training fraction");
  eval_cmd->add_option("--val-frac", ev_val, "Chronological validation fraction");
  eval_cmd->add_option("--out", ev_out, "JSON report path");

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "Compare encoders across lookbacks and seeds");
  std::string bench_dataset, bench_out = "benchmark";
  std::vector<std::string> bench_encoders{"mlp", "cnn", "conv_transformer"};
  std::vector<std::size_t> bench_T{50, 500, 1000};
  std::size_t bench_seeds = 5;
  TrainOptions bench_opts;
  bench->add_option("--dataset", bench_dataset, "Dataset CSV with windows at least max(T) long")->required();
  bench->add_option("--encoders", bench_encoders, "Encoders to compare")->delimiter(',');
  bench->add_option("--T", bench_T, "Lookbacks")->delimiter(',');
  bench->add_option("--seeds", bench_seeds, "Seeds 0..n-1")->check(CLI::Range(2, 1000));
  bench->add_option("--out", bench_out, "Output prefix");
  add_train_options(bench, bench_opts, false);

  // explain
  auto* explain = app.add_subcommand("explain", "Attention heatmaps and Shapley values");
  std::string ex_ckpt, ex_dataset, ex_out = "explain";
  std::size_t ex_index = 0, ex_samples = 10, ex_background = 20, ex_perms = 200;
  double ex_horizon = 10.0;
  std::uint64_t ex_seed = 0;
  explain->add_option("--checkpoint", ex_ckpt, "Checkpoint path")->required();
  explain->add_option("--dataset", ex_dataset, "Dataset CSV")->required();
  explain->add_option("--index", ex_index, "Sample for the attention heatmap");
  explain->add_option("--samples", ex_samples, "Samples explained with Shapley values");
  explain->add_option("--background", ex_background, "Background samples for feature removal")
      ->check(CLI::PositiveNumber);
  explain->add_option("--permutations", ex_perms, "Sampled permutations")->check(CLI::PositiveNumber);
  explain->add_option("--horizon", ex_horizon, "Explain S(horizon | x)")->check(CLI::PositiveNumber);
  explain->add_option("--seed", ex_seed, "Sampling seed");
  explain->add_option("--out", ex_out, "Output prefix");

  // sweep-kernel
  auto* sweep = app.add_subcommand("sweep-kernel", "Kernel size sweep for the convolutional transformer");
  std::string sw_dataset, sw_out = "kernel_sweep.csv";
  std::vector<int> sw_kernels{1, 2, 3, 5, 10, 25, 50};
  std::size_t sw_T = 50, sw_seeds = 5;
  TrainOptions sw_opts;
  sweep->add_option("--dataset", sw_dataset, "Dataset CSV")->required();
  sweep->add_option("--kernels", sw_kernels, "Kernel sizes")->delimiter(',');
  sweep->add_option("--T", sw_T, "Lookback")->check(CLI::PositiveNumber);
  sweep->add_option("--seeds", sw_seeds, "Seeds 0..n-1")->check(CLI::PositiveNumber);
  sweep->add_option("--out", sw_out, "Table CSV");
  add_train_options(sweep, sw_opts, false);

  // rerun
  auto* rerun = app.add_subcommand("rerun", "Repeat a command from its run manifest and verify outputs");
  std::string rr_manifest;
  rerun->add_option("manifest", rr_manifest, "Run manifest JSON")->required();

  std::vector<std::string> argv_store{"lobsurv"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return report(err, ErrorKind::Usage, e.what());
  }

  Runner runner(args, out);
  try {
    if (synth->parsed()) {
      SynthConfig c = preset_config(synth_preset, synth_seed);
      c.horizon_seconds = synth_horizon;
      const SynthDay day = generate_day(c, synth_book.empty() ? 0 : synth_levels);
      write_message_file(synth_out, day.messages);
      runner.output(synth_out);
      if (!synth_book.empty()) {
        write_snapshot_file(synth_book, day.orderbook);
        runner.output(synth_book);
      }
      out << "messages: " << day.messages.size() << '\n';
      runner.finish(synth, synth_seed, common, synth_out);
    } else if (replay_cmd->parsed()) {
      const auto messages = read_message_file(rc_messages);
      runner.input(rc_messages);
      std::vector<SnapshotRow> expected;
      if (!rc_book.empty()) {
        expected = read_snapshot_file(rc_book, rc_levels);
        runner.input(rc_book);
      }
      if (!expected.empty() && expected.size() != messages.size()) {
        throw DataError("orderbook has " + std::to_string(expected.size()) + " rows for " +
                        std::to_string(messages.size()) + " messages");
      }
      std::size_t mismatches = 0, first_mismatch = 0;
      const BookState book = replay(messages, rc_lenient ? CrossingMode::Lenient : CrossingMode::Strict,
                                    [&](std::size_t i, const Message&, const EventEffect&, const BookState& b) {
                                      if (expected.empty()) return;
                                      if (!(b.snapshot(rc_levels) == expected[i]) && mismatches++ == 0) {
                                        first_mismatch = i + 1;
                                      }
                                    });
      book.check_invariants();
      json summary{{"messages", messages.size()}, {"resting_orders", book.order_count()},
                   {"snapshot_rows_compared", expected.size()}, {"snapshot_mismatches", mismatches}};
      out << summary.dump() << '\n';
      if (mismatches > 0) {
        throw DataError("orderbook mismatch at row " + std::to_string(first_mismatch) + " (" +
                        std::to_string(mismatches) + " rows differ)");
      }
      write_text(rc_out, summary.dump(2) + "\n");
      runner.output(rc_out);
      runner.finish(replay_cmd, 0, common, rc_out);
    } else if (build->parsed()) {
      std::vector<std::string> inputs;
      const auto streams = load_streams(build_src, inputs);
      for (const auto& p : inputs) runner.input(p);
      DatasetSpec spec;
      spec.mode = probe_mode_from_string(build_mode);
      spec.n_per_day = build_n;
      spec.lookback = build_T;
      spec.clock = clock_from_string(build_clock);
      spec.window = window_mode_from_string(build_window);
      spec.k_ticks = build_k;
      spec.seed = build_seed;
      if (build_side == "bid") {
        spec.side = SideChoice::Bid;
      } else if (build_side == "ask") {
        spec.side = SideChoice::Ask;
      } else if (build_side == "random") {
        spec.side = SideChoice::Random;
      } else {
        throw UsageError("side must be bid, ask or random");
      }
      const Dataset ds = build_dataset(streams, spec);
      for (const auto& w : ds.warnings) err << "warning: " << w << '\n';
      write_dataset(build_out, ds);
      runner.output(build_out);
      runner.output(manifest_path_for(build_out));
      out << "samples: " << ds.samples.size() << '\n';
      runner.finish(build, build_seed, common, build_out);
    } else if (km->parsed()) {
      const Dataset ds = read_dataset(km_dataset);
      runner.input(km_dataset);
      std::vector<Observation> obs;
      for (const auto& s : ds.samples) obs.push_back({s.z, s.delta});
      if (obs.empty()) throw DataError("dataset has no samples");
      const KMCurve curve = km_censoring ? censoring_km(obs) : kaplan_meier(obs);
      std::ostringstream os;
      os.precision(17);
      os << "time,survival,at_risk,events\n";
      for (std::size_t i = 0; i < curve.times.size(); ++i) {
        os << curve.times[i] << ',' << curve.survival[i] << ',' << curve.at_risk[i] << ',' << curve.events[i] << '\n';
      }
      write_text(km_out, os.str());
      runner.output(km_out);
      runner.finish(km, 0, common, km_out);
    } else if (fs->parsed()) {
      std::vector<std::string> inputs;
      const auto streams = load_streams(fs_src, inputs);
      for (const auto& p : inputs) runner.input(p);
      if (fs_side != "bid" && fs_side != "ask") throw UsageError("side must be bid or ask");
      const Side side = fs_side == "bid" ? Side::Buy : Side::Sell;
      std::ostringstream os;
      os.precision(10);
      os << "section,day,avg_spread_ticks,avg_best_ask_volume,avg_best_bid_volume,avg_midprice,trades_per_minute\n";
      for (std::size_t d = 0; d < streams.size(); ++d) {
        const MarketStats m = market_stats(streams[d], fs_tick);
        os << "market," << d << ',' << m.avg_spread_ticks << ',' << m.avg_best_ask_volume << ','
           << m.avg_best_bid_volume << ',' << m.avg_midprice << ',' << m.trades_per_minute << '\n';
      }
      os << "section,k_ticks,placed,fill_probability,mean_filltime\n";
      const auto table = inside_spread_fill_table(streams, side, fs_probes, fs_max_k, fs_tick, fs_window, fs_seed);
      for (const auto& row : table) {
        os << "fill," << row.k_ticks << ',' << row.placed << ',' << row.stats.fill_probability << ',';
        if (row.stats.mean_filltime) os << *row.stats.mean_filltime;
        os << '\n';
      }
      write_text(fs_out, os.str());
      runner.output(fs_out);
      out << os.str();
      runner.finish(fs, fs_seed, common, fs_out);
    } else if (fit_cmd->parsed()) {
      const Dataset ds = read_dataset(fit_dataset);
      runner.input(fit_dataset);
      const Split split = chronological_split(ds.samples, fit_opts.train_fraction, fit_opts.val_fraction);
      DecoderConfig dec{fit_opts.decoder_hidden};
      SurvivalModel model(model_config_for(split.train, encoder_config(fit_opts), dec, ds.feature_names), fit_seed);
      std::ostringstream hist;
      hist.precision(17);
      hist << "epoch,train_negative_rcll,val_negative_rcll\n";
      const FitResult r = fit(model, split.train, split.val, train_config(fit_opts, fit_seed),
                              [&](const EpochRecord& e) {
                                hist << e.epoch << ',' << e.train_loss << ',' << e.val_loss << '\n';
                              });
      save_checkpoint(model, fit_out);
      runner.output(fit_out);
      runner.output(fit_out + ".bin");
      if (!fit_history.empty()) {
        write_text(fit_history, hist.str());
        runner.output(fit_history);
      }
      out << "best_epoch: " << r.best_epoch << " val_negative_rcll: " << r.best_val_loss << '\n';
      runner.finish(fit_cmd, fit_seed, common, fit_out);
    } else if (eval_cmd->parsed()) {
      SurvivalModel model = load_checkpoint(ev_ckpt);
      const Dataset ds = read_dataset(ev_dataset);
      runner.input(ev_ckpt);
      runner.input(ev_ckpt + ".bin");
      runner.input(ev_dataset);
      const Split split = chronological_split(ds.samples, ev_train, ev_val);
      const std::vector<SurvivalSample>* set = nullptr;
      if (ev_split == "train") {
        set = &split.train;
      } else if (ev_split == "val") {
        set = &split.val;
      } else if (ev_split == "test") {
        set = &split.test;
      } else if (ev_split == "all") {
        set = &ds.samples;
      } else {
        throw UsageError("split must be train, val, test or all");
      }
      const EvalReport r = evaluate(model, *set);
      json j = r.to_json();
      j["model"] = display_name(model.config().encoder.kind);
      j["dataset_fnv1a64"] = hex64(fnv1a64_file(ev_dataset));
      j["split"] = ev_split;
      j["split_protocol"] = {{"train_fraction", ev_train}, {"val_fraction", ev_val}, {"order", "day, submit time"}};
      write_text(ev_out, j.dump(2) + "\n");
      runner.output(ev_out);
      out << j.dump() << '\n';
      runner.finish(eval_cmd, 0, common, ev_out);
    } else if (bench->parsed()) {
      const Dataset ds = read_dataset(bench_dataset);
      runner.input(bench_dataset);
      BenchmarkSpec spec;
      spec.encoders.clear();
      for (const auto& e : bench_encoders) spec.encoders.push_back(encoder_kind_from_string(e));
      spec.lookbacks = parse_size_list(bench_T, "T");
      for (auto T : spec.lookbacks) {
        if (T > ds.lookback()) {
          throw DataError("dataset lookback " + std::to_string(ds.lookback()) + " is shorter than T=" + std::to_string(T));
        }
      }
      spec.seeds.clear();
      for (std::size_t s = 0; s < bench_seeds; ++s) spec.seeds.push_back(s);
      spec.encoder = encoder_config(bench_opts);
      spec.decoder.hidden = bench_opts.decoder_hidden;
      spec.train = train_config(bench_opts, 0);
      spec.train_fraction = bench_opts.train_fraction;
      spec.val_fraction = bench_opts.val_fraction;
      spec.threads = common.threads;
      const BenchmarkResult r = benchmark_suite(ds.samples, spec, [&](const CellResult& c) {
        err << "cell " << display_name(c.encoder) << " T=" << c.T << " seed=" << c.seed
            << " test_negative_rcll=" << c.test_negative_rcll << '\n';
      });
      write_text(bench_out + "_rcll.csv", r.rcll_table_csv());
      runner.output(bench_out + "_rcll.csv");
      if (std::find(spec.encoders.begin(), spec.encoders.end(), EncoderKind::Mlp) != spec.encoders.end()) {
        write_text(bench_out + "_improvement.csv", r.improvement_table_csv());
        runner.output(bench_out + "_improvement.csv");
      }
      write_text(bench_out + ".json", r.to_json().dump(2) + "\n");
      runner.output(bench_out + ".json");
      out << r.to_text();
      runner.finish(bench, 0, common, bench_out);
    } else if (explain->parsed()) {
      SurvivalModel model = load_checkpoint(ex_ckpt);
      const Dataset ds = read_dataset(ex_dataset);
      runner.input(ex_ckpt);
      runner.input(ex_ckpt + ".bin");
      runner.input(ex_dataset);
      if (ds.samples.empty()) throw DataError("dataset has no samples");
      if (ex_index >= ds.samples.size()) throw UsageError("--index is past the end of the dataset");
      if (model.config().encoder.kind == EncoderKind::ConvTransformer) {
        const std::string path = ex_out + "_attention.csv";
        write_text(path, heatmap_csv(attention_heatmaps(model, ds.samples[ex_index].x)));
        runner.output(path);
      }
      std::mt19937_64 rng(ex_seed);
      std::vector<std::size_t> idx(ds.samples.size());
      std::iota(idx.begin(), idx.end(), 0);
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<FeatureWindow> background;
      for (std::size_t i = 0; i < std::min(ex_background, idx.size()); ++i) background.push_back(ds.samples[idx[i]].x);
      std::vector<std::vector<double>> values, features;
      const std::size_t n = std::min(ex_samples, ds.samples.size());
      double worst_gap = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& x = ds.samples[i].x;
        const ShapleyResult r = shapley_values(model, x, background, ex_horizon, ex_perms, ex_seed + i);
        worst_gap = std::max(worst_gap, std::fabs(r.efficiency_gap));
        values.push_back(r.values);
        features.emplace_back(x.row(x.rows - 1).begin(), x.row(x.rows - 1).end());
      }
      const std::string path = ex_out + "_shapley.csv";
      write_text(path, beeswarm_export(values, features, ds.feature_names));
      runner.output(path);
      out << "explained: " << n << " efficiency_gap_max: " << worst_gap << '\n';
      runner.finish(explain, ex_seed, common, ex_out);
    } else if (sweep->parsed()) {
      const Dataset ds = read_dataset(sw_dataset);
      runner.input(sw_dataset);
      if (sw_T > ds.lookback()) throw DataError("dataset lookback is shorter than T");
      BenchmarkSpec spec;
      spec.encoder = encoder_config(sw_opts);
      spec.decoder.hidden = sw_opts.decoder_hidden;
      spec.train = train_config(sw_opts, 0);
      spec.train_fraction = sw_opts.train_fraction;
      spec.val_fraction = sw_opts.val_fraction;
      spec.threads = common.threads;
      spec.seeds.clear();
      for (std::size_t s = 0; s < sw_seeds; ++s) spec.seeds.push_back(s);
      const auto rows = kernel_sweep(with_lookback(ds.samples, sw_T), sw_kernels, spec, sw_T);
      const std::string table = kernel_sweep_csv(rows, sw_T);
      write_text(sw_out, table);
      runner.output(sw_out);
      out << table;
      runner.finish(sweep, 0, common, sw_out);
    } else if (rerun->parsed()) {
      const RunManifest m = RunManifest::read(rr_manifest);
      for (const auto& in : m.inputs) {
        if (digest_file(in.path).fnv1a64 != in.fnv1a64) throw DataError("input " + in.path + " changed since the run");
      }
      std::ostringstream sink;
      const int code = run(m.argv, sink, err);
      if (code != 0) return code;
      std::size_t differing = 0;
      for (const auto& o : m.outputs) {
        const bool same = digest_file(o.path).fnv1a64 == o.fnv1a64;
        out << (same ? "identical " : "DIFFERENT ") << o.path << '\n';
        differing += same ? 0 : 1;
      }
      if (differing > 0) throw DataError(std::to_string(differing) + " artifacts differ from the manifest");
    }
  } catch (const Error& e) {
    return report(err, e.kind(), e.what());
  } catch (const CLI::Error& e) {
    return report(err, ErrorKind::Usage, e.what());
  } catch (const std::exception& e) {
    return report(err, ErrorKind::Data, e.what());
  }
  return 0;
}

}  // namespace lobsurv::cli
