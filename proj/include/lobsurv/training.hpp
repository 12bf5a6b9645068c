#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lobsurv/models.hpp"
#include "lobsurv/probes.hpp"
#include "lobsurv/tensor.hpp"

namespace lobsurv {

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  int epochs = 50;
  int patience = 10;  // epochs without validation improvement; <= 0 disables
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;  // mean negative RCLL over the epoch's batches
  double val_loss = 0;    // NaN when no validation set
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;  // 0 = initialization
  double best_val_loss = 0;
  bool stopped_early = false;
};

// Chronological split by position in a (day, submit time)-ordered sample list.
struct Split {
  std::vector<SurvivalSample> train, val, test;
};
Split chronological_split(const std::vector<SurvivalSample>& samples, double train_fraction = 0.6,
                          double val_fraction = 0.2);

// Model config sized for the samples: T, F, t_max and standardization from `train`.
ModelConfig model_config_for(const std::vector<SurvivalSample>& train, EncoderConfig encoder,
                             DecoderConfig decoder = {}, std::vector<std::string> feature_names = {});

// Minimizes mean negative RCLL; leaves `model` at the best validation epoch
// (or the last epoch when `val` is empty). Throws NumericError on a NaN loss.
FitResult fit(SurvivalModel& model, const std::vector<SurvivalSample>& train,
              const std::vector<SurvivalSample>& val, const TrainConfig& config,
              const std::function<void(const EpochRecord&)>& on_epoch = {});

double negative_rcll(SurvivalModel& model, const std::vector<SurvivalSample>& samples);

struct EvalReport {
  std::size_t n = 0;
  double negative_rcll = 0;
  double c_td = 0;
  double brier = 0;
  double brier_horizon = 0;  // median observed time
  double log_floor = kLogFloor;
  nlohmann::json to_json() const;
};

EvalReport evaluate(SurvivalModel& model, const std::vector<SurvivalSample>& samples);

// Last T rows of a longer window.
FeatureWindow tail_window(const FeatureWindow& w, std::size_t T);
std::vector<SurvivalSample> with_lookback(const std::vector<SurvivalSample>& samples, std::size_t T);

struct CellResult {
  EncoderKind encoder = EncoderKind::Mlp;
  std::size_t T = 0;
  std::uint64_t seed = 0;
  double test_negative_rcll = 0;
  double val_negative_rcll = 0;
  int best_epoch = 0;
  double seconds = 0;
};

struct Summary {
  double mean = 0;
  double std = 0;  // sample standard deviation across seeds
};
Summary summarize(const std::vector<double>& values);

// 100 * (mlp - model) / |mlp| on negative RCLL.
double improvement_over(double mlp, double model);

struct BenchmarkSpec {
  std::vector<EncoderKind> encoders{EncoderKind::Mlp, EncoderKind::Cnn, EncoderKind::ConvTransformer};
  std::vector<std::size_t> lookbacks{50, 500, 1000};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  EncoderConfig encoder;  // kind and T are overridden per cell
  DecoderConfig decoder;
  TrainConfig train;
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  unsigned threads = 1;
};

struct BenchmarkResult {
  std::vector<CellResult> cells;  // ordered (encoder, T, seed)
  std::vector<EncoderKind> encoders;
  std::vector<std::size_t> lookbacks;

  Summary cell_summary(EncoderKind e, std::size_t T) const;
  // Negative RCLL mean +- std per model and lookback.
  std::string rcll_table_csv() const;
  // Percentage improvement of each model's mean over MN-MLP.
  std::string improvement_table_csv() const;
  std::string to_text() const;
  nlohmann::json to_json() const;
};

// `samples` carry windows at least max(lookbacks) long; shorter lookbacks use
// the trailing rows of the same windows.
BenchmarkResult benchmark_suite(const std::vector<SurvivalSample>& samples, const BenchmarkSpec& spec,
                                const std::function<void(const CellResult&)>& on_cell = {});

struct KernelSweepRow {
  int kernel = 0;
  Summary negative_rcll;
  std::vector<double> values;
};

std::vector<KernelSweepRow> kernel_sweep(const std::vector<SurvivalSample>& samples, const std::vector<int>& kernels,
                                         const BenchmarkSpec& spec, std::size_t T);
std::string kernel_sweep_csv(const std::vector<KernelSweepRow>& rows, std::size_t T);

}  // namespace lobsurv
