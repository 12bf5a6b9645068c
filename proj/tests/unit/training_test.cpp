#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lobsurv/error.hpp"
#include "lobsurv/training.hpp"

namespace lobsurv {
namespace {

// Two feature clusters with exponential fill times of rate 1 and 10, light censoring.
std::vector<SurvivalSample> toy_samples(std::size_t n, std::uint64_t seed, std::size_t T = 4, std::size_t F = 2) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SurvivalSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool fast = i % 2 == 0;
    SurvivalSample& s = out[i];
    s.x = FeatureWindow(T, F);
    for (auto& v : s.x.values) v = (fast ? 1.0 : -1.0) + noise(rng);
    const double rate = fast ? 10.0 : 1.0;
    const double t = -std::log(1.0 - u(rng)) / rate;
    const double c = -std::log(1.0 - u(rng)) / 0.2;
    s.z = std::max(std::min(t, c), 1e-6);
    s.delta = t <= c ? 1 : 0;
    s.meta.day = static_cast<int>(i / 50);
    s.meta.submit_time = static_cast<Micros>(i);
  }
  return out;
}

EncoderConfig mlp_encoder() {
  EncoderConfig e;
  e.kind = EncoderKind::Mlp;
  e.latent = 4;
  e.mlp_hidden = 8;
  return e;
}

TEST(Split, ChronologicalFractions) {
  auto s = toy_samples(100, 1);
  std::reverse(s.begin(), s.end());
  const Split sp = chronological_split(s, 0.6, 0.2);
  EXPECT_EQ(sp.train.size(), 60u);
  EXPECT_EQ(sp.val.size(), 20u);
  EXPECT_EQ(sp.test.size(), 20u);
  EXPECT_LT(sp.train.back().meta.submit_time, sp.val.front().meta.submit_time);
  EXPECT_LT(sp.val.back().meta.submit_time, sp.test.front().meta.submit_time);
}

TEST(ModelConfigFor, SizesFromData) {
  const auto s = toy_samples(20, 2, 6, 3);
  const ModelConfig c = model_config_for(s, mlp_encoder());
  EXPECT_EQ(c.encoder.T, 6);
  EXPECT_EQ(c.encoder.F, 3);
  double zmax = 0;
  for (const auto& x : s) zmax = std::max(zmax, x.z);
  EXPECT_EQ(c.t_max, zmax);
  EXPECT_EQ(c.feature_mean.size(), 3u);
}

TEST(Fit, ZeroEpochsKeepsInitialization) {
  const auto s = toy_samples(40, 3);
  SurvivalModel m(model_config_for(s, mlp_encoder()), 5);
  SurvivalModel fresh(model_config_for(s, mlp_encoder()), 5);
  TrainConfig tc;
  tc.epochs = 0;
  const FitResult r = fit(m, s, {}, tc);
  EXPECT_TRUE(r.history.empty());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    EXPECT_EQ(m.params().params()[i].value, fresh.params().params()[i].value);
  }
}

TEST(Fit, ToyLossDecreasesForTenEpochs) {
  const auto s = toy_samples(200, 4);
  SurvivalModel m(model_config_for(s, mlp_encoder()), 6);
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = s.size();
  tc.adam.lr = 5e-3;
  const FitResult r = fit(m, s, {}, tc);
  ASSERT_EQ(r.history.size(), 10u);
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    EXPECT_LT(r.history[i].train_loss, r.history[i - 1].train_loss) << "epoch " << i + 1;
  }
}

TEST(Fit, LearnsClusterSeparation) {
  const auto s = toy_samples(400, 5);
  const Split sp = chronological_split(s);
  SurvivalModel m(model_config_for(sp.train, mlp_encoder()), 7);
  TrainConfig tc;
  tc.epochs = 40;
  tc.adam.lr = 1e-2;
  fit(m, sp.train, sp.val, tc);
  // Median fill time is ln2/10 for the fast cluster and ln2 for the slow one.
  EXPECT_LT(m.survival(0.3, s[0].x), m.survival(0.3, s[1].x));
}

TEST(Fit, DeterministicForFixedSeed) {
  const auto s = toy_samples(100, 6);
  const Split sp = chronological_split(s);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;
  const auto run = [&]() {
    SurvivalModel m(model_config_for(sp.train, mlp_encoder()), 1);
    const FitResult r = fit(m, sp.train, sp.val, tc);
    return std::make_pair(r.history.back().train_loss, m.params().params()[0].value);
  };
  EXPECT_EQ(run(), run());
}

TEST(Fit, RestoresBestValidationEpoch) {
  const auto s = toy_samples(150, 7);
  const Split sp = chronological_split(s);
  SurvivalModel m(model_config_for(sp.train, mlp_encoder()), 2);
  TrainConfig tc;
  tc.epochs = 15;
  tc.patience = 3;
  tc.adam.lr = 0.05;
  const FitResult r = fit(m, sp.train, sp.val, tc);
  EXPECT_DOUBLE_EQ(negative_rcll(m, sp.val), r.best_val_loss);
}

TEST(Fit, ShapeMismatchErrors) {
  const auto s = toy_samples(10, 8);
  SurvivalModel m(model_config_for(toy_samples(10, 8, 5), mlp_encoder()), 0);
  EXPECT_THROW(fit(m, s, {}, TrainConfig{}), DataError);
}

TEST(Evaluate, ReportIsDeterministicAndConsistent) {
  const auto s = toy_samples(80, 9);
  SurvivalModel m(model_config_for(s, mlp_encoder()), 3);
  const EvalReport a = evaluate(m, s);
  const EvalReport b = evaluate(m, s);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_EQ(a.n, 80u);
  EXPECT_DOUBLE_EQ(a.negative_rcll, negative_rcll(m, s));
  EXPECT_GE(a.c_td, 0.0);
  EXPECT_LE(a.c_td, 1.0);
}

TEST(Evaluate, TrueModelBeatsPerturbedVariants) {
  // Exponential rate-1 data scored with the true and rescaled closed-form models.
  std::mt19937_64 rng(10);
  std::exponential_distribution<double> e(1.0);
  std::vector<Observation> obs(5000);
  for (auto& o : obs) o = {e(rng), 1};
  const auto score = [&](double rate) {
    std::vector<SurvivalPrediction> p;
    for (const auto& o : obs) p.push_back({std::exp(-rate * o.z), rate * std::exp(-rate * o.z)});
    return -rcll(p, obs);
  };
  EXPECT_LT(score(1.0), score(0.5));
  EXPECT_LT(score(1.0), score(2.0));
}

TEST(Lookback, TailWindow) {
  FeatureWindow w(5, 2);
  for (std::size_t i = 0; i < w.values.size(); ++i) w.values[i] = static_cast<double>(i);
  const FeatureWindow t = tail_window(w, 2);
  EXPECT_EQ(t.rows, 2u);
  EXPECT_EQ(t.values, (std::vector<double>{6, 7, 8, 9}));
  EXPECT_THROW(tail_window(w, 6), DataError);
}

TEST(Summary, MeanAndSampleStd) {
  const Summary s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.std, std::sqrt(5.0 / 3.0));
  EXPECT_EQ(improvement_over(2.0, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(improvement_over(2.0, 1.5), 25.0);
  EXPECT_DOUBLE_EQ(improvement_over(-2.0, -2.5), 25.0);
}

TEST(Benchmark, TablesAndDeterminism) {
  auto s = toy_samples(120, 11, 8);
  BenchmarkSpec spec;
  spec.lookbacks = {4, 8};
  spec.seeds = {0, 1};
  spec.encoder.latent = 4;
  spec.encoder.mlp_hidden = 6;
  spec.encoder.heads = 1;
  spec.encoder.d_k = 4;
  spec.encoder.cnn_layers = 1;
  spec.decoder.hidden = {4};
  spec.train.epochs = 2;
  const BenchmarkResult a = benchmark_suite(s, spec);
  EXPECT_EQ(a.cells.size(), 3u * 2u * 2u);
  const std::string table = a.rcll_table_csv();
  EXPECT_EQ(table.substr(0, table.find('\n')), "model,T=4,T=8");
  EXPECT_NE(table.find("MN-Conv-Trans"), std::string::npos);
  const std::string impr = a.improvement_table_csv();
  EXPECT_EQ(impr.find("MN-MLP"), std::string::npos) << impr;
  EXPECT_NE(impr.find("MN-CNN,"), std::string::npos) << impr;
  spec.threads = 2;
  const BenchmarkResult b = benchmark_suite(s, spec);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(KernelSweep, Layout) {
  auto s = toy_samples(90, 12, 6);
  BenchmarkSpec spec;
  spec.seeds = {0, 1};
  spec.encoder.latent = 4;
  spec.encoder.heads = 1;
  spec.encoder.d_k = 2;
  spec.decoder.hidden = {4};
  spec.train.epochs = 1;
  const auto rows = kernel_sweep(s, {1, 2}, spec, 6);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].values.size(), 2u);
  const std::string csv = kernel_sweep_csv(rows, 6);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "kernel_size,T,negative_rcll_mean,negative_rcll_std");
}

}  // namespace
}  // namespace lobsurv
