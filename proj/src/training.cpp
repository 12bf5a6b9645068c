#include "lobsurv/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "lobsurv/error.hpp"

namespace lobsurv {

Split chronological_split(const std::vector<SurvivalSample>& samples, double train_fraction, double val_fraction) {
  if (!(train_fraction > 0) || val_fraction < 0 || train_fraction + val_fraction >= 1.0) {
    throw UsageError("split fractions must satisfy 0 < train, 0 <= val, train + val < 1");
  }
  std::vector<SurvivalSample> sorted = samples;
  std::stable_sort(sorted.begin(), sorted.end(), [](const SurvivalSample& a, const SurvivalSample& b) {
    if (a.meta.day != b.meta.day) return a.meta.day < b.meta.day;
    return a.meta.submit_time < b.meta.submit_time;
  });
  const std::size_t n = sorted.size();
  const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(sorted.begin() + static_cast<std::ptrdiff_t>(n_train),
               sorted.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(sorted.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), sorted.end());
  return s;
}

ModelConfig model_config_for(const std::vector<SurvivalSample>& train, EncoderConfig encoder, DecoderConfig decoder,
                             std::vector<std::string> feature_names) {
  if (train.empty()) throw DataError("empty training set");
  ModelConfig c;
  encoder.T = static_cast<int>(train[0].x.rows);
  encoder.F = static_cast<int>(train[0].x.cols);
  c.encoder = encoder;
  c.decoder = std::move(decoder);
  c.feature_names = std::move(feature_names);
  double t_max = 0;
  std::vector<const FeatureWindow*> windows;
  for (const auto& s : train) {
    t_max = std::max(t_max, s.z);
    windows.push_back(&s.x);
  }
  c.t_max = t_max > 0 ? t_max : 1.0;
  fit_standardization(c, windows);
  return c;
}

namespace {

struct BatchData {
  Mat input;
  std::vector<double> z;
  std::vector<int> delta;
};

BatchData make_batch(const SurvivalModel& model, const std::vector<SurvivalSample>& samples,
                     const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
  BatchData b;
  std::vector<const FeatureWindow*> windows;
  for (std::size_t i = begin; i < end; ++i) {
    const SurvivalSample& s = samples[order[i]];
    windows.push_back(&s.x);
    b.z.push_back(s.z);
    b.delta.push_back(s.delta);
  }
  b.input = model.prepare(windows);
  return b;
}

std::vector<Mat> snapshot(const ParamStore& store) {
  std::vector<Mat> out;
  for (const auto& p : store.params()) out.push_back(p.value);
  return out;
}

void restore(ParamStore& store, const std::vector<Mat>& values) {
  auto& ps = store.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value = values[i];
}

std::string param_norms(const ParamStore& store) {
  std::ostringstream os;
  for (const auto& p : store.params()) os << ' ' << p.name << '=' << p.value.norm();
  return os.str();
}

}  // namespace

double negative_rcll(SurvivalModel& model, const std::vector<SurvivalSample>& samples) {
  if (samples.empty()) throw DataError("negative_rcll of an empty sample set");
  constexpr std::size_t chunk = 128;
  std::vector<double> terms;
  terms.reserve(samples.size());
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t begin = 0; begin < samples.size(); begin += chunk) {
    const std::size_t end = std::min(samples.size(), begin + chunk);
    BatchData b = make_batch(model, samples, order, begin, end);
    Graph g;
    const Mat q = model.encode(g, b.input).value();
    const auto preds = model.predict_latent(q, b.z);
    for (std::size_t i = 0; i < preds.size(); ++i) {
      terms.push_back(rcll_term(preds[i], Observation{b.z[i], b.delta[i]}));
    }
  }
  return -compensated_sum(terms) / static_cast<double>(samples.size());
}

FitResult fit(SurvivalModel& model, const std::vector<SurvivalSample>& train, const std::vector<SurvivalSample>& val,
              const TrainConfig& config, const std::function<void(const EpochRecord&)>& on_epoch) {
  if (config.batch_size < 1) throw UsageError("batch size must be >= 1");
  if (config.epochs < 0) throw UsageError("epochs must be >= 0");
  if (!(config.adam.lr > 0)) throw UsageError("learning rate must be positive");
  if (train.empty()) throw DataError("empty training set");
  const auto& e = model.config().encoder;
  for (const auto* set : {&train, &val}) {
    for (const auto& s : *set) {
      if (s.x.rows != static_cast<std::size_t>(e.T) || s.x.cols != static_cast<std::size_t>(e.F)) {
        throw DataError("dataset windows are " + std::to_string(s.x.rows) + "x" + std::to_string(s.x.cols) +
                        " but the model expects T=" + std::to_string(e.T) + ", F=" + std::to_string(e.F));
      }
    }
  }
  FitResult result;
  Adam adam(config.adam);
  std::mt19937_64 rng(config.seed ^ 0x5eedf17ULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const bool has_val = !val.empty();
  result.best_val_loss = has_val ? negative_rcll(model, val) : std::numeric_limits<double>::quiet_NaN();
  std::vector<Mat> best = snapshot(model.params());
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      BatchData b = make_batch(model, train, order, begin, end);
      Graph g;
      Var loss = model.loss(g, b.input, b.z, b.delta);
      const double value = loss.scalar();
      if (!std::isfinite(value)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + "; parameter norms:" + param_norms(model.params()));
      }
      model.params().zero_grad();
      g.backward(loss);
      adam.step(model.params());
      loss_sum += value;
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), std::numeric_limits<double>::quiet_NaN()};
    if (has_val) {
      rec.val_loss = negative_rcll(model, val);
      if (rec.val_loss < result.best_val_loss) {
        result.best_val_loss = rec.val_loss;
        result.best_epoch = epoch;
        best = snapshot(model.params());
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (has_val && config.patience > 0 && since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  if (has_val) restore(model.params(), best);
  model.params().zero_grad();
  return result;
}

nlohmann::json EvalReport::to_json() const {
  return {{"n", n},
          {"negative_rcll", negative_rcll},
          {"c_td", c_td},
          {"brier", brier},
          {"brier_horizon", brier_horizon},
          {"log_floor", log_floor}};
}

EvalReport evaluate(SurvivalModel& model, const std::vector<SurvivalSample>& samples) {
  if (samples.empty()) throw DataError("evaluate on an empty sample set");
  EvalReport r;
  r.n = samples.size();
  r.negative_rcll = negative_rcll(model, samples);
  std::vector<FeatureWindow> windows;
  std::vector<Observation> obs;
  for (const auto& s : samples) {
    windows.push_back(s.x);
    obs.push_back({s.z, s.delta});
  }
  const Mat q = model.latent(windows);
  const auto N = static_cast<Eigen::Index>(samples.size());
  // S(t | x_j) for every j, one decoder batch per distinct query time.
  std::map<double, std::vector<double>> cache;
  const SurvivalFn survival = [&](double t, std::size_t subject) {
    auto it = cache.find(t);
    if (it == cache.end()) {
      const std::vector<double> times(samples.size(), t);
      const auto preds = model.predict_latent(q, times);
      std::vector<double> s(samples.size());
      for (std::size_t j = 0; j < samples.size(); ++j) s[j] = preds[j].survival;
      it = cache.emplace(t, std::move(s)).first;
    }
    return it->second[subject];
  };
  try {
    r.c_td = c_td(survival, obs);
  } catch (const DataError&) {
    r.c_td = std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) z[i] = samples[i].z;
  std::nth_element(z.begin(), z.begin() + N / 2, z.end());
  r.brier_horizon = z[static_cast<std::size_t>(N / 2)];
  std::vector<double> t(samples.size(), r.brier_horizon);
  const auto preds = model.predict_latent(q, t);
  std::vector<double> s_at(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) s_at[i] = preds[i].survival;
  try {
    r.brier = brier(s_at, obs, r.brier_horizon);
  } catch (const NumericError&) {
    r.brier = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

FeatureWindow tail_window(const FeatureWindow& w, std::size_t T) {
  if (T == 0 || T > w.rows) {
    throw DataError("cannot take " + std::to_string(T) + " rows from a window of " + std::to_string(w.rows));
  }
  FeatureWindow out(T, w.cols);
  std::copy(w.values.end() - static_cast<std::ptrdiff_t>(T * w.cols), w.values.end(), out.values.begin());
  return out;
}

std::vector<SurvivalSample> with_lookback(const std::vector<SurvivalSample>& samples, std::size_t T) {
  std::vector<SurvivalSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    SurvivalSample c;
    c.x = tail_window(s.x, T);
    c.z = s.z;
    c.delta = s.delta;
    c.meta = s.meta;
    out.push_back(std::move(c));
  }
  return out;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = compensated_sum(values) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

double improvement_over(double mlp, double model) {
  if (mlp == 0) throw NumericError("improvement over a zero baseline");
  return 100.0 * (mlp - model) / std::fabs(mlp);
}

Summary BenchmarkResult::cell_summary(EncoderKind e, std::size_t T) const {
  std::vector<double> v;
  for (const auto& c : cells) {
    if (c.encoder == e && c.T == T) v.push_back(c.test_negative_rcll);
  }
  return summarize(v);
}

namespace {

std::string fmt(double v, int digits = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string BenchmarkResult::rcll_table_csv() const {
  std::ostringstream os;
  os << "model";
  for (auto T : lookbacks) os << ",T=" << T;
  os << '\n';
  for (auto e : encoders) {
    os << display_name(e);
    for (auto T : lookbacks) {
      const Summary s = cell_summary(e, T);
      os << ',' << fmt(s.mean) << " +- " << fmt(s.std);
    }
    os << '\n';
  }
  return os.str();
}

std::string BenchmarkResult::improvement_table_csv() const {
  std::ostringstream os;
  os << "model";
  for (auto T : lookbacks) os << ",T=" << T;
  os << '\n';
  for (auto e : encoders) {
    if (e == EncoderKind::Mlp) continue;
    os << display_name(e);
    for (auto T : lookbacks) {
      os << ',' << fmt(improvement_over(cell_summary(EncoderKind::Mlp, T).mean, cell_summary(e, T).mean), 2) << '%';
    }
    os << '\n';
  }
  return os.str();
}

std::string BenchmarkResult::to_text() const {
  std::ostringstream os;
  os << "Mean +- STD negative RCLL (test split, across seeds)\n" << rcll_table_csv();
  if (std::find(encoders.begin(), encoders.end(), EncoderKind::Mlp) != encoders.end()) {
    os << "\nPercentage improvement over the MN-MLP model\n" << improvement_table_csv();
  }
  return os.str();
}

nlohmann::json BenchmarkResult::to_json() const {
  nlohmann::json j;
  j["std_over"] = "training seeds";
  j["cells"] = nlohmann::json::array();
  for (const auto& c : cells) {
    j["cells"].push_back({{"model", display_name(c.encoder)},
                          {"encoder", to_string(c.encoder)},
                          {"T", c.T},
                          {"seed", c.seed},
                          {"test_negative_rcll", c.test_negative_rcll},
                          {"val_negative_rcll", c.val_negative_rcll},
                          {"best_epoch", c.best_epoch}});
  }
  j["summary"] = nlohmann::json::array();
  for (auto e : encoders) {
    for (auto T : lookbacks) {
      const Summary s = cell_summary(e, T);
      nlohmann::json row{{"model", display_name(e)}, {"T", T}, {"mean", s.mean}, {"std", s.std}};
      if (std::find(encoders.begin(), encoders.end(), EncoderKind::Mlp) != encoders.end()) {
        row["improvement_over_mlp_pct"] = improvement_over(cell_summary(EncoderKind::Mlp, T).mean, s.mean);
      }
      j["summary"].push_back(row);
    }
  }
  return j;
}

namespace {

struct CellJob {
  EncoderKind encoder;
  std::size_t T;
  std::uint64_t seed;
  int kernel;
};

CellResult run_cell(const Split& split, const CellJob& job, const BenchmarkSpec& spec) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto train = with_lookback(split.train, job.T);
  const auto val = with_lookback(split.val, job.T);
  const auto test = with_lookback(split.test, job.T);
  EncoderConfig enc = spec.encoder;
  enc.kind = job.encoder;
  enc.kernel = job.kernel;
  SurvivalModel model(model_config_for(train, enc, spec.decoder), job.seed);
  TrainConfig tc = spec.train;
  tc.seed = job.seed;
  const FitResult fr = fit(model, train, val, tc);
  CellResult r;
  r.encoder = job.encoder;
  r.T = job.T;
  r.seed = job.seed;
  r.test_negative_rcll = negative_rcll(model, test);
  r.val_negative_rcll = fr.best_val_loss;
  r.best_epoch = fr.best_epoch;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<CellResult> run_jobs(const Split& split, const std::vector<CellJob>& jobs, const BenchmarkSpec& spec,
                                 const std::function<void(const CellResult&)>& on_cell) {
  std::vector<CellResult> results(jobs.size());
  const unsigned workers = std::max(1u, std::min<unsigned>(spec.threads, static_cast<unsigned>(jobs.size())));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_cell(split, jobs[i], spec);
        if (on_cell) {
          std::lock_guard<std::mutex> lock(mu);
          on_cell(results[i]);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace

BenchmarkResult benchmark_suite(const std::vector<SurvivalSample>& samples, const BenchmarkSpec& spec,
                                const std::function<void(const CellResult&)>& on_cell) {
  if (spec.seeds.size() < 2) throw UsageError("benchmark needs at least two seeds");
  if (spec.encoders.empty() || spec.lookbacks.empty()) throw UsageError("benchmark needs encoders and lookbacks");
  const Split split = chronological_split(samples, spec.train_fraction, spec.val_fraction);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DataError("benchmark split left an empty train, validation or test set");
  }
  std::vector<CellJob> jobs;
  for (auto e : spec.encoders) {
    for (auto T : spec.lookbacks) {
      for (auto seed : spec.seeds) jobs.push_back({e, T, seed, spec.encoder.kernel});
    }
  }
  BenchmarkResult r;
  r.encoders = spec.encoders;
  r.lookbacks = spec.lookbacks;
  r.cells = run_jobs(split, jobs, spec, on_cell);
  return r;
}

std::vector<KernelSweepRow> kernel_sweep(const std::vector<SurvivalSample>& samples, const std::vector<int>& kernels,
                                         const BenchmarkSpec& spec, std::size_t T) {
  if (spec.seeds.empty()) throw UsageError("kernel sweep needs at least one seed");
  const Split split = chronological_split(samples, spec.train_fraction, spec.val_fraction);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw DataError("kernel sweep split left an empty train, validation or test set");
  }
  std::vector<CellJob> jobs;
  for (int k : kernels) {
    if (k < 1) throw UsageError("kernel sizes must be >= 1");
    for (auto seed : spec.seeds) jobs.push_back({EncoderKind::ConvTransformer, T, seed, k});
  }
  const auto cells = run_jobs(split, jobs, spec, {});
  std::vector<KernelSweepRow> rows;
  std::size_t i = 0;
  for (int k : kernels) {
    KernelSweepRow row;
    row.kernel = k;
    for (std::size_t s = 0; s < spec.seeds.size(); ++s) row.values.push_back(cells[i++].test_negative_rcll);
    row.negative_rcll = summarize(row.values);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string kernel_sweep_csv(const std::vector<KernelSweepRow>& rows, std::size_t T) {
  std::ostringstream os;
  os << "kernel_size,T,negative_rcll_mean,negative_rcll_std\n";
  for (const auto& r : rows) {
    os << r.kernel << ',' << T << ',' << fmt(r.negative_rcll.mean) << ',' << fmt(r.negative_rcll.std) << '\n';
  }
  return os.str();
}

}  // namespace lobsurv
