#include "lobsurv/interpret.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "lobsurv/error.hpp"

namespace lobsurv {

AttentionRecord attention_heatmaps(SurvivalModel& model, const FeatureWindow& x) {
  return AttentionRecord{model.attention_heatmaps(x)};
}

std::string heatmap_csv(const AttentionRecord& record) {
  std::ostringstream os;
  os.precision(17);
  os << "head,query,key,weight\n";
  for (std::size_t h = 0; h < record.heads.size(); ++h) {
    const Mat& m = record.heads[h];
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) os << h << ',' << i << ',' << j << ',' << m(i, j) << '\n';
    }
  }
  return os.str();
}

ShapleyResult shapley_values(std::size_t n_features, std::size_t n_background, const CoalitionEvaluator& evaluate,
                             std::size_t n_permutations, std::uint64_t seed) {
  if (n_permutations < 1) throw UsageError("shapley needs at least one permutation");
  if (n_background < 1) throw UsageError("shapley needs a nonempty background set");
  if (n_features < 1) throw UsageError("shapley needs at least one feature");
  const std::size_t n = n_features;
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> phi(n, 0.0);
  ShapleyResult r;

  std::vector<double> full_sum(n_background), empty_sum(n_background);
  std::size_t done = 0;
  while (done < n_permutations) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int pass = 0; pass < 2 && done < n_permutations; ++pass, ++done) {
      std::vector<std::size_t> order = perm;
      if (pass == 1) std::reverse(order.begin(), order.end());
      // Coalitions along the permutation: empty, {o0}, {o0,o1}, ..., all.
      std::vector<std::vector<char>> coalitions(n + 1, std::vector<char>(n, 0));
      for (std::size_t k = 1; k <= n; ++k) {
        coalitions[k] = coalitions[k - 1];
        coalitions[k][order[k - 1]] = 1;
      }
      for (std::size_t b = 0; b < n_background; ++b) {
        const std::vector<double> v = evaluate(coalitions, b);
        if (v.size() != n + 1) throw UsageError("shapley evaluator returned the wrong number of values");
        for (std::size_t k = 1; k <= n; ++k) phi[order[k - 1]] += v[k] - v[k - 1];
        if (done == 0) {
          full_sum[b] = v[n];
          empty_sum[b] = v[0];
        }
      }
    }
  }
  const double scale = 1.0 / (static_cast<double>(n_permutations) * static_cast<double>(n_background));
  r.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) r.values[i] = phi[i] * scale;
  r.prediction = std::accumulate(full_sum.begin(), full_sum.end(), 0.0) / static_cast<double>(n_background);
  r.background_mean = std::accumulate(empty_sum.begin(), empty_sum.end(), 0.0) / static_cast<double>(n_background);
  r.efficiency_gap =
      std::accumulate(r.values.begin(), r.values.end(), 0.0) - (r.prediction - r.background_mean);
  r.permutations = n_permutations;
  return r;
}

ShapleyResult shapley_values(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             const std::vector<std::vector<double>>& background, std::size_t n_permutations,
                             std::uint64_t seed) {
  for (const auto& b : background) {
    if (b.size() != x.size()) throw UsageError("background rows must match the explained input length");
  }
  std::vector<double> hybrid(x.size());
  const CoalitionEvaluator eval = [&](const std::vector<std::vector<char>>& coalitions, std::size_t b) {
    std::vector<double> out;
    out.reserve(coalitions.size());
    for (const auto& c : coalitions) {
      for (std::size_t i = 0; i < x.size(); ++i) hybrid[i] = c[i] ? x[i] : background[b][i];
      out.push_back(f(hybrid));
    }
    return out;
  };
  return shapley_values(x.size(), background.size(), eval, n_permutations, seed);
}

ShapleyResult shapley_values(SurvivalModel& model, const FeatureWindow& x, const std::vector<FeatureWindow>& background,
                             double horizon, std::size_t n_permutations, std::uint64_t seed) {
  for (const auto& b : background) {
    if (b.rows != x.rows || b.cols != x.cols) throw UsageError("background windows must match the explained window");
  }
  const CoalitionEvaluator eval = [&](const std::vector<std::vector<char>>& coalitions, std::size_t b) {
    std::vector<FeatureWindow> windows;
    windows.reserve(coalitions.size());
    for (const auto& c : coalitions) {
      FeatureWindow w = background[b];
      for (std::size_t r = 0; r < w.rows; ++r) {
        for (std::size_t col = 0; col < w.cols; ++col) {
          if (c[col]) w.at(r, col) = x.at(r, col);
        }
      }
      windows.push_back(std::move(w));
    }
    const std::vector<double> t(windows.size(), horizon);
    const auto preds = model.predict(windows, t);
    std::vector<double> out(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) out[i] = preds[i].survival;
    return out;
  };
  return shapley_values(x.cols, background.size(), eval, n_permutations, seed);
}

std::string beeswarm_export(const std::vector<std::vector<double>>& shapley,
                            const std::vector<std::vector<double>>& feature_values,
                            const std::vector<std::string>& feature_names) {
  if (shapley.size() != feature_values.size()) throw UsageError("beeswarm: shapley/feature row count mismatch");
  std::ostringstream os;
  os.precision(17);
  os << "sample,feature,shapley,feature_value\n";
  for (std::size_t s = 0; s < shapley.size(); ++s) {
    if (shapley[s].size() != feature_values[s].size() ||
        (!feature_names.empty() && feature_names.size() != shapley[s].size())) {
      throw UsageError("beeswarm: feature count mismatch in sample " + std::to_string(s));
    }
    for (std::size_t f = 0; f < shapley[s].size(); ++f) {
      os << s << ',' << (feature_names.empty() ? std::to_string(f) : feature_names[f]) << ',' << shapley[s][f] << ','
         << feature_values[s][f] << '\n';
    }
  }
  return os.str();
}

}  // namespace lobsurv
