#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lobsurv/models.hpp"

namespace lobsurv {

struct AttentionRecord {
  std::vector<Mat> heads;  // T x T post-softmax weights, one per head
};

AttentionRecord attention_heatmaps(SurvivalModel& model, const FeatureWindow& x);
// Rows: head,query,key,weight.
std::string heatmap_csv(const AttentionRecord& record);

// Batched value oracle for Shapley sampling. Given coalitions (one mask per
// row, true = feature taken from x) and a background index, returns the model
// prediction for each hybrid input.
using CoalitionEvaluator =
    std::function<std::vector<double>(const std::vector<std::vector<char>>& coalitions, std::size_t background)>;

struct ShapleyResult {
  std::vector<double> values;      // one per feature
  double prediction = 0;           // f(x)
  double background_mean = 0;      // mean over background of f(b)
  double efficiency_gap = 0;       // sum(values) - (prediction - background_mean)
  std::size_t permutations = 0;
};

// Permutation-sampling estimate with antithetic pairs; every permutation is
// evaluated against the whole background set, so the efficiency identity holds
// up to rounding. Throws UsageError if n_permutations < 1 or background is empty.
ShapleyResult shapley_values(std::size_t n_features, std::size_t n_background, const CoalitionEvaluator& evaluate,
                             std::size_t n_permutations, std::uint64_t seed);

// Plain feature vectors with background substitution.
ShapleyResult shapley_values(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                             const std::vector<std::vector<double>>& background, std::size_t n_permutations,
                             std::uint64_t seed);

// Window models: one value per feature column, substituting whole columns.
// The explained quantity is S(horizon | x).
ShapleyResult shapley_values(SurvivalModel& model, const FeatureWindow& x, const std::vector<FeatureWindow>& background,
                             double horizon, std::size_t n_permutations, std::uint64_t seed);

// Rows: sample,feature,shapley,feature_value.
std::string beeswarm_export(const std::vector<std::vector<double>>& shapley,
                            const std::vector<std::vector<double>>& feature_values,
                            const std::vector<std::string>& feature_names);

}  // namespace lobsurv
