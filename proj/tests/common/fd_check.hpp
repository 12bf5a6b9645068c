#pragma once

// Central finite-difference check of reverse-mode gradients on the tape.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "lobsurv/tensor.hpp"

namespace lobsurv::oracle {

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

// Largest relative error |analytic - numeric| / max(|analytic|, |numeric|, floor)
// over every entry of every input. The output is contracted with fixed random
// weights so the whole Jacobian is exercised.
inline double fd_max_relative_error(const Builder& build, const std::vector<Mat>& inputs, std::uint64_t seed = 1,
                                    double h = 1e-6, double floor = 1e-6) {
  Mat weights;
  const auto scalar = [&](Graph& g, const std::vector<Var>& in) {
    Var out = build(g, in);
    if (weights.size() == 0) {
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      weights = Mat::NullaryExpr(out.rows(), out.cols(), [&]() { return u(rng); });
    }
    return sum(mul(out, g.constant(weights)));
  };
  const auto evaluate = [&](const std::vector<Mat>& values) {
    Graph g;
    std::vector<Var> in;
    for (const auto& v : values) in.push_back(g.input(v));
    return scalar(g, in).scalar();
  };
  Graph g;
  std::vector<Var> in;
  for (const auto& v : inputs) in.push_back(g.input(v));
  Var out = scalar(g, in);
  g.backward(out);
  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Mat analytic = in[k].grad();
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      std::vector<Mat> plus = inputs, minus = inputs;
      plus[k](i) += h;
      minus[k](i) -= h;
      const double numeric = (evaluate(plus) - evaluate(minus)) / (2 * h);
      const double a = analytic(i);
      const double err = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline Mat random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  return Mat::NullaryExpr(r, c, [&]() { return u(rng); });
}

}  // namespace lobsurv::oracle
