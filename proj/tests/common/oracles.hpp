#pragma once

// Independent brute-force evaluations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lobsurv/survival_stats.hpp"

namespace lobsurv::oracle {

// Product over distinct event times u <= t of (1 - d(u) / n(u)).
inline double km_product(std::span<const Observation> samples, double t) {
  std::vector<double> times;
  for (const auto& o : samples) {
    if (o.delta == 1 && o.z <= t) times.push_back(o.z);
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double s = 1.0;
  for (double u : times) {
    double d = 0, n = 0;
    for (const auto& o : samples) {
      if (o.z >= u) ++n;
      if (o.z == u && o.delta == 1) ++d;
    }
    s *= 1.0 - d / n;
  }
  return s;
}

// y(t, o) = sum_tau sum_c x(t - p tau, c) k(tau * C_in + c, o), zero before the start.
inline Eigen::MatrixXd dcc_loop(const Eigen::MatrixXd& x, const Eigen::MatrixXd& k, int p) {
  const Eigen::Index T = x.rows(), cin = x.cols(), cout = k.cols();
  const Eigen::Index s = k.rows() / cin;
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(T, cout);
  for (Eigen::Index t = 0; t < T; ++t) {
    for (Eigen::Index o = 0; o < cout; ++o) {
      double acc = 0;
      for (Eigen::Index tau = 0; tau < s; ++tau) {
        const Eigen::Index src = t - p * tau;
        if (src < 0) continue;
        for (Eigen::Index c = 0; c < cin; ++c) acc += x(src, c) * k(tau * cin + c, o);
      }
      y(t, o) = acc;
    }
  }
  return y;
}

// Exact Shapley values of v over n players by enumerating all 2^n coalitions.
// Bit i of a mask set = player i present.
inline std::vector<double> shapley_exact(std::size_t n, const std::function<double(std::uint32_t)>& v) {
  std::vector<double> value(std::size_t{1} << n);
  for (std::uint32_t m = 0; m < value.size(); ++m) value[m] = v(m);
  std::vector<double> fact(n + 1, 1.0);
  for (std::size_t i = 1; i <= n; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> phi(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t m = 0; m < value.size(); ++m) {
      if (m & (1u << i)) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcount(m));
      const double w = fact[size] * fact[n - size - 1] / fact[n];
      phi[i] += w * (value[m | (1u << i)] - value[m]);
    }
  }
  return phi;
}

// Interventional coalition value: mean over background rows of f with the
// coalition's features taken from x and the rest from the background row.
inline double coalition_value(const std::function<double(std::span<const double>)>& f, std::span<const double> x,
                              const std::vector<std::vector<double>>& background, std::uint32_t mask) {
  double total = 0;
  std::vector<double> z(x.size());
  for (const auto& b : background) {
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = (mask & (1u << i)) ? x[i] : b[i];
    total += f(z);
  }
  return total / static_cast<double>(background.size());
}

}  // namespace lobsurv::oracle
