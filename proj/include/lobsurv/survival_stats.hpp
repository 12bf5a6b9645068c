#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace lobsurv {

struct Observation {
  double z = 0;
  int delta = 0;  // 1 = event observed, 0 = right-censored
};

// Product-limit curve. `times` are the distinct event times, ascending.
struct KMCurve {
  std::vector<double> times;
  std::vector<std::size_t> events;
  std::vector<std::size_t> at_risk;
  std::vector<double> survival;  // value on [times[i], times[i+1])

  // Right-continuous step function; 1 before the first event time.
  double operator()(double t) const;
  // Left limit S(t-).
  double before(double t) const;
};

KMCurve kaplan_meier(std::span<const Observation> samples);
// Kaplan-Meier estimate of the censoring distribution (indicators flipped).
KMCurve censoring_km(std::span<const Observation> samples);

struct CoxOptions {
  int max_iterations = 50;
  double tolerance = 1e-10;
};

// Proportional hazards model with a Breslow baseline.
struct CoxModel {
  Eigen::VectorXd beta;
  std::vector<double> baseline_times;      // distinct event times
  std::vector<double> cumulative_hazard;   // Breslow H0 at those times
  int iterations = 0;

  double baseline_cumulative_hazard(double t) const;
  double survival(double t, const Eigen::VectorXd& x) const;
  // -dS/dt is not defined for a step baseline; use the RCLL on a smoothed model instead.
};

// Breslow-tied log partial likelihood.
double cox_log_partial_likelihood(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                                  std::span<const Observation> samples);

// Newton-Raphson with step halving. Throws NumericError (with gradient norm) on
// non-convergence and DataError on degenerate input.
CoxModel cox_fit(const Eigen::MatrixXd& X, std::span<const Observation> samples,
                 const CoxOptions& options = {});

// h(t|x) = phi(x) h0(phi(x) t). Throws DataError for phi <= 0.
double aft_hazard(double t, double phi, const std::function<double(double)>& baseline_hazard);

struct SurvivalPrediction {
  double survival = 1;  // S(z|x)
  double density = 0;   // f(z|x)
};

inline constexpr double kLogFloor = 1e-12;

// Per-sample right-censored log score delta*log f + (1-delta)*log S.
double rcll_term(const SurvivalPrediction& p, const Observation& o, double floor = kLogFloor);
// Mean log score over samples (higher is better). Throws NumericError when a
// needed density or survival value is not strictly positive.
double rcll(std::span<const SurvivalPrediction> predictions, std::span<const Observation> samples,
            double floor = kLogFloor);

// S(t | x_subject).
using SurvivalFn = std::function<double(double t, std::size_t subject)>;

// Time-dependent concordance over pairs with delta_i = 1 and z_i < z_j.
// Throws DataError when no pair is comparable.
double c_td(const SurvivalFn& survival, std::span<const Observation> samples);

// Censored Brier score at horizon t with inverse-probability-of-censoring weights
// from `censoring` (Ghat(z-) for observed events, Ghat(t) for survivors).
double brier(std::span<const double> survival_at_t, std::span<const Observation> samples, double t,
             const KMCurve& censoring);
double brier(std::span<const double> survival_at_t, std::span<const Observation> samples, double t);

// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

}  // namespace lobsurv
