#include "lobsurv/survival_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lobsurv/error.hpp"

namespace lobsurv {

double compensated_sum(std::span<const double> values) {
  double sum = 0.0, c = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

double KMCurve::operator()(double t) const {
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

double KMCurve::before(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 1.0;
  return survival[static_cast<std::size_t>(it - times.begin()) - 1];
}

KMCurve kaplan_meier(std::span<const Observation> samples) {
  std::vector<Observation> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const Observation& a, const Observation& b) { return a.z < b.z; });
  KMCurve curve;
  // Between censorings the product telescopes to remaining / at-risk-at-start,
  // so each stretch costs one division and an uncensored curve is exactly empirical.
  double s = 1.0, base_s = 1.0;
  std::size_t at_risk = sorted.size(), base_n = sorted.size();
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i, events = 0;
    while (j < sorted.size() && sorted[j].z == sorted[i].z) {
      events += sorted[j].delta == 1 ? 1 : 0;
      ++j;
    }
    if (events > 0) {
      s = base_s * (static_cast<double>(at_risk - events) / static_cast<double>(base_n));
      curve.times.push_back(sorted[i].z);
      curve.events.push_back(events);
      curve.at_risk.push_back(at_risk);
      curve.survival.push_back(s);
    }
    at_risk -= j - i;
    if (j - i > events) {
      base_s = s;
      base_n = at_risk;
    }
    i = j;
  }
  return curve;
}

KMCurve censoring_km(std::span<const Observation> samples) {
  std::vector<Observation> flipped(samples.begin(), samples.end());
  for (auto& o : flipped) o.delta = 1 - o.delta;
  return kaplan_meier(flipped);
}

namespace {

// Event-time groups in ascending order; risk set of group g = indices with z >= time.
struct RiskStructure {
  std::vector<std::size_t> order;  // indices sorted by z descending
  std::vector<double> times;       // distinct event times ascending
};

struct CoxDerivatives {
  double loglik = 0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

CoxDerivatives cox_derivatives(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                               std::span<const Observation> samples, bool want_hessian) {
  const auto n = static_cast<std::size_t>(X.rows());
  const auto p = X.cols();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return samples[a].z > samples[b].z; });
  const Eigen::VectorXd eta = X * beta;
  CoxDerivatives d;
  d.gradient = Eigen::VectorXd::Zero(p);
  d.hessian = Eigen::MatrixXd::Zero(p, p);
  double s0 = 0;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(p, p);
  // Sweep from the largest time down so the risk set grows monotonically.
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double t = samples[idx[i]].z;
    std::size_t events = 0;
    Eigen::VectorXd xsum = Eigen::VectorXd::Zero(p);
    double eta_sum = 0;
    while (j < n && samples[idx[j]].z == t) {
      const std::size_t k = idx[j];
      const double w = std::exp(eta(static_cast<Eigen::Index>(k)));
      const auto xk = X.row(static_cast<Eigen::Index>(k)).transpose();
      s0 += w;
      s1 += w * xk;
      if (want_hessian) s2 += w * xk * xk.transpose();
      if (samples[k].delta == 1) {
        ++events;
        xsum += xk;
        eta_sum += eta(static_cast<Eigen::Index>(k));
      }
      ++j;
    }
    if (events > 0) {
      const double e = static_cast<double>(events);
      d.loglik += eta_sum - e * std::log(s0);
      const Eigen::VectorXd mean = s1 / s0;
      d.gradient += xsum - e * mean;
      if (want_hessian) d.hessian -= e * (s2 / s0 - mean * mean.transpose());
    }
    i = j;
  }
  return d;
}

}  // namespace

double cox_log_partial_likelihood(const Eigen::VectorXd& beta, const Eigen::MatrixXd& X,
                                  std::span<const Observation> samples) {
  return cox_derivatives(beta, X, samples, false).loglik;
}

CoxModel cox_fit(const Eigen::MatrixXd& X, std::span<const Observation> samples,
                 const CoxOptions& options) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (n != samples.size()) throw DataError("cox_fit: feature rows and samples differ in length");
  if (n < 2) throw DataError("cox_fit needs at least two samples");
  if (std::none_of(samples.begin(), samples.end(), [](const Observation& o) { return o.delta == 1; })) {
    throw DataError("cox_fit needs at least one uncensored sample");
  }
  CoxModel model;
  model.beta = Eigen::VectorXd::Zero(X.cols());
  CoxDerivatives d = cox_derivatives(model.beta, X, samples, true);
  bool converged = d.gradient.norm() < options.tolerance;
  int iter = 0;
  while (!converged && iter < options.max_iterations) {
    ++iter;
    const Eigen::VectorXd step = (-d.hessian).completeOrthogonalDecomposition().solve(d.gradient);
    double scale = 1.0;
    Eigen::VectorXd candidate = model.beta + step;
    CoxDerivatives next = cox_derivatives(candidate, X, samples, true);
    while (!(next.loglik >= d.loglik - 1e-12) && scale > 1e-8) {
      scale *= 0.5;
      candidate = model.beta + scale * step;
      next = cox_derivatives(candidate, X, samples, true);
    }
    const double improvement = next.loglik - d.loglik;
    model.beta = candidate;
    d = std::move(next);
    converged = d.gradient.norm() < options.tolerance ||
                (std::fabs(improvement) < options.tolerance * (1.0 + std::fabs(d.loglik)) &&
                 d.gradient.norm() < 1e-6 * (1.0 + static_cast<double>(n)));
  }
  if (!converged || !model.beta.allFinite()) {
    throw NumericError("cox_fit did not converge after " + std::to_string(iter) +
                       " iterations; gradient norm " + std::to_string(d.gradient.norm()));
  }
  model.iterations = iter;

  // Breslow baseline.
  const Eigen::VectorXd w = (X * model.beta).array().exp();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return samples[a].z < samples[b].z; });
  double risk = w.sum();
  double H = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    const double t = samples[idx[i]].z;
    std::size_t events = 0;
    double leaving = 0;
    while (j < n && samples[idx[j]].z == t) {
      events += samples[idx[j]].delta == 1 ? 1 : 0;
      leaving += w(static_cast<Eigen::Index>(idx[j]));
      ++j;
    }
    if (events > 0) {
      H += static_cast<double>(events) / risk;
      model.baseline_times.push_back(t);
      model.cumulative_hazard.push_back(H);
    }
    risk -= leaving;
    i = j;
  }
  return model;
}

double CoxModel::baseline_cumulative_hazard(double t) const {
  const auto it = std::upper_bound(baseline_times.begin(), baseline_times.end(), t);
  if (it == baseline_times.begin()) return 0.0;
  return cumulative_hazard[static_cast<std::size_t>(it - baseline_times.begin()) - 1];
}

double CoxModel::survival(double t, const Eigen::VectorXd& x) const {
  return std::exp(-baseline_cumulative_hazard(t) * std::exp(beta.dot(x)));
}

double aft_hazard(double t, double phi, const std::function<double(double)>& baseline_hazard) {
  if (!(phi > 0)) throw DataError("AFT acceleration factor must be positive");
  return phi * baseline_hazard(phi * t);
}

double rcll_term(const SurvivalPrediction& p, const Observation& o, double floor) {
  const double v = o.delta == 1 ? p.density : p.survival;
  if (!(v > 0)) {
    throw NumericError(std::string(o.delta == 1 ? "density" : "survival") +
                       " not strictly positive at z=" + std::to_string(o.z));
  }
  return std::log(std::max(v, floor));
}

double rcll(std::span<const SurvivalPrediction> predictions, std::span<const Observation> samples,
            double floor) {
  if (predictions.size() != samples.size()) throw DataError("rcll: prediction/sample count mismatch");
  if (samples.empty()) throw DataError("rcll of an empty sample");
  std::vector<double> terms(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) terms[i] = rcll_term(predictions[i], samples[i], floor);
  return compensated_sum(terms) / static_cast<double>(samples.size());
}

double c_td(const SurvivalFn& survival, std::span<const Observation> samples) {
  std::size_t comparable = 0, concordant = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].delta != 1) continue;
    const double zi = samples[i].z;
    const double own = survival(zi, i);
    for (std::size_t j = 0; j < samples.size(); ++j) {
      if (j == i || !(zi < samples[j].z)) continue;
      ++comparable;
      if (own < survival(zi, j)) ++concordant;
    }
  }
  if (comparable == 0) throw DataError("c_td: no comparable pairs");
  return static_cast<double>(concordant) / static_cast<double>(comparable);
}

double brier(std::span<const double> survival_at_t, std::span<const Observation> samples, double t,
             const KMCurve& censoring) {
  if (survival_at_t.size() != samples.size()) throw DataError("brier: prediction/sample count mismatch");
  if (samples.empty()) throw DataError("brier of an empty sample");
  std::vector<double> terms(samples.size(), 0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double s = survival_at_t[i];
    if (samples[i].z <= t && samples[i].delta == 1) {
      const double g = censoring.before(samples[i].z);
      if (!(g > 0)) throw NumericError("brier: censoring survival is zero at z=" + std::to_string(samples[i].z));
      terms[i] = s * s / g;
    } else if (samples[i].z > t) {
      const double g = censoring(t);
      if (!(g > 0)) throw NumericError("brier: censoring survival is zero at t=" + std::to_string(t));
      terms[i] = (1.0 - s) * (1.0 - s) / g;
    }
  }
  return compensated_sum(terms) / static_cast<double>(samples.size());
}

double brier(std::span<const double> survival_at_t, std::span<const Observation> samples, double t) {
  return brier(survival_at_t, samples, t, censoring_km(samples));
}

}  // namespace lobsurv
