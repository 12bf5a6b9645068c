#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lobsurv/error.hpp"
#include "lobsurv/survival_stats.hpp"
#include "oracles.hpp"

namespace lobsurv {
namespace {

TEST(KaplanMeier, AllCensoredIsOne) {
  const std::vector<Observation> obs = {{1, 0}, {2, 0}, {3, 0}};
  const auto km = kaplan_meier(obs);
  for (double t : {0.5, 1.0, 2.5, 10.0}) EXPECT_EQ(km(t), 1.0);
}

TEST(KaplanMeier, NoCensoringIsEmpirical) {
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  const auto km = kaplan_meier(obs);
  EXPECT_EQ(km(1), 0.75);
  EXPECT_EQ(km(2), 0.5);
  EXPECT_EQ(km(3), 0.25);
  EXPECT_EQ(km(4), 0.0);
  EXPECT_EQ(km(0.999), 1.0);
  EXPECT_EQ(km.before(2), 0.75);
}

TEST(KaplanMeier, HandProductWithCensoring) {
  const std::vector<Observation> obs = {{1, 1}, {2, 0}, {3, 1}};
  const auto km = kaplan_meier(obs);
  EXPECT_DOUBLE_EQ(km(1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(km(2.5), 2.0 / 3.0);
  EXPECT_EQ(km(3), 0.0);
  EXPECT_EQ(km.at_risk, (std::vector<std::size_t>{3, 1}));
}

TEST(KaplanMeier, MatchesBruteForceWithTies) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Observation> obs(1 + rng() % 40);
    for (auto& o : obs) o = {static_cast<double>(1 + rng() % 10), static_cast<int>(rng() % 3 != 0)};
    const auto km = kaplan_meier(obs);
    for (double t = 0; t <= 11; t += 0.5) EXPECT_NEAR(km(t), oracle::km_product(obs, t), 1e-12);
  }
}

TEST(CensoringKm, AllEventsIsOne) {
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 1}};
  const auto g = censoring_km(obs);
  for (double t : {0.5, 2.0, 5.0}) EXPECT_EQ(g(t), 1.0);
}

TEST(CensoringKm, MixedMatchesFlippedProduct) {
  const std::vector<Observation> obs = {{1, 1}, {2, 0}, {2, 1}, {4, 0}, {5, 1}};
  std::vector<Observation> flipped = obs;
  for (auto& o : flipped) o.delta = 1 - o.delta;
  const auto g = censoring_km(obs);
  for (double t : {1.0, 2.0, 3.0, 4.0, 6.0}) EXPECT_NEAR(g(t), oracle::km_product(flipped, t), 1e-15);
}

TEST(Cox, ZeroFeatureGivesZeroBeta) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(4, 1);
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 0}, {4, 1}};
  EXPECT_EQ(cox_fit(X, obs).beta(0), 0.0);
}

TEST(Cox, PartialLikelihoodAtZero) {
  Eigen::MatrixXd X(2, 1);
  X << 0.3, -1.2;
  const std::vector<Observation> obs = {{1, 1}, {2, 1}};
  EXPECT_NEAR(cox_log_partial_likelihood(Eigen::VectorXd::Zero(1), X, obs), std::log(0.5), 1e-15);
}

TEST(Cox, RecoversKnownCoefficients) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const int n = 2000;
  const Eigen::Vector2d truth(0.8, -0.5);
  Eigen::MatrixXd X(n, 2);
  std::vector<Observation> obs(n);
  for (int i = 0; i < n; ++i) {
    X(i, 0) = normal(rng);
    X(i, 1) = normal(rng);
    const double rate = std::exp(X.row(i).dot(truth));
    const double t = -std::log(unif(rng)) / rate;
    const double c = -std::log(unif(rng)) / 0.3;
    obs[i] = {std::min(t, c), t <= c ? 1 : 0};
  }
  const CoxModel m = cox_fit(X, obs);
  // Standard error is roughly 1/sqrt(events) ~ 0.025; allow four of them.
  EXPECT_NEAR(m.beta(0), truth(0), 0.1);
  EXPECT_NEAR(m.beta(1), truth(1), 0.1);
  EXPECT_GT(m.survival(0.1, Eigen::Vector2d(-1, 0)), m.survival(0.1, Eigen::Vector2d(1, 0)));
}

TEST(Cox, DegenerateInputErrors) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(2, 1);
  const std::vector<Observation> censored = {{1, 0}, {2, 0}};
  EXPECT_THROW(cox_fit(X, censored), DataError);
}

TEST(Cox, NonConvergenceReportsNumericError) {
  // Perfect separation drives beta to infinity.
  Eigen::MatrixXd X(4, 1);
  X << 3, 2, 1, 0;
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 1}, {4, 1}};
  CoxOptions opt;
  opt.max_iterations = 5;
  EXPECT_THROW(cox_fit(X, obs, opt), NumericError);
}

TEST(Aft, Identities) {
  const auto h0 = [](double t) { return 0.5 + t; };
  EXPECT_DOUBLE_EQ(aft_hazard(2.0, 1.0, h0), h0(2.0));
  const auto constant = [](double) { return 0.7; };
  EXPECT_DOUBLE_EQ(aft_hazard(3.0, 2.0, constant), 1.4);
  const double beta = 0.4, x = 1.5;
  const double phi = std::exp(beta * x);
  EXPECT_DOUBLE_EQ(aft_hazard(1.2, phi, h0), phi * (0.5 + phi * 1.2));
  EXPECT_THROW(aft_hazard(1.0, 0.0, h0), DataError);
}

TEST(Rcll, ExponentialClosedForms) {
  const SurvivalPrediction p{std::exp(-2.0), std::exp(-2.0)};
  EXPECT_NEAR(rcll_term(p, {2.0, 1}), -2.0, 1e-15);
  EXPECT_NEAR(rcll_term(p, {2.0, 0}), -2.0, 1e-15);
}

TEST(Rcll, MeanOfTermsMatchesLoop) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  std::vector<SurvivalPrediction> preds(57);
  std::vector<Observation> obs(57);
  double naive = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    preds[i] = {u(rng), u(rng)};
    obs[i] = {u(rng), static_cast<int>(rng() % 2)};
    naive += obs[i].delta ? std::log(preds[i].density) : std::log(preds[i].survival);
  }
  EXPECT_NEAR(rcll(preds, obs), naive / 57.0, 1e-14);
}

TEST(Rcll, NonPositiveValueErrors) {
  EXPECT_THROW(rcll_term({0.5, 0.0}, {1.0, 1}), NumericError);
  EXPECT_THROW(rcll_term({0.0, 0.5}, {1.0, 0}), NumericError);
  EXPECT_NO_THROW(rcll_term({0.0, 0.5}, {1.0, 1}));
}

// Enumerates pi_ij directly.
double c_td_naive(const SurvivalFn& s, const std::vector<Observation>& obs) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    for (std::size_t j = 0; j < obs.size(); ++j) {
      if (obs[i].delta == 1 && obs[i].z < obs[j].z) {
        den += 1;
        num += s(obs[i].z, i) < s(obs[i].z, j) ? 1 : 0;
      }
    }
  }
  return num / den;
}

TEST(Ctd, PerfectOrdering) {
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 0}};
  const SurvivalFn s = [&](double t, std::size_t k) { return std::exp(-t / obs[k].z); };
  EXPECT_EQ(c_td(s, obs), 1.0);
}

TEST(Ctd, OneDiscordantPairOfThree) {
  const std::vector<Observation> obs = {{1, 1}, {2, 1}, {3, 1}};
  // Risk scores: subject 2 looks riskier than subject 1 at t = 2.
  const std::vector<double> rate = {3.0, 1.0, 2.0};
  const SurvivalFn s = [&](double t, std::size_t k) { return std::exp(-rate[k] * t); };
  EXPECT_DOUBLE_EQ(c_td(s, obs), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c_td(s, obs), c_td_naive(s, obs));
}

TEST(Ctd, RandomModelNearHalf) {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> e(1.0);
  std::vector<Observation> obs(150);
  std::vector<double> rate(150);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    obs[i] = {e(rng), 1};
    rate[i] = e(rng);
  }
  const SurvivalFn s = [&](double t, std::size_t k) { return std::exp(-rate[k] * t); };
  EXPECT_NEAR(c_td(s, obs), 0.5, 0.05);
  EXPECT_DOUBLE_EQ(c_td(s, obs), c_td_naive(s, obs));
}

TEST(Ctd, NoComparablePairsErrors) {
  const std::vector<Observation> obs = {{1, 0}, {2, 0}};
  const SurvivalFn s = [](double, std::size_t) { return 0.5; };
  EXPECT_THROW(c_td(s, obs), DataError);
}

TEST(Brier, PerfectPredictionsScoreZero) {
  const std::vector<Observation> obs = {{1, 1}, {3, 1}, {5, 1}};
  const std::vector<double> s_at_2 = {0.0, 1.0, 1.0};
  EXPECT_EQ(brier(s_at_2, obs, 2.0), 0.0);
}

TEST(Brier, SurvivalOneWithEarlyEvent) {
  const std::vector<Observation> obs = {{1, 1}};
  EXPECT_EQ(brier(std::vector<double>{1.0}, obs, 2.0), 1.0);
}

TEST(Brier, MatchesNaiveLoop) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Observation> obs(40);
  std::vector<double> s(40);
  for (std::size_t i = 0; i < obs.size(); ++i) {
    obs[i] = {std::round(10 * u(rng)) + 1, static_cast<int>(u(rng) < 0.7)};
    s[i] = u(rng);
  }
  const double t = 6.0;
  std::vector<Observation> flipped = obs;
  for (auto& o : flipped) o.delta = 1 - o.delta;
  double total = 0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs[i].z <= t && obs[i].delta == 1) {
      total += s[i] * s[i] / oracle::km_product(flipped, std::nextafter(obs[i].z, 0.0));
    } else if (obs[i].z > t) {
      total += (1 - s[i]) * (1 - s[i]) / oracle::km_product(flipped, t);
    }
  }
  EXPECT_NEAR(brier(s, obs, t), total / obs.size(), 1e-13);
}

TEST(Brier, ZeroCensoringSurvivalErrors) {
  // A censoring curve that reaches zero before the horizon.
  const std::vector<Observation> all_censored_early = {{1, 0}};
  const KMCurve g = censoring_km(all_censored_early);
  ASSERT_EQ(g(1.5), 0.0);
  const std::vector<Observation> obs = {{3, 1}};
  EXPECT_THROW(brier(std::vector<double>{0.5}, obs, 2.0, g), NumericError);
  EXPECT_NO_THROW(brier(std::vector<double>{0.5}, obs, 0.5, g));
}

TEST(CompensatedSum, CancelsRoundoff) {
  const std::vector<double> v = {1.0, 1e100, 1.0, -1e100};
  EXPECT_EQ(compensated_sum(v), 2.0);
}

}  // namespace
}  // namespace lobsurv
