#pragma once

#include <cstdint>
#include <vector>

#include "lobsurv/lobster_io.hpp"

namespace lobsurv {

// Zero-intelligence Poisson order-flow model. All rates are per second.
struct SynthConfig {
  std::uint64_t seed = 1;
  double open_seconds = 34200.0;  // 09:30
  double horizon_seconds = 23400.0;
  Price tick = 100;
  Price initial_mid = 1443450;

  double limit_rate_buy = 1.0;
  double limit_rate_sell = 1.0;
  double market_rate_buy = 0.4;
  double market_rate_sell = 0.4;
  double cancel_rate = 0.05;  // per resting order
  double partial_cancel_prob = 0.2;

  // Limit orders rest d ticks behind their own best quote, P(d) ~ (1-q) q^d.
  double depth_decay = 0.5;
  int max_depth = 20;
  // Probability that a limit order improves its quote when the spread exceeds one tick.
  // High values keep the spread near one tick (large-tick regime).
  double spread_stiffness = 0.8;

  Quantity lot = 100;
  double mean_limit_lots = 2.0;
  double mean_market_lots = 1.5;

  int initial_levels = 5;
  int initial_orders_per_level = 3;

  // U-shaped intraday multiplier 1 + a cos(2 pi tau / period) on liquidity
  // removal (market orders and cancellations); limit arrivals stay flat.
  double intraday_amplitude = 0.0;
  double intraday_period = 23400.0;

  // Markov-switching multiplier on market-order intensity.
  std::vector<double> regime_multipliers = {1.0};
  double regime_switch_rate = 0.0;

  // Throws UsageError on an invalid configuration.
  void validate() const;

  static SynthConfig large_tick(std::uint64_t seed = 1);
  static SynthConfig small_tick(std::uint64_t seed = 1);
  static SynthConfig regime_switching(std::uint64_t seed = 1);
};

struct SynthDay {
  std::vector<Message> messages;
  // One orderbook row per message, taken after the message (LOBSTER layout).
  std::vector<SnapshotRow> orderbook;
  // Regime index in force at each message.
  std::vector<int> regimes;
};

std::vector<Message> generate(const SynthConfig& config);

// Also returns the generator's own orderbook rows for `levels` levels (0 = none).
SynthDay generate_day(const SynthConfig& config, std::size_t levels);

}  // namespace lobsurv
