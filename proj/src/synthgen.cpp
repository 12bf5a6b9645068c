#include "lobsurv/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <unordered_map>

#include "lobsurv/error.hpp"

namespace lobsurv {
namespace {

// Portable sampling on top of mt19937_64 so streams do not depend on the
// standard library's distribution implementations.
class Sampler {
 public:
  explicit Sampler(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  // Number of failures before the first success with continuation probability q.
  int geometric(double q) {
    if (q <= 0.0) return 0;
    return static_cast<int>(std::floor(std::log1p(-uniform()) / std::log(q)));
  }
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n); }

 private:
  std::mt19937_64 engine_;
};

struct RestingOrder {
  OrderId id;
  Quantity size;
};

struct Level {
  Price price;
  std::vector<RestingOrder> fifo;
};

// Generator-side book: sorted level vectors, best level first on both sides.
class SimBook {
 public:
  std::vector<Level>& side(Side s) { return s == Side::Buy ? bids_ : asks_; }
  const std::vector<Level>& side(Side s) const { return s == Side::Buy ? bids_ : asks_; }

  std::optional<Price> best(Side s) const {
    const auto& v = side(s);
    if (v.empty()) return std::nullopt;
    return v.front().price;
  }

  void add(Side s, Price price, OrderId id, Quantity size) {
    auto& v = side(s);
    auto it = std::find_if(v.begin(), v.end(), [&](const Level& l) {
      return s == Side::Buy ? l.price <= price : l.price >= price;
    });
    if (it == v.end() || it->price != price) it = v.insert(it, Level{price, {}});
    it->fifo.push_back({id, size});
    where_[id] = {s, price};
    live_.push_back(id);
    live_pos_[id] = live_.size() - 1;
  }

  // Removes `amount` shares from order id; returns remaining size.
  Quantity reduce(OrderId id, Quantity amount) {
    const auto [s, price] = where_.at(id);
    auto& v = side(s);
    auto lvl = std::find_if(v.begin(), v.end(), [&](const Level& l) { return l.price == price; });
    auto ord = std::find_if(lvl->fifo.begin(), lvl->fifo.end(),
                            [&](const RestingOrder& o) { return o.id == id; });
    ord->size -= amount;
    const Quantity left = ord->size;
    if (left == 0) {
      lvl->fifo.erase(ord);
      if (lvl->fifo.empty()) v.erase(lvl);
      where_.erase(id);
      const std::size_t pos = live_pos_.at(id);
      live_pos_[live_.back()] = pos;
      live_[pos] = live_.back();
      live_.pop_back();
      live_pos_.erase(id);
    }
    return left;
  }

  std::pair<Side, Price> locate(OrderId id) const { return where_.at(id); }
  Quantity size_of(OrderId id) const {
    const auto [s, price] = where_.at(id);
    for (const auto& l : side(s)) {
      if (l.price != price) continue;
      for (const auto& o : l.fifo) {
        if (o.id == id) return o.size;
      }
    }
    return 0;
  }
  const std::vector<OrderId>& live() const { return live_; }

  SnapshotRow snapshot(std::size_t levels) const {
    SnapshotRow row;
    row.asks.resize(levels);
    row.bids.resize(levels);
    const auto fill = [levels](const std::vector<Level>& v, std::vector<std::optional<LevelQuote>>& out) {
      for (std::size_t l = 0; l < levels && l < v.size(); ++l) {
        Quantity vol = 0;
        for (const auto& o : v[l].fifo) vol += o.size;
        out[l] = LevelQuote{v[l].price, vol};
      }
    };
    fill(asks_, row.asks);
    fill(bids_, row.bids);
    return row;
  }

 private:
  std::vector<Level> bids_;
  std::vector<Level> asks_;
  std::unordered_map<OrderId, std::pair<Side, Price>> where_;
  std::vector<OrderId> live_;
  std::unordered_map<OrderId, std::size_t> live_pos_;
};

class Generator {
 public:
  Generator(const SynthConfig& cfg, std::size_t levels) : cfg_(cfg), rng_(cfg.seed), levels_(levels) {}

  SynthDay run() {
    now_ = static_cast<Micros>(std::llround(cfg_.open_seconds * kMicrosPerSecond));
    const Micros end =
        now_ + static_cast<Micros>(std::llround(cfg_.horizon_seconds * kMicrosPerSecond));
    seed_book();
    double t = cfg_.open_seconds;
    while (true) {
      const double tau = t - cfg_.open_seconds;
      const double m =
          1.0 + cfg_.intraday_amplitude * std::cos(2.0 * std::numbers::pi * tau / cfg_.intraday_period);
      const double regime = cfg_.regime_multipliers[static_cast<std::size_t>(regime_)];
      const double r_lb = cfg_.limit_rate_buy;
      const double r_ls = cfg_.limit_rate_sell;
      const double r_mb = m * regime * cfg_.market_rate_buy;
      const double r_ms = m * regime * cfg_.market_rate_sell;
      const double r_c = m * cfg_.cancel_rate * static_cast<double>(book_.live().size());
      const double r_sw = cfg_.regime_multipliers.size() > 1 ? cfg_.regime_switch_rate : 0.0;
      const double total = r_lb + r_ls + r_mb + r_ms + r_c + r_sw;
      t += rng_.exponential(total);
      const Micros stamp = static_cast<Micros>(std::llround(t * kMicrosPerSecond));
      if (stamp >= end) break;
      now_ = std::max(now_, stamp);
      double u = rng_.uniform() * total;
      if ((u -= r_lb) < 0) {
        limit_order(Side::Buy);
      } else if ((u -= r_ls) < 0) {
        limit_order(Side::Sell);
      } else if ((u -= r_mb) < 0) {
        market_order(Side::Buy);
      } else if ((u -= r_ms) < 0) {
        market_order(Side::Sell);
      } else if ((u -= r_c) < 0) {
        cancel();
      } else {
        const auto n = static_cast<int>(cfg_.regime_multipliers.size());
        regime_ = (regime_ + 1 + static_cast<int>(rng_.below(static_cast<std::uint64_t>(n - 1)))) % n;
      }
    }
    return std::move(day_);
  }

 private:
  void emit(const Message& m) {
    day_.messages.push_back(m);
    day_.regimes.push_back(regime_);
    if (levels_ > 0) day_.orderbook.push_back(book_.snapshot(levels_));
  }

  Quantity draw_size(double mean_lots) {
    // Geometric number of lots with the requested mean (at least one lot).
    const double q = 1.0 - 1.0 / std::max(1.0, mean_lots);
    return cfg_.lot * static_cast<Quantity>(1 + rng_.geometric(q));
  }

  void submit(Side side, Price price, Quantity size) {
    const OrderId id = next_id_++;
    book_.add(side, price, id, size);
    emit({now_, EventType::Submit, id, size, price, side});
  }

  void seed_book() {
    const Price half = cfg_.tick / 2;
    Price best_bid = (cfg_.initial_mid - half) / cfg_.tick * cfg_.tick;
    if (best_bid <= 0) best_bid = cfg_.tick;
    const Price best_ask = best_bid + cfg_.tick;
    for (int l = 0; l < cfg_.initial_levels; ++l) {
      for (int k = 0; k < cfg_.initial_orders_per_level; ++k) {
        submit(Side::Buy, best_bid - l * cfg_.tick, draw_size(cfg_.mean_limit_lots));
        submit(Side::Sell, best_ask + l * cfg_.tick, draw_size(cfg_.mean_limit_lots));
      }
    }
    last_bid_ = best_bid;
    last_ask_ = best_ask;
  }

  void limit_order(Side side) {
    const auto bid = book_.best(Side::Buy);
    const auto ask = book_.best(Side::Sell);
    if (bid) last_bid_ = *bid;
    if (ask) last_ask_ = *ask;
    const Price tick = cfg_.tick;
    Price price;
    const Price spread_ticks = (bid && ask) ? (*ask - *bid) / tick : 1;
    if (bid && ask && spread_ticks > 1 && rng_.uniform() < cfg_.spread_stiffness) {
      const Price k = 1 + static_cast<Price>(rng_.below(static_cast<std::uint64_t>(spread_ticks - 1)));
      price = side == Side::Buy ? *bid + k * tick : *ask - k * tick;
    } else {
      const int depth = std::min(rng_.geometric(cfg_.depth_decay), cfg_.max_depth);
      if (side == Side::Buy) {
        const Price ref = bid ? *bid : std::min(last_bid_, (ask ? *ask : last_ask_) - tick);
        price = ref - depth * tick;
      } else {
        const Price ref = ask ? *ask : std::max(last_ask_, (bid ? *bid : last_bid_) + tick);
        price = ref + depth * tick;
      }
    }
    if (price <= 0) price = tick;
    // Never cross the opposite quote.
    if (side == Side::Buy && ask && price >= *ask) price = *ask - tick;
    if (side == Side::Sell && bid && price <= *bid) price = *bid + tick;
    submit(side, price, draw_size(cfg_.mean_limit_lots));
  }

  // Aggressive order of `aggressor` side: executes against the opposite best level only.
  void market_order(Side aggressor) {
    const Side resting = opposite(aggressor);
    auto& levels = book_.side(resting);
    if (levels.empty()) return;
    Quantity want = draw_size(cfg_.mean_market_lots);
    const Price price = levels.front().price;
    while (want > 0 && !levels.empty() && levels.front().price == price) {
      const RestingOrder head = levels.front().fifo.front();
      const Quantity traded = std::min(want, head.size);
      want -= traded;
      book_.reduce(head.id, traded);
      emit({now_, EventType::Execute, head.id, traded, price, resting});
    }
  }

  void cancel() {
    const auto& live = book_.live();
    if (live.empty()) return;
    const OrderId id = live[rng_.below(live.size())];
    const auto [side, price] = book_.locate(id);
    const Quantity size = book_.size_of(id);
    if (size > 1 && rng_.uniform() < cfg_.partial_cancel_prob) {
      const Quantity amount = 1 + rng_.below(size - 1);
      book_.reduce(id, amount);
      emit({now_, EventType::PartialCancel, id, amount, price, side});
    } else {
      book_.reduce(id, size);
      emit({now_, EventType::Delete, id, size, price, side});
    }
  }

  SynthConfig cfg_;
  Sampler rng_;
  std::size_t levels_;
  SimBook book_;
  SynthDay day_;
  Micros now_ = 0;
  OrderId next_id_ = 10'000'000;
  Price last_bid_ = 0;
  Price last_ask_ = 0;
  int regime_ = 0;
};

}  // namespace

void SynthConfig::validate() const {
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("invalid synth config: ") + what);
  };
  require(horizon_seconds > 0, "horizon must be positive");
  require(tick > 0, "tick must be positive");
  require(initial_mid > tick, "initial mid must exceed one tick");
  require(limit_rate_buy >= 0 && limit_rate_sell >= 0 && market_rate_buy >= 0 &&
              market_rate_sell >= 0 && cancel_rate >= 0,
          "rates must be non-negative");
  require(limit_rate_buy + limit_rate_sell + market_rate_buy + market_rate_sell > 0,
          "at least one arrival rate must be positive");
  require(partial_cancel_prob >= 0 && partial_cancel_prob <= 1, "partial_cancel_prob in [0,1]");
  require(depth_decay >= 0 && depth_decay < 1, "depth_decay in [0,1)");
  require(spread_stiffness >= 0 && spread_stiffness <= 1, "spread_stiffness in [0,1]");
  require(max_depth >= 0, "max_depth non-negative");
  require(lot > 0 && mean_limit_lots >= 1 && mean_market_lots >= 1, "sizes must be at least one lot");
  require(initial_levels >= 0 && initial_orders_per_level >= 0, "initial book shape non-negative");
  require(intraday_amplitude >= 0 && intraday_amplitude < 1, "intraday amplitude in [0,1)");
  require(intraday_period > 0, "intraday period must be positive");
  require(!regime_multipliers.empty(), "at least one regime");
  for (double m : regime_multipliers) require(m > 0, "regime multipliers must be positive");
  require(regime_switch_rate >= 0, "regime switch rate non-negative");
}

SynthConfig SynthConfig::large_tick(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.spread_stiffness = 0.8;
  return c;
}

SynthConfig SynthConfig::small_tick(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.tick = 100;
  c.initial_mid = 4782150;
  c.spread_stiffness = 0.05;
  c.depth_decay = 0.7;
  return c;
}

SynthConfig SynthConfig::regime_switching(std::uint64_t seed) {
  SynthConfig c;
  c.seed = seed;
  c.regime_multipliers = {0.25, 4.0};
  c.regime_switch_rate = 1.0 / 300.0;
  c.intraday_amplitude = 0.3;
  return c;
}

SynthDay generate_day(const SynthConfig& config, std::size_t levels) {
  config.validate();
  return Generator(config, levels).run();
}

std::vector<Message> generate(const SynthConfig& config) {
  return generate_day(config, 0).messages;
}

}  // namespace lobsurv
