#include "lobsurv/features.hpp"

#include <algorithm>
#include <cmath>

#include "lobsurv/book.hpp"

namespace lobsurv {
namespace {

constexpr std::size_t kSharedColumns = 4;
constexpr double kVolScale = 1e8;  // squared log-returns in basis points squared

double signed_log1p(double x) { return std::copysign(std::log1p(std::fabs(x)), x); }

double level_flow(const std::optional<LevelQuote>& prev, const std::optional<LevelQuote>& cur,
                  bool bid_side) {
  if (!prev && !cur) return 0.0;
  if (!cur) return -static_cast<double>(prev->size);
  if (!prev) return static_cast<double>(cur->size);
  const bool improved = bid_side ? cur->price > prev->price : cur->price < prev->price;
  if (cur->price == prev->price) {
    return static_cast<double>(cur->size) - static_cast<double>(prev->size);
  }
  return improved ? static_cast<double>(cur->size) : -static_cast<double>(prev->size);
}

}  // namespace

const char* to_string(WindowMode mode) { return mode == WindowMode::Raw ? "raw" : "orderflow"; }

WindowMode window_mode_from_string(const std::string& name) {
  if (name == "raw") return WindowMode::Raw;
  if (name == "orderflow") return WindowMode::OrderFlow;
  throw UsageError("unknown window mode '" + name + "' (expected raw|orderflow)");
}

double volume_imbalance(double bid_volume, double ask_volume) {
  const double total = bid_volume + ask_volume;
  if (!(total > 0)) throw DataError("volume imbalance undefined with zero best-level volume");
  return (bid_volume - ask_volume) / total;
}

double microprice(double bid_price, double bid_volume, double ask_price, double ask_volume) {
  const double total = bid_volume + ask_volume;
  if (!(total > 0)) throw DataError("microprice undefined with zero best-level volume");
  return bid_volume / total * ask_price + ask_volume / total * bid_price;
}

std::vector<double> realized_vol(std::span<const double> mid, std::size_t window) {
  std::vector<double> out(mid.size(), 0.0);
  if (mid.size() < 2 || window == 0) return out;
  std::vector<double> sq(mid.size(), 0.0);
  for (std::size_t k = 1; k < mid.size(); ++k) {
    const double r = std::log(mid[k] / mid[k - 1]);
    sq[k] = r * r;
  }
  // Running window sum, resummed exactly every 4096 steps.
  double sum = 0.0;
  for (std::size_t k = 1; k < mid.size(); ++k) {
    sum += sq[k];
    if (k > window) sum -= sq[k - window];
    if (k % 4096 == 0) {
      sum = 0.0;
      for (std::size_t j = (k > window ? k - window + 1 : 1); j <= k; ++j) sum += sq[j];
    }
    const std::size_t n = std::min(k, window);
    out[k] = std::max(0.0, sum / static_cast<double>(n));
  }
  return out;
}

OrderFlowRow order_flow(const SnapshotRow& previous, const SnapshotRow& current) {
  const std::size_t levels = std::min(previous.levels(), current.levels());
  OrderFlowRow row{std::vector<double>(levels), std::vector<double>(levels)};
  for (std::size_t l = 0; l < levels; ++l) {
    row.bid[l] = level_flow(previous.bids[l], current.bids[l], true);
    row.ask[l] = level_flow(previous.asks[l], current.asks[l], false);
  }
  return row;
}

std::vector<std::string> feature_names(WindowMode mode) {
  std::vector<std::string> names = {"time_of_day", "volatility", "imbalance", "microprice"};
  for (std::size_t l = 1; l <= kFeatureLevels; ++l) {
    const std::string s = std::to_string(l);
    if (mode == WindowMode::Raw) {
      names.insert(names.end(), {"ask_price_" + s, "ask_volume_" + s, "bid_price_" + s, "bid_volume_" + s});
    } else {
      names.insert(names.end(), {"bid_flow_" + s, "ask_flow_" + s});
    }
  }
  return names;
}

std::size_t feature_count(WindowMode mode) {
  return kSharedColumns + (mode == WindowMode::Raw ? 4 : 2) * kFeatureLevels;
}

FeatureTrack FeatureTrack::build(const std::vector<Message>& messages, const FeatureConfig& config) {
  FeatureTrack track;
  track.config_ = config;
  const double tick = static_cast<double>(config.tick);
  double last_mid = 0.0, last_bid = 0.0, last_ask = 0.0, last_imbalance = 0.0;
  bool have_quotes = false;
  SnapshotRow prev_snap;
  BookState book(CrossingMode::Strict);
  std::vector<double> mids;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const EventEffect effect = book.apply(messages[i]);
    if (!effect.is_trade()) continue;
    const SnapshotRow snap = book.snapshot(kFeatureLevels);
    TradePoint p;
    p.time = messages[i].time;
    p.message_index = i;
    const auto bid = book.best_bid();
    const auto ask = book.best_ask();
    if (bid) last_bid = static_cast<double>(*bid);
    if (ask) last_ask = static_cast<double>(*ask);
    if (!have_quotes) {
      // Seed missing sides from whichever quote exists.
      if (!bid && ask) last_bid = last_ask - tick;
      if (bid && !ask) last_ask = last_bid + tick;
      have_quotes = bid || ask;
    }
    if (bid && ask) {
      last_mid = 0.5 * (last_bid + last_ask);
    } else if (last_mid == 0.0) {
      last_mid = 0.5 * (last_bid + last_ask);
    }
    p.mid = last_mid;
    double prev_ask = last_ask - tick, prev_bid = last_bid + tick;
    for (std::size_t l = 0; l < kFeatureLevels; ++l) {
      if (snap.asks[l]) {
        p.ask_price[l] = static_cast<double>(snap.asks[l]->price);
        p.ask_volume[l] = static_cast<double>(snap.asks[l]->size);
      } else {
        p.ask_price[l] = prev_ask + tick;
      }
      if (snap.bids[l]) {
        p.bid_price[l] = static_cast<double>(snap.bids[l]->price);
        p.bid_volume[l] = static_cast<double>(snap.bids[l]->size);
      } else {
        p.bid_price[l] = prev_bid - tick;
      }
      prev_ask = p.ask_price[l];
      prev_bid = p.bid_price[l];
    }
    const double vb = p.bid_volume[0], va = p.ask_volume[0];
    if (vb + va > 0) {
      last_imbalance = volume_imbalance(vb, va);
      p.microprice = microprice(p.bid_price[0], vb, p.ask_price[0], va);
    } else {
      p.microprice = p.mid;
    }
    p.imbalance = last_imbalance;
    if (!track.points_.empty()) {
      const OrderFlowRow flow = order_flow(prev_snap, snap);
      std::copy(flow.bid.begin(), flow.bid.end(), p.bid_flow.begin());
      std::copy(flow.ask.begin(), flow.ask.end(), p.ask_flow.begin());
    }
    prev_snap = snap;
    mids.push_back(p.mid);
    track.points_.push_back(p);
  }
  const auto vol = realized_vol(mids, config.vol_window);
  for (std::size_t k = 0; k < vol.size(); ++k) track.points_[k].volatility = vol[k];
  return track;
}

std::size_t FeatureTrack::trades_before(Micros t) const {
  const auto it = std::lower_bound(points_.begin(), points_.end(), t,
                                   [](const TradePoint& p, Micros v) { return p.time < v; });
  return static_cast<std::size_t>(it - points_.begin());
}

FeatureWindow FeatureTrack::window(Micros submit_time, std::size_t T, WindowMode mode) const {
  if (T == 0) throw UsageError("lookback T must be positive");
  const std::size_t end = trades_before(submit_time);
  if (end < T) {
    throw InsufficientHistory("only " + std::to_string(end) + " trades before t=" +
                              format_time(submit_time) + ", need " + std::to_string(T));
  }
  const std::size_t first = end - T;
  const double tick = static_cast<double>(config_.tick);
  const double ref = points_[end - 1].mid;
  const double span = config_.close_seconds - config_.open_seconds;
  FeatureWindow w(T, feature_count(mode));
  for (std::size_t r = 0; r < T; ++r) {
    const TradePoint& p = points_[first + r];
    const double tod = (to_seconds(p.time) - config_.open_seconds) / span;
    w.at(r, 0) = std::clamp(tod, 0.0, 1.0);
    w.at(r, 1) = p.volatility * kVolScale;
    w.at(r, 2) = p.imbalance;
    w.at(r, 3) = (p.microprice - ref) / tick;
    std::size_t c = kSharedColumns;
    for (std::size_t l = 0; l < kFeatureLevels; ++l) {
      if (mode == WindowMode::Raw) {
        w.at(r, c++) = (p.ask_price[l] - ref) / tick;
        w.at(r, c++) = std::log1p(p.ask_volume[l]);
        w.at(r, c++) = (p.bid_price[l] - ref) / tick;
        w.at(r, c++) = std::log1p(p.bid_volume[l]);
      } else {
        w.at(r, c++) = signed_log1p(p.bid_flow[l]);
        w.at(r, c++) = signed_log1p(p.ask_flow[l]);
      }
    }
  }
  return w;
}

}  // namespace lobsurv
