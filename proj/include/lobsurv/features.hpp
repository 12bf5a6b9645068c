#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lobsurv/error.hpp"
#include "lobsurv/lobster_io.hpp"

namespace lobsurv {

inline constexpr std::size_t kFeatureLevels = 5;

enum class WindowMode { Raw, OrderFlow };

const char* to_string(WindowMode mode);
WindowMode window_mode_from_string(const std::string& name);

// T x F matrix, row-major, earliest trade first.
struct FeatureWindow {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  FeatureWindow() = default;
  FeatureWindow(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
  bool operator==(const FeatureWindow&) const = default;
};

// Thrown when fewer than T trades precede the requested submission time.
class InsufficientHistory : public DataError {
 public:
  using DataError::DataError;
};

double volume_imbalance(double bid_volume, double ask_volume);
double microprice(double bid_price, double bid_volume, double ask_price, double ask_volume);

// Rolling mean of squared log-returns of `mid`; entry k covers returns up to k.
// Entry 0 is 0 and the first `window` entries use an expanding window.
std::vector<double> realized_vol(std::span<const double> mid, std::size_t window = 1000);

struct OrderFlowRow {
  std::vector<double> bid;
  std::vector<double> ask;
};

// Per-level order-flow between consecutive snapshots. Bid flow is +volume on a
// price improvement, the volume change at an unchanged price and -previous volume
// when the price worsens; the ask side mirrors this.
OrderFlowRow order_flow(const SnapshotRow& previous, const SnapshotRow& current);

struct FeatureConfig {
  Price tick = 100;
  double open_seconds = 34200.0;
  double close_seconds = 57600.0;
  std::size_t vol_window = 1000;
};

std::vector<std::string> feature_names(WindowMode mode);
std::size_t feature_count(WindowMode mode);

// Book state sampled after every trade event (visible or hidden execution).
struct TradePoint {
  Micros time = 0;
  std::size_t message_index = 0;
  double mid = 0;
  double microprice = 0;
  double imbalance = 0;
  double volatility = 0;
  std::array<double, kFeatureLevels> ask_price{}, ask_volume{}, bid_price{}, bid_volume{};
  std::array<double, kFeatureLevels> bid_flow{}, ask_flow{};
};

// Features for one trading day, computed once and sliced into windows.
class FeatureTrack {
 public:
  static FeatureTrack build(const std::vector<Message>& messages, const FeatureConfig& config = {});

  std::size_t trade_count() const { return points_.size(); }
  const std::vector<TradePoint>& points() const { return points_; }
  const FeatureConfig& config() const { return config_; }

  // Trades strictly before time t.
  std::size_t trades_before(Micros t) const;

  // Window over the last T trades strictly before submit_time.
  // Throws InsufficientHistory when fewer than T trades precede it.
  FeatureWindow window(Micros submit_time, std::size_t T, WindowMode mode) const;

 private:
  FeatureConfig config_;
  std::vector<TradePoint> points_;
};

inline FeatureWindow build_window(const FeatureTrack& track, Micros submit_time, std::size_t T,
                                  WindowMode mode) {
  return track.window(submit_time, T, mode);
}

}  // namespace lobsurv
