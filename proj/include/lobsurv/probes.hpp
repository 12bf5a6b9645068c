#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lobsurv/book.hpp"
#include "lobsurv/features.hpp"
#include "lobsurv/lobster_io.hpp"

namespace lobsurv {

enum class Clock { Wall, Transaction };
enum class ProbeMode { Tracked, Pegged, InsideSpread };

const char* to_string(Clock clock);
const char* to_string(ProbeMode mode);
Clock clock_from_string(const std::string& name);
ProbeMode probe_mode_from_string(const std::string& name);

// Observed time z (seconds or trades) and fill indicator delta.
struct Outcome {
  double z = 0;
  int delta = 0;
  Micros end_time = 0;  // fill or censoring time
  bool operator==(const Outcome&) const = default;
};

struct ProbeSpec {
  Side side = Side::Buy;
  Micros submit_time = 0;
  ProbeMode mode = ProbeMode::Pegged;
  int k_ticks = 0;  // inside-spread depth; ignored for pegged probes
  bool censor_on_adverse_move = false;
};

// Lifecycle of a real order under the final-message rule.
Outcome track_order(const std::vector<Message>& stream, OrderId target, Clock clock = Clock::Wall);

// One-share probe pegged to the best quote of `side`, re-entering the tail of
// the new best queue whenever that price changes.
Outcome simulate_pegged(const std::vector<Message>& stream, Side side, Micros submit_time,
                        Clock clock = Clock::Wall);

// One-share probe resting k ticks inside the best quote of `side` at a fixed
// price. std::nullopt when the spread is not wider than k ticks at submission.
std::optional<Outcome> simulate_inside_spread(const std::vector<Message>& stream, Side side,
                                              Micros submit_time, int k_ticks, Price tick,
                                              Clock clock = Clock::Wall,
                                              bool censor_on_adverse_move = false);

// Evaluates many probes in a single replay. The book is only read, never written.
// Entries are std::nullopt for probes that could not be placed.
// `on_event` sees the simulation's book after each message.
std::vector<std::optional<Outcome>> simulate_probes(const std::vector<Message>& stream,
                                                    const std::vector<ProbeSpec>& probes,
                                                    Price tick, Clock clock = Clock::Wall,
                                                    const EventCallback& on_event = {});

enum class SideChoice { Bid, Ask, Random };

struct SampleMeta {
  int day = 0;
  Side side = Side::Buy;
  int depth = 0;
  Micros submit_time = 0;
  bool operator==(const SampleMeta&) const = default;
};

struct SurvivalSample {
  FeatureWindow x;
  double z = 0;
  int delta = 0;
  SampleMeta meta;
  bool operator==(const SurvivalSample&) const = default;
};

struct DatasetSpec {
  ProbeMode mode = ProbeMode::Pegged;
  std::size_t n_per_day = 100;
  std::uint64_t seed = 0;
  std::size_t lookback = 50;
  Clock clock = Clock::Wall;
  WindowMode window = WindowMode::Raw;
  SideChoice side = SideChoice::Bid;
  int k_ticks = 0;
  std::size_t max_rounds = 20;
  FeatureConfig features;
};

struct Dataset {
  DatasetSpec spec;
  std::vector<std::string> feature_names;
  std::vector<SurvivalSample> samples;
  std::vector<std::string> warnings;

  std::size_t lookback() const { return spec.lookback; }
  std::size_t feature_count() const { return feature_names.size(); }
};

// Samples are ordered by (day, submission time).
Dataset build_dataset(const std::vector<std::vector<Message>>& streams, const DatasetSpec& spec);

// Writes `path` (CSV) and `path + ".manifest.json"`.
void write_dataset(const std::string& path, const Dataset& dataset);
Dataset read_dataset(const std::string& path);
std::string manifest_path_for(const std::string& dataset_path);

struct FillStats {
  std::size_t count = 0;
  double fill_probability = 0;
  std::optional<double> mean_filltime;  // absent when nothing filled
};

FillStats fill_stats(const std::vector<std::pair<double, int>>& outcomes, double horizon);
FillStats fill_stats(const std::vector<SurvivalSample>& samples, double horizon);

// Book statistics in the layout of the small/large tick summary table.
struct MarketStats {
  double avg_spread_ticks = 0;
  double avg_best_ask_volume = 0;
  double avg_best_bid_volume = 0;
  double avg_midprice = 0;  // dollars
  double trades_per_minute = 0;
};
MarketStats market_stats(const std::vector<Message>& stream, Price tick);

// Submissions that improved the best quote of their side by k ticks, k = 1..max_k.
std::vector<std::size_t> inside_spread_activity(const std::vector<Message>& stream, Price tick,
                                                int max_k);

struct DepthFillRow {
  int k_ticks = 0;  // 0 = best level
  std::size_t placed = 0;
  FillStats stats;
};

// Monte-Carlo fill statistics for probes at the best level and k = 1..max_k ticks inside.
std::vector<DepthFillRow> inside_spread_fill_table(const std::vector<std::vector<Message>>& streams,
                                                   Side side, std::size_t probes_per_day, int max_k,
                                                   Price tick, double horizon, std::uint64_t seed);

}  // namespace lobsurv
