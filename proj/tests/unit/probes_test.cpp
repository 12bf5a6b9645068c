#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "lobsurv/book.hpp"
#include "lobsurv/error.hpp"
#include "lobsurv/probes.hpp"
#include "lobsurv/synthgen.hpp"

namespace lobsurv {
namespace {

constexpr Micros kSec = kMicrosPerSecond;

Message msg(double seconds, EventType type, OrderId id, Quantity size, Price price, Side dir) {
  return Message{static_cast<Micros>(std::llround(seconds * kSec)), type, id, size, price, dir};
}

TEST(TrackOrder, FullExecution) {
  const std::vector<Message> s = {msg(100, EventType::Submit, 1, 100, 1000, Side::Buy),
                                  msg(103, EventType::Execute, 1, 100, 1000, Side::Buy)};
  const Outcome o = track_order(s, 1);
  EXPECT_DOUBLE_EQ(o.z, 3.0);
  EXPECT_EQ(o.delta, 1);
}

TEST(TrackOrder, DeletionCensors) {
  const std::vector<Message> s = {msg(100, EventType::Submit, 1, 100, 1000, Side::Buy),
                                  msg(110, EventType::Delete, 1, 100, 1000, Side::Buy)};
  const Outcome o = track_order(s, 1);
  EXPECT_DOUBLE_EQ(o.z, 10.0);
  EXPECT_EQ(o.delta, 0);
}

TEST(TrackOrder, PartialExecutionThenDeleteIsCensoredAtDelete) {
  const std::vector<Message> s = {msg(100, EventType::Submit, 1, 100, 1000, Side::Buy),
                                  msg(101, EventType::Execute, 1, 40, 1000, Side::Buy),
                                  msg(105, EventType::Delete, 1, 60, 1000, Side::Buy)};
  const Outcome o = track_order(s, 1);
  EXPECT_DOUBLE_EQ(o.z, 5.0);
  EXPECT_EQ(o.delta, 0);
}

TEST(TrackOrder, NeverSubmittedErrors) {
  const std::vector<Message> s = {msg(100, EventType::Submit, 1, 100, 1000, Side::Buy)};
  EXPECT_THROW(track_order(s, 2), DataError);
}

TEST(TrackOrder, TransactionClockCountsTrades) {
  const std::vector<Message> s = {msg(100, EventType::Submit, 1, 100, 1000, Side::Buy),
                                  msg(100.5, EventType::Submit, 2, 100, 900, Side::Buy),
                                  msg(101, EventType::Execute, 1, 40, 1000, Side::Buy),
                                  msg(102, EventType::HiddenExecute, 0, 10, 1050, Side::Buy),
                                  msg(103, EventType::Execute, 1, 60, 1000, Side::Buy)};
  EXPECT_DOUBLE_EQ(track_order(s, 1, Clock::Transaction).z, 3.0);
}

std::vector<Message> two_sided_book() {
  return {msg(1, EventType::Submit, 1, 100, 1000, Side::Buy), msg(1, EventType::Submit, 2, 100, 1100, Side::Sell)};
}

TEST(PeggedProbe, FilledWhenQueueAheadExecutes) {
  auto s = two_sided_book();
  s.push_back(msg(3, EventType::Execute, 2, 100, 1100, Side::Sell));
  s.push_back(msg(4, EventType::Submit, 3, 100, 1200, Side::Sell));
  const Outcome o = simulate_pegged(s, Side::Sell, 2 * kSec);
  EXPECT_EQ(o.delta, 1);
  EXPECT_DOUBLE_EQ(o.z, 1.0);
}

TEST(PeggedProbe, CensoredAtCloseWithoutOpposingFlow) {
  auto s = two_sided_book();
  s.push_back(msg(50, EventType::Submit, 3, 100, 1200, Side::Sell));
  const Outcome o = simulate_pegged(s, Side::Buy, 10 * kSec);
  EXPECT_EQ(o.delta, 0);
  EXPECT_DOUBLE_EQ(o.z, 40.0);
}

TEST(PeggedProbe, FollowsImprovedQuote) {
  auto s = two_sided_book();
  s.push_back(msg(3, EventType::Submit, 3, 100, 1050, Side::Buy));  // new best bid; probe re-pegs behind it
  s.push_back(msg(4, EventType::Execute, 1, 100, 1000, Side::Buy));  // old level trades: worse than probe
  const Outcome o = simulate_pegged(s, Side::Buy, 2 * kSec);
  EXPECT_EQ(o.delta, 1);
  EXPECT_DOUBLE_EQ(o.z, 2.0);
}

TEST(InsideSpreadProbe, SellLimitAtProbePriceFills) {
  std::vector<Message> s = {msg(1, EventType::Submit, 1, 100, 1000, Side::Buy),
                            msg(1, EventType::Submit, 2, 100, 1300, Side::Sell),
                            msg(7, EventType::Submit, 3, 100, 1100, Side::Sell)};
  const auto o = simulate_inside_spread(s, Side::Buy, 2 * kSec, 1, 100);
  ASSERT_TRUE(o);
  EXPECT_EQ(o->delta, 1);
  EXPECT_DOUBLE_EQ(o->z, 5.0);
}

TEST(InsideSpreadProbe, SkippedWhenSpreadIsOneTick) {
  auto s = two_sided_book();
  s.push_back(msg(5, EventType::Submit, 3, 100, 900, Side::Buy));
  EXPECT_FALSE(simulate_inside_spread(s, Side::Buy, 2 * kSec, 1, 100));
}

TEST(Probes, SubmitTimeOutsideStreamErrors) {
  auto s = two_sided_book();
  EXPECT_THROW(simulate_pegged(s, Side::Buy, 0), DataError);
}

TEST(Probes, SimulationBookMatchesPlainReplay) {
  SynthConfig cfg;
  cfg.horizon_seconds = 300;
  const auto stream = generate(cfg);
  std::vector<BookState> plain;
  replay(stream, CrossingMode::Strict,
         [&](std::size_t, const Message&, const EventEffect&, const BookState& b) { plain.push_back(b); });
  std::vector<ProbeSpec> probes;
  for (int k = 0; k < 20; ++k) {
    ProbeSpec p;
    p.side = k % 2 ? Side::Buy : Side::Sell;
    p.submit_time = stream.front().time + (k + 1) * 10 * kSec;
    p.mode = k % 3 ? ProbeMode::Pegged : ProbeMode::InsideSpread;
    p.k_ticks = 1;
    probes.push_back(p);
  }
  std::size_t differing = 0;
  simulate_probes(stream, probes, cfg.tick, Clock::Wall,
                  [&](std::size_t i, const Message&, const EventEffect&, const BookState& b) {
                    if (!(b == plain[i])) ++differing;
                  });
  EXPECT_EQ(differing, 0u);
}

std::vector<std::vector<Message>> one_day() {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.horizon_seconds = 3600;
  return {generate(cfg)};
}

TEST(Dataset, HundredSamplesPerDayAndDeterministic) {
  const auto streams = one_day();
  DatasetSpec spec;
  spec.n_per_day = 100;
  spec.lookback = 20;
  const Dataset a = build_dataset(streams, spec);
  EXPECT_EQ(a.samples.size(), 100u);
  EXPECT_EQ(a.feature_count(), feature_count(WindowMode::Raw));
  const Dataset b = build_dataset(streams, spec);
  EXPECT_EQ(a.samples, b.samples);
  for (std::size_t i = 1; i < a.samples.size(); ++i) {
    EXPECT_LE(a.samples[i - 1].meta.submit_time, a.samples[i].meta.submit_time);
  }
}

TEST(Dataset, TransactionClockAgreesWithWallClockOrdering) {
  const auto streams = one_day();
  DatasetSpec spec;
  spec.n_per_day = 60;
  spec.lookback = 10;
  const Dataset wall = build_dataset(streams, spec);
  spec.clock = Clock::Transaction;
  const Dataset trade = build_dataset(streams, spec);
  ASSERT_EQ(wall.samples.size(), trade.samples.size());
  for (std::size_t i = 0; i < wall.samples.size(); ++i) {
    EXPECT_EQ(wall.samples[i].delta, trade.samples[i].delta);
    EXPECT_EQ(trade.samples[i].z, std::floor(trade.samples[i].z));
  }
  for (std::size_t i = 0; i < wall.samples.size(); ++i) {
    for (std::size_t j = 0; j < wall.samples.size(); ++j) {
      const auto end_i = wall.samples[i].meta.submit_time + static_cast<Micros>(std::llround(wall.samples[i].z * kSec));
      const auto end_j = wall.samples[j].meta.submit_time + static_cast<Micros>(std::llround(wall.samples[j].z * kSec));
      if (wall.samples[i].meta.submit_time == wall.samples[j].meta.submit_time && end_i < end_j) {
        EXPECT_LE(trade.samples[i].z, trade.samples[j].z);
      }
    }
  }
}

TEST(Dataset, WriteReadRoundTrip) {
  const auto streams = one_day();
  DatasetSpec spec;
  spec.n_per_day = 10;
  spec.lookback = 5;
  const Dataset ds = build_dataset(streams, spec);
  const auto path = (std::filesystem::temp_directory_path() / "lobsurv_probe_ds.csv").string();
  write_dataset(path, ds);
  const Dataset back = read_dataset(path);
  EXPECT_EQ(back.samples, ds.samples);
  EXPECT_EQ(back.feature_names, ds.feature_names);
  std::filesystem::remove(path);
  std::filesystem::remove(manifest_path_for(path));
}

TEST(FillStats, Arithmetic) {
  const auto st = fill_stats(std::vector<std::pair<double, int>>{{1.0, 1}, {2.0, 0}},
                             std::numeric_limits<double>::infinity());
  EXPECT_EQ(st.count, 2u);
  EXPECT_DOUBLE_EQ(st.fill_probability, 0.5);
  ASSERT_TRUE(st.mean_filltime);
  EXPECT_DOUBLE_EQ(*st.mean_filltime, 1.0);
}

TEST(FillStats, AllCensored) {
  const auto st = fill_stats(std::vector<std::pair<double, int>>{{1.0, 0}, {2.0, 0}}, 10.0);
  EXPECT_DOUBLE_EQ(st.fill_probability, 0.0);
  EXPECT_FALSE(st.mean_filltime);
}

TEST(FillStats, EmptyErrors) {
  EXPECT_THROW(fill_stats(std::vector<std::pair<double, int>>{}, 1.0), DataError);
}

TEST(FillStats, TableLayoutOnLargeTickStream) {
  auto cfg = SynthConfig::large_tick(2);
  cfg.horizon_seconds = 1800;
  const auto rows = inside_spread_fill_table({generate(cfg)}, Side::Buy, 50, 2, cfg.tick, 60.0, 0);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].k_ticks, 0);
  EXPECT_EQ(rows[0].placed, 50u);
  EXPECT_LE(rows[2].placed, rows[1].placed);
}

}  // namespace
}  // namespace lobsurv
