#include <gtest/gtest.h>

#include "lobsurv/book.hpp"
#include "lobsurv/error.hpp"
#include "lobsurv/synthgen.hpp"

namespace lobsurv {
namespace {

Message msg(Micros t, EventType type, OrderId id, Quantity size, Price price, Side dir) {
  return Message{t, type, id, size, price, dir};
}

const Message kRow1 = msg(34200000841, EventType::Submit, 24974777, 100, 1381900, Side::Buy);
const Message kRow2 = msg(34200000841, EventType::Submit, 24974809, 1447, 1383100, Side::Sell);

TEST(Book, FirstSubmission) {
  BookState book;
  book.apply(kRow1);
  const PriceLevel* lvl = book.level(Side::Buy, 1381900);
  ASSERT_NE(lvl, nullptr);
  ASSERT_EQ(lvl->queue.size(), 1u);
  EXPECT_EQ(lvl->queue[0], (QueueEntry{24974777, 100}));
  EXPECT_EQ(*book.best_bid(), 1381900);
  EXPECT_FALSE(book.best_ask());
}

TEST(Book, SecondSubmissionOppositeSide) {
  BookState book;
  book.apply(kRow1);
  book.apply(kRow2);
  const PriceLevel* lvl = book.level(Side::Sell, 1383100);
  ASSERT_NE(lvl, nullptr);
  EXPECT_EQ(lvl->queue[0], (QueueEntry{24974809, 1447}));
  EXPECT_LT(*book.best_bid(), *book.best_ask());
  EXPECT_DOUBLE_EQ(book.midprice(), 1382500.0);
  EXPECT_EQ(book.spread(), 1200);
  book.check_invariants();
}

TEST(Book, ExecutionEmptiesLevel) {
  BookState book;
  book.apply(kRow1);
  book.apply(kRow2);
  const auto effect = book.apply(msg(34200100000, EventType::Execute, 24974777, 100, 1381900, Side::Buy));
  EXPECT_EQ(book.level(Side::Buy, 1381900), nullptr);
  ASSERT_EQ(effect.fills.size(), 1u);
  EXPECT_EQ(effect.fills[0].size, 100u);
  EXPECT_EQ(effect.fills[0].order_id, 24974777u);
  EXPECT_TRUE(effect.order_removed);
  EXPECT_TRUE(effect.is_trade());
}

TEST(Book, SnapshotAfterTwoRows) {
  BookState book;
  book.apply(kRow1);
  book.apply(kRow2);
  EXPECT_EQ(format_snapshot(book.snapshot(1)), "1383100,1447,1381900,100");
}

TEST(Book, EmptySnapshotIsAllSentinels) {
  BookState book;
  EXPECT_EQ(format_snapshot(book.snapshot(2)), "9999999999,0,-9999999999,0,9999999999,0,-9999999999,0");
}

TEST(Book, DeepLevelsAreSentinels) {
  BookState book;
  book.apply(msg(1, EventType::Submit, 1, 10, 1000, Side::Buy));
  book.apply(msg(2, EventType::Submit, 2, 10, 900, Side::Buy));
  const auto row = book.snapshot(5);
  EXPECT_TRUE(row.bids[0] && row.bids[1]);
  for (std::size_t l = 2; l < 5; ++l) EXPECT_FALSE(row.bids[l]);
  for (std::size_t l = 0; l < 5; ++l) EXPECT_FALSE(row.asks[l]);
}

TEST(Book, OneTickSpread) {
  BookState book;
  book.apply(msg(1, EventType::Submit, 1, 10, 1000, Side::Buy));
  book.apply(msg(2, EventType::Submit, 2, 10, 1100, Side::Sell));
  EXPECT_EQ(book.spread(), 100);
}

TEST(Book, OneSidedBookErrors) {
  BookState book;
  book.apply(kRow1);
  EXPECT_THROW(book.midprice(), DataError);
  EXPECT_THROW(book.spread(), DataError);
}

TEST(Book, UnknownIdErrors) {
  BookState book;
  book.apply(kRow1);
  EXPECT_THROW(book.apply(msg(5, EventType::Delete, 42, 100, 1381900, Side::Buy)), DataError);
  EXPECT_THROW(book.apply(msg(5, EventType::Execute, 42, 100, 1381900, Side::Buy)), DataError);
}

TEST(Book, OversizeExecutionErrors) {
  BookState book;
  book.apply(kRow1);
  EXPECT_THROW(book.apply(msg(5, EventType::Execute, 24974777, 101, 1381900, Side::Buy)), DataError);
}

TEST(Book, CrossingStrictVersusLenient) {
  const Message cross = msg(3, EventType::Submit, 9, 500, 1383100, Side::Buy);
  BookState strict;
  strict.apply(kRow1);
  strict.apply(kRow2);
  EXPECT_THROW(strict.apply(cross), DataError);

  BookState lenient(CrossingMode::Lenient);
  lenient.apply(kRow1);
  lenient.apply(kRow2);
  const auto effect = lenient.apply(cross);
  ASSERT_EQ(effect.fills.size(), 1u);
  EXPECT_EQ(effect.fills[0].size, 500u);
  EXPECT_EQ(lenient.level(Side::Sell, 1383100)->volume, 947u);
  EXPECT_FALSE(lenient.contains(9));
  lenient.check_invariants();
}

TEST(Book, FifoQueuePositions) {
  BookState book;
  book.apply(msg(1, EventType::Submit, 1, 100, 1000, Side::Buy));
  book.apply(msg(2, EventType::Submit, 2, 50, 1000, Side::Buy));
  book.apply(msg(3, EventType::Submit, 3, 70, 1000, Side::Buy));
  auto pos = book.queue_position(3);
  ASSERT_TRUE(pos);
  EXPECT_EQ(pos->shares_ahead, 150u);
  EXPECT_EQ(pos->index, 2u);
  book.apply(msg(4, EventType::PartialCancel, 1, 60, 1000, Side::Buy));
  EXPECT_EQ(book.queue_position(3)->shares_ahead, 90u);
  book.apply(msg(5, EventType::Delete, 2, 50, 1000, Side::Buy));
  EXPECT_EQ(book.queue_position(3)->shares_ahead, 40u);
  EXPECT_EQ(book.level(Side::Buy, 1000)->volume, 110u);
}

TEST(Book, HiddenExecutionLeavesBookUntouched) {
  BookState book;
  book.apply(kRow1);
  const BookState before = book;
  const auto effect = book.apply(msg(34200000900, EventType::HiddenExecute, 0, 30, 1382000, Side::Buy));
  EXPECT_TRUE(effect.is_trade());
  EXPECT_TRUE(effect.fills[0].hidden);
  EXPECT_EQ(book.bids(), before.bids());
  EXPECT_EQ(book.asks(), before.asks());
}

TEST(Book, CopiesAreIndependent) {
  BookState a;
  a.apply(kRow1);
  BookState b = a;
  b.apply(kRow2);
  EXPECT_FALSE(a == b);
  EXPECT_FALSE(a.best_ask());
}

TEST(Book, SyntheticReplayMatchesGenerator) {
  SynthConfig cfg;
  cfg.seed = 1;
  cfg.horizon_seconds = 60;
  const SynthDay day = generate_day(cfg, 5);
  std::size_t mismatches = 0;
  replay(day.messages, CrossingMode::Strict, [&](std::size_t i, const Message&, const EventEffect&, const BookState& b) {
    b.check_invariants();
    if (b.snapshot(5) != day.orderbook[i]) ++mismatches;
  });
  EXPECT_EQ(mismatches, 0u);
}

}  // namespace
}  // namespace lobsurv
