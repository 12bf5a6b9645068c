#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "lobsurv/lobster_io.hpp"

namespace lobsurv {

struct QueueEntry {
  OrderId id = 0;
  Quantity size = 0;
  bool operator==(const QueueEntry&) const = default;
};

struct PriceLevel {
  std::deque<QueueEntry> queue;  // front = highest time priority
  Quantity volume = 0;
  bool operator==(const PriceLevel&) const = default;
};

struct QueuePosition {
  OrderId order_id = 0;
  Price price = 0;
  Side side = Side::Buy;
  Quantity shares_ahead = 0;
  std::size_t index = 0;  // entries in front
};

struct Fill {
  OrderId order_id = 0;
  Quantity size = 0;
  Price price = 0;
  Side side = Side::Buy;  // side of the resting order
  bool hidden = false;
};

// What a single message did to the book.
struct EventEffect {
  EventType type = EventType::Submit;
  Side side = Side::Buy;
  Price price = 0;
  OrderId order_id = 0;
  // Signed change of total visible resting volume.
  std::int64_t volume_delta = 0;
  std::vector<Fill> fills;
  // Position of the affected order inside its level before the event
  // (after the event for submissions). Unset for hidden/halt/cross events.
  std::optional<QueuePosition> position;
  bool order_removed = false;

  bool is_trade() const {
    return type == EventType::Execute || type == EventType::HiddenExecute;
  }
};

enum class CrossingMode {
  Strict,   // a submission at or through the opposite best quote is an error
  Lenient,  // such a submission is matched against the opposite side first
};

// Full-depth limit order book with per-level FIFO queues.
// Value type: copies are independent and compare equal when books are identical.
class BookState {
 public:
  using BidLevels = std::map<Price, PriceLevel, std::greater<Price>>;
  using AskLevels = std::map<Price, PriceLevel>;

  explicit BookState(CrossingMode mode = CrossingMode::Strict) : mode_(mode) {}

  // Throws DataError (unknown id, oversize cancel/execution, strict crossing).
  EventEffect apply(const Message& msg);

  SnapshotRow snapshot(std::size_t levels) const;

  std::optional<Price> best_bid() const;
  std::optional<Price> best_ask() const;
  std::optional<Price> best(Side side) const { return side == Side::Buy ? best_bid() : best_ask(); }

  // Both require a two-sided book; throw DataError otherwise.
  double midprice() const;
  Price spread() const;

  const PriceLevel* level(Side side, Price price) const;
  std::optional<QueuePosition> queue_position(OrderId id) const;
  bool contains(OrderId id) const { return index_.count(id) != 0; }
  std::size_t order_count() const { return index_.size(); }
  Quantity total_volume(Side side) const;

  const BidLevels& bids() const { return bids_; }
  const AskLevels& asks() const { return asks_; }
  Micros clock() const { return clock_; }
  bool halted() const { return halted_; }
  CrossingMode crossing_mode() const { return mode_; }

  // Throws DataError naming the first broken invariant.
  void check_invariants() const;

  bool operator==(const BookState& other) const {
    return bids_ == other.bids_ && asks_ == other.asks_ && index_ == other.index_ &&
           clock_ == other.clock_ && halted_ == other.halted_;
  }

 private:
  struct Locator {
    Side side;
    Price price;
    bool operator==(const Locator&) const = default;
  };

  PriceLevel* find_level(Side side, Price price);
  void erase_level_if_empty(Side side, Price price);
  void submit(const Message& msg, EventEffect& effect);
  void reduce(const Message& msg, EventEffect& effect, bool execution);
  void match_crossing(Message& incoming, EventEffect& effect);

  BidLevels bids_;
  AskLevels asks_;
  std::unordered_map<OrderId, Locator> index_;
  Micros clock_ = 0;
  bool halted_ = false;
  CrossingMode mode_;
};

using EventCallback =
    std::function<void(std::size_t index, const Message&, const EventEffect&, const BookState&)>;

// Replays messages in file order. The callback sees the book after each event.
BookState replay(const std::vector<Message>& messages, CrossingMode mode,
                 const EventCallback& on_event = {});

}  // namespace lobsurv
