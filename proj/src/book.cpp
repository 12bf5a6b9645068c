#include "lobsurv/book.hpp"

#include <algorithm>
#include <string>

#include "lobsurv/error.hpp"

namespace lobsurv {
namespace {

std::string describe(const Message& msg) {
  return "order " + std::to_string(msg.order_id) + " at t=" + format_time(msg.time);
}

}  // namespace

PriceLevel* BookState::find_level(Side side, Price price) {
  if (side == Side::Buy) {
    auto it = bids_.find(price);
    return it == bids_.end() ? nullptr : &it->second;
  }
  auto it = asks_.find(price);
  return it == asks_.end() ? nullptr : &it->second;
}

const PriceLevel* BookState::level(Side side, Price price) const {
  return const_cast<BookState*>(this)->find_level(side, price);
}

void BookState::erase_level_if_empty(Side side, Price price) {
  if (side == Side::Buy) {
    auto it = bids_.find(price);
    if (it != bids_.end() && it->second.queue.empty()) bids_.erase(it);
  } else {
    auto it = asks_.find(price);
    if (it != asks_.end() && it->second.queue.empty()) asks_.erase(it);
  }
}

std::optional<Price> BookState::best_bid() const {
  if (bids_.empty()) return std::nullopt;
  return bids_.begin()->first;
}

std::optional<Price> BookState::best_ask() const {
  if (asks_.empty()) return std::nullopt;
  return asks_.begin()->first;
}

double BookState::midprice() const {
  const auto b = best_bid();
  const auto a = best_ask();
  if (!b || !a) throw DataError("midprice undefined on a one-sided book");
  return 0.5 * (static_cast<double>(*b) + static_cast<double>(*a));
}

Price BookState::spread() const {
  const auto b = best_bid();
  const auto a = best_ask();
  if (!b || !a) throw DataError("spread undefined on a one-sided book");
  return *a - *b;
}

Quantity BookState::total_volume(Side side) const {
  Quantity total = 0;
  if (side == Side::Buy) {
    for (const auto& [p, lvl] : bids_) total += lvl.volume;
  } else {
    for (const auto& [p, lvl] : asks_) total += lvl.volume;
  }
  return total;
}

std::optional<QueuePosition> BookState::queue_position(OrderId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  const PriceLevel* lvl = level(it->second.side, it->second.price);
  QueuePosition pos{id, it->second.price, it->second.side, 0, 0};
  for (const auto& e : lvl->queue) {
    if (e.id == id) return pos;
    pos.shares_ahead += e.size;
    ++pos.index;
  }
  return std::nullopt;
}

void BookState::match_crossing(Message& incoming, EventEffect& effect) {
  const Side resting_side = opposite(incoming.direction);
  while (incoming.size > 0) {
    const auto top = best(resting_side);
    if (!top) break;
    const bool crosses =
        incoming.direction == Side::Buy ? *top <= incoming.price : *top >= incoming.price;
    if (!crosses) break;
    PriceLevel* lvl = find_level(resting_side, *top);
    QueueEntry& head = lvl->queue.front();
    const Quantity traded = std::min(head.size, incoming.size);
    head.size -= traded;
    lvl->volume -= traded;
    incoming.size -= traded;
    effect.volume_delta -= static_cast<std::int64_t>(traded);
    effect.fills.push_back({head.id, traded, *top, resting_side, false});
    if (head.size == 0) {
      index_.erase(head.id);
      lvl->queue.pop_front();
      erase_level_if_empty(resting_side, *top);
    }
  }
}

void BookState::submit(const Message& msg, EventEffect& effect) {
  if (index_.count(msg.order_id)) {
    throw DataError("duplicate submission of " + describe(msg));
  }
  Message incoming = msg;
  const auto opp = best(opposite(msg.direction));
  const bool crosses = opp && (msg.direction == Side::Buy ? msg.price >= *opp : msg.price <= *opp);
  if (crosses) {
    if (mode_ == CrossingMode::Strict) {
      throw DataError("crossing submission of " + describe(msg) + " against best " +
                      std::to_string(*opp));
    }
    match_crossing(incoming, effect);
    if (incoming.size == 0) return;
  }
  PriceLevel& lvl = msg.direction == Side::Buy ? bids_[msg.price] : asks_[msg.price];
  effect.position = QueuePosition{msg.order_id, msg.price, msg.direction, lvl.volume, lvl.queue.size()};
  lvl.queue.push_back({msg.order_id, incoming.size});
  lvl.volume += incoming.size;
  index_.emplace(msg.order_id, Locator{msg.direction, msg.price});
  effect.volume_delta += static_cast<std::int64_t>(incoming.size);
}

void BookState::reduce(const Message& msg, EventEffect& effect, bool execution) {
  const auto it = index_.find(msg.order_id);
  if (it == index_.end()) {
    throw DataError("unknown " + describe(msg));
  }
  const Locator loc = it->second;
  if (loc.side != msg.direction) {
    throw DataError("direction mismatch for " + describe(msg));
  }
  PriceLevel* lvl = find_level(loc.side, loc.price);
  auto pos = std::find_if(lvl->queue.begin(), lvl->queue.end(),
                          [&](const QueueEntry& e) { return e.id == msg.order_id; });
  QueuePosition qp{msg.order_id, loc.price, loc.side, 0, static_cast<std::size_t>(pos - lvl->queue.begin())};
  for (auto q = lvl->queue.begin(); q != pos; ++q) qp.shares_ahead += q->size;
  effect.position = qp;
  effect.side = loc.side;
  effect.price = loc.price;

  Quantity amount = msg.size;
  if (msg.type == EventType::Delete) {
    amount = pos->size;
  } else if (amount > pos->size) {
    throw DataError("size " + std::to_string(msg.size) + " exceeds remaining " +
                    std::to_string(pos->size) + " for " + describe(msg));
  }
  pos->size -= amount;
  lvl->volume -= amount;
  effect.volume_delta -= static_cast<std::int64_t>(amount);
  if (execution) effect.fills.push_back({msg.order_id, amount, loc.price, loc.side, false});
  if (pos->size == 0) {
    lvl->queue.erase(pos);
    index_.erase(it);
    effect.order_removed = true;
    erase_level_if_empty(loc.side, loc.price);
  }
}

EventEffect BookState::apply(const Message& msg) {
  EventEffect effect;
  effect.type = msg.type;
  effect.side = msg.direction;
  effect.price = msg.price;
  effect.order_id = msg.order_id;
  clock_ = msg.time;
  switch (msg.type) {
    case EventType::Submit:
      submit(msg, effect);
      break;
    case EventType::PartialCancel:
      reduce(msg, effect, false);
      break;
    case EventType::Delete:
      reduce(msg, effect, false);
      break;
    case EventType::Execute:
      reduce(msg, effect, true);
      break;
    case EventType::HiddenExecute:
      effect.fills.push_back({msg.order_id, msg.size, msg.price, msg.direction, true});
      break;
    case EventType::CrossTrade:
      break;
    case EventType::Halt:
      halted_ = msg.price == -1;
      break;
  }
  return effect;
}

SnapshotRow BookState::snapshot(std::size_t levels) const {
  SnapshotRow row;
  row.asks.resize(levels);
  row.bids.resize(levels);
  std::size_t l = 0;
  for (auto it = asks_.begin(); it != asks_.end() && l < levels; ++it, ++l) {
    row.asks[l] = LevelQuote{it->first, it->second.volume};
  }
  l = 0;
  for (auto it = bids_.begin(); it != bids_.end() && l < levels; ++it, ++l) {
    row.bids[l] = LevelQuote{it->first, it->second.volume};
  }
  return row;
}

void BookState::check_invariants() const {
  if (!bids_.empty() && !asks_.empty() && bids_.begin()->first >= asks_.begin()->first) {
    throw DataError("crossed book: best bid " + std::to_string(bids_.begin()->first) +
                    " >= best ask " + std::to_string(asks_.begin()->first));
  }
  std::size_t entries = 0;
  const auto check_levels = [&](const auto& levels, Side side) {
    for (const auto& [price, lvl] : levels) {
      if (lvl.queue.empty()) throw DataError("empty level retained at " + std::to_string(price));
      Quantity sum = 0;
      for (const auto& e : lvl.queue) {
        if (e.size == 0) throw DataError("zero-size order " + std::to_string(e.id));
        const auto it = index_.find(e.id);
        if (it == index_.end() || it->second.side != side || it->second.price != price) {
          throw DataError("index inconsistent for order " + std::to_string(e.id));
        }
        sum += e.size;
        ++entries;
      }
      if (sum != lvl.volume) {
        throw DataError("level volume mismatch at " + std::to_string(price));
      }
    }
  };
  check_levels(bids_, Side::Buy);
  check_levels(asks_, Side::Sell);
  if (entries != index_.size()) throw DataError("order id appears twice or index has stale ids");
}

BookState replay(const std::vector<Message>& messages, CrossingMode mode,
                 const EventCallback& on_event) {
  BookState book(mode);
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const EventEffect effect = book.apply(messages[i]);
    if (on_event) on_event(i, messages[i], effect, book);
  }
  return book;
}

}  // namespace lobsurv
