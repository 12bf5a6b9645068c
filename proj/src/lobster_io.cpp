#include "lobsurv/lobster_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "lobsurv/error.hpp"

namespace lobsurv {
namespace {

constexpr const char* kMessageFields[] = {"Time", "Type", "OrderID", "Size", "Price", "Direction"};

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_integer(std::string_view text, std::size_t row, const char* field) {
  T value{};
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(row, field, "not an integer: '" + std::string(text) + "'");
  }
  return value;
}

Micros parse_time(std::string_view text, std::size_t row) {
  const std::size_t dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  if (whole.empty() || whole.front() == '-') {
    throw ParseError(row, "Time", "expected non-negative seconds: '" + std::string(text) + "'");
  }
  const auto seconds = parse_integer<std::int64_t>(whole, row, "Time");
  Micros frac = 0;
  if (dot != std::string_view::npos) {
    const std::string_view digits = text.substr(dot + 1);
    if (digits.empty() || digits.size() > 6) {
      throw ParseError(row, "Time", "expected 1-6 decimal places: '" + std::string(text) + "'");
    }
    for (char c : digits) {
      if (c < '0' || c > '9') {
        throw ParseError(row, "Time", "bad digit in '" + std::string(text) + "'");
      }
    }
    frac = parse_integer<std::int64_t>(digits, row, "Time");
    for (std::size_t i = digits.size(); i < 6; ++i) frac *= 10;
  }
  return seconds * kMicrosPerSecond + frac;
}

Message parse_message_row(std::string_view line, std::size_t row) {
  const auto cols = split_csv(line);
  if (cols.size() != 6) {
    throw ParseError(row, cols.size() < 6 ? kMessageFields[cols.size()] : "Direction",
                     "expected 6 columns, got " + std::to_string(cols.size()));
  }
  Message m;
  m.time = parse_time(cols[0], row);
  const int code = parse_integer<int>(cols[1], row, "Type");
  if (code < 1 || code > 7) {
    throw ParseError(row, "Type", "unknown event type " + std::to_string(code));
  }
  m.type = static_cast<EventType>(code);
  m.order_id = parse_integer<OrderId>(cols[2], row, "OrderID");
  m.size = parse_integer<Quantity>(cols[3], row, "Size");
  m.price = parse_integer<Price>(cols[4], row, "Price");
  const int dir = parse_integer<int>(cols[5], row, "Direction");
  if (dir != 1 && dir != -1) {
    throw ParseError(row, "Direction", "expected 1 or -1, got " + std::to_string(dir));
  }
  m.direction = static_cast<Side>(dir);
  if (m.type == EventType::Submit && m.size == 0) {
    throw ParseError(row, "Size", "submission with zero size");
  }
  if (m.price <= 0 && m.type != EventType::Halt) {
    throw ParseError(row, "Price", "price must be positive");
  }
  return m;
}

template <typename F>
void for_each_line(std::istream& in, F&& fn) {
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    fn(std::string_view(line), row);
  }
}

std::optional<LevelQuote> parse_level(std::string_view price_text, std::string_view size_text,
                                      std::size_t row, const std::string& price_field,
                                      const std::string& size_field) {
  const auto price = parse_integer<Price>(price_text, row, price_field.c_str());
  const auto size = parse_integer<Quantity>(size_text, row, size_field.c_str());
  if (price == kEmptyAskPrice || price == kEmptyBidPrice) {
    if (size != 0) throw ParseError(row, size_field, "empty level with nonzero size");
    return std::nullopt;
  }
  if (price <= 0) throw ParseError(row, price_field, "price must be positive");
  if (size == 0) throw ParseError(row, size_field, "populated level with zero size");
  return LevelQuote{price, size};
}

void append_level(std::string& out, const std::optional<LevelQuote>& level, Price sentinel) {
  if (level) {
    out += std::to_string(level->price);
    out += ',';
    out += std::to_string(level->size);
  } else {
    out += std::to_string(sentinel);
    out += ",0";
  }
}

}  // namespace

std::vector<Message> parse_messages(std::istream& in, const ParseOptions& options,
                                    ParseDiagnostics* diagnostics) {
  std::vector<Message> out;
  for_each_line(in, [&](std::string_view line, std::size_t row) {
    Message m = parse_message_row(line, row);
    if (options.check_time_order && !out.empty() && m.time < out.back().time && diagnostics) {
      diagnostics->warnings.push_back("row " + std::to_string(row) +
                                      ": timestamp decreases from previous row");
    }
    out.push_back(m);
  });
  return out;
}

std::vector<Message> parse_messages(const std::string& text, const ParseOptions& options,
                                    ParseDiagnostics* diagnostics) {
  std::istringstream in(text);
  return parse_messages(in, options, diagnostics);
}

std::string format_message(const Message& m) {
  char buf[128];
  const auto n = std::snprintf(buf, sizeof(buf), "%lld.%06lld,%d,%llu,%llu,%lld,%d",
                               static_cast<long long>(m.time / kMicrosPerSecond),
                               static_cast<long long>(m.time % kMicrosPerSecond),
                               static_cast<int>(m.type),
                               static_cast<unsigned long long>(m.order_id),
                               static_cast<unsigned long long>(m.size),
                               static_cast<long long>(m.price), static_cast<int>(m.direction));
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string format_time(Micros t) {
  char buf[48];
  const auto n = std::snprintf(buf, sizeof(buf), "%lld.%06lld", static_cast<long long>(t / kMicrosPerSecond),
                               static_cast<long long>(t % kMicrosPerSecond));
  return std::string(buf, static_cast<std::size_t>(n));
}

void write_messages(const std::vector<Message>& messages, std::ostream& out) {
  for (const auto& m : messages) {
    out << format_message(m) << '\n';
  }
  if (!out) throw DataError("failed writing message stream");
}

void validate_snapshot(const SnapshotRow& row) {
  const auto check_side = [](const std::vector<std::optional<LevelQuote>>& side, bool ascending,
                             const char* name) {
    bool seen_gap = false;
    std::optional<Price> prev;
    for (std::size_t l = 0; l < side.size(); ++l) {
      if (!side[l]) {
        seen_gap = true;
        continue;
      }
      if (seen_gap) {
        throw DataError(std::string(name) + " level " + std::to_string(l + 1) +
                        " populated after an empty level");
      }
      if (prev && (ascending ? side[l]->price <= *prev : side[l]->price >= *prev)) {
        throw DataError(std::string(name) + " prices not strictly " +
                        (ascending ? "increasing" : "decreasing") + " at level " +
                        std::to_string(l + 1));
      }
      prev = side[l]->price;
    }
  };
  check_side(row.asks, true, "ask");
  check_side(row.bids, false, "bid");
  if (!row.asks.empty() && !row.bids.empty() && row.asks[0] && row.bids[0] &&
      row.asks[0]->price <= row.bids[0]->price) {
    throw DataError("crossed book: best ask " + std::to_string(row.asks[0]->price) +
                    " <= best bid " + std::to_string(row.bids[0]->price));
  }
}

std::vector<SnapshotRow> parse_snapshots(std::istream& in, std::size_t levels) {
  if (levels == 0) throw UsageError("snapshot level count must be positive");
  std::vector<SnapshotRow> out;
  for_each_line(in, [&](std::string_view line, std::size_t row) {
    const auto cols = split_csv(line);
    if (cols.size() != 4 * levels) {
      throw ParseError(row, "columns",
                       "expected " + std::to_string(4 * levels) + " columns, got " +
                           std::to_string(cols.size()));
    }
    SnapshotRow snap;
    snap.asks.resize(levels);
    snap.bids.resize(levels);
    for (std::size_t l = 0; l < levels; ++l) {
      const std::string lvl = std::to_string(l + 1);
      snap.asks[l] = parse_level(cols[4 * l], cols[4 * l + 1], row, "AskPrice" + lvl, "AskSize" + lvl);
      snap.bids[l] =
          parse_level(cols[4 * l + 2], cols[4 * l + 3], row, "BidPrice" + lvl, "BidSize" + lvl);
    }
    try {
      validate_snapshot(snap);
    } catch (const DataError& e) {
      throw ParseError(row, "levels", e.what());
    }
    out.push_back(std::move(snap));
  });
  return out;
}

std::vector<SnapshotRow> parse_snapshots(const std::string& text, std::size_t levels) {
  std::istringstream in(text);
  return parse_snapshots(in, levels);
}

std::string format_snapshot(const SnapshotRow& row) {
  std::string out;
  for (std::size_t l = 0; l < row.levels(); ++l) {
    if (l > 0) out += ',';
    append_level(out, row.asks[l], kEmptyAskPrice);
    out += ',';
    append_level(out, row.bids[l], kEmptyBidPrice);
  }
  return out;
}

void write_snapshots(const std::vector<SnapshotRow>& rows, std::ostream& out) {
  for (const auto& r : rows) out << format_snapshot(r) << '\n';
  if (!out) throw DataError("failed writing orderbook stream");
}

std::vector<Message> read_message_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open message file " + path);
  return parse_messages(in);
}

void write_message_file(const std::string& path, const std::vector<Message>& messages) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_messages(messages, out);
}

std::vector<SnapshotRow> read_snapshot_file(const std::string& path, std::size_t levels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open orderbook file " + path);
  return parse_snapshots(in, levels);
}

void write_snapshot_file(const std::string& path, const std::vector<SnapshotRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  write_snapshots(rows, out);
}

}  // namespace lobsurv
