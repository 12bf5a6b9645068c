#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lobsurv {

using Price = std::int64_t;     // dollars x 10000
using Quantity = std::uint64_t;  // shares
using OrderId = std::uint64_t;
using Micros = std::int64_t;     // microseconds since midnight

inline constexpr Micros kMicrosPerSecond = 1'000'000;

inline double to_seconds(Micros t) { return static_cast<double>(t) / kMicrosPerSecond; }

// LOBSTER event codes.
enum class EventType : int {
  Submit = 1,
  PartialCancel = 2,
  Delete = 3,
  Execute = 4,
  HiddenExecute = 5,
  CrossTrade = 6,
  Halt = 7,
};

enum class Side : int { Sell = -1, Buy = 1 };

inline Side opposite(Side s) { return s == Side::Buy ? Side::Sell : Side::Buy; }

struct Message {
  Micros time = 0;
  EventType type = EventType::Submit;
  OrderId order_id = 0;
  Quantity size = 0;
  Price price = 0;
  Side direction = Side::Buy;

  bool operator==(const Message&) const = default;
};

struct LevelQuote {
  Price price = 0;
  Quantity size = 0;
  bool operator==(const LevelQuote&) const = default;
};

// One row of a LOBSTER orderbook file. Absent levels are std::nullopt.
struct SnapshotRow {
  std::vector<std::optional<LevelQuote>> asks;
  std::vector<std::optional<LevelQuote>> bids;

  std::size_t levels() const { return asks.size(); }
  bool operator==(const SnapshotRow&) const = default;
};

// Empty-level sentinels as written by LOBSTER (ask side positive, bid side negative).
inline constexpr Price kEmptyAskPrice = 9'999'999'999;
inline constexpr Price kEmptyBidPrice = -9'999'999'999;

struct ParseOptions {
  // Report (as warnings) rows whose timestamp precedes the previous row.
  bool check_time_order = true;
};

struct ParseDiagnostics {
  std::vector<std::string> warnings;
};

std::vector<Message> parse_messages(std::istream& in, const ParseOptions& options = {},
                                    ParseDiagnostics* diagnostics = nullptr);
std::vector<Message> parse_messages(const std::string& text, const ParseOptions& options = {},
                                    ParseDiagnostics* diagnostics = nullptr);

void write_messages(const std::vector<Message>& messages, std::ostream& out);
std::string format_message(const Message& m);
// Seconds with exactly six decimals, as in the message files.
std::string format_time(Micros t);

// Checks the per-row invariants; throws ParseError naming the row on violation.
std::vector<SnapshotRow> parse_snapshots(std::istream& in, std::size_t levels);
std::vector<SnapshotRow> parse_snapshots(const std::string& text, std::size_t levels);

void write_snapshots(const std::vector<SnapshotRow>& rows, std::ostream& out);
std::string format_snapshot(const SnapshotRow& row);

// Throws DataError describing the first violated invariant.
void validate_snapshot(const SnapshotRow& row);

std::vector<Message> read_message_file(const std::string& path);
void write_message_file(const std::string& path, const std::vector<Message>& messages);
std::vector<SnapshotRow> read_snapshot_file(const std::string& path, std::size_t levels);
void write_snapshot_file(const std::string& path, const std::vector<SnapshotRow>& rows);

}  // namespace lobsurv
