#include "lobsurv/probes.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lobsurv/book.hpp"
#include "lobsurv/error.hpp"

namespace lobsurv {
namespace {

constexpr double kMinWallTime = 1e-6;  // one clock tick

std::vector<std::size_t> trade_prefix(const std::vector<Message>& stream) {
  // prefix[i] = trades among messages [0, i)
  std::vector<std::size_t> prefix(stream.size() + 1, 0);
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const bool trade =
        stream[i].type == EventType::Execute || stream[i].type == EventType::HiddenExecute;
    prefix[i + 1] = prefix[i] + (trade ? 1 : 0);
  }
  return prefix;
}

double wall_z(Micros from, Micros to) {
  return std::max(to_seconds(to - from), kMinWallTime);
}

class ProbeState {
 public:
  ProbeState(const ProbeSpec& spec, std::size_t trades_at_entry)
      : spec_(spec), trades_at_entry_(trades_at_entry) {}

  // Returns false when the probe cannot be placed on the current book.
  bool enter(const BookState& book, Price tick) {
    const auto own = book.best(spec_.side);
    if (!own) return false;
    if (spec_.mode == ProbeMode::InsideSpread && spec_.k_ticks > 0) {
      const auto other = book.best(opposite(spec_.side));
      if (!other) return false;
      const Price spread = *other - *own;
      if (spread <= static_cast<Price>(spec_.k_ticks) * tick) return false;
      price_ = spec_.side == Side::Buy ? *own + spec_.k_ticks * tick : *own - spec_.k_ticks * tick;
      return true;
    }
    join_tail(book, *own);
    return true;
  }

  // Inspects one event; returns true when the probe is filled by it.
  bool observe(const Message& msg, const EventEffect& effect, const BookState& book) {
    bool filled = false;
    if (msg.type == EventType::Submit && msg.direction == opposite(spec_.side) && through(msg.price)) {
      filled = true;
    }
    for (const Fill& f : effect.fills) {
      if (f.side != spec_.side) continue;
      if (!f.hidden && ahead_.count(f.order_id)) filled = true;
      if (at_or_worse(f.price)) filled = true;
    }
    if (filled) return true;
    if (effect.order_removed) ahead_.erase(msg.order_id);
    const auto own = book.best(spec_.side);
    if (spec_.mode == ProbeMode::Pegged) {
      if (own && *own != price_) join_tail(book, *own);
    } else if (spec_.censor_on_adverse_move && own && better(*own)) {
      adverse_ = true;
    }
    return false;
  }

  bool adverse() const { return adverse_; }
  const ProbeSpec& spec() const { return spec_; }
  std::size_t trades_at_entry() const { return trades_at_entry_; }

 private:
  void join_tail(const BookState& book, Price price) {
    price_ = price;
    ahead_.clear();
    if (const PriceLevel* lvl = book.level(spec_.side, price)) {
      for (const auto& e : lvl->queue) ahead_.insert(e.id);
    }
  }
  // An opposing order priced at or through the probe.
  bool through(Price p) const { return spec_.side == Side::Sell ? p >= price_ : p <= price_; }
  // A same-side price with no better priority than the probe.
  bool at_or_worse(Price p) const { return spec_.side == Side::Sell ? p >= price_ : p <= price_; }
  bool better(Price p) const { return spec_.side == Side::Sell ? p < price_ : p > price_; }

  ProbeSpec spec_;
  std::size_t trades_at_entry_;
  Price price_ = 0;
  std::unordered_set<OrderId> ahead_;
  bool adverse_ = false;
};

}  // namespace

const char* to_string(Clock clock) { return clock == Clock::Wall ? "wall" : "transaction"; }

const char* to_string(ProbeMode mode) {
  switch (mode) {
    case ProbeMode::Tracked: return "tracked";
    case ProbeMode::Pegged: return "pegged";
    case ProbeMode::InsideSpread: return "inside";
  }
  return "?";
}

Clock clock_from_string(const std::string& name) {
  if (name == "wall") return Clock::Wall;
  if (name == "transaction") return Clock::Transaction;
  throw UsageError("unknown clock '" + name + "' (expected wall|transaction)");
}

ProbeMode probe_mode_from_string(const std::string& name) {
  if (name == "tracked") return ProbeMode::Tracked;
  if (name == "pegged") return ProbeMode::Pegged;
  if (name == "inside") return ProbeMode::InsideSpread;
  throw UsageError("unknown probe mode '" + name + "' (expected tracked|pegged|inside)");
}

Outcome track_order(const std::vector<Message>& stream, OrderId target, Clock clock) {
  std::optional<std::size_t> submit, last;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    if (stream[i].order_id != target || stream[i].type == EventType::HiddenExecute ||
        stream[i].type == EventType::Halt || stream[i].type == EventType::CrossTrade) {
      continue;
    }
    if (!submit) {
      if (stream[i].type != EventType::Submit) {
        throw DataError("order " + std::to_string(target) + " referenced before submission");
      }
      submit = i;
    }
    last = i;
  }
  if (!submit) throw DataError("order " + std::to_string(target) + " never submitted");
  const auto prefix = trade_prefix(stream);
  const Message& first = stream[*submit];
  const Message& final = stream[*last];
  std::size_t end_index = stream.size() - 1;
  Outcome out;
  if (final.type == EventType::Execute) {
    out.delta = 1;
    end_index = *last;
  } else if (final.type == EventType::Delete) {
    end_index = *last;
  }
  out.end_time = stream[end_index].time;
  out.z = clock == Clock::Wall
              ? wall_z(first.time, out.end_time)
              : static_cast<double>(prefix[end_index + 1] - prefix[*submit + 1]);
  return out;
}

std::vector<std::optional<Outcome>> simulate_probes(const std::vector<Message>& stream,
                                                    const std::vector<ProbeSpec>& probes,
                                                    Price tick, Clock clock,
                                                    const EventCallback& on_event) {
  std::vector<std::optional<Outcome>> results(probes.size());
  if (stream.empty()) {
    if (!probes.empty()) throw DataError("probe submitted into an empty stream");
    return results;
  }
  const Micros last_time = stream.back().time;
  for (const auto& p : probes) {
    if (p.submit_time < stream.front().time || p.submit_time > last_time) {
      throw DataError("probe submit time " + format_time(p.submit_time) + " outside stream");
    }
  }
  std::vector<std::size_t> order(probes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probes[a].submit_time < probes[b].submit_time;
  });

  BookState book(CrossingMode::Strict);
  std::size_t next = 0;
  std::size_t trades = 0;
  std::vector<std::pair<std::size_t, ProbeState>> active;
  const auto finish = [&](std::size_t id, const ProbeState& st, Micros t, int delta) {
    Outcome o;
    o.delta = delta;
    o.end_time = t;
    o.z = clock == Clock::Wall ? wall_z(st.spec().submit_time, t)
                               : static_cast<double>(trades - st.trades_at_entry());
    if (clock == Clock::Transaction && delta == 1 && o.z == 0) o.z = 1;  // the fill is a trade
    results[id] = o;
  };

  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Message& msg = stream[i];
    while (next < order.size() && probes[order[next]].submit_time <= msg.time) {
      ProbeState st(probes[order[next]], trades);
      if (st.enter(book, tick)) active.emplace_back(order[next], std::move(st));
      ++next;
    }
    const EventEffect effect = book.apply(msg);
    if (effect.is_trade()) ++trades;
    if (on_event) on_event(i, msg, effect, book);
    for (std::size_t a = 0; a < active.size();) {
      auto& [id, st] = active[a];
      if (st.observe(msg, effect, book)) {
        finish(id, st, msg.time, 1);
      } else if (st.adverse()) {
        finish(id, st, msg.time, 0);
      } else {
        ++a;
        continue;
      }
      active[a] = std::move(active.back());
      active.pop_back();
    }
  }
  for (; next < order.size(); ++next) {
    ProbeState st(probes[order[next]], trades);
    if (st.enter(book, tick)) active.emplace_back(order[next], std::move(st));
  }
  for (const auto& [id, st] : active) finish(id, st, last_time, 0);
  return results;
}

Outcome simulate_pegged(const std::vector<Message>& stream, Side side, Micros submit_time,
                        Clock clock) {
  ProbeSpec spec;
  spec.side = side;
  spec.submit_time = submit_time;
  spec.mode = ProbeMode::Pegged;
  const auto r = simulate_probes(stream, {spec}, 1, clock);
  if (!r[0]) throw DataError("no " + std::string(side == Side::Buy ? "bid" : "ask") +
                             " quote to peg to at " + format_time(submit_time));
  return *r[0];
}

std::optional<Outcome> simulate_inside_spread(const std::vector<Message>& stream, Side side,
                                              Micros submit_time, int k_ticks, Price tick,
                                              Clock clock, bool censor_on_adverse_move) {
  if (k_ticks < 0) throw UsageError("k_ticks must be non-negative");
  ProbeSpec spec;
  spec.side = side;
  spec.submit_time = submit_time;
  spec.mode = ProbeMode::InsideSpread;
  spec.k_ticks = k_ticks;
  spec.censor_on_adverse_move = censor_on_adverse_move;
  return simulate_probes(stream, {spec}, tick, clock)[0];
}

namespace {

struct Lifecycle {
  std::size_t submit = 0;
  std::size_t last = 0;
  EventType last_type = EventType::Submit;
};

std::unordered_map<OrderId, Lifecycle> lifecycles(const std::vector<Message>& stream) {
  std::unordered_map<OrderId, Lifecycle> out;
  for (std::size_t i = 0; i < stream.size(); ++i) {
    const Message& m = stream[i];
    if (m.type == EventType::Submit) {
      out[m.order_id] = Lifecycle{i, i, m.type};
    } else if (m.type == EventType::PartialCancel || m.type == EventType::Delete ||
               m.type == EventType::Execute) {
      auto it = out.find(m.order_id);
      if (it != out.end()) {
        it->second.last = i;
        it->second.last_type = m.type;
      }
    }
  }
  return out;
}

struct Candidate {
  Micros time = 0;
  Side side = Side::Buy;
  OrderId order = 0;
  std::size_t draw = 0;
};

}  // namespace

Dataset build_dataset(const std::vector<std::vector<Message>>& streams, const DatasetSpec& spec) {
  if (spec.n_per_day < 1) throw UsageError("n_per_day must be at least 1");
  if (spec.lookback < 1) throw UsageError("lookback T must be at least 1");
  Dataset ds;
  ds.spec = spec;
  ds.feature_names = feature_names(spec.window);
  for (std::size_t day = 0; day < streams.size(); ++day) {
    const auto& stream = streams[day];
    if (stream.empty()) {
      ds.warnings.push_back("day " + std::to_string(day) + ": empty stream skipped");
      continue;
    }
    const FeatureTrack track = FeatureTrack::build(stream, spec.features);
    const auto prefix = trade_prefix(stream);
    std::seed_seq seq{static_cast<std::uint64_t>(spec.seed), static_cast<std::uint64_t>(day),
                      std::uint64_t{0x5eed}};
    std::mt19937_64 rng(seq);
    const Micros t0 = stream.front().time;
    const Micros t1 = stream.back().time;
    const auto draw_time = [&]() {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      return t0 + static_cast<Micros>(u * static_cast<double>(t1 - t0));
    };
    const auto draw_side = [&]() {
      if (spec.side == SideChoice::Bid) return Side::Buy;
      if (spec.side == SideChoice::Ask) return Side::Sell;
      return (rng() & 1) ? Side::Buy : Side::Sell;
    };
    std::unordered_map<OrderId, Lifecycle> life;
    std::vector<std::size_t> submissions;
    if (spec.mode == ProbeMode::Tracked) {
      life = lifecycles(stream);
      for (std::size_t i = 0; i < stream.size(); ++i) {
        if (stream[i].type == EventType::Submit) submissions.push_back(i);
      }
    }

    std::vector<SurvivalSample> accepted;
    std::size_t draws = 0;
    for (std::size_t round = 0; round < spec.max_rounds && accepted.size() < spec.n_per_day; ++round) {
      const std::size_t want = 2 * (spec.n_per_day - accepted.size());
      std::vector<Candidate> cands;
      for (std::size_t k = 0; k < want; ++k) {
        Candidate c;
        c.draw = draws++;
        c.time = draw_time();
        if (spec.mode == ProbeMode::Tracked) {
          const auto it = std::lower_bound(submissions.begin(), submissions.end(), c.time,
                                           [&](std::size_t i, Micros v) { return stream[i].time < v; });
          if (it == submissions.end()) continue;
          c.time = stream[*it].time;
          c.order = stream[*it].order_id;
          c.side = stream[*it].direction;
        } else {
          c.side = draw_side();
        }
        if (track.trades_before(c.time) < spec.lookback) continue;
        cands.push_back(c);
      }
      std::vector<std::optional<Outcome>> outcomes(cands.size());
      if (spec.mode == ProbeMode::Tracked) {
        for (std::size_t k = 0; k < cands.size(); ++k) {
          const Lifecycle& lc = life.at(cands[k].order);
          Outcome o;
          std::size_t end_index = stream.size() - 1;
          if (lc.last_type == EventType::Execute) {
            o.delta = 1;
            end_index = lc.last;
          } else if (lc.last_type == EventType::Delete) {
            end_index = lc.last;
          }
          o.end_time = stream[end_index].time;
          o.z = spec.clock == Clock::Wall
                    ? wall_z(cands[k].time, o.end_time)
                    : static_cast<double>(prefix[end_index + 1] - prefix[lc.submit + 1]);
          outcomes[k] = o;
        }
      } else {
        std::vector<ProbeSpec> probes;
        for (const auto& c : cands) {
          ProbeSpec p;
          p.side = c.side;
          p.submit_time = c.time;
          p.mode = spec.mode;
          p.k_ticks = spec.k_ticks;
          probes.push_back(p);
        }
        outcomes = simulate_probes(stream, probes, spec.features.tick, spec.clock);
      }
      for (std::size_t k = 0; k < cands.size() && accepted.size() < spec.n_per_day; ++k) {
        if (!outcomes[k] || !(outcomes[k]->z > 0)) continue;
        SurvivalSample s;
        s.x = track.window(cands[k].time, spec.lookback, spec.window);
        s.z = outcomes[k]->z;
        s.delta = outcomes[k]->delta;
        s.meta = SampleMeta{static_cast<int>(day), cands[k].side,
                            spec.mode == ProbeMode::InsideSpread ? spec.k_ticks : 0, cands[k].time};
        accepted.push_back(std::move(s));
      }
    }
    if (accepted.size() < spec.n_per_day) {
      ds.warnings.push_back("day " + std::to_string(day) + ": only " +
                            std::to_string(accepted.size()) + " of " +
                            std::to_string(spec.n_per_day) + " samples after retries; day skipped");
      continue;
    }
    std::stable_sort(accepted.begin(), accepted.end(), [](const auto& a, const auto& b) {
      return a.meta.submit_time < b.meta.submit_time;
    });
    for (auto& s : accepted) ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::string manifest_path_for(const std::string& dataset_path) {
  return dataset_path + ".manifest.json";
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

double parse_double(std::string_view text, std::size_t row, const std::string& field) {
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw ParseError(row, field, "not a number: '" + std::string(text) + "'");
  }
  return v;
}

nlohmann::json spec_to_json(const DatasetSpec& s) {
  return {{"mode", to_string(s.mode)},
          {"n_per_day", s.n_per_day},
          {"seed", s.seed},
          {"T", s.lookback},
          {"clock", to_string(s.clock)},
          {"window", to_string(s.window)},
          {"side", s.side == SideChoice::Bid ? "bid" : s.side == SideChoice::Ask ? "ask" : "random"},
          {"k_ticks", s.k_ticks},
          {"max_rounds", s.max_rounds},
          {"tick", s.features.tick},
          {"open_seconds", s.features.open_seconds},
          {"close_seconds", s.features.close_seconds},
          {"vol_window", s.features.vol_window}};
}

DatasetSpec spec_from_json(const nlohmann::json& j) {
  DatasetSpec s;
  s.mode = probe_mode_from_string(j.at("mode"));
  s.n_per_day = j.at("n_per_day");
  s.seed = j.at("seed");
  s.lookback = j.at("T");
  s.clock = clock_from_string(j.at("clock"));
  s.window = window_mode_from_string(j.at("window"));
  const std::string side = j.at("side");
  s.side = side == "bid" ? SideChoice::Bid : side == "ask" ? SideChoice::Ask : SideChoice::Random;
  s.k_ticks = j.at("k_ticks");
  s.max_rounds = j.at("max_rounds");
  s.features.tick = j.at("tick");
  s.features.open_seconds = j.at("open_seconds");
  s.features.close_seconds = j.at("close_seconds");
  s.features.vol_window = j.at("vol_window");
  return s;
}

}  // namespace

void write_dataset(const std::string& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  const std::size_t T = ds.spec.lookback;
  const std::size_t F = ds.feature_names.size();
  std::string line = "z,delta,day,side,depth,submit_time";
  for (std::size_t r = 0; r < T; ++r) {
    for (const auto& name : ds.feature_names) line += "," + name + "@" + std::to_string(r);
  }
  out << line << '\n';
  for (const auto& s : ds.samples) {
    if (s.x.rows != T || s.x.cols != F) throw DataError("sample window shape disagrees with dataset");
    line.clear();
    append_double(line, s.z);
    line += "," + std::to_string(s.delta) + "," + std::to_string(s.meta.day) + "," +
            std::to_string(static_cast<int>(s.meta.side)) + "," + std::to_string(s.meta.depth) +
            "," + format_time(s.meta.submit_time);
    for (double v : s.x.values) {
      line += ',';
      append_double(line, v);
    }
    out << line << '\n';
  }
  if (!out) throw DataError("failed writing " + path);

  nlohmann::json manifest = {{"format", "lobsurv-dataset/1"},
                             {"feature_names", ds.feature_names},
                             {"T", T},
                             {"F", F},
                             {"samples", ds.samples.size()},
                             {"spec", spec_to_json(ds.spec)},
                             {"normalization",
                              "prices: ticks relative to the window's final midprice; volumes: "
                              "log1p; time_of_day: fraction of session in [0,1]; volatility: "
                              "mean squared log-return x 1e8; flows: sign(x) log1p|x|"},
                             {"warnings", ds.warnings}};
  std::ofstream mout(manifest_path_for(path), std::ios::binary);
  if (!mout) throw DataError("cannot write manifest for " + path);
  mout << manifest.dump(2) << '\n';
}

Dataset read_dataset(const std::string& path) {
  std::ifstream min(manifest_path_for(path));
  if (!min) throw DataError("missing dataset manifest " + manifest_path_for(path));
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(min);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad dataset manifest: " + std::string(e.what()));
  }
  Dataset ds;
  ds.spec = spec_from_json(manifest.at("spec"));
  ds.feature_names = manifest.at("feature_names").get<std::vector<std::string>>();
  const std::size_t T = manifest.at("T");
  const std::size_t F = manifest.at("F");
  if (F != ds.feature_names.size() || T != ds.spec.lookback) {
    throw DataError("dataset manifest is inconsistent (T/F)");
  }
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  std::string line;
  std::size_t row = 1;
  if (!std::getline(in, line)) throw DataError("dataset " + path + " has no header");
  const std::size_t expected = 6 + T * F;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string_view> cols;
    std::string_view rest(line);
    while (true) {
      const auto c = rest.find(',');
      cols.push_back(rest.substr(0, c));
      if (c == std::string_view::npos) break;
      rest.remove_prefix(c + 1);
    }
    if (cols.size() != expected) {
      throw ParseError(row, "columns", "expected " + std::to_string(expected) + " columns, got " +
                                           std::to_string(cols.size()));
    }
    SurvivalSample s;
    s.z = parse_double(cols[0], row, "z");
    s.delta = static_cast<int>(parse_double(cols[1], row, "delta"));
    if (!(s.z > 0)) throw ParseError(row, "z", "observed time must be positive");
    if (s.delta != 0 && s.delta != 1) throw ParseError(row, "delta", "must be 0 or 1");
    s.meta.day = static_cast<int>(parse_double(cols[2], row, "day"));
    s.meta.side = parse_double(cols[3], row, "side") > 0 ? Side::Buy : Side::Sell;
    s.meta.depth = static_cast<int>(parse_double(cols[4], row, "depth"));
    const auto msgs = parse_messages(std::string(cols[5]) + ",1,1,1,1,1");
    s.meta.submit_time = msgs.at(0).time;
    s.x = FeatureWindow(T, F);
    for (std::size_t k = 0; k < T * F; ++k) s.x.values[k] = parse_double(cols[6 + k], row, "feature");
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

FillStats fill_stats(const std::vector<std::pair<double, int>>& outcomes, double horizon) {
  if (outcomes.empty()) throw DataError("fill statistics need at least one sample");
  FillStats st;
  st.count = outcomes.size();
  std::size_t fills = 0;
  double total = 0;
  for (const auto& [z, delta] : outcomes) {
    if (delta == 1 && z <= horizon) {
      ++fills;
      total += z;
    }
  }
  st.fill_probability = static_cast<double>(fills) / static_cast<double>(outcomes.size());
  if (fills > 0) st.mean_filltime = total / static_cast<double>(fills);
  return st;
}

FillStats fill_stats(const std::vector<SurvivalSample>& samples, double horizon) {
  std::vector<std::pair<double, int>> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.emplace_back(s.z, s.delta);
  return fill_stats(v, horizon);
}

MarketStats market_stats(const std::vector<Message>& stream, Price tick) {
  MarketStats st;
  if (stream.empty()) return st;
  double spread = 0, ask_vol = 0, bid_vol = 0, mid = 0;
  std::size_t n = 0, trades = 0;
  BookState book(CrossingMode::Strict);
  for (const auto& m : stream) {
    const EventEffect e = book.apply(m);
    if (e.type == EventType::Execute) {
      ++trades;
    }
    const auto b = book.best_bid();
    const auto a = book.best_ask();
    if (!b || !a) continue;
    ++n;
    spread += static_cast<double>(*a - *b) / static_cast<double>(tick);
    ask_vol += static_cast<double>(book.level(Side::Sell, *a)->volume);
    bid_vol += static_cast<double>(book.level(Side::Buy, *b)->volume);
    mid += book.midprice() / 10000.0;
  }
  if (n > 0) {
    st.avg_spread_ticks = spread / static_cast<double>(n);
    st.avg_best_ask_volume = ask_vol / static_cast<double>(n);
    st.avg_best_bid_volume = bid_vol / static_cast<double>(n);
    st.avg_midprice = mid / static_cast<double>(n);
  }
  const double minutes = to_seconds(stream.back().time - stream.front().time) / 60.0;
  if (minutes > 0) st.trades_per_minute = static_cast<double>(trades) / minutes;
  return st;
}

std::vector<std::size_t> inside_spread_activity(const std::vector<Message>& stream, Price tick,
                                                int max_k) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(max_k, 0)), 0);
  BookState book(CrossingMode::Strict);
  for (const auto& m : stream) {
    if (m.type == EventType::Submit) {
      const auto own = book.best(m.direction);
      const auto other = book.best(opposite(m.direction));
      if (own && other) {
        const Price improvement = m.direction == Side::Buy ? m.price - *own : *own - m.price;
        if (improvement > 0 && improvement % tick == 0) {
          const auto k = static_cast<std::size_t>(improvement / tick);
          if (k >= 1 && k <= counts.size()) ++counts[k - 1];
        }
      }
    }
    book.apply(m);
  }
  return counts;
}

std::vector<DepthFillRow> inside_spread_fill_table(const std::vector<std::vector<Message>>& streams,
                                                   Side side, std::size_t probes_per_day, int max_k,
                                                   Price tick, double horizon, std::uint64_t seed) {
  std::vector<DepthFillRow> rows(static_cast<std::size_t>(max_k + 1));
  std::vector<std::vector<std::pair<double, int>>> outcomes(rows.size());
  for (std::size_t day = 0; day < streams.size(); ++day) {
    const auto& stream = streams[day];
    if (stream.size() < 2) continue;
    std::seed_seq seq{seed, static_cast<std::uint64_t>(day), std::uint64_t{0xdeb7}};
    std::mt19937_64 rng(seq);
    std::vector<ProbeSpec> probes;
    for (std::size_t n = 0; n < probes_per_day; ++n) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      const Micros t = stream.front().time +
                       static_cast<Micros>(u * static_cast<double>(stream.back().time - stream.front().time));
      for (int k = 0; k <= max_k; ++k) {
        ProbeSpec p;
        p.side = side;
        p.submit_time = t;
        p.mode = ProbeMode::InsideSpread;
        p.k_ticks = k;
        probes.push_back(p);
      }
    }
    const auto res = simulate_probes(stream, probes, tick, Clock::Wall);
    for (std::size_t i = 0; i < res.size(); ++i) {
      if (res[i]) outcomes[static_cast<std::size_t>(probes[i].k_ticks)].emplace_back(res[i]->z, res[i]->delta);
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].k_ticks = static_cast<int>(k);
    rows[k].placed = outcomes[k].size();
    if (!outcomes[k].empty()) rows[k].stats = fill_stats(outcomes[k], horizon);
  }
  return rows;
}

}  // namespace lobsurv
