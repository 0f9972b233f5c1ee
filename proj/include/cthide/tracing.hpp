#ifndef CTHIDE_TRACING_HPP
#define CTHIDE_TRACING_HPP

#include "cthide/encoder.hpp"
#include "cthide/io.hpp"
#include "cthide/matcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace cthide {

using CellIndex = std::uint64_t;
using Epoch = std::uint64_t;

/// Spatio-temporal discretization. The defaults give ~1 m cells over the
/// globe (10^14 cells) and 30 s epochs over one month (10^5 epochs).
struct GridSpec {
  std::uint64_t rows = 10'000'000;
  std::uint64_t cols = 10'000'000;
  std::uint64_t epochs = 100'000;
  double epoch_seconds = 30.0;
  double lat_min = -90.0, lat_max = 90.0;
  double lon_min = -180.0, lon_max = 180.0;

  std::uint64_t cells() const { return rows * cols; }
  Nat world() const { return Nat(cells()) * epochs; }
};

inline CellIndex cell_at(std::uint64_t row, std::uint64_t col, const GridSpec& grid) {
  if (row >= grid.rows || col >= grid.cols) throw std::out_of_range("cell outside grid");
  return row * grid.cols + col;
}

/// x = epoch * G_loc + cell.
inline Nat pack(Epoch epoch, CellIndex cell, const GridSpec& grid) {
  if (epoch >= grid.epochs || cell >= grid.cells()) {
    throw std::out_of_range("pack: epoch or cell outside grid");
  }
  return Nat(epoch) * grid.cells() + cell;
}

inline std::pair<Epoch, CellIndex> unpack(const Nat& x, const GridSpec& grid) {
  if (x < 0 || x >= grid.world()) throw std::out_of_range("unpack: x outside world");
  const Nat cells = grid.cells();
  return {static_cast<Nat>(x / cells).convert_to<Epoch>(),
          static_cast<Nat>(x % cells).convert_to<CellIndex>()};
}

namespace detail {

inline std::uint64_t bucket(double v, double lo, double hi, std::uint64_t count, const char* what) {
  if (!(v >= lo && v < hi)) throw std::out_of_range(std::string("quantize: ") + what + " out of bounds");
  auto i = static_cast<std::uint64_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(count)));
  return std::min(i, count - 1);
}

}  // namespace detail

inline CellIndex quantize_cell(double lat, double lon, const GridSpec& grid) {
  return cell_at(detail::bucket(lat, grid.lat_min, grid.lat_max, grid.rows, "latitude"),
                 detail::bucket(lon, grid.lon_min, grid.lon_max, grid.cols, "longitude"), grid);
}

inline Epoch quantize_time(double seconds, const GridSpec& grid) {
  return detail::bucket(seconds, 0.0, grid.epoch_seconds * static_cast<double>(grid.epochs),
                        grid.epochs, "time");
}

/// World point of a (lat, lon, time) sample: epoch * G_loc + row * cols + col.
inline Nat quantize(double lat, double lon, double seconds, const GridSpec& grid) {
  return pack(quantize_time(seconds, grid), quantize_cell(lat, lon, grid), grid);
}

/// Cells within Chebyshev distance `radius` of `cell`, clipped to the grid,
/// ascending.
inline std::vector<CellIndex> dilate(CellIndex cell, std::uint64_t radius, const GridSpec& grid) {
  if (cell >= grid.cells()) throw std::out_of_range("dilate: cell outside grid");
  const std::uint64_t row = cell / grid.cols, col = cell % grid.cols;
  const std::uint64_t r0 = row >= radius ? row - radius : 0;
  const std::uint64_t c0 = col >= radius ? col - radius : 0;
  const std::uint64_t r1 = std::min(grid.rows - 1, row + radius);
  const std::uint64_t c1 = std::min(grid.cols - 1, col + radius);
  std::vector<CellIndex> out;
  out.reserve((r1 - r0 + 1) * (c1 - c0 + 1));
  for (std::uint64_t r = r0; r <= r1; ++r) {
    for (std::uint64_t c = c0; c <= c1; ++c) out.push_back(r * grid.cols + c);
  }
  return out;
}

inline std::uint64_t chebyshev(CellIndex a, CellIndex b, const GridSpec& grid) {
  const auto ar = a / grid.cols, ac = a % grid.cols, br = b / grid.cols, bc = b % grid.cols;
  return std::max(ar > br ? ar - br : br - ar, ac > bc ? ac - bc : bc - ac);
}

// ---------------------------------------------------------------------------
// Wire format

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Tag { kUninfected, kInfected };

inline std::string_view tag_name(Tag tag) {
  return tag == Tag::kInfected ? "infected" : "uninfected";
}

struct ReportMsg {
  std::string user_id;
  Tag tag = Tag::kUninfected;
  SortedEncoding encoding;

  friend bool operator==(const ReportMsg&, const ReportMsg&) = default;
};

/// Server-to-user notice. The payload is the recipient's own matched encoding.
struct AlertMsg {
  std::string user_id;
  SortedEncoding encoding;

  friend bool operator==(const AlertMsg&, const AlertMsg&) = default;
};

inline constexpr std::string_view kAlertMarker = "possible-infection";

using WireMessage = std::variant<ReportMsg, AlertMsg>;

namespace detail {

inline void check_user_id(std::string_view id) {
  if (id.empty() || id.find_first_of("\t\r\n") != std::string_view::npos) {
    throw ProtocolError("user id must be non-empty and free of tabs/newlines");
  }
}

}  // namespace detail

inline std::string to_wire(const ReportMsg& msg) {
  detail::check_user_id(msg.user_id);
  std::string out = "REPORT\t" + msg.user_id + '\t';
  out += tag_name(msg.tag);
  out += '\t' + format_encoding(msg.encoding);
  return out;
}

inline std::string to_wire(const AlertMsg& msg) {
  detail::check_user_id(msg.user_id);
  std::string out = "ALERT\t" + msg.user_id + '\t';
  out += kAlertMarker;
  out += '\t' + format_encoding(msg.encoding);
  return out;
}

/// Parses one line (trailing CR/LF tolerated). Throws ProtocolError.
inline WireMessage parse_wire(std::string_view line) {
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
  const auto fields = detail::split(line, '\t');
  if (fields.size() != 4) throw ProtocolError("expected 4 tab-separated fields");
  detail::check_user_id(fields[1]);
  SortedEncoding encoding;
  try {
    encoding = parse_encoding(fields[3]);
  } catch (const ParseError& e) {
    throw ProtocolError(e.what());
  }
  if (fields[0] == "REPORT") {
    Tag tag;
    if (fields[2] == "uninfected") {
      tag = Tag::kUninfected;
    } else if (fields[2] == "infected") {
      tag = Tag::kInfected;
    } else {
      throw ProtocolError("unknown report tag '" + std::string(fields[2]) + "'");
    }
    return ReportMsg{std::string(fields[1]), tag, std::move(encoding)};
  }
  if (fields[0] == "ALERT") {
    if (fields[2] != kAlertMarker) throw ProtocolError("unknown alert marker");
    return AlertMsg{std::string(fields[1]), std::move(encoding)};
  }
  throw ProtocolError("unknown message kind '" + std::string(fields[0]) + "'");
}

// ---------------------------------------------------------------------------
// Client

/// A transmitted encoding and the position it was computed from. `cell` is
/// the encoded cell; `origin` is where the user actually was (they differ
/// only under dilation).
struct LocalRecord {
  Epoch epoch = 0;
  CellIndex cell = 0;
  CellIndex origin = 0;
  SortedEncoding encoding;
};

struct Exposure {
  Epoch epoch = 0;
  CellIndex cell = 0;

  friend auto operator<=>(const Exposure&, const Exposure&) = default;
};

class ClientState {
 public:
  explicit ClientState(std::string user_id) : user_id_(std::move(user_id)) {
    detail::check_user_id(user_id_);
  }

  const std::string& user_id() const { return user_id_; }
  const std::vector<LocalRecord>& records() const { return records_; }

  /// Encodes the current position (and its neighbourhood when radius > 0),
  /// remembers every transmitted triple and returns the uninfected reports.
  template <class Urbg>
  std::vector<ReportMsg> tick(Epoch epoch, CellIndex cell, const Scheme& scheme,
                              const GridSpec& grid, Urbg& rng, std::uint64_t radius = 0) {
    std::vector<ReportMsg> out;
    for (CellIndex c : dilate(cell, radius, grid)) {
      SortedEncoding e = scheme.encode(pack(epoch, c, grid), rng);
      remember({epoch, c, cell, e});
      out.push_back({user_id_, Tag::kUninfected, std::move(e)});
    }
    return out;
  }

  /// Re-sends every stored encoding from epochs [first, last] as infected.
  std::vector<ReportMsg> report_infection(Epoch first, Epoch last) const {
    std::vector<ReportMsg> out;
    if (first > last) return out;
    for (auto it = by_epoch_.lower_bound(first); it != by_epoch_.end() && it->first <= last; ++it) {
      out.push_back({user_id_, Tag::kInfected, records_[it->second].encoding});
    }
    return out;
  }

  /// Looks up where and when the alerted encoding was produced.
  Exposure handle_alert(const AlertMsg& alert) const {
    const auto it = by_encoding_.find(alert.encoding);
    if (it == by_encoding_.end()) {
      throw NotFoundError("alert for an encoding this client never sent");
    }
    const auto& rec = records_[it->second];
    return {rec.epoch, rec.origin};
  }

  const LocalRecord* find(const SortedEncoding& e) const {
    const auto it = by_encoding_.find(e);
    return it == by_encoding_.end() ? nullptr : &records_[it->second];
  }

 private:
  void remember(LocalRecord rec) {
    const std::size_t id = records_.size();
    by_epoch_.emplace(rec.epoch, id);
    by_encoding_.emplace(rec.encoding, id);
    records_.push_back(std::move(rec));
  }

  std::string user_id_;
  std::vector<LocalRecord> records_;
  std::multimap<Epoch, std::size_t> by_epoch_;
  std::map<SortedEncoding, std::size_t> by_encoding_;
};

// ---------------------------------------------------------------------------
// Server

struct Delivery {
  std::string recipient;
  AlertMsg alert;
};

/// Central matching server. Handles one message at a time: uninfected
/// reports are stored and indexed; infected reports are matched at tau = 2k
/// and produce one alert per (recipient, matched encoding).
class ServerState {
 public:
  explicit ServerState(Scheme scheme)
      : scheme_(std::move(scheme)), index_(scheme_.n(), scheme_.tau()) {}

  const Scheme& scheme() const { return scheme_; }
  const MatchIndex& index() const { return index_; }
  std::size_t stored() const { return index_.size(); }
  const std::vector<ReportMsg>& infected_log() const { return infected_log_; }

  std::vector<Delivery> handle(const ReportMsg& msg) {
    detail::check_user_id(msg.user_id);
    if (msg.encoding.size() != scheme_.n() || !msg.encoding.within(scheme_.alphabet())) {
      throw ProtocolError("encoding does not fit the configured code");
    }
    const auto received_at = static_cast<std::int64_t>(sequence_++);
    if (msg.tag == Tag::kUninfected) {
      index_.insert({msg.user_id, msg.encoding, received_at});
      return {};
    }
    infected_log_.push_back(msg);
    std::vector<Delivery> out;
    for (EntryId id : index_.query(msg.encoding)) {
      DatabaseEntry hit = index_.entry(id);
      if (hit.user_id == msg.user_id) continue;
      if (!alerted_.emplace(hit.user_id, hit.encoding).second) continue;
      AlertMsg alert{hit.user_id, std::move(hit.encoding)};
      pending_[alert.user_id].push_back(alert);
      out.push_back({alert.user_id, std::move(alert)});
    }
    return out;
  }

  /// Wire-level entry point: one REPORT line in, zero or more ALERT lines out.
  std::vector<std::string> handle_line(std::string_view line) {
    auto msg = parse_wire(line);
    if (!std::holds_alternative<ReportMsg>(msg)) throw ProtocolError("server accepts REPORT lines only");
    std::vector<std::string> out;
    for (const auto& d : handle(std::get<ReportMsg>(msg))) out.push_back(to_wire(d.alert));
    return out;
  }

  /// Drains the routing queue of one user.
  std::vector<AlertMsg> take_alerts(const std::string& user_id) {
    std::vector<AlertMsg> out;
    const auto it = pending_.find(user_id);
    if (it == pending_.end()) return out;
    out.assign(std::make_move_iterator(it->second.begin()), std::make_move_iterator(it->second.end()));
    pending_.erase(it);
    return out;
  }

 private:
  Scheme scheme_;
  MatchIndex index_;
  std::uint64_t sequence_ = 0;
  std::vector<ReportMsg> infected_log_;
  std::set<std::pair<std::string, SortedEncoding>> alerted_;
  std::map<std::string, std::deque<AlertMsg>> pending_;
};

// ---------------------------------------------------------------------------
// Simulation

struct SimConfig {
  std::size_t agents = 50;
  GridSpec grid{100, 100, 50};
  /// Inflated so that nearby world points do not get nearby sorted codes.
  Scheme scheme = Scheme::inflated(Nat(100 * 100 * 50), 503, 100, 10);
  std::uint64_t seed = 1;
  std::size_t infected_agent = 0;
  Epoch infect_epoch = 49;
  /// Epochs re-reported on infection, ending at infect_epoch.
  Epoch window = 50;
  std::uint64_t dilation = 0;
  /// Side of the square around the grid centre where walkers start.
  std::uint64_t start_spread = 8;
};

struct AgentOutcome {
  std::string user_id;
  bool exposed = false;           ///< within 2 * dilation of the infected agent in the window
  std::size_t contact_epochs = 0;
  std::size_t alerts = 0;
  std::size_t unrecoverable = 0;  ///< alerts whose encoding the client could not find
  std::size_t misplaced = 0;      ///< recovered (t, l) that is not a genuine contact
  std::vector<Exposure> recovered;
};

struct SimResult {
  std::vector<AgentOutcome> agents;
  std::size_t uninfected_reports = 0;
  std::size_t infected_reports = 0;
  std::size_t server_entries = 0;
  std::size_t missed = 0;        ///< exposed agents with no alert
  std::size_t false_alarms = 0;  ///< alerted agents never exposed
  std::size_t misplaced = 0;
  std::size_t exposed = 0;
};

/// Random-walk agents on a small grid talking to one server through an
/// in-process, line-oriented transport. Every message crosses the wire
/// format, and the server consumes them in arrival order.
inline SimResult run_simulation(const SimConfig& cfg) {
  const GridSpec& grid = cfg.grid;
  if (cfg.agents == 0 || cfg.infected_agent >= cfg.agents) {
    throw std::invalid_argument("simulate: infected agent out of range");
  }
  if (cfg.infect_epoch >= grid.epochs) throw std::invalid_argument("simulate: infection epoch past horizon");
  if (cfg.scheme.world() < grid.world()) {
    throw std::invalid_argument("simulate: code world smaller than grid world");
  }

  std::mt19937_64 rng(cfg.seed);
  ServerState server(cfg.scheme);
  std::vector<ClientState> clients;
  for (std::size_t a = 0; a < cfg.agents; ++a) clients.emplace_back("agent" + std::to_string(a));

  const std::uint64_t spread = std::max<std::uint64_t>(
      1, std::min({cfg.start_spread, grid.rows, grid.cols}));
  const std::uint64_t row0 = (grid.rows - spread) / 2, col0 = (grid.cols - spread) / 2;
  std::uniform_int_distribution<std::uint64_t> start(0, spread - 1);
  std::uniform_int_distribution<int> step(-1, 1);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pos(cfg.agents);
  for (auto& [r, c] : pos) {
    r = row0 + start(rng);
    c = col0 + start(rng);
  }
  // positions[a][t] = cell of agent a at epoch t
  std::vector<std::vector<CellIndex>> trail(cfg.agents);

  std::deque<std::string> uplink;
  SimResult result;
  std::vector<AgentOutcome> outcomes(cfg.agents);
  for (std::size_t a = 0; a < cfg.agents; ++a) outcomes[a].user_id = clients[a].user_id();

  auto pump = [&] {
    while (!uplink.empty()) {
      const std::string line = std::move(uplink.front());
      uplink.pop_front();
      for (const auto& out : server.handle_line(line)) {
        const auto alert = std::get<AlertMsg>(parse_wire(out));
        const std::size_t a = std::stoul(alert.user_id.substr(5));
        auto& o = outcomes[a];
        ++o.alerts;
        try {
          o.recovered.push_back(clients[a].handle_alert(alert));
        } catch (const NotFoundError&) {
          ++o.unrecoverable;
        }
      }
    }
  };

  const Epoch window_first = cfg.infect_epoch + 1 >= cfg.window ? cfg.infect_epoch + 1 - cfg.window : 0;
  for (Epoch t = 0; t < grid.epochs; ++t) {
    for (std::size_t a = 0; a < cfg.agents; ++a) {
      auto& [r, c] = pos[a];
      if (t > 0) {
        const auto nr = static_cast<std::int64_t>(r) + step(rng);
        const auto nc = static_cast<std::int64_t>(c) + step(rng);
        r = static_cast<std::uint64_t>(std::clamp<std::int64_t>(nr, 0, grid.rows - 1));
        c = static_cast<std::uint64_t>(std::clamp<std::int64_t>(nc, 0, grid.cols - 1));
      }
      const CellIndex cell = cell_at(r, c, grid);
      trail[a].push_back(cell);
      for (const auto& msg : clients[a].tick(t, cell, cfg.scheme, grid, rng, cfg.dilation)) {
        uplink.push_back(to_wire(msg));
        ++result.uninfected_reports;
      }
    }
    pump();
    if (t == cfg.infect_epoch) {
      for (const auto& msg : clients[cfg.infected_agent].report_infection(window_first, t)) {
        uplink.push_back(to_wire(msg));
        ++result.infected_reports;
      }
      pump();
    }
  }

  const auto& sick = trail[cfg.infected_agent];
  for (std::size_t a = 0; a < cfg.agents; ++a) {
    auto& o = outcomes[a];
    if (a == cfg.infected_agent) continue;
    std::set<Exposure> contacts;
    for (Epoch t = window_first; t <= cfg.infect_epoch; ++t) {
      if (chebyshev(trail[a][t], sick[t], grid) <= 2 * cfg.dilation) contacts.insert({t, trail[a][t]});
    }
    o.contact_epochs = contacts.size();
    o.exposed = !contacts.empty();
    for (const auto& rec : o.recovered) {
      if (!contacts.contains(rec)) ++o.misplaced;
    }
    const bool alerted = o.alerts > 0;
    result.exposed += o.exposed;
    if (o.exposed && !alerted) ++result.missed;
    if (!o.exposed && alerted) ++result.false_alarms;
    result.misplaced += o.misplaced + o.unrecoverable;
  }
  result.server_entries = server.stored();
  result.agents = std::move(outcomes);
  return result;
}

}  // namespace cthide

#endif  // CTHIDE_TRACING_HPP
