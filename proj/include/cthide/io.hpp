#ifndef CTHIDE_IO_HPP
#define CTHIDE_IO_HPP

#include "cthide/encoder.hpp"
#include "cthide/matcher.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cthide {

class ParseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view token, const char* what) {
  token = trim(token);
  int base = 10;
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    token.remove_prefix(2);
    base = 16;
  }
  Int value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, base);
  if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(std::string("bad ") + what + ": '" + std::string(token) + "'");
  }
  return value;
}

}  // namespace detail

inline std::string format_coords(std::span<const Coord> coords) {
  std::string out;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(coords[i]);
  }
  return out;
}

inline std::string format_encoding(const SortedEncoding& e) { return format_coords(e.view()); }

/// Comma-separated coordinates; decimal, or hexadecimal with a 0x prefix.
inline std::vector<Coord> parse_coords(std::string_view text) {
  text = detail::trim(text);
  if (text.empty()) throw ParseError("empty coordinate list");
  std::vector<Coord> out;
  for (auto token : detail::split(text, ',')) out.push_back(detail::parse_int<Coord>(token, "coordinate"));
  return out;
}

inline SortedEncoding parse_encoding(std::string_view text) {
  auto coords = parse_coords(text);
  if (!std::is_sorted(coords.begin(), coords.end())) {
    throw ParseError("encoding coordinates are not non-decreasing");
  }
  return SortedEncoding(std::move(coords));
}

/// key=value parameter file. Polynomial code: M, p, n, k. Residue code: M, k
/// and either `primes=p1,p2,...` or `prime_start=P` with `n=N` (the N
/// consecutive primes >= P). Optional for the polynomial code: `points=` a
/// list of evaluation points, or `inflate=1` to encode f(x) instead of x.
/// Blank lines and '#' comments are ignored.
inline Scheme parse_params(std::istream& in) {
  std::map<std::string, std::string, std::less<>> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("params line " + std::to_string(lineno) + ": expected key=value");
    }
    kv[std::string(detail::trim(view.substr(0, eq)))] = std::string(detail::trim(view.substr(eq + 1)));
  }
  auto get = [&](const char* key) -> std::optional<std::string> {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };
  auto require = [&](const char* key) {
    auto v = get(key);
    if (!v) throw ParseError(std::string("params: missing key '") + key + "'");
    return *v;
  };

  for (const auto& [key, value] : kv) {
    if (key != "M" && key != "k" && key != "p" && key != "n" && key != "primes" &&
        key != "prime_start" && key != "points" && key != "inflate") {
      throw ParseError("params: unknown key '" + key + "'");
    }
  }
  const Nat world = parse_nat(require("M"));
  const auto k = detail::parse_int<std::size_t>(require("k"), "k");
  const auto inflate_flag = get("inflate");
  if (inflate_flag && *inflate_flag != "0" && *inflate_flag != "1") {
    throw ParseError("params: inflate must be 0 or 1");
  }
  const bool inflated = inflate_flag == "1";
  if ((inflated || get("points")) && (get("primes") || get("prime_start"))) {
    throw ParseError("params: inflate and points apply to the polynomial code only");
  }
  if (inflated) {
    if (get("points")) throw ParseError("params: inflate uses the default evaluation points");
    return Scheme::inflated(world, detail::parse_int<Coord>(require("p"), "p"),
                            detail::parse_int<std::size_t>(require("n"), "n"), k);
  }
  if (auto pts = get("points")) {
    auto list = parse_coords(*pts);
    if (auto n = get("n"); n && detail::parse_int<std::size_t>(*n, "n") != list.size()) {
      throw ParseError("params: n disagrees with the number of points");
    }
    return PolyCodeParams(world, detail::parse_int<Coord>(require("p"), "p"), std::move(list), k);
  }
  if (auto list = get("primes")) {
    return RrnsParams(parse_coords(*list), world, k);
  }
  if (auto start = get("prime_start")) {
    const auto n = detail::parse_int<std::size_t>(require("n"), "n");
    return RrnsParams(primes(n, detail::parse_int<Coord>(*start, "prime_start")), world, k);
  }
  return PolyCodeParams(world, detail::parse_int<Coord>(require("p"), "p"),
                        detail::parse_int<std::size_t>(require("n"), "n"), k);
}

inline Scheme load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open params file: " + path);
  return parse_params(in);
}

inline std::string format_params(const Scheme& scheme) {
  std::ostringstream out;
  out << "M=" << scheme.world() << '\n';
  if (scheme.is_rrns()) {
    out << "primes=" << format_coords(scheme.rrns().primes()) << '\n';
  } else {
    out << "p=" << scheme.poly().p() << '\n' << "n=" << scheme.n() << '\n';
    if (!scheme.poly().consecutive_points()) out << "points=" << format_coords(scheme.poly().points()) << '\n';
    if (scheme.is_inflated()) out << "inflate=1\n";
  }
  out << "k=" << scheme.k() << '\n';
  return out.str();
}

/// Entry store records: user_id<TAB>tag<TAB>coords. The tag column holds the
/// entry's received_at timestamp.
inline void save_entries(std::ostream& out, std::span<const DatabaseEntry> entries) {
  for (const auto& e : entries) {
    out << e.user_id << '\t' << e.received_at << '\t' << format_encoding(e.encoding) << '\n';
  }
}

inline std::vector<DatabaseEntry> load_entries(std::istream& in) {
  std::vector<DatabaseEntry> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 3 || fields[0].empty()) {
      throw ParseError("entry store line " + std::to_string(lineno) + ": expected 3 tab-separated fields");
    }
    out.push_back({std::string(fields[0]), parse_encoding(fields[2]),
                   detail::parse_int<std::int64_t>(fields[1], "tag")});
  }
  return out;
}

}  // namespace cthide

#endif  // CTHIDE_IO_HPP
