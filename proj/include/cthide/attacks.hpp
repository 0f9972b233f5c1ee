#ifndef CTHIDE_ATTACKS_HPP
#define CTHIDE_ATTACKS_HPP

#include "cthide/encoder.hpp"
#include "cthide/log_value.hpp"
#include "cthide/matcher.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace cthide {

struct AttackReport {
  std::optional<Nat> recovered;
  std::vector<Nat> matches;
  std::uint64_t solves = 0;
  std::uint64_t encodings = 0;
  std::uint64_t iterations = 0;             ///< outer (subset) iterations, direct attack
  std::uint64_t successful_iterations = 0;  ///< outer iterations that recovered x
  bool budget_exhausted = false;
  double wall_time = 0.0;                   ///< seconds
};

/// Acceptance test shared by every attack: the candidate's uncorrupted sorted
/// code lies within tau of the target.
inline bool candidate_matches(const Nat& x, const SortedEncoding& target, const Scheme& scheme,
                              std::size_t tau) {
  return hamming(scheme.sorted_basic(x), target) <= tau;
}

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::uint64_t desk_world(const Scheme& scheme) {
  if (scheme.world() > std::numeric_limits<std::uint64_t>::max()) {
    throw std::invalid_argument("attack: world too large to enumerate");
  }
  return scheme.world().convert_to<std::uint64_t>();
}

/// Calls fn on each m-subset of {0..n-1} in lexicographic order until fn
/// returns true. Returns whether it was stopped.
inline bool for_each_combination(std::size_t n, std::size_t m,
                                 const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (m > n) return false;
  std::vector<std::size_t> c(m);
  std::iota(c.begin(), c.end(), std::size_t{0});
  while (true) {
    if (fn(c)) return true;
    std::size_t i = m;
    while (i > 0 && c[i - 1] == n - m + i - 1) --i;
    if (i == 0) return false;
    ++c[i - 1];
    for (std::size_t j = i; j < m; ++j) c[j] = c[j - 1] + 1;
  }
}

/// Calls fn on each ordered m-tuple of distinct values from {0..n-1}
/// (n!/(n-m)! of them) until fn returns true.
inline bool for_each_arrangement(std::size_t n, std::size_t m,
                                 const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (m > n) return false;
  std::vector<std::size_t> tuple(m);
  std::vector<char> used(n, 0);
  std::function<bool(std::size_t)> rec = [&](std::size_t depth) {
    if (depth == m) return fn(tuple);
    for (std::size_t v = 0; v < n; ++v) {
      if (used[v]) continue;
      used[v] = 1;
      tuple[depth] = v;
      const bool stop = rec(depth + 1);
      used[v] = 0;
      if (stop) return true;
    }
    return false;
  };
  return rec(0);
}

/// Solves for x from m chosen coordinates assigned to code positions.
/// Returns nullopt when the assignment is infeasible (a residue not below
/// its modulus).
inline std::optional<Nat> solve_assignment(const Scheme& scheme, const SortedEncoding& e,
                                           const std::vector<std::size_t>& coords,
                                           const std::vector<std::size_t>& positions) {
  const std::size_t m = coords.size();
  if (scheme.is_rrns()) {
    std::vector<Residue> residues(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Coord q = scheme.rrns().primes()[positions[j]];
      if (e[coords[j]] >= q) return std::nullopt;
      residues[j] = {e[coords[j]], q};
    }
    return crt_reconstruct(residues);
  }
  const Coord p = scheme.poly().p();
  std::vector<EvalPoint> points(m);
  for (std::size_t j = 0; j < m; ++j) {
    points[j] = {{scheme.poly().points()[positions[j]], p}, {e[coords[j]], p}};
  }
  return from_digits(vandermonde_solve(points, m));
}

}  // namespace detail

/// Scans the whole world in order. Stops at the first match unless
/// `collect_all`, in which case every matching x is listed.
inline AttackReport brute_force_attack(const SortedEncoding& e, const Scheme& scheme, std::size_t tau,
                                       bool collect_all = false) {
  detail::Stopwatch clock;
  AttackReport report;
  const std::uint64_t world = detail::desk_world(scheme);
  for (std::uint64_t x = 0; x < world; ++x) {
    ++report.encodings;
    if (!candidate_matches(x, e, scheme, tau)) continue;
    report.matches.emplace_back(x);
    if (!report.recovered) report.recovered = Nat(x);
    if (!collect_all) break;
  }
  report.wall_time = clock.seconds();
  return report;
}

/// Precomputed (x, E(x)) for every world point, indexed for range queries.
/// Entry id equals x.
class TableAttack {
 public:
  template <class Urbg>
  TableAttack(const Scheme& scheme, Urbg& rng) : scheme_(scheme), index_(scheme.n(), scheme.tau()) {
    const std::uint64_t world = detail::desk_world(scheme);
    for (std::uint64_t x = 0; x < world; ++x) {
      index_.insert({"", scheme.encode(Nat(x), rng), 0});
    }
  }

  std::size_t size() const { return index_.size(); }
  const MatchIndex& index() const { return index_; }

  AttackReport query(const SortedEncoding& e, std::size_t tau) const {
    detail::Stopwatch clock;
    AttackReport report;
    for (EntryId id : index_.query(e, tau)) report.matches.emplace_back(id);
    if (!report.matches.empty()) report.recovered = report.matches.front();
    report.wall_time = clock.seconds();
    return report;
  }

 private:
  Scheme scheme_;
  MatchIndex index_;
};

/// Storage a full table attack would need: the raw (x, E(x)) codes, and the
/// (tau + 1)-fold copy held by a block index.
struct TableProjection {
  LogValue raw_bytes;
  LogValue indexed_bytes;
};

inline TableProjection table_attack_projection(double log10_world, double p, std::size_t n,
                                               std::size_t tau) {
  const double code_bits = std::ceil(static_cast<double>(n) * std::log2(p));
  const LogValue raw{log10_world + std::log10(code_bits / 8.0)};
  return {raw, {raw.log10 + std::log10(static_cast<double>(tau + 1))}};
}

enum class DirectMode { kExhaustive, kRandomized };

/// Tries (coordinate subset, position assignment) pairs, solving each for a
/// candidate x and accepting it when it re-encodes within tau of e.
///
/// Exhaustive mode walks subsets lexicographically and, for each, every
/// ordered assignment of code positions. Randomized mode draws a fresh random
/// subset per outer iteration and walks the assignments under a random
/// relabelling of positions. `budget` caps the number of solves.
template <class Urbg>
AttackReport direct_attack(const SortedEncoding& e, const Scheme& scheme, std::size_t tau, Urbg& rng,
                           DirectMode mode, std::uint64_t budget) {
  if (e.size() != scheme.n()) throw std::invalid_argument("direct_attack: target length mismatch");
  detail::Stopwatch clock;
  AttackReport report;
  const std::size_t n = scheme.n(), m = scheme.m();

  auto try_subset = [&](const std::vector<std::size_t>& coords,
                        const std::vector<std::size_t>& relabel) {
    return detail::for_each_arrangement(n, m, [&](const std::vector<std::size_t>& tuple) {
      if (report.solves >= budget) {
        report.budget_exhausted = true;
        return true;
      }
      std::vector<std::size_t> positions(m);
      for (std::size_t j = 0; j < m; ++j) positions[j] = relabel[tuple[j]];
      ++report.solves;
      const auto y = detail::solve_assignment(scheme, e, coords, positions);
      if (!y) return false;
      const auto x = scheme.data_point(*y);
      if (!x) return false;
      ++report.encodings;
      if (!candidate_matches(*x, e, scheme, tau)) return false;
      report.recovered = *x;
      report.matches.push_back(*x);
      return true;
    });
  };

  std::vector<std::size_t> identity(n);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  if (mode == DirectMode::kExhaustive) {
    detail::for_each_combination(n, m, [&](const std::vector<std::size_t>& coords) {
      ++report.iterations;
      const bool stop = try_subset(coords, identity);
      if (report.recovered) ++report.successful_iterations;
      return stop;
    });
  } else {
    while (!report.recovered && !report.budget_exhausted) {
      std::vector<std::size_t> coords = identity;
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(m);
      std::sort(coords.begin(), coords.end());
      std::vector<std::size_t> relabel = identity;
      std::shuffle(relabel.begin(), relabel.end(), rng);
      ++report.iterations;
      try_subset(coords, relabel);
      if (report.recovered) ++report.successful_iterations;
    }
  }
  if (report.budget_exhausted) report.iterations -= report.recovered ? 0 : 1;
  report.wall_time = clock.seconds();
  return report;
}

/// n!/(n-m)! * exp(k m / n): mean solve count of the direct attack.
inline LogValue expected_direct_solves(std::size_t n, std::size_t m, std::size_t k) {
  if (m > n || k > n || n == 0) throw std::invalid_argument("expected_direct_solves: invalid parameters");
  const double ln = ln_factorial(static_cast<double>(n)) - ln_factorial(static_cast<double>(n - m)) +
                    static_cast<double>(k) * static_cast<double>(m) / static_cast<double>(n);
  return LogValue::from_ln(ln);
}

inline LogValue expected_direct_solves(const Scheme& scheme) {
  return expected_direct_solves(scheme.n(), scheme.m(), scheme.k());
}

/// Probability that one random outer iteration draws only uncorrupted
/// coordinates, in the approximate form (1 - k/n)^m.
inline double direct_iteration_success(std::size_t n, std::size_t m, std::size_t k) {
  return std::pow(1.0 - static_cast<double>(k) / static_cast<double>(n), static_cast<double>(m));
}

/// The same probability without replacement: C(n-k, m) / C(n, m).
inline double direct_iteration_success_exact(std::size_t n, std::size_t m, std::size_t k) {
  if (m > n - k) return 0.0;
  double p = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    p *= static_cast<double>(n - k - i) / static_cast<double>(n - i);
  }
  return p;
}

}  // namespace cthide

#endif  // CTHIDE_ATTACKS_HPP
