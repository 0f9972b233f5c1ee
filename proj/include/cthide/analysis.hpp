#ifndef CTHIDE_ANALYSIS_HPP
#define CTHIDE_ANALYSIS_HPP

#include "cthide/attacks.hpp"
#include "cthide/encoder.hpp"
#include "cthide/log_value.hpp"
#include "cthide/matcher.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace cthide {

/// Upper bound s(p, n, tau) = n!/p^n * sum_{d<=tau} (2p)^d / d! on the chance
/// that a sorted uniform vector lands within distance tau of a fixed sorted
/// vector. Evaluated in log space.
inline LogValue fp_bound(double p, std::size_t n, std::size_t tau) {
  if (p < 2 || n == 0 || tau > n || static_cast<double>(n) > p) {
    throw std::invalid_argument("fp_bound: need tau <= n <= p");
  }
  std::vector<double> terms;
  terms.reserve(tau + 1);
  const double ln2p = std::log(2.0 * p);
  for (std::size_t d = 0; d <= tau; ++d) {
    terms.push_back(static_cast<double>(d) * ln2p - ln_factorial(static_cast<double>(d)));
  }
  const double ln = ln_factorial(static_cast<double>(n)) - static_cast<double>(n) * std::log(p) +
                    log_sum_exp(terms);
  return LogValue::from_ln(ln);
}

struct McEstimate {
  std::uint64_t hits = 0;
  std::uint64_t trials = 0;
  double confidence = 0.99;
  double estimate = 0.0;
  double lower = 0.0;  ///< one-sided Clopper-Pearson lower limit
  double upper = 1.0;  ///< one-sided Clopper-Pearson upper limit
};

/// Exact one-sided binomial confidence limits for hits out of trials.
inline McEstimate binomial_estimate(std::uint64_t hits, std::uint64_t trials, double confidence) {
  if (trials == 0) throw std::invalid_argument("binomial_estimate: zero trials");
  if (hits > trials) throw std::invalid_argument("binomial_estimate: hits exceed trials");
  McEstimate out;
  out.hits = hits;
  out.trials = trials;
  out.confidence = confidence;
  const auto x = static_cast<double>(hits), nt = static_cast<double>(trials);
  out.estimate = x / nt;
  out.lower = hits == 0 ? 0.0 : boost::math::ibeta_inv(x, nt - x + 1, 1.0 - confidence);
  out.upper = hits == trials ? 1.0 : boost::math::ibeta_inv(x + 1, nt - x, confidence);
  return out;
}

/// Monte Carlo estimate of Prob{ hamming(e, sort(z)) <= tau } for z uniform
/// in Z_p^n.
template <class Urbg>
McEstimate mc_match_prob(Coord p, std::size_t n, std::size_t tau, const SortedEncoding& e,
                         std::uint64_t trials, Urbg& rng, double confidence = 0.99) {
  if (trials == 0) throw std::invalid_argument("mc_match_prob: trials must be >= 1");
  if (e.size() != n || !e.within(p)) throw std::invalid_argument("mc_match_prob: e not in the simplex");
  std::uniform_int_distribution<Coord> draw(0, p - 1);
  std::vector<Coord> z(n);
  std::uint64_t hits = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    for (auto& v : z) v = draw(rng);
    std::sort(z.begin(), z.end());
    hits += hamming(std::span<const Coord>(z), e.view()) <= tau;
  }
  return binomial_estimate(hits, trials, confidence);
}

/// Same estimate split across `streams` threads, stream i seeded with
/// seed + i. Hit counts are summed, so the result depends only on the seed
/// and the stream count.
inline McEstimate mc_match_prob_parallel(Coord p, std::size_t n, std::size_t tau, const SortedEncoding& e,
                                         std::uint64_t trials, std::uint64_t seed, unsigned streams,
                                         double confidence = 0.99) {
  if (streams == 0) throw std::invalid_argument("mc_match_prob_parallel: need at least one stream");
  if (trials < streams) streams = static_cast<unsigned>(trials);
  std::vector<std::uint64_t> hits(streams, 0);
  std::vector<std::thread> workers;
  std::exception_ptr failure;
  std::mutex failure_mutex;
  for (unsigned i = 0; i < streams; ++i) {
    const std::uint64_t share = trials / streams + (i < trials % streams ? 1 : 0);
    workers.emplace_back([&, i, share] {
      try {
        std::mt19937_64 rng(seed + i);
        hits[i] = mc_match_prob(p, n, tau, e, share, rng, confidence).hits;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        failure = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
  return binomial_estimate(std::accumulate(hits.begin(), hits.end(), std::uint64_t{0}), trials, confidence);
}

/// Exact probability by enumerating all p^n vectors. Tiny cases only.
inline double exact_match_prob(Coord p, std::size_t n, std::size_t tau, const SortedEncoding& e) {
  if (std::pow(static_cast<double>(p), static_cast<double>(n)) > 1e8) {
    throw std::invalid_argument("exact_match_prob: p^n too large to enumerate");
  }
  std::vector<Coord> z(n, 0), s(n);
  std::uint64_t hits = 0, total = 0;
  while (true) {
    s = z;
    std::sort(s.begin(), s.end());
    hits += hamming(std::span<const Coord>(s), e.view()) <= tau;
    ++total;
    std::size_t i = 0;
    while (i < n && ++z[i] == p) z[i++] = 0;
    if (i == n) break;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

struct Lemma1Result {
  std::uint64_t same_pairs = 0;
  std::uint64_t same_violations = 0;      ///< same x, distance > tau
  std::uint64_t distinct_pairs = 0;
  std::uint64_t distinct_violations = 0;  ///< different x, distance <= tau
  std::size_t min_distinct_distance = 0;
};

/// Separation check for the unsorted variant with k <= floor((n - m) / 4):
/// re-encodings of one point stay within tau = 2k, different points never do.
template <class Urbg>
Lemma1Result lemma1_check(const PolyCodeParams& params, std::uint64_t trials, Urbg& rng) {
  if (4 * params.k() > params.n() - params.m()) {
    throw std::invalid_argument("lemma1_check: need k <= floor((n - m) / 4)");
  }
  if (params.world() < 2) throw std::invalid_argument("lemma1_check: world needs two points");
  const std::uint64_t world = params.world().convert_to<std::uint64_t>();
  std::uniform_int_distribution<std::uint64_t> point(0, world - 1);
  const std::size_t tau = params.tau();
  Lemma1Result out;
  out.min_distinct_distance = params.n();
  for (std::uint64_t t = 0; t < trials; ++t) {
    const Nat x = point(rng);
    ++out.same_pairs;
    if (hamming(encode_unsorted(x, params, rng), encode_unsorted(x, params, rng)) > tau) {
      ++out.same_violations;
    }
    Nat y = point(rng);
    while (y == x) y = point(rng);
    ++out.distinct_pairs;
    const std::size_t d = hamming(encode_unsorted(x, params, rng), encode_unsorted(y, params, rng));
    out.min_distinct_distance = std::min(out.min_distinct_distance, d);
    if (d <= tau) ++out.distinct_violations;
  }
  return out;
}

/// One setting of the parameter comparison table.
struct ParamRow {
  std::string method;  ///< "polynomial" or "residues"
  std::size_t n = 0;
  double p = 0;        ///< alphabet size; geometric mean of the moduli for residues
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t tau = 0;
  std::size_t bits = 0;               ///< ceil(n log2 p)
  std::size_t published_bits = 0;     ///< size printed for this setting
  std::size_t residue_bits = 0;       ///< ceil(sum log2 p_i), residues only
  LogValue false_positives;           ///< D^2 s(p, n, tau)
  LogValue attack;                    ///< n!/(n-m)! exp(km/n)
  std::string moduli;                 ///< "first..last (count)" for residues

  bool bits_flagged() const { return bits != published_bits; }
};

inline ParamRow poly_row(const Nat& world, double log10_db, Coord p, std::size_t n, std::size_t k,
                         std::size_t published_bits) {
  const PolyCodeParams params(world, p, n, k);
  ParamRow row;
  row.method = "polynomial";
  row.n = n;
  row.p = static_cast<double>(p);
  row.m = params.m();
  row.k = k;
  row.tau = params.tau();
  row.bits = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * std::log2(row.p)));
  row.published_bits = published_bits;
  row.false_positives = LogValue{2 * log10_db} * fp_bound(row.p, n, row.tau);
  row.attack = expected_direct_solves(n, row.m, k);
  return row;
}

/// Residue row over the `count` consecutive primes from `first_prime`. The
/// scalar p is the rounded geometric mean of the moduli.
inline ParamRow residue_row(const Nat& world, double log10_db, Coord first_prime, std::size_t count,
                            std::size_t k, std::size_t published_bits) {
  const RrnsParams params(primes(count, first_prime), world, k);
  double sum_log2 = 0;
  for (Coord q : params.primes()) sum_log2 += std::log2(static_cast<double>(q));
  ParamRow row;
  row.method = "residues";
  row.n = count;
  row.p = std::round(std::exp2(sum_log2 / static_cast<double>(count)));
  row.m = params.m();
  row.k = k;
  row.tau = params.tau();
  row.bits = static_cast<std::size_t>(std::ceil(static_cast<double>(count) * std::log2(row.p)));
  row.published_bits = published_bits;
  row.residue_bits = static_cast<std::size_t>(std::ceil(sum_log2));
  row.false_positives = LogValue{2 * log10_db} * fp_bound(row.p, count, row.tau);
  row.attack = expected_direct_solves(count, row.m, k);
  row.moduli = std::to_string(params.primes().front()) + ".." + std::to_string(params.primes().back()) +
               " (" + std::to_string(count) + ")";
  return row;
}

/// The four reference settings, recomputed for world M and database size D.
inline std::vector<ParamRow> table1_report(const Nat& world, double database_size) {
  const double log10_db = std::log10(database_size);
  return {
      poly_row(world, log10_db, 503, 100, 10, 898),
      poly_row(world, log10_db, 101, 100, 1, 666),
      poly_row(world, log10_db, 211, 200, 20, 1545),
      residue_row(world, log10_db, 877, 80, 8, 858),
  };
}

inline void write_param_rows_csv(std::ostream& out, const std::vector<ParamRow>& rows) {
  out << "method,n,p,m,k,tau,bits,published_bits,bits_flag,residue_bits,log10_false_positives,"
         "log10_attack_solves,moduli\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.n << ',' << r.p << ',' << r.m << ',' << r.k << ',' << r.tau << ','
        << r.bits << ',' << r.published_bits << ',' << (r.bits_flagged() ? "mismatch" : "ok") << ','
        << r.residue_bits << ',' << r.false_positives.log10 << ',' << r.attack.log10 << ',' << r.moduli
        << '\n';
  }
}

}  // namespace cthide

#endif  // CTHIDE_ANALYSIS_HPP
