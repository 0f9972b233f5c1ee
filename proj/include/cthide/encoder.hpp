#ifndef CTHIDE_ENCODER_HPP
#define CTHIDE_ENCODER_HPP

#include "cthide/numtheory.hpp"

#include <algorithm>
#include <compare>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace cthide {

/// Basic (unsorted) code word. Position i carries evaluation index i for the
/// polynomial code, or modulus p_i for the residue code.
struct BasicCode {
  std::vector<Coord> coords;

  std::size_t size() const { return coords.size(); }
  friend bool operator==(const BasicCode&, const BasicCode&) = default;
};

/// A non-decreasing coordinate vector, the released form of an encoding.
class SortedEncoding {
 public:
  SortedEncoding() = default;

  /// Throws std::invalid_argument if `coords` is not non-decreasing.
  explicit SortedEncoding(std::vector<Coord> coords) : coords_(std::move(coords)) {
    if (!std::is_sorted(coords_.begin(), coords_.end())) {
      throw std::invalid_argument("SortedEncoding: coordinates not non-decreasing");
    }
  }

  static SortedEncoding sorting(std::vector<Coord> coords) {
    std::sort(coords.begin(), coords.end());
    return SortedEncoding(std::move(coords));
  }

  const std::vector<Coord>& coords() const { return coords_; }
  std::span<const Coord> view() const { return coords_; }
  std::size_t size() const { return coords_.size(); }
  Coord operator[](std::size_t i) const { return coords_[i]; }
  auto begin() const { return coords_.begin(); }
  auto end() const { return coords_.end(); }

  /// True when every coordinate is < alphabet.
  bool within(Coord alphabet) const {
    return coords_.empty() || coords_.back() < alphabet;
  }

  friend bool operator==(const SortedEncoding&, const SortedEncoding&) = default;
  friend auto operator<=>(const SortedEncoding&, const SortedEncoding&) = default;

 private:
  std::vector<Coord> coords_;
};

/// Parameters (M, p, n, k) of the polynomial code. m and tau are derived.
class PolyCodeParams {
 public:
  PolyCodeParams(Nat world, Coord p, std::size_t n, std::size_t k)
      : world_(std::move(world)), p_(p), n_(n), k_(k) {
    if (world_ < 1) throw std::invalid_argument("PolyCodeParams: world must be >= 1");
    if (!is_prime(p_)) throw std::invalid_argument("PolyCodeParams: p must be prime");
    if (k_ > n_ || n_ > p_) throw std::invalid_argument("PolyCodeParams: need 0 <= k <= n <= p");
    m_ = digit_count(world_, p_);
    if (n_ < m_) throw std::invalid_argument("PolyCodeParams: need n >= m");
    points_.resize(n_);
    std::iota(points_.begin(), points_.end(), Coord{0});
  }

  /// Custom evaluation points (distinct, below p) instead of 0..n-1.
  PolyCodeParams(Nat world, Coord p, std::vector<Coord> points, std::size_t k)
      : PolyCodeParams(std::move(world), p, points.size(), k) {
    std::vector<Coord> seen = points;
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end() || seen.back() >= p_) {
      throw std::invalid_argument("PolyCodeParams: evaluation points must be distinct and below p");
    }
    points_ = std::move(points);
  }

  const Nat& world() const { return world_; }
  Coord p() const { return p_; }
  Coord alphabet() const { return p_; }
  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  std::size_t m() const { return m_; }
  std::size_t tau() const { return 2 * k_; }
  const std::vector<Coord>& points() const { return points_; }
  bool consecutive_points() const {
    for (std::size_t i = 0; i < n_; ++i) if (points_[i] != i) return false;
    return true;
  }

 private:
  Nat world_;
  Coord p_;
  std::size_t n_;
  std::size_t k_;
  std::size_t m_ = 0;
  std::vector<Coord> points_;
};

/// Parameters of the redundant residue code: increasing primes p_1..p_n,
/// world M and corruption count k. m is the smallest prefix whose product
/// covers the world.
class RrnsParams {
 public:
  RrnsParams(std::vector<Coord> primes, Nat world, std::size_t k)
      : primes_(std::move(primes)), world_(std::move(world)), k_(k) {
    if (primes_.empty()) throw std::invalid_argument("RrnsParams: empty prime list");
    for (std::size_t i = 0; i < primes_.size(); ++i) {
      if (!is_prime(primes_[i])) throw std::invalid_argument("RrnsParams: non-prime modulus");
      if (i > 0 && primes_[i] <= primes_[i - 1]) {
        throw std::invalid_argument("RrnsParams: moduli must be strictly increasing");
      }
    }
    if (k_ > primes_.size()) throw std::invalid_argument("RrnsParams: need k <= n");
    Nat prefix = 1;
    m_ = 0;
    while (prefix < world_ && m_ < primes_.size()) prefix *= primes_[m_++];
    if (prefix < world_) throw std::invalid_argument("RrnsParams: moduli product below world size");
    if (m_ == 0) m_ = 1;
    // Any m - 1 moduli must not cover the world, else distance drops below n - m + 1.
    Nat top = 1;
    for (std::size_t i = primes_.size() - (m_ - 1); i < primes_.size(); ++i) top *= primes_[i];
    if (!(top < world_)) {
      throw std::invalid_argument("RrnsParams: largest m-1 moduli already cover the world");
    }
  }

  const std::vector<Coord>& primes() const { return primes_; }
  const Nat& world() const { return world_; }
  Coord alphabet() const { return primes_.back(); }
  std::size_t n() const { return primes_.size(); }
  std::size_t k() const { return k_; }
  std::size_t m() const { return m_; }
  std::size_t tau() const { return 2 * k_; }

 private:
  std::vector<Coord> primes_;
  Nat world_;
  std::size_t k_;
  std::size_t m_ = 0;
};

namespace detail {

inline void check_world(const Nat& x, const Nat& world) {
  if (x < 0 || x >= world) throw std::out_of_range("world point outside [0, M)");
}

/// k distinct positions out of n, uniformly, in random order.
template <class Urbg>
std::vector<std::size_t> pick_positions(std::size_t n, std::size_t k, Urbg& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace detail

inline BasicCode basic_encode(const Nat& x, const PolyCodeParams& params) {
  detail::check_world(x, params.world());
  const DigitVector digits = to_digits(x, params.p(), params.m());
  BasicCode code;
  code.coords.reserve(params.n());
  for (Coord xi : params.points()) {
    code.coords.push_back(eval_poly(digits, {xi, params.p()}).value);
  }
  return code;
}

inline BasicCode rrns_basic_encode(const Nat& x, const RrnsParams& params) {
  detail::check_world(x, params.world());
  BasicCode code;
  code.coords.reserve(params.n());
  for (Coord q : params.primes()) {
    code.coords.push_back(static_cast<Nat>(x % q).convert_to<Coord>());
  }
  return code;
}

inline SortedEncoding sort_code(const BasicCode& code) {
  return SortedEncoding::sorting(code.coords);
}

/// Order-preserving corruption of k distinct coordinates. Each chosen
/// coordinate is redrawn from the window between its current neighbours
/// (sentinels 0 and alphabet - 1), avoiding its current value unless the
/// window holds nothing else.
template <class Urbg>
SortedEncoding corrupt(const SortedEncoding& e, std::size_t k, Coord alphabet, Urbg& rng) {
  if (k > e.size()) throw std::invalid_argument("corrupt: k exceeds code length");
  if (alphabet == 0 || !e.within(alphabet)) {
    throw std::invalid_argument("corrupt: coordinates outside alphabet");
  }
  std::vector<Coord> c = e.coords();
  const std::size_t n = c.size();
  for (std::size_t i : detail::pick_positions(n, k, rng)) {
    const Coord lo = i == 0 ? 0 : c[i - 1];
    const Coord hi = i + 1 == n ? alphabet - 1 : c[i + 1];
    if (lo == hi) continue;
    // Draw from the window minus the current value, then shift past it.
    std::uniform_int_distribution<Coord> draw(lo, hi - 1);
    Coord v = draw(rng);
    if (v >= c[i]) ++v;
    c[i] = v;
  }
  return SortedEncoding(std::move(c));
}

template <class Urbg>
SortedEncoding encode(const Nat& x, const PolyCodeParams& params, Urbg& rng) {
  return corrupt(sort_code(basic_encode(x, params)), params.k(), params.alphabet(), rng);
}

/// Variant without the sorting step: k coordinates of the basic code are
/// replaced by uniform values in Z_p.
template <class Urbg>
BasicCode encode_unsorted(const Nat& x, const PolyCodeParams& params, Urbg& rng) {
  BasicCode code = basic_encode(x, params);
  std::uniform_int_distribution<Coord> draw(0, params.p() - 1);
  for (std::size_t i : detail::pick_positions(code.size(), params.k(), rng)) {
    code.coords[i] = draw(rng);
  }
  return code;
}

/// xi -> a*xi + b (mod p).
struct AffineMap {
  Coord a = 1;
  Coord b = 0;
  friend bool operator==(const AffineMap&, const AffineMap&) = default;
};

/// Non-identity affine maps of Z_p that permute the evaluation points.
/// Consecutive points always admit the reflection xi -> (n-1) - xi.
inline std::vector<AffineMap> point_symmetries(const PolyCodeParams& params) {
  const auto& pts = params.points();
  const Coord p = params.p();
  std::vector<AffineMap> out;
  if (pts.size() < 2) return out;
  std::vector<Coord> sorted = pts;
  std::sort(sorted.begin(), sorted.end());
  const Coord dx = (pts[1] + p - pts[0]) % p;
  const Coord dx_inv = inv_mod(dx, p);
  // An affine map is fixed by where it sends pts[0] and pts[1].
  for (Coord u : pts) {
    for (Coord v : pts) {
      if (u == v) continue;
      const Coord a = detail::mul_mod((v + p - u) % p, dx_inv, p);
      const Coord b = (u + p - detail::mul_mod(a, pts[0], p)) % p;
      if (a == 1 && b == 0) continue;
      std::vector<Coord> image;
      image.reserve(pts.size());
      for (Coord xi : pts) image.push_back((detail::mul_mod(a, xi, p) + b) % p);
      std::sort(image.begin(), image.end());
      if (image == sorted) out.push_back({a, b});
    }
  }
  return out;
}

/// The point whose polynomial is pi(a*xi + b), i.e. whose basic code is a
/// permutation of x's when the map permutes the points. Empty when that
/// polynomial's integer falls outside the world.
inline std::optional<Nat> twin(const Nat& x, const PolyCodeParams& params, AffineMap map) {
  detail::check_world(x, params.world());
  const Coord p = params.p();
  const DigitVector d = to_digits(x, p, params.m());
  // Horner over polynomials: result = result * (a z + b) + d_i.
  std::vector<Coord> result;
  for (std::size_t i = d.digits.size(); i-- > 0;) {
    std::vector<Coord> next(result.size() + 1, 0);
    for (std::size_t j = 0; j < result.size(); ++j) {
      next[j] = (next[j] + detail::mul_mod(result[j], map.b, p)) % p;
      next[j + 1] = (next[j + 1] + detail::mul_mod(result[j], map.a, p)) % p;
    }
    next[0] = (next[0] + d.digits[i]) % p;
    result = std::move(next);
  }
  result.resize(d.digits.size());
  Nat y = from_digits({result, p});
  if (y >= params.world()) return std::nullopt;
  return y;
}

template <class Urbg>
SortedEncoding rrns_encode(const Nat& x, const RrnsParams& params, Urbg& rng) {
  return corrupt(sort_code(rrns_basic_encode(x, params)), params.k(), params.alphabet(), rng);
}

/// Injective world inflation: x maps to the product of 16 primes, the i-th
/// chosen from a disjoint block of the prime sequence by x mod q_i.
class WorldInflation {
 public:
  static constexpr std::size_t kFactors = 16;

  WorldInflation() {
    const auto base = primes(kFactors);
    block_start_.resize(kFactors);
    std::size_t offset = 0;
    for (std::size_t i = 0; i < kFactors; ++i) {
      block_start_[i] = offset;
      offset += base[i];
    }
    table_ = primes(offset);
    moduli_.assign(table_.begin(), table_.begin() + kFactors);
  }

  /// Product of the first 16 primes; inputs must lie below it.
  Nat domain() const { return product(moduli_); }

  /// Offsets s_i: sum of the first i - 1 primes.
  const std::vector<std::size_t>& block_starts() const { return block_start_; }

  /// The 16 distinct primes whose product is f(x), ascending.
  std::vector<Coord> factors(const Nat& x) const {
    if (x < 0 || x >= domain()) throw std::out_of_range("inflate: x outside the 16-prime domain");
    std::vector<Coord> out(kFactors);
    for (std::size_t i = 0; i < kFactors; ++i) {
      const auto c = static_cast<Nat>(x % moduli_[i]).convert_to<std::size_t>();
      out[i] = table_[block_start_[i] + c];
    }
    return out;
  }

  Nat apply(const Nat& x) const {
    const auto f = factors(x);
    return product(f);
  }

  /// f(0): product of the first prime of each block.
  Nat min_image() const { return apply(0); }

  /// Product of the last prime of each block; every f(x) is <= this.
  Nat max_image() const {
    std::vector<Coord> last(kFactors);
    for (std::size_t i = 0; i < kFactors; ++i) {
      last[i] = table_[block_start_[i] + moduli_[i] - 1];
    }
    return product(last);
  }

  /// x with f(x) = y, or empty when y is not an image of f.
  std::optional<Nat> invert(const Nat& y) const {
    if (y < 1) return std::nullopt;
    Nat rest = y;
    std::vector<Residue> residues(kFactors);
    for (std::size_t i = 0; i < kFactors; ++i) {
      std::optional<Coord> c;
      for (Coord j = 0; j < moduli_[i]; ++j) {
        if (rest % table_[block_start_[i] + j] != 0) continue;
        if (c) return std::nullopt;
        c = j;
      }
      if (!c) return std::nullopt;
      rest /= table_[block_start_[i] + *c];
      residues[i] = {*c, moduli_[i]};
    }
    if (rest != 1) return std::nullopt;
    return crt_reconstruct(residues);
  }

  /// All primes that can appear as a factor.
  const std::vector<Coord>& candidate_primes() const { return table_; }

 private:
  std::vector<Coord> moduli_;
  std::vector<std::size_t> block_start_;
  std::vector<Coord> table_;
};

inline const WorldInflation& world_inflation() {
  static const WorldInflation instance;
  return instance;
}

inline Nat inflate(const Nat& x) { return world_inflation().apply(x); }

/// Either code family behind one interface, as selected by a params file.
/// An inflated scheme encodes f(x) with a polynomial code over the inflated
/// world; world() is then the size of the original data world.
class Scheme {
 public:
  Scheme(PolyCodeParams params) : params_(std::move(params)), world_(code_world()) {}  // NOLINT
  Scheme(RrnsParams params) : params_(std::move(params)), world_(code_world()) {}      // NOLINT

  static Scheme inflated(Nat world, Coord p, std::size_t n, std::size_t k) {
    const auto& f = world_inflation();
    if (world < 1 || world > f.domain()) {
      throw std::invalid_argument("Scheme: inflated world must lie within the 16-prime domain");
    }
    Scheme s(PolyCodeParams(f.max_image() + 1, p, n, k));
    s.world_ = std::move(world);
    s.inflated_ = true;
    return s;
  }

  bool is_rrns() const { return std::holds_alternative<RrnsParams>(params_); }
  bool is_inflated() const { return inflated_; }
  const PolyCodeParams& poly() const { return std::get<PolyCodeParams>(params_); }
  const RrnsParams& rrns() const { return std::get<RrnsParams>(params_); }

  /// Size of the data world.
  const Nat& world() const { return world_; }
  /// Size of the world the code itself runs over (M' when inflated).
  const Nat& code_world() const {
    return std::visit([](const auto& p) -> const Nat& { return p.world(); }, params_);
  }
  std::size_t n() const { return std::visit([](const auto& p) { return p.n(); }, params_); }
  std::size_t m() const { return std::visit([](const auto& p) { return p.m(); }, params_); }
  std::size_t k() const { return std::visit([](const auto& p) { return p.k(); }, params_); }
  std::size_t tau() const { return 2 * k(); }
  Coord alphabet() const {
    return std::visit([](const auto& p) { return p.alphabet(); }, params_);
  }

  /// The point actually fed to the code: x, or f(x) when inflated.
  Nat code_point(const Nat& x) const {
    detail::check_world(x, world_);
    return inflated_ ? inflate(x) : x;
  }

  /// Maps a code-world point back to the data world, if it came from one.
  std::optional<Nat> data_point(const Nat& y) const {
    if (!inflated_) {
      if (y < 0 || y >= world_) return std::nullopt;
      return y;
    }
    auto x = world_inflation().invert(y);
    if (x && *x >= world_) return std::nullopt;
    return x;
  }

  BasicCode basic(const Nat& x) const {
    const Nat y = code_point(x);
    if (is_rrns()) return rrns_basic_encode(y, rrns());
    return basic_encode(y, poly());
  }

  /// The uncorrupted released form, E(x) with k = 0.
  SortedEncoding sorted_basic(const Nat& x) const { return sort_code(basic(x)); }

  template <class Urbg>
  SortedEncoding encode(const Nat& x, Urbg& rng) const {
    return corrupt(sorted_basic(x), k(), alphabet(), rng);
  }

 private:
  std::variant<PolyCodeParams, RrnsParams> params_;
  Nat world_;
  bool inflated_ = false;
};

}  // namespace cthide

#endif  // CTHIDE_ENCODER_HPP
