#ifndef CTHIDE_NUMTHEORY_HPP
#define CTHIDE_NUMTHEORY_HPP

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cthide {

/// Arbitrary-precision non-negative integer. Inflated worlds reach ~10^39,
/// so 128-bit integers are not enough.
using Nat = boost::multiprecision::cpp_int;

/// Code coordinates and moduli. Every prime the schemes use is well below
/// 2^32, so products of two coordinates fit in 64 bits.
using Coord = std::uint64_t;

struct Residue {
  Coord value = 0;
  Coord modulus = 0;

  friend bool operator==(const Residue&, const Residue&) = default;
};

/// Base-p digits of a world point, least significant first.
struct DigitVector {
  std::vector<Coord> digits;
  Coord modulus = 0;

  std::size_t size() const { return digits.size(); }
  friend bool operator==(const DigitVector&, const DigitVector&) = default;
};

/// One (evaluation index, value) sample of a polynomial over Z_p.
struct EvalPoint {
  Residue index;
  Residue value;
};

class SingularSystemError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % m);
}

inline std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t m) {
  std::uint64_t result = 1 % m;
  base %= m;
  while (exp > 0) {
    if (exp & 1) result = mul_mod(result, base, m);
    base = mul_mod(base, base, m);
    exp >>= 1;
  }
  return result;
}

}  // namespace detail

/// Modular inverse in Z_p for prime p (Fermat). a must be non-zero mod p.
inline Coord inv_mod(Coord a, Coord p) {
  if (a % p == 0) throw SingularSystemError("zero has no inverse mod p");
  return detail::pow_mod(a, p - 2, p);
}

/// Deterministic Miller-Rabin. The base set {2, ..., 37} is exact for every
/// 64-bit input.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  static constexpr std::uint64_t kBases[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
  for (std::uint64_t b : kBases) {
    if (n % b == 0) return n == b;
  }
  std::uint64_t d = n - 1;
  int r = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++r;
  }
  for (std::uint64_t a : kBases) {
    std::uint64_t x = detail::pow_mod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < r; ++i) {
      x = detail::mul_mod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

inline bool is_prime(const Nat& n) {
  if (n > std::numeric_limits<std::uint64_t>::max()) {
    throw std::domain_error("is_prime: input exceeds 64 bits");
  }
  return is_prime(n.convert_to<std::uint64_t>());
}

/// The `count` consecutive primes >= start, ascending.
inline std::vector<Coord> primes(std::size_t count, Coord start = 2) {
  std::vector<Coord> out;
  out.reserve(count);
  for (Coord c = start; out.size() < count; ++c) {
    if (is_prime(c)) out.push_back(c);
  }
  return out;
}

inline Nat product(std::span<const Coord> values) {
  Nat acc = 1;
  for (Coord v : values) acc *= v;
  return acc;
}

/// Smallest m >= 1 with p^m >= world, i.e. ceil(log_p world).
inline std::size_t digit_count(const Nat& world, Coord p) {
  if (p < 2) throw std::invalid_argument("digit_count: base must be >= 2");
  std::size_t m = 1;
  Nat power = p;
  while (power < world) {
    power *= p;
    ++m;
  }
  return m;
}

inline DigitVector to_digits(Nat x, Coord p, std::size_t m) {
  if (x < 0) throw std::out_of_range("to_digits: negative input");
  DigitVector out{std::vector<Coord>(m, 0), p};
  for (std::size_t i = 0; i < m && x != 0; ++i) {
    out.digits[i] = static_cast<Nat>(x % p).convert_to<Coord>();
    x /= p;
  }
  if (x != 0) throw std::out_of_range("to_digits: x >= p^m");
  return out;
}

inline Nat from_digits(const DigitVector& d) {
  Nat x = 0;
  for (auto it = d.digits.rbegin(); it != d.digits.rend(); ++it) {
    x *= d.modulus;
    x += *it;
  }
  return x;
}

/// Horner evaluation of sum digits_i * xi^i mod p.
inline Residue eval_poly(const DigitVector& poly, Residue xi) {
  if (xi.modulus != poly.modulus) {
    throw std::invalid_argument("eval_poly: modulus mismatch");
  }
  const Coord p = poly.modulus;
  Coord acc = 0;
  for (auto it = poly.digits.rbegin(); it != poly.digits.rend(); ++it) {
    acc = (detail::mul_mod(acc, xi.value % p, p) + *it) % p;
  }
  return {acc, p};
}

/// Coefficients of the unique polynomial of degree < m through the m given
/// points, by Lagrange interpolation over Z_p.
inline DigitVector vandermonde_solve(std::span<const EvalPoint> points, std::size_t m) {
  if (points.size() != m || m == 0) {
    throw std::invalid_argument("vandermonde_solve: need exactly m points");
  }
  const Coord p = points.front().index.modulus;
  for (const auto& pt : points) {
    if (pt.index.modulus != p || pt.value.modulus != p) {
      throw std::invalid_argument("vandermonde_solve: modulus mismatch");
    }
  }

  // master(z) = prod_j (z - x_j), coefficients low to high.
  std::vector<Coord> master(m + 1, 0);
  master[0] = 1;
  for (std::size_t j = 0; j < m; ++j) {
    const Coord neg = (p - points[j].index.value % p) % p;
    for (std::size_t d = j + 1; d > 0; --d) {
      master[d] = (master[d - 1] + detail::mul_mod(master[d], neg, p)) % p;
    }
    master[0] = detail::mul_mod(master[0], neg, p);
  }

  DigitVector out{std::vector<Coord>(m, 0), p};
  std::vector<Coord> basis(m);
  for (std::size_t j = 0; j < m; ++j) {
    const Coord xj = points[j].index.value % p;
    Coord denom = 1;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == j) continue;
      const Coord diff = (xj + p - points[i].index.value % p) % p;
      if (diff == 0) throw SingularSystemError("vandermonde_solve: repeated evaluation index");
      denom = detail::mul_mod(denom, diff, p);
    }
    // basis = master / (z - xj) by synthetic division.
    Coord carry = 0;
    for (std::size_t d = m; d > 0; --d) {
      carry = (master[d] + detail::mul_mod(carry, xj, p)) % p;
      basis[d - 1] = carry;
    }
    const Coord scale = detail::mul_mod(points[j].value.value % p, inv_mod(denom, p), p);
    for (std::size_t d = 0; d < m; ++d) {
      out.digits[d] = (out.digits[d] + detail::mul_mod(basis[d], scale, p)) % p;
    }
  }
  return out;
}

/// Unique x in [0, prod moduli) congruent to every residue, by Garner-style
/// incremental lifting. Moduli must be pairwise coprime.
inline Nat crt_reconstruct(std::span<const Residue> residues) {
  Nat x = 0;
  Nat modulus = 1;
  for (const auto& r : residues) {
    const Coord p = r.modulus;
    const Coord x_mod = static_cast<Nat>(x % p).convert_to<Coord>();
    const Coord m_mod = static_cast<Nat>(modulus % p).convert_to<Coord>();
    const Coord delta = (r.value % p + p - x_mod) % p;
    const Coord t = detail::mul_mod(delta, inv_mod(m_mod, p), p);
    x += modulus * t;
    modulus *= p;
  }
  return x;
}

/// Parses a decimal integer, also accepting the shorthand "B^E" (e.g. 10^19).
inline Nat parse_nat(const std::string& text) {
  const auto caret = text.find('^');
  if (text.empty() || text.front() == '-') {
    throw std::invalid_argument("not a non-negative integer: '" + text + "'");
  }
  try {
    if (caret == std::string::npos) return Nat(text);
    const Nat base(text.substr(0, caret));
    const unsigned exp = static_cast<unsigned>(std::stoul(text.substr(caret + 1)));
    return boost::multiprecision::pow(base, exp);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a non-negative integer: '" + text + "'");
  }
}

}  // namespace cthide

#endif  // CTHIDE_NUMTHEORY_HPP
