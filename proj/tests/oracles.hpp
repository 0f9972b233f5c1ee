// Independent reference computations for tests. Nothing here calls into the
// library code paths it is used to check.
#ifndef CTHIDE_TESTS_ORACLES_HPP
#define CTHIDE_TESTS_ORACLES_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

namespace oracle {

inline bool trial_division_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t d = 2; d * d <= n; ++d) {
    if (n % d == 0) return false;
  }
  return true;
}

/// sum c_i xi^i mod p by direct powers.
inline std::uint64_t poly_at(const std::vector<std::uint64_t>& c, std::uint64_t xi, std::uint64_t p) {
  std::uint64_t acc = 0, power = 1;
  for (std::uint64_t ci : c) {
    acc = (acc + ci * power) % p;
    power = power * xi % p;
  }
  return acc;
}

/// Smallest x >= 0 with x = r_i mod m_i, by stepping through candidates.
inline std::uint64_t crt_search(const std::vector<std::uint64_t>& r, const std::vector<std::uint64_t>& m) {
  std::uint64_t bound = 1;
  for (auto mi : m) bound *= mi;
  for (std::uint64_t x = 0; x < bound; ++x) {
    bool ok = true;
    for (std::size_t i = 0; i < r.size() && ok; ++i) ok = x % m[i] == r[i];
    if (ok) return x;
  }
  return bound;
}

inline std::size_t diff_count(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

}  // namespace oracle

#endif  // CTHIDE_TESTS_ORACLES_HPP
