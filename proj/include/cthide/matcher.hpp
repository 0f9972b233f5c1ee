#ifndef CTHIDE_MATCHER_HPP
#define CTHIDE_MATCHER_HPP

#include "cthide/encoder.hpp"

#include <algorithm>
#include <cstdint>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace cthide {

using EntryId = std::size_t;

struct DatabaseEntry {
  std::string user_id;
  SortedEncoding encoding;
  std::int64_t received_at = 0;

  friend bool operator==(const DatabaseEntry&, const DatabaseEntry&) = default;
};

/// Number of positions where a and b differ.
inline std::size_t hamming(std::span<const Coord> a, std::span<const Coord> b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return d;
}

inline std::size_t hamming(const SortedEncoding& a, const SortedEncoding& b) {
  return hamming(a.view(), b.view());
}

inline std::size_t hamming(const BasicCode& a, const BasicCode& b) {
  return hamming(std::span<const Coord>(a.coords), std::span<const Coord>(b.coords));
}

/// Exhaustive matcher: ids of every entry within distance tau of e, ascending.
inline std::vector<EntryId> scan_match(std::span<const DatabaseEntry> entries,
                                       const SortedEncoding& e, std::size_t tau) {
  std::vector<EntryId> out;
  for (EntryId id = 0; id < entries.size(); ++id) {
    const auto& enc = entries[id].encoding;
    if (enc.size() == e.size() && hamming(enc, e) <= tau) out.push_back(id);
  }
  return out;
}

/// Hamming range index. Coordinates are split into tau + 1 contiguous blocks;
/// by pigeonhole any encoding within distance tau of a query agrees with it
/// exactly on some block, so candidates come from per-block hash buckets and
/// are then verified against the true distance.
///
/// Inserts take an exclusive lock and queries a shared one, so readers always
/// see a consistent snapshot.
class MatchIndex {
 public:
  MatchIndex(std::size_t n, std::size_t tau)
      : n_(n), tau_(tau), mutex_(std::make_unique<std::shared_mutex>()) {
    if (n_ == 0) throw std::invalid_argument("MatchIndex: code length must be positive");
    const std::size_t blocks = tau_ + 1;
    bounds_.reserve(blocks + 1);
    const std::size_t base = n_ / blocks;
    const std::size_t extra = n_ % blocks;
    std::size_t pos = 0;
    bounds_.push_back(pos);
    for (std::size_t b = 0; b < blocks; ++b) {
      pos += base + (b < extra ? 1 : 0);
      bounds_.push_back(pos);
    }
    buckets_.resize(blocks);
  }

  std::size_t n() const { return n_; }
  std::size_t tau() const { return tau_; }
  std::size_t block_count() const { return buckets_.size(); }

  /// Half-open coordinate range [first, second) of block b.
  std::pair<std::size_t, std::size_t> block(std::size_t b) const {
    return {bounds_.at(b), bounds_.at(b + 1)};
  }

  EntryId insert(DatabaseEntry entry) {
    if (entry.encoding.size() != n_) {
      throw std::invalid_argument("MatchIndex: encoding length differs from index length");
    }
    std::unique_lock lock(*mutex_);
    const EntryId id = entries_.size();
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      buckets_[b][block_key(entry.encoding, b)].push_back(id);
    }
    entries_.push_back(std::move(entry));
    return id;
  }

  /// Ids of all stored entries within distance tau of e, ascending.
  /// tau may not exceed the build-time threshold.
  std::vector<EntryId> query(const SortedEncoding& e, std::size_t tau) const {
    if (tau > tau_) throw std::invalid_argument("MatchIndex: query tau exceeds build tau");
    if (e.size() != n_) throw std::invalid_argument("MatchIndex: query length mismatch");
    std::shared_lock lock(*mutex_);
    std::vector<EntryId> candidates;
    for (std::size_t b = 0; b < buckets_.size(); ++b) {
      const auto it = buckets_[b].find(block_key(e, b));
      if (it != buckets_[b].end()) {
        candidates.insert(candidates.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    std::erase_if(candidates,
                  [&](EntryId id) { return hamming(entries_[id].encoding, e) > tau; });
    return candidates;
  }

  std::vector<EntryId> query(const SortedEncoding& e) const { return query(e, tau_); }

  DatabaseEntry entry(EntryId id) const {
    std::shared_lock lock(*mutex_);
    return entries_.at(id);
  }

  std::vector<DatabaseEntry> snapshot() const {
    std::shared_lock lock(*mutex_);
    return entries_;
  }

  std::size_t size() const {
    std::shared_lock lock(*mutex_);
    return entries_.size();
  }

  /// Total bucket references held; exactly (tau + 1) * size().
  std::size_t key_count() const {
    std::shared_lock lock(*mutex_);
    std::size_t total = 0;
    for (const auto& map : buckets_) {
      for (const auto& [key, ids] : map) total += ids.size();
    }
    return total;
  }

 private:
  std::uint64_t block_key(const SortedEncoding& e, std::size_t b) const {
    // splitmix64-style mixing; collisions only add candidates.
    std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ b;
    for (std::size_t i = bounds_[b]; i < bounds_[b + 1]; ++i) {
      h ^= e[i] + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      h ^= h >> 31;
      h *= 0xbf58476d1ce4e5b9ULL;
    }
    return h;
  }

  std::size_t n_;
  std::size_t tau_;
  std::vector<std::size_t> bounds_;
  std::vector<std::unordered_map<std::uint64_t, std::vector<EntryId>>> buckets_;
  std::vector<DatabaseEntry> entries_;
  std::unique_ptr<std::shared_mutex> mutex_;
};

inline MatchIndex build_index(std::span<const DatabaseEntry> entries, std::size_t n,
                              std::size_t tau) {
  MatchIndex index(n, tau);
  for (const auto& entry : entries) index.insert(entry);
  return index;
}

/// (encoding, entry id) pairs in lexicographic order of the encoding.
using ExactTable = std::vector<std::pair<SortedEncoding, EntryId>>;

inline ExactTable make_exact_table(std::span<const DatabaseEntry> entries) {
  ExactTable table;
  table.reserve(entries.size());
  for (EntryId id = 0; id < entries.size(); ++id) table.emplace_back(entries[id].encoding, id);
  std::sort(table.begin(), table.end());
  return table;
}

/// Exact-match lookup for the deterministic (k = 0) mode by binary search.
inline std::vector<EntryId> exact_lookup(const ExactTable& table, const SortedEncoding& e) {
  const auto lo = std::lower_bound(table.begin(), table.end(), e,
                                   [](const auto& row, const SortedEncoding& key) {
                                     return row.first < key;
                                   });
  std::vector<EntryId> out;
  for (auto it = lo; it != table.end() && it->first == e; ++it) out.push_back(it->second);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace cthide

#endif  // CTHIDE_MATCHER_HPP
