#include "cthide/matcher.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

namespace cthide {
namespace {

SortedEncoding random_sorted(std::size_t n, Coord p, std::mt19937_64& rng) {
  std::vector<Coord> v(n);
  for (auto& c : v) c = rng() % p;
  return SortedEncoding::sorting(v);
}

/// A copy of e with up to `changes` coordinates moved, kept sorted.
SortedEncoding nearby(const SortedEncoding& e, std::size_t changes, Coord p, std::mt19937_64& rng) {
  return corrupt(e, std::min(changes, e.size()), p, rng);
}

std::vector<EntryId> definitional(const std::vector<DatabaseEntry>& db, const SortedEncoding& e,
                                  std::size_t tau) {
  std::vector<EntryId> out;
  for (EntryId i = 0; i < db.size(); ++i) {
    std::size_t d = 0;
    for (std::size_t j = 0; j < e.size(); ++j) d += db[i].encoding[j] != e[j];
    if (d <= tau) out.push_back(i);
  }
  return out;
}

TEST(Hamming, Examples) {
  EXPECT_EQ(hamming(SortedEncoding({0, 2, 3, 4, 5}), SortedEncoding({0, 2, 3, 4, 6})), 1u);
  EXPECT_EQ(hamming(SortedEncoding({1, 2, 3}), SortedEncoding({1, 2, 3})), 0u);
  EXPECT_EQ(hamming(SortedEncoding({0, 0, 0}), SortedEncoding({1, 1, 1})), 3u);
  EXPECT_THROW(hamming(SortedEncoding({0, 0}), SortedEncoding({1, 1, 1})), std::invalid_argument);
}

TEST(ScanMatch, Examples) {
  const SortedEncoding e({1, 2, 3});
  EXPECT_TRUE(scan_match({}, e, 2).empty());
  const std::vector<DatabaseEntry> db{{"a", SortedEncoding({1, 2, 4}), 0}, {"b", e, 1}};
  EXPECT_EQ(scan_match(db, e, 0), (std::vector<EntryId>{1}));
  EXPECT_EQ(scan_match(db, e, 1), (std::vector<EntryId>{0, 1}));
}

TEST(ScanMatch, EqualsDefinitionalFilter) {
  std::mt19937_64 rng(1);
  std::vector<DatabaseEntry> db;
  for (int i = 0; i < 10'000; ++i) db.push_back({"u", random_sorted(8, 5, rng), i});
  for (int q = 0; q < 20; ++q) {
    const auto e = random_sorted(8, 5, rng);
    EXPECT_EQ(scan_match(db, e, 3), definitional(db, e, 3));
  }
}

TEST(MatchIndex, BlocksPartitionPositions) {
  const MatchIndex idx(10, 3);
  ASSERT_EQ(idx.block_count(), 4u);
  std::size_t expect_start = 0;
  for (std::size_t b = 0; b < idx.block_count(); ++b) {
    const auto [lo, hi] = idx.block(b);
    EXPECT_EQ(lo, expect_start);
    EXPECT_GE(hi - lo, 2u);
    EXPECT_LE(hi - lo, 3u);
    expect_start = hi;
  }
  EXPECT_EQ(expect_start, 10u);
}

TEST(MatchIndex, EmptyIndexAnswersEmpty) {
  const auto idx = build_index({}, 4, 2);
  EXPECT_TRUE(idx.query(SortedEncoding({0, 1, 2, 3})).empty());
  EXPECT_EQ(idx.key_count(), 0u);
}

TEST(MatchIndex, PigeonholeAgreementOnSomeBlock) {
  std::mt19937_64 rng(2);
  const MatchIndex idx(20, 4);
  for (int t = 0; t < 2000; ++t) {
    const auto e = random_sorted(20, 50, rng);
    const auto f = nearby(e, rng() % 5, 50, rng);
    ASSERT_LE(hamming(e, f), 4u);
    bool agrees = false;
    for (std::size_t b = 0; b < idx.block_count() && !agrees; ++b) {
      const auto [lo, hi] = idx.block(b);
      agrees = std::equal(e.begin() + lo, e.begin() + hi, f.begin() + lo);
    }
    ASSERT_TRUE(agrees);
  }
}

TEST(MatchIndex, StoredEncodingIsFound) {
  std::mt19937_64 rng(3);
  std::vector<DatabaseEntry> db;
  for (int i = 0; i < 50; ++i) db.push_back({"u" + std::to_string(i), random_sorted(12, 30, rng), i});
  const auto idx = build_index(db, 12, 4);
  for (EntryId i = 0; i < db.size(); ++i) {
    const auto hits = idx.query(db[i].encoding, 0);
    EXPECT_TRUE(std::find(hits.begin(), hits.end(), i) != hits.end());
  }
}

TEST(MatchIndex, QueryEqualsScanOnRandomDatabases) {
  std::mt19937_64 rng(4);
  for (int round = 0; round < 5; ++round) {
    std::vector<DatabaseEntry> db;
    for (int i = 0; i < 10'000; ++i) db.push_back({"u", random_sorted(12, 9, rng), i});
    const auto idx = build_index(db, 12, 4);
    EXPECT_EQ(idx.key_count(), 5u * db.size());
    for (int q = 0; q < 100; ++q) {
      const auto e = q % 2 ? random_sorted(12, 9, rng) : nearby(db[rng() % db.size()].encoding, 1 + rng() % 6, 9, rng);
      const std::size_t tau = rng() % 5;
      ASSERT_EQ(idx.query(e, tau), scan_match(db, e, tau));
    }
  }
}

TEST(MatchIndex, Errors) {
  MatchIndex idx(4, 1);
  EXPECT_THROW(idx.insert({"u", SortedEncoding({1, 2, 3}), 0}), std::invalid_argument);
  EXPECT_THROW(idx.query(SortedEncoding({1, 2, 3, 4}), 2), std::invalid_argument);
  EXPECT_THROW(idx.query(SortedEncoding({1, 2, 3})), std::invalid_argument);
  EXPECT_THROW(MatchIndex(0, 1), std::invalid_argument);
}

TEST(MatchIndex, DuplicatesAreDistinctEntries) {
  MatchIndex idx(3, 0);
  idx.insert({"u", SortedEncoding({1, 2, 3}), 0});
  idx.insert({"u", SortedEncoding({1, 2, 3}), 5});
  EXPECT_EQ(idx.query(SortedEncoding({1, 2, 3})), (std::vector<EntryId>{0, 1}));
}

TEST(MatchIndex, ThresholdAtLeastLengthMatchesEverything) {
  std::mt19937_64 rng(5);
  std::vector<DatabaseEntry> db;
  for (int i = 0; i < 30; ++i) db.push_back({"u", random_sorted(3, 100, rng), i});
  const auto idx = build_index(db, 3, 5);
  EXPECT_EQ(idx.query(SortedEncoding({0, 0, 0}), 5).size(), 30u);
}

TEST(MatchIndex, ConcurrentQueriesSeeConsistentSnapshots) {
  std::mt19937_64 rng(6);
  MatchIndex idx(10, 2);
  const auto probe = random_sorted(10, 20, rng);
  std::atomic<bool> done{false};
  std::atomic<std::size_t> failures{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      std::size_t last = 0;
      while (!done.load()) {
        const auto hits = idx.query(probe);
        // The probe is inserted repeatedly, so hit counts never shrink.
        if (hits.size() < last) ++failures;
        last = hits.size();
        for (EntryId id : hits) {
          if (hamming(idx.entry(id).encoding, probe) > 2) ++failures;
        }
      }
    });
  }
  for (int i = 0; i < 3000; ++i) {
    idx.insert({"w", i % 3 == 0 ? probe : random_sorted(10, 20, rng), i});
  }
  done = true;
  for (auto& t : readers) t.join();
  EXPECT_EQ(failures.load(), 0u);
  EXPECT_EQ(idx.query(probe).size() >= 1000u, true);
}

TEST(ExactLookup, Examples) {
  const std::vector<DatabaseEntry> one{{"a", SortedEncoding({1, 2}), 0}};
  const auto table = make_exact_table(one);
  EXPECT_EQ(exact_lookup(table, SortedEncoding({1, 2})), (std::vector<EntryId>{0}));
  EXPECT_TRUE(exact_lookup(table, SortedEncoding({1, 3})).empty());
  EXPECT_TRUE(exact_lookup({}, SortedEncoding({1, 3})).empty());
}

TEST(ExactLookup, EqualsZeroThresholdScan) {
  std::mt19937_64 rng(7);
  std::vector<DatabaseEntry> db;
  for (int i = 0; i < 10'000; ++i) db.push_back({"u", random_sorted(4, 6, rng), i});
  const auto table = make_exact_table(db);
  ASSERT_TRUE(std::is_sorted(table.begin(), table.end()));
  for (int q = 0; q < 200; ++q) {
    const auto e = q % 2 ? random_sorted(4, 6, rng) : db[rng() % db.size()].encoding;
    ASSERT_EQ(exact_lookup(table, e), scan_match(db, e, 0));
  }
}

}  // namespace
}  // namespace cthide
