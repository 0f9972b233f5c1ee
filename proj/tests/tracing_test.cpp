#include "cthide/tracing.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <random>

namespace cthide {
namespace {

GridSpec small_grid() { return GridSpec{100, 100, 50}; }

Scheme small_scheme(std::size_t k = 4) { return PolyCodeParams(Nat(100 * 100 * 50), 101, 40, k); }

TEST(Quantize, PackingFormula) {
  const GridSpec world;  // 10^14 cells x 10^5 epochs
  EXPECT_EQ(world.world(), parse_nat("10^19"));
  EXPECT_EQ(pack(0, 0, world), 0);
  EXPECT_EQ(pack(3, 7, world), Nat(3) * parse_nat("10^14") + 7);
  EXPECT_EQ(unpack(pack(3, 7, world), world), (std::pair<Epoch, CellIndex>{3, 7}));
  EXPECT_THROW(pack(100'000, 0, world), std::out_of_range);
}

TEST(Quantize, LatLonTime) {
  const GridSpec g{180, 360, 10, 30.0};
  EXPECT_EQ(quantize(-90.0, -180.0, 0.0, g), 0);
  // Same cell and epoch collapse to the same point.
  EXPECT_EQ(quantize(10.2, 20.3, 31.0, g), quantize(10.7, 20.9, 59.0, g));
  EXPECT_EQ(quantize(10.2, 20.3, 31.0, g), Nat(1) * 180 * 360 + 100 * 360 + 200);
  EXPECT_THROW(quantize(90.0, 0.0, 0.0, g), std::out_of_range);
  EXPECT_THROW(quantize(0.0, 0.0, 300.0, g), std::out_of_range);
  EXPECT_THROW(quantize(0.0, -181.0, 0.0, g), std::out_of_range);
}

TEST(Dilate, Neighbourhoods) {
  const GridSpec g = small_grid();
  const CellIndex interior = cell_at(50, 50, g);
  EXPECT_EQ(dilate(interior, 0, g), (std::vector<CellIndex>{interior}));
  EXPECT_EQ(dilate(interior, 1, g).size(), 9u);
  EXPECT_EQ(dilate(interior, 2, g).size(), 25u);
  EXPECT_EQ(dilate(0, 1, g).size(), 4u);
  EXPECT_EQ(dilate(cell_at(0, 50, g), 1, g).size(), 6u);
  for (CellIndex c : dilate(interior, 2, g)) EXPECT_LE(chebyshev(c, interior, g), 2u);
}

TEST(Wire, FormatAndParse) {
  const ReportMsg r{"alice", Tag::kInfected, SortedEncoding({1, 2, 3})};
  EXPECT_EQ(to_wire(r), "REPORT\talice\tinfected\t1,2,3");
  EXPECT_EQ(std::get<ReportMsg>(parse_wire(to_wire(r) + "\r\n")), r);
  const AlertMsg a{"bob", SortedEncoding({4, 4})};
  EXPECT_EQ(to_wire(a), "ALERT\tbob\tpossible-infection\t4,4");
  EXPECT_EQ(std::get<AlertMsg>(parse_wire(to_wire(a))), a);
}

TEST(Wire, MalformedLinesAreProtocolErrors) {
  for (const char* line : {"", "REPORT\talice\tinfected", "REPORT\talice\tsick\t1,2",
                           "REPORT\t\tinfected\t1,2", "PING\talice\tinfected\t1,2",
                           "REPORT\talice\tinfected\t2,1", "ALERT\tbob\tmaybe\t1,2",
                           "REPORT\talice\tinfected\t1,x"}) {
    EXPECT_THROW(parse_wire(line), ProtocolError) << line;
  }
  EXPECT_THROW(to_wire(ReportMsg{"a\tb", Tag::kInfected, SortedEncoding({1})}), ProtocolError);
}

TEST(Client, TickStoresAndLooksUp) {
  std::mt19937_64 rng(1);
  const GridSpec g = small_grid();
  const Scheme s = small_scheme();
  ClientState c("alice");
  const auto reports = c.tick(3, cell_at(10, 10, g), s, g, rng);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].tag, Tag::kUninfected);
  EXPECT_EQ(reports[0].user_id, "alice");
  EXPECT_EQ(c.handle_alert({"alice", reports[0].encoding}), (Exposure{3, cell_at(10, 10, g)}));
  EXPECT_THROW(c.handle_alert({"alice", SortedEncoding(std::vector<Coord>(40, 0))}), NotFoundError);
}

TEST(Client, DilationSendsNeighbourhood) {
  std::mt19937_64 rng(2);
  const GridSpec g = small_grid();
  ClientState c("alice");
  const auto reports = c.tick(0, cell_at(20, 20, g), small_scheme(), g, rng, 1);
  EXPECT_EQ(reports.size(), 9u);
  EXPECT_EQ(c.records().size(), 9u);
  for (const auto& r : reports) {
    const auto* rec = c.find(r.encoding);
    ASSERT_NE(rec, nullptr);
    EXPECT_EQ(rec->origin, cell_at(20, 20, g));
  }
}

TEST(Client, DeterministicModeGivesIdenticalEncodings) {
  std::mt19937_64 rng(3);
  const GridSpec g = small_grid();
  const Scheme s = small_scheme(0);
  ClientState a("a"), b("b");
  EXPECT_EQ(a.tick(5, 77, s, g, rng)[0].encoding, b.tick(5, 77, s, g, rng)[0].encoding);
}

TEST(Client, ReportInfectionWindow) {
  std::mt19937_64 rng(4);
  const GridSpec g = small_grid();
  ClientState c("alice");
  for (Epoch t = 0; t < 10; ++t) c.tick(t, t, small_scheme(), g, rng);
  EXPECT_TRUE(c.report_infection(5, 4).empty());
  const auto all = c.report_infection(0, 49);
  EXPECT_EQ(all.size(), 10u);
  for (const auto& r : all) EXPECT_EQ(r.tag, Tag::kInfected);
  EXPECT_EQ(c.report_infection(3, 5).size(), 3u);
  EXPECT_EQ(c.records().size(), 10u);
}

TEST(Server, StoresUninfectedAndAlertsCoLocated) {
  std::mt19937_64 rng(5);
  const GridSpec g = small_grid();
  const Scheme s = small_scheme();
  ServerState server(s);
  ClientState alice("alice"), bob("bob"), carol("carol");
  for (const auto& r : alice.tick(7, cell_at(5, 5, g), s, g, rng)) EXPECT_TRUE(server.handle(r).empty());
  for (const auto& r : bob.tick(7, cell_at(5, 5, g), s, g, rng)) EXPECT_TRUE(server.handle(r).empty());
  for (const auto& r : carol.tick(7, cell_at(60, 60, g), s, g, rng)) server.handle(r);
  EXPECT_EQ(server.stored(), 3u);

  std::vector<Delivery> deliveries;
  for (const auto& r : alice.report_infection(0, 49)) {
    auto d = server.handle(r);
    deliveries.insert(deliveries.end(), d.begin(), d.end());
  }
  ASSERT_EQ(deliveries.size(), 1u);
  EXPECT_EQ(deliveries[0].recipient, "bob");
  EXPECT_EQ(bob.handle_alert(deliveries[0].alert), (Exposure{7, cell_at(5, 5, g)}));
  EXPECT_EQ(server.stored(), 3u);  // infected reports are not indexed
  EXPECT_EQ(server.infected_log().size(), 1u);
  EXPECT_EQ(server.take_alerts("bob").size(), 1u);
  EXPECT_TRUE(server.take_alerts("bob").empty());

  // Re-reporting does not alert bob twice for the same encoding.
  for (const auto& r : alice.report_infection(0, 49)) EXPECT_TRUE(server.handle(r).empty());
}

TEST(Server, IsolatedInfectionAlertsNobody) {
  std::mt19937_64 rng(6);
  const GridSpec g = small_grid();
  const Scheme s = small_scheme();
  ServerState server(s);
  ClientState alice("alice"), bob("bob");
  for (Epoch t = 0; t < 5; ++t) {
    for (const auto& r : alice.tick(t, cell_at(1, 1, g), s, g, rng)) server.handle(r);
    for (const auto& r : bob.tick(t, cell_at(90, 90, g), s, g, rng)) server.handle(r);
  }
  for (const auto& r : alice.report_infection(0, 4)) EXPECT_TRUE(server.handle(r).empty());
}

TEST(Server, ReflectionTwinIsAlertedWithoutInflation) {
  // With points 0..n-1, pi(xi) and pi(n-1-xi) give the same sorted code, so
  // a user at the twin point is alerted without ever meeting the reporter.
  std::mt19937_64 rng(7);
  const GridSpec g = small_grid();
  const PolyCodeParams pp(g.world(), 101, 40, 4);
  const Nat x = pack(20, cell_at(50, 50, g), g);
  const auto y = twin(x, pp, {100, 39});
  ASSERT_TRUE(y.has_value());
  const auto [te, tc] = unpack(*y, g);
  ASSERT_FALSE(te == 20 && tc == cell_at(50, 50, g));

  ServerState plain(pp);
  ClientState alice("alice"), bob("bob");
  alice.tick(20, cell_at(50, 50, g), pp, g, rng);
  for (const auto& r : bob.tick(te, tc, pp, g, rng)) plain.handle(r);
  EXPECT_EQ(plain.handle(alice.report_infection(20, 20).at(0)).size(), 1u);

  const Scheme inflated = Scheme::inflated(g.world(), 503, 100, 10);
  ServerState guarded(inflated);
  ClientState carol("carol"), dave("dave");
  carol.tick(20, cell_at(50, 50, g), inflated, g, rng);
  for (const auto& r : dave.tick(te, tc, inflated, g, rng)) guarded.handle(r);
  EXPECT_TRUE(guarded.handle(carol.report_infection(20, 20).at(0)).empty());
}

TEST(Server, RejectsMalformedInput) {
  ServerState server(small_scheme());
  EXPECT_THROW(server.handle_line("garbage"), ProtocolError);
  EXPECT_THROW(server.handle_line("REPORT\tu\tuninfected\t1,2,3"), ProtocolError);  // wrong length
  EXPECT_THROW(server.handle_line("ALERT\tu\tpossible-infection\t1"), ProtocolError);
  std::string too_big = "REPORT\tu\tuninfected\t";
  for (int i = 0; i < 40; ++i) too_big += (i ? ",500" : "500");
  EXPECT_THROW(server.handle_line(too_big), ProtocolError);
  EXPECT_EQ(server.stored(), 0u);
}

TEST(Simulation, PerfectRecallAndRecovery) {
  SimConfig cfg;
  std::size_t exposed = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    cfg.seed = seed;
    const auto r = run_simulation(cfg);
    EXPECT_EQ(r.missed, 0u);
    EXPECT_EQ(r.false_alarms, 0u);
    EXPECT_EQ(r.misplaced, 0u);
    EXPECT_EQ(r.server_entries, r.uninfected_reports);
    EXPECT_EQ(r.uninfected_reports, cfg.agents * cfg.grid.epochs);
    exposed += r.exposed;
  }
  EXPECT_GT(exposed, 0u);
}

TEST(Simulation, DilationWidensContacts) {
  SimConfig cfg;
  cfg.agents = 20;
  cfg.grid.epochs = 12;
  cfg.infect_epoch = 11;
  cfg.window = 12;
  cfg.dilation = 1;
  cfg.seed = 9;
  const auto r = run_simulation(cfg);
  EXPECT_EQ(r.missed, 0u);
  EXPECT_EQ(r.false_alarms, 0u);
  EXPECT_EQ(r.misplaced, 0u);
  EXPECT_GT(r.exposed, 0u);
  EXPECT_EQ(r.server_entries, r.uninfected_reports);
}

TEST(Simulation, RejectsBadConfig) {
  SimConfig cfg;
  cfg.infected_agent = 50;
  EXPECT_THROW(run_simulation(cfg), std::invalid_argument);
  cfg = SimConfig{};
  cfg.scheme = PolyCodeParams(1000, 101, 40, 4);
  EXPECT_THROW(run_simulation(cfg), std::invalid_argument);
  cfg.scheme = Scheme::inflated(1000, 503, 100, 10);
  EXPECT_THROW(run_simulation(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace cthide
