// Command-line front end: encode, match, simulate, attack, analyze, serve.
#include "cthide/analysis.hpp"
#include "cthide/attacks.hpp"
#include "cthide/encoder.hpp"
#include "cthide/io.hpp"
#include "cthide/matcher.hpp"
#include "cthide/socket_transport.hpp"
#include "cthide/tracing.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace cthide;

namespace {

struct Globals {
  std::string params;
  std::uint64_t seed = 1;
  std::string csv;
};

Scheme require_params(const Globals& g) {
  if (g.params.empty()) throw CLI::ValidationError("--params", "a params file is required here");
  return load_params(g.params);
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string read_first_line(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
  }
  throw std::runtime_error(path + " holds no encoding");
}

// "RxC" -> rows, cols
std::pair<std::uint64_t, std::uint64_t> parse_grid(const std::string& s) {
  const auto x = s.find_first_of("xX");
  if (x == std::string::npos) throw CLI::ValidationError("--grid", "expected RxC, e.g. 100x100");
  return {detail::parse_int<std::uint64_t>(s.substr(0, x), "grid rows"),
          detail::parse_int<std::uint64_t>(s.substr(x + 1), "grid cols")};
}

// "USER@EPOCH", USER either an agent index or "agentN".
std::pair<std::size_t, Epoch> parse_infect(const std::string& s) {
  const auto at = s.find('@');
  if (at == std::string::npos) throw CLI::ValidationError("--infect", "expected USER@EPOCH");
  std::string user = s.substr(0, at);
  if (user.rfind("agent", 0) == 0) user = user.substr(5);
  return {detail::parse_int<std::size_t>(user, "infected user"),
          detail::parse_int<Epoch>(s.substr(at + 1), "infection epoch")};
}

int cmd_encode(const Globals& g, const std::vector<std::string>& points, std::size_t count, bool basic,
               bool unsorted) {
  const Scheme scheme = require_params(g);
  std::mt19937_64 rng(g.seed);
  std::optional<std::ofstream> csv;
  if (!g.csv.empty()) {
    csv = open_csv(g.csv);
    *csv << "x,copy,encoding\n";
  }
  for (const auto& text : points) {
    const Nat x = parse_nat(text);
    for (std::size_t c = 0; c < count; ++c) {
      std::string line;
      if (unsorted) {
        if (scheme.is_rrns() || scheme.is_inflated()) {
          throw std::invalid_argument("--unsorted needs a plain polynomial code");
        }
        line = format_coords(encode_unsorted(x, scheme.poly(), rng).coords);
      } else {
        line = format_encoding(basic ? scheme.sorted_basic(x) : scheme.encode(x, rng));
      }
      std::cout << line << '\n';
      if (csv) *csv << x << ',' << c << ",\"" << line << "\"\n";
    }
  }
  return 0;
}

int cmd_match(const Globals& g, const std::string& db_path, const std::string& query,
              std::optional<std::size_t> tau_opt, bool exact) {
  const Scheme scheme = require_params(g);
  std::ifstream in(db_path);
  if (!in) throw std::runtime_error("cannot open " + db_path);
  const auto db = load_entries(in);
  const auto e = parse_encoding(query);
  std::vector<EntryId> hits;
  if (exact) {
    hits = exact_lookup(make_exact_table(db), e);
  } else {
    const std::size_t tau = tau_opt.value_or(scheme.tau());
    hits = build_index(db, scheme.n(), tau).query(e, tau);
  }
  std::optional<std::ofstream> csv;
  if (!g.csv.empty()) {
    csv = open_csv(g.csv);
    *csv << "entry,user_id,received_at,distance\n";
  }
  for (EntryId id : hits) {
    const auto& entry = db[id];
    const auto d = hamming(entry.encoding, e);
    std::cout << entry.user_id << '\t' << entry.received_at << '\t' << d << '\n';
    if (csv) *csv << id << ',' << entry.user_id << ',' << entry.received_at << ',' << d << '\n';
  }
  std::cerr << hits.size() << " match(es) among " << db.size() << " entries\n";
  return 0;
}

int cmd_simulate(const Globals& g, std::size_t agents, Epoch epochs, const std::string& grid,
                 const std::string& infect, std::optional<Epoch> window, std::uint64_t dilation,
                 std::uint64_t spread, const std::string& out_path) {
  SimConfig cfg;
  cfg.agents = agents;
  const auto [rows, cols] = parse_grid(grid);
  cfg.grid = GridSpec{rows, cols, epochs};
  cfg.scheme = g.params.empty() ? Scheme::inflated(cfg.grid.world(), 503, 100, 10) : load_params(g.params);
  cfg.seed = g.seed;
  if (infect.empty()) {
    cfg.infected_agent = 0;
    cfg.infect_epoch = epochs - 1;
  } else {
    std::tie(cfg.infected_agent, cfg.infect_epoch) = parse_infect(infect);
  }
  cfg.window = window.value_or(cfg.infect_epoch + 1);
  cfg.dilation = dilation;
  cfg.start_spread = spread;
  const auto r = run_simulation(cfg);

  std::cout << "agents " << cfg.agents << ", grid " << rows << "x" << cols << ", epochs " << epochs << ", m "
            << cfg.scheme.m() << ", tau " << cfg.scheme.tau() << (cfg.scheme.is_inflated() ? " (inflated)" : "")
            << '\n'
            << "uninfected reports " << r.uninfected_reports << ", infected reports " << r.infected_reports
            << ", server entries " << r.server_entries << '\n'
            << "exposed " << r.exposed << ", missed " << r.missed << ", false alarms " << r.false_alarms
            << ", misplaced " << r.misplaced << '\n';
  const std::string path = !out_path.empty() ? out_path : g.csv;
  if (!path.empty()) {
    auto out = open_csv(path);
    out << "user_id,exposed,contact_epochs,alerts,unrecoverable,misplaced,recovered\n";
    for (const auto& a : r.agents) {
      std::string recovered;
      for (const auto& x : std::set<Exposure>(a.recovered.begin(), a.recovered.end())) {
        if (!recovered.empty()) recovered += ' ';
        recovered += std::to_string(x.epoch) + '/' + std::to_string(x.cell);
      }
      out << a.user_id << ',' << a.exposed << ',' << a.contact_epochs << ',' << a.alerts << ',' << a.unrecoverable
          << ',' << a.misplaced << ',' << recovered << '\n';
    }
  }
  return r.missed == 0 && r.false_alarms == 0 && r.misplaced == 0 ? 0 : 2;
}

int cmd_attack(const Globals& g, const std::string& kind, const std::string& target_path,
               std::uint64_t budget, std::optional<std::size_t> tau_opt, const std::string& mode,
               bool collect_all) {
  const Scheme scheme = require_params(g);
  const auto e = parse_encoding(read_first_line(target_path));
  if (e.size() != scheme.n()) throw std::invalid_argument("target length does not match n");
  const std::size_t tau = tau_opt.value_or(scheme.tau());
  std::mt19937_64 rng(g.seed);
  AttackReport r;
  if (kind == "brute") {
    r = brute_force_attack(e, scheme, tau, collect_all);
  } else if (kind == "table") {
    detail::Stopwatch build;
    const TableAttack table(scheme, rng);
    std::cerr << "table of " << table.size() << " encodings built in " << build.seconds() << " s\n";
    r = table.query(e, tau);
  } else {
    r = direct_attack(e, scheme, tau, rng, mode == "exhaustive" ? DirectMode::kExhaustive : DirectMode::kRandomized,
                      budget);
  }
  std::cout << "recovered " << (r.recovered ? r.recovered->str() : std::string("none")) << '\n'
            << "matches " << r.matches.size() << ", encodings " << r.encodings << ", solves " << r.solves
            << ", iterations " << r.iterations << " (" << r.successful_iterations << " successful)"
            << (r.budget_exhausted ? ", budget exhausted" : "") << ", " << r.wall_time << " s\n";
  if (kind == "direct") {
    std::cout << "expected solves " << expected_direct_solves(scheme).str() << '\n';
  }
  if (kind == "table" && !scheme.is_rrns()) {
    const auto proj = table_attack_projection(std::log10(scheme.world().convert_to<double>()),
                                              static_cast<double>(scheme.alphabet()), scheme.n(), tau);
    std::cout << "full table " << proj.raw_bytes.str() << " bytes, indexed " << proj.indexed_bytes.str() << " bytes\n";
  }
  if (!g.csv.empty()) {
    auto out = open_csv(g.csv);
    out << "kind,recovered,matches,encodings,solves,iterations,successful_iterations,budget_exhausted,wall_time\n"
        << kind << ',' << (r.recovered ? r.recovered->str() : std::string()) << ',' << r.matches.size() << ','
        << r.encodings << ',' << r.solves << ',' << r.iterations << ',' << r.successful_iterations << ','
        << r.budget_exhausted << ',' << r.wall_time << '\n';
  }
  return r.recovered ? 0 : 3;
}

int cmd_bound(const Globals& g, double p, std::size_t n, std::size_t tau) {
  const auto s = fp_bound(p, n, tau);
  std::cout << "s(" << p << ", " << n << ", " << tau << ") = " << s.str() << '\n';
  if (!g.csv.empty()) {
    auto out = open_csv(g.csv);
    out << "p,n,tau,log10_bound\n" << p << ',' << n << ',' << tau << ',' << s.log10 << '\n';
  }
  return 0;
}

int cmd_mc(const Globals& g, Coord p, std::size_t n, std::size_t tau, std::uint64_t trials,
           const std::string& query, unsigned streams) {
  SortedEncoding e;
  if (query.empty()) {
    std::mt19937_64 rng(g.seed);
    std::vector<Coord> z(n);
    for (auto& v : z) v = rng() % p;
    e = SortedEncoding::sorting(z);
  } else {
    e = parse_encoding(query);
  }
  const auto mc = mc_match_prob_parallel(p, n, tau, e, trials, g.seed, streams);
  const double bound = fp_bound(static_cast<double>(p), n, tau).value();
  std::cout << "query " << format_encoding(e) << '\n'
            << "hits " << mc.hits << "/" << mc.trials << ", estimate " << mc.estimate << ", 99% interval ["
            << mc.lower << ", " << mc.upper << "], bound " << bound << (mc.upper <= bound ? " (below)" : " (ABOVE)")
            << '\n';
  if (!g.csv.empty()) {
    auto out = open_csv(g.csv);
    out << "p,n,tau,trials,hits,estimate,lower,upper,bound\n"
        << p << ',' << n << ',' << tau << ',' << mc.trials << ',' << mc.hits << ',' << mc.estimate << ','
        << mc.lower << ',' << mc.upper << ',' << bound << '\n';
  }
  return 0;
}

int cmd_lemma1(const Globals& g, std::uint64_t trials) {
  const Scheme scheme = g.params.empty() ? Scheme(PolyCodeParams(17 * 17 * 17, 17, 12, 2)) : load_params(g.params);
  if (scheme.is_rrns() || scheme.is_inflated()) throw std::invalid_argument("lemma1 needs a plain polynomial code");
  std::mt19937_64 rng(g.seed);
  const auto r = lemma1_check(scheme.poly(), trials, rng);
  std::cout << "same-point pairs " << r.same_pairs << ", beyond tau " << r.same_violations << '\n'
            << "distinct pairs " << r.distinct_pairs << ", within tau " << r.distinct_violations
            << ", smallest distance " << r.min_distinct_distance << '\n';
  if (!g.csv.empty()) {
    auto out = open_csv(g.csv);
    out << "same_pairs,same_violations,distinct_pairs,distinct_violations,min_distinct_distance\n"
        << r.same_pairs << ',' << r.same_violations << ',' << r.distinct_pairs << ',' << r.distinct_violations
        << ',' << r.min_distinct_distance << '\n';
  }
  return r.same_violations + r.distinct_violations == 0 ? 0 : 2;
}

int cmd_table1(const Globals& g, const std::string& world, double database) {
  const auto rows = table1_report(parse_nat(world), database);
  std::cout << "method      n     p     m   k   tau  bits  published  log10(D^2 s)  log10(attack)\n";
  for (const auto& r : rows) {
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %4zu %5.0f %4zu %3zu %4zu %5zu %6zu%-4s %12.2f %13.2f", r.method.c_str(),
                  r.n, r.p, r.m, r.k, r.tau, r.bits, r.published_bits, r.bits_flagged() ? " (!)" : "",
                  r.false_positives.log10, r.attack.log10);
    std::cout << line << '\n';
  }
  const auto& res = rows.back();
  std::cout << "residue moduli " << res.moduli << "; sum of log2 moduli rounds up to " << res.residue_bits
            << " bits\n";
  if (!g.csv.empty()) {
    auto out = open_csv(g.csv);
    write_param_rows_csv(out, rows);
  }
  return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const Globals& g, std::uint16_t port) {
  ServerState state(require_params(g));
  SocketServer server(state, port);
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  std::cerr << "listening on 127.0.0.1:" << server.port() << '\n';
  server.run(g_stop);
  std::cerr << "stored " << state.stored() << " entries, " << state.infected_log().size() << " infected reports\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sorted, corrupted polynomial and residue codes for contact tracing"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--params", g.params, "key=value parameter file");
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--csv", g.csv, "write results as CSV to this path");

  auto* encode = app.add_subcommand("encode", "encode world points");
  std::vector<std::string> points;
  std::size_t count = 1;
  bool basic = false, unsorted = false;
  encode->add_option("points", points, "world points (decimal, or B^E)")->required();
  encode->add_option("--count", count, "encodings per point")->capture_default_str();
  encode->add_flag("--basic", basic, "print the uncorrupted sorted code");
  encode->add_flag("--unsorted", unsorted, "unsorted variant (polynomial code)");

  auto* match = app.add_subcommand("match", "look up an encoding in an entry store");
  std::string db_path, query;
  std::optional<std::size_t> match_tau;
  bool exact = false;
  match->add_option("--db", db_path, "entry store: user_id<TAB>received_at<TAB>coords")->required();
  match->add_option("--query", query, "comma-separated sorted coordinates")->required();
  match->add_option("--tau", match_tau, "threshold (default 2k)");
  match->add_flag("--exact", exact, "exact lookup (deterministic mode)");

  auto* simulate = app.add_subcommand("simulate", "random-walk agents against one server");
  std::size_t agents = 50;
  Epoch epochs = 50;
  std::string grid = "100x100", infect, out_path;
  std::optional<Epoch> window;
  std::uint64_t dilation = 0, spread = 8;
  simulate->add_option("--agents", agents)->capture_default_str();
  simulate->add_option("--epochs", epochs)->capture_default_str();
  simulate->add_option("--grid", grid, "RxC cells")->capture_default_str();
  simulate->add_option("--infect", infect, "USER@EPOCH (default agent0 at the last epoch)");
  simulate->add_option("--window", window, "epochs re-reported on infection (default: all so far)");
  simulate->add_option("--dilation", dilation, "Chebyshev radius of reported neighbourhoods")->capture_default_str();
  simulate->add_option("--spread", spread, "side of the starting square")->capture_default_str();
  simulate->add_option("--out", out_path, "per-agent report CSV");

  auto* attack = app.add_subcommand("attack", "recover x from a released encoding");
  std::string kind = "direct", target, mode = "randomized";
  std::uint64_t budget = 100'000'000;
  std::optional<std::size_t> attack_tau;
  bool collect_all = false;
  attack->add_option("--kind", kind)->check(CLI::IsMember({"brute", "table", "direct"}))->capture_default_str();
  attack->add_option("--target", target, "file with one encoding, decimal or 0x-hex coordinates")->required();
  attack->add_option("--budget", budget, "solve budget (direct)")->capture_default_str();
  attack->add_option("--tau", attack_tau, "threshold (default 2k)");
  attack->add_option("--mode", mode, "direct attack mode")
      ->check(CLI::IsMember({"randomized", "exhaustive"}))
      ->capture_default_str();
  attack->add_flag("--all", collect_all, "brute force: list every match");

  auto* analyze = app.add_subcommand("analyze", "bounds, Monte Carlo, separation check, parameter table");
  analyze->require_subcommand(1);
  auto* bound = analyze->add_subcommand("bound", "false-match bound s(p, n, tau)");
  double bp = 503;
  std::size_t bn = 100, btau = 20;
  bound->add_option("--p", bp)->capture_default_str();
  bound->add_option("--n", bn)->capture_default_str();
  bound->add_option("--tau", btau)->capture_default_str();
  auto* mc = analyze->add_subcommand("mc", "Monte Carlo match probability against the bound");
  Coord mp = 11;
  std::size_t mn = 5, mtau = 2;
  std::uint64_t trials = 1'000'000;
  std::string mquery;
  unsigned streams = 4;
  mc->add_option("--p", mp)->capture_default_str();
  mc->add_option("--n", mn)->capture_default_str();
  mc->add_option("--tau", mtau)->capture_default_str();
  mc->add_option("--trials", trials)->capture_default_str();
  mc->add_option("--query", mquery, "sorted query vector (default: random)");
  mc->add_option("--streams", streams, "parallel rng streams")->capture_default_str();
  auto* lemma = analyze->add_subcommand("lemma1", "separation of the unsorted variant");
  std::uint64_t ltrials = 10'000;
  lemma->add_option("--trials", ltrials)->capture_default_str();
  auto* table = analyze->add_subcommand("table1", "recompute the parameter comparison table");
  std::string world = "10^19";
  double database = 1e14;
  table->add_option("--world", world)->capture_default_str();
  table->add_option("--db", database, "database size D")->capture_default_str();

  auto* serve = app.add_subcommand("serve", "run the matching server on a loopback socket");
  std::uint16_t port = 0;
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*encode) return cmd_encode(g, points, count, basic, unsorted);
    if (*match) return cmd_match(g, db_path, query, match_tau, exact);
    if (*simulate) return cmd_simulate(g, agents, epochs, grid, infect, window, dilation, spread, out_path);
    if (*attack) return cmd_attack(g, kind, target, budget, attack_tau, mode, collect_all);
    if (*bound) return cmd_bound(g, bp, bn, btau);
    if (*mc) return cmd_mc(g, mp, mn, mtau, trials, mquery, streams);
    if (*lemma) return cmd_lemma1(g, ltrials);
    if (*table) return cmd_table1(g, world, database);
    if (*serve) return cmd_serve(g, port);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
