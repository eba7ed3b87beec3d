#include "doctest.h"
#include "toy_instance.hpp"

#include "lfsrsat/optimizer.hpp"

#include <bit>
#include <cmath>
#include <set>
#include <sstream>

using namespace lfsrsat;

namespace {

Evaluation plain(double v)
{
  Evaluation e;
  e.value = v;
  return e;
}

Objective bit_count() { return [](const SearchPoint &p) { return plain(static_cast<double>(p.count())); }; }

std::set<std::uint64_t> as_set(const std::vector<SearchPoint> &pts)
{
  std::set<std::uint64_t> s;
  for (const auto &p : pts) s.insert(p.bits());
  return s;
}

} // namespace

TEST_CASE("search points")
{
  CHECK_THROWS_AS(SearchPoint(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(SearchPoint(16, 4), std::invalid_argument);
  CHECK_THROWS_AS(SearchPoint(1, 65), std::invalid_argument);
  const SearchPoint p(Bits{true, false, true, true, false});
  CHECK(p.bits() == 0b10110);
  CHECK(p.count() == 3);
  CHECK(p.test(0));
  CHECK_FALSE(p.test(1));
  CHECK(to_hex(p) == "16");
  CHECK(point_from_hex("16", 5) == p);
  CHECK(SearchPoint::full(64).count() == 64);
  CHECK(to_hex(SearchPoint::full(18)) == "3FFFF");
  CHECK(to_string(to_set(p, {4, 9, 2, 7, 8})) == "2,4,7");
  CHECK_THROWS_AS((void)to_set(p, {1, 2}), std::invalid_argument);
}

TEST_CASE("neighbourhoods")
{
  const SearchPoint p(0b101, 3);
  CHECK(as_set(neighborhood(p, 1, 0)) == std::set<std::uint64_t>{0b001, 0b111, 0b100});
  CHECK(neighborhood_size(p, 1) == 3);
  // 010 is the only other point; 000 is never produced
  CHECK(as_set(neighborhood(p, 3, 0)) == std::set<std::uint64_t>{0b001, 0b111, 0b100, 0b011, 0b110, 0b010});

  for (std::uint64_t bits = 1; bits < 64; ++bits) {
    const SearchPoint q(bits, 6);
    for (std::size_t rho = 1; rho <= 3; ++rho) {
      const auto n = neighborhood(q, rho, bits);
      const auto s = as_set(n);
      CHECK(s.size() == n.size());
      CHECK(n.size() == neighborhood_size(q, rho));
      CHECK_FALSE(s.contains(0));
      CHECK_FALSE(s.contains(bits));
      for (const auto &x : n) CHECK(hamming(x, q) <= rho);
      std::uint64_t expected = 0;
      for (std::uint64_t other = 1; other < 64; ++other)
        if (other != bits && std::popcount(other ^ bits) <= static_cast<int>(rho)) ++expected;
      CHECK(n.size() == expected);
    }
  }
  const SearchPoint full = SearchPoint::full(16);
  CHECK(neighborhood(full, 2, 1).size() == 16 + 120);
  CHECK(neighborhood(full, 2, 7) == neighborhood(full, 2, 7));
  CHECK(neighborhood(full, 2, 7) != neighborhood(full, 2, 8));
  // shells come in order of distance
  const auto n2 = neighborhood(full, 2, 3);
  for (std::size_t i = 0; i < 16; ++i) CHECK(hamming(n2[i], full) == 1);
  CHECK_THROWS_AS((void)neighborhood(full, 0, 1), std::invalid_argument);
}

TEST_CASE("simulated annealing finds the bit-count optimum")
{
  int hits = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SearchOptions o;
    o.seed = seed;
    const auto r = minimize_sa(bit_count(), SearchPoint::full(16), {}, o);
    CHECK(r.best_value.value <= r.start_value.value);
    if (r.best.count() == 1) ++hits;
  }
  CHECK(hits >= 49);
}

TEST_CASE("annealing stops at once when the start is already cold")
{
  SaSchedule s;
  s.t0 = 1.0;
  s.t_inf = 2.0;
  const auto r = minimize_sa(bit_count(), SearchPoint::full(8), s, {});
  CHECK(r.best == SearchPoint::full(8));
  CHECK(r.evaluated.size() == 1);
  CHECK(r.stop_reason == "temperature");
  // F(start) = 0 makes the default T0 zero
  const auto z = minimize_sa([](const SearchPoint &) { return plain(0.0); }, SearchPoint::full(8), {}, {});
  CHECK(z.evaluated.size() == 1);
  CHECK_THROWS_AS((void)minimize_sa(bit_count(), SearchPoint::full(8), SaSchedule{1.0, 1.0, {}}, {}),
    std::invalid_argument);
}

TEST_CASE("annealing accepts equal values and uphill moves at rate exp(-dF/T)")
{
  std::ostringstream log;
  SearchOptions o;
  o.seed = 11;
  o.log = &log;
  o.limits.max_evaluations = 40;
  (void)minimize_sa([](const SearchPoint &) { return plain(3.0); }, SearchPoint::full(20), SaSchedule{1.0, 0.99, {}}, o);
  std::istringstream lines(log.str());
  std::string line;
  std::getline(lines, line);
  int n = 0;
  while (std::getline(lines, line)) {
    CHECK(line.find("decision=accept") != std::string::npos);
    ++n;
  }
  CHECK(n == 39);

  // parity objective: from an even point every neighbour is one step uphill
  const double t = 1.0 / std::log(2.0);
  std::ostringstream plog;
  o.log = &plog;
  o.limits.max_evaluations = 6000;
  SaSchedule s{t, 1.0 - 1e-12, {}};
  (void)minimize_sa([](const SearchPoint &p) { return plain(static_cast<double>(p.count() % 2)); },
    SearchPoint::full(64), s, o);
  std::istringstream plines(plog.str());
  int up = 0;
  int up_accepted = 0;
  while (std::getline(plines, line)) {
    if (line.find(" F=1 ") == std::string::npos) continue;
    ++up;
    if (line.find("decision=accept") != std::string::npos) ++up_accepted;
  }
  REQUIRE(up > 1000);
  CHECK(std::abs(static_cast<double>(up_accepted) / up - 0.5) < 0.05);
}

TEST_CASE("noise guard")
{
  auto noisy = [](const SearchPoint &p) {
    Evaluation e = plain(p.count() == 6 ? 10.0 : 7.0);
    e.std_error = 5.0;
    return e;
  };
  SearchOptions o;
  o.limits.max_evaluations = 4;
  CHECK(minimize_sa(noisy, SearchPoint::full(6), {}, o).best == SearchPoint::full(6));
  CHECK(minimize_ts(noisy, SearchPoint::full(6), o).best == SearchPoint::full(6));
  o.noise_guard = false;
  CHECK(minimize_sa(noisy, SearchPoint::full(6), {}, o).best.count() == 5);
  CHECK(minimize_ts(noisy, SearchPoint::full(6), o).best.count() == 5);
}

TEST_CASE("best value never exceeds the start value")
{
  auto scrambled = [](const SearchPoint &p) {
    std::uint64_t h = p.bits() * 0x9E3779B97F4A7C15ULL;
    h ^= h >> 29;
    return plain(static_cast<double>(h % 1000));
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SearchOptions o;
    o.seed = seed;
    o.limits.max_evaluations = 300;
    const auto sa = minimize_sa(scrambled, SearchPoint::full(12), {}, o);
    const auto ts = minimize_ts(scrambled, SearchPoint::full(12), o);
    CHECK(sa.best_value.value <= sa.start_value.value);
    CHECK(ts.best_value.value <= ts.start_value.value);
    CHECK(scrambled(sa.best).value == sa.best_value.value);
  }
}

TEST_CASE("tabu search sweeps an eight-bit space once")
{
  std::size_t calls = 0;
  auto f = [&](const SearchPoint &p) {
    ++calls;
    return plain(static_cast<double>(p.count()));
  };
  const auto r = minimize_ts(f, SearchPoint::full(8), {});
  CHECK(r.best.count() == 1);
  CHECK(r.stop_reason == "exhausted");
  CHECK(r.evaluated.size() == 255);
  CHECK(calls == 255);
  CHECK(as_set(r.evaluated).size() == 255);
  CHECK(r.l1 == 255);
  CHECK(r.l2 == 0);
}

TEST_CASE("tabu search on sixteen bits")
{
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    SearchOptions o;
    o.seed = seed;
    o.limits.max_evaluations = 1000;
    const auto r = minimize_ts(bit_count(), SearchPoint::full(16), o);
    CHECK(r.best.count() == 1);
    CHECK(as_set(r.evaluated).size() == r.evaluated.size());
    CHECK(r.l1 + r.l2 == r.evaluated.size());
  }
  SearchOptions o;
  o.tabu_radius = 2;
  const auto r = minimize_ts(bit_count(), SearchPoint::full(8), o);
  CHECK(r.evaluated.size() == 255);
  CHECK(r.l2 == 0);
}

TEST_CASE("tabu restart picks the most active point, lowest mask on ties")
{
  const SearchPoint start = SearchPoint::full(4);
  auto flat = [&](const SearchPoint &p) {
    Evaluation e = plain(p == start ? 0.0 : 5.0);
    e.activity = 1.0;
    return e;
  };
  SearchOptions o;
  o.limits.max_evaluations = 8;
  auto r = minimize_ts(flat, start, o);
  REQUIRE(r.evaluated.size() == 8);
  for (std::size_t i = 5; i < 8; ++i) CHECK(hamming(r.evaluated[i], SearchPoint(0b0111, 4)) == 1);

  auto ranked = [&](const SearchPoint &p) {
    Evaluation e = plain(p == start ? 0.0 : 5.0);
    e.activity = static_cast<double>(p.bits());
    return e;
  };
  r = minimize_ts(ranked, start, o);
  for (std::size_t i = 5; i < 8; ++i) CHECK(hamming(r.evaluated[i], SearchPoint(0b1110, 4)) == 1);
}

TEST_CASE("log round trip and resume")
{
  auto bumpy = [](const SearchPoint &p) {
    Evaluation e = plain(static_cast<double>((p.bits() * 2654435761ULL) % 97) + 0.125);
    e.activity = static_cast<double>(p.bits() % 13);
    e.samples = 7;
    e.unit = "conflicts";
    return e;
  };
  const SearchPoint start = SearchPoint::full(10);

  SearchOptions whole;
  whole.seed = 5;
  whole.limits.max_evaluations = 60;
  const auto ts_all = minimize_ts(bumpy, start, whole);
  const auto sa_all = minimize_sa(bumpy, start, {}, whole);

  for (const bool annealing : {false, true}) {
    std::stringstream log;
    SearchOptions first = whole;
    first.limits.max_evaluations = 25;
    first.log = &log;
    const auto part = annealing ? minimize_sa(bumpy, start, {}, first) : minimize_ts(bumpy, start, first);
    CHECK(part.stop_reason == "evaluations");

    SearchOptions second = whole;
    second.known = read_log(log, 10);
    CHECK(second.known.size() == 25);
    second.limits.max_evaluations = 35;
    const auto rest = annealing ? minimize_sa(bumpy, start, {}, second) : minimize_ts(bumpy, start, second);
    const auto &all = annealing ? sa_all : ts_all;
    CHECK(rest.best == all.best);
    CHECK(rest.best_value.value == all.best_value.value);
    REQUIRE(rest.evaluated.size() == 35);
    CHECK(std::equal(rest.evaluated.begin(), rest.evaluated.end(), all.evaluated.begin() + 25));
  }

  std::istringstream bad("3FF k=10 n=1 unit=conflicts se=0\n");
  CHECK_THROWS_AS((void)read_log(bad, 10), std::runtime_error);
  CHECK(log_line(SearchPoint(0b11, 4), bumpy(SearchPoint(0b11, 4)), "start")
        == "3 k=2 n=7 unit=conflicts F=" + std::to_string(static_cast<int>((3 * 2654435761ULL) % 97))
             + ".125 se=0 activity=3 censored=0 decision=start");
}

TEST_CASE("estimate objective on a toy inversion instance")
{
  const auto t = testing::weakened(testing::toy_instance(2), 8);
  EstimateOptions eo;
  eo.samples = 20;
  eo.unit = CostUnit::Conflicts;
  const Objective f = estimate_objective(t.cnf, t.encoding.input_vars, eo);
  const SearchPoint full = SearchPoint::full(18);
  const Evaluation at_start = f(full);
  // full-input cubes only conflict while the assumptions propagate
  CHECK(at_start.value <= 4.0 * (1 << 18));
  CHECK(at_start.samples == 20);
  CHECK(at_start.unit == "conflicts");
  const Evaluation some = f(SearchPoint(0x3FF00, 18));
  CHECK(some.value >= 0.0);

  SearchOptions o;
  o.limits.max_evaluations = 25;
  const auto ts = minimize_ts(f, full, o);
  CHECK(ts.best_value.value <= at_start.value);
  CHECK(as_set(ts.evaluated).size() == ts.evaluated.size());
  std::ostringstream out;
  write_result(out, ts, t.encoding.input_vars);
  CHECK(out.str().find("stop evaluations\n") != std::string::npos);
}
