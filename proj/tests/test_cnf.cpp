#include "doctest.h"
#include "oracles.hpp"

#include "lfsrsat/cnf.hpp"

#include <random>
#include <sstream>

using namespace lfsrsat;

TEST_CASE("literal and clause construction")
{
  CHECK(Lit::from_dimacs(-3).var() == 3);
  CHECK_FALSE(Lit::from_dimacs(-3).positive());
  CHECK((~Lit(2, true)) == Lit(2, false));
  CHECK_THROWS_AS(Lit(0, true), std::invalid_argument);
  CHECK_THROWS_AS(Clause({Lit(1, true), Lit(1, false)}), std::invalid_argument);
  CHECK_THROWS_AS(Clause({Lit(1, true), Lit(1, true)}), std::invalid_argument);
  CHECK_THROWS_AS(Cube({2, 1}, {true, false}), std::invalid_argument);
  CHECK_THROWS_AS(Cube({1, 2}, {true}), std::invalid_argument);

  Cnf cnf(2);
  CHECK_THROWS_AS(cnf.add_clause(Clause{Lit(3, true)}), std::out_of_range);
}

TEST_CASE("parse_dimacs basics")
{
  const Cnf a = parse_dimacs("p cnf 2 1\n1 -2 0\n");
  CHECK(a.num_vars() == 2);
  REQUIRE(a.num_clauses() == 1);
  CHECK(a.clauses()[0] == Clause{Lit(1, true), Lit(2, false)});

  const Cnf empty = parse_dimacs("p cnf 1 0\n");
  CHECK(empty.num_vars() == 1);
  CHECK(empty.num_clauses() == 0);
  CHECK(evaluate(empty, {false}));

  const Cnf multi = parse_dimacs("c hello\nc world\np cnf 3 2\n1 2\n 3 0 -1\n0\n");
  CHECK(multi.num_clauses() == 2);
  CHECK(multi.comments().size() == 2);
  CHECK(multi.comments()[0] == "hello");
  CHECK(multi.clauses()[1] == Clause{Lit(1, false)});

  // duplicate literals are merged
  CHECK(parse_dimacs("p cnf 2 1\n1 1 2 0\n").clauses()[0].size() == 2);
}

TEST_CASE("parse_dimacs errors carry line numbers")
{
  auto line_of = [](const char *text) -> std::size_t {
    try {
      (void)parse_dimacs(text);
    } catch (const DimacsError &e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of("p cnf x 1\n1 0\n") == 1);
  CHECK(line_of("c c\np cnf 2 1\n1 3 0\n") == 3);
  CHECK(line_of("p cnf 2 1\n1 2\n") == 2);
  CHECK(line_of("p cnf 2 2\n1 2 0\n") == 2);
  CHECK(line_of("1 2 0\n") == 1);
  CHECK(line_of("p cnf 2 1\n1 -1 0\n") == 2);
  CHECK(line_of("p cnf 2 1\n1 abc 0\n") == 2);
  CHECK_THROWS_AS((void)parse_dimacs(""), DimacsError);
}

TEST_CASE("dimacs round trip on random formulas")
{
  std::mt19937_64 rng(1);
  for (int i = 0; i < 100; ++i) {
    std::uniform_int_distribution<Var> vars(1, 30);
    std::uniform_int_distribution<std::size_t> count(0, 60);
    Cnf cnf = testing::random_cnf(rng, vars(rng), count(rng), 5);
    cnf.add_comment("round trip " + std::to_string(i));
    const std::string text = to_dimacs(cnf);
    CHECK(text.find('\r') == std::string::npos);
    const Cnf back = parse_dimacs(text);
    CHECK(back == cnf);
    CHECK(back.comments() == cnf.comments());
  }
}

TEST_CASE("apply_cube hand examples")
{
  Cnf c(2);
  c.add_clause(Clause{Lit(1, true), Lit(2, true)});
  c.add_clause(Clause{Lit(1, false), Lit(2, true)});
  const Cnf r = apply_cube(c, Cube({1}, {true}));
  REQUIRE(r.num_clauses() == 1);
  CHECK(r.clauses()[0] == Clause{Lit(2, true)});
  CHECK(r.num_vars() == 2);

  Cnf unit(1);
  unit.add_clause(Clause{Lit(1, true)});
  const Cnf falsified = apply_cube(unit, Cube({1}, {false}));
  REQUIRE(falsified.num_clauses() == 1);
  CHECK(falsified.clauses()[0].empty());
}

TEST_CASE("evaluate")
{
  Cnf c(2);
  c.add_clause(Clause{Lit(1, true), Lit(2, false)});
  CHECK(evaluate(c, {true, true}));
  CHECK_THROWS_AS((void)evaluate(c, {true}), std::invalid_argument);

  Cnf contradiction(1);
  contradiction.add_clause(Clause{Lit(1, true)});
  contradiction.add_clause(Clause{Lit(1, false)});
  CHECK_FALSE(evaluate(contradiction, {true}));
  CHECK_FALSE(evaluate(contradiction, {false}));
}

TEST_CASE("apply_cube agrees with evaluate on full assignments")
{
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    std::uniform_int_distribution<Var> vars(1, 12);
    const Var n = vars(rng);
    const Cnf cnf = testing::random_cnf(rng, n, rng() % 20, 4);
    Bits alpha(n);
    std::vector<Var> all(n);
    for (Var v = 0; v < n; ++v) {
      all[v] = v + 1;
      alpha[v] = (rng() & 1U) != 0;
    }
    const Cnf reduced = apply_cube(cnf, Cube(all, alpha));
    CHECK((reduced.num_clauses() == 0) == evaluate(cnf, alpha));
  }
}

TEST_CASE("apply_cube soundness and monotonicity")
{
  std::mt19937_64 rng(3);
  for (int i = 0; i < 300; ++i) {
    const Var n = 2 + static_cast<Var>(rng() % 9);
    const Cnf cnf = testing::random_cnf(rng, n, rng() % 25, 4);
    std::vector<Var> vars;
    Bits vals;
    for (Var v = 1; v <= n; ++v) {
      if (rng() % 3 == 0) {
        vars.push_back(v);
        vals.push_back((rng() & 1U) != 0);
      }
    }
    const Cube cube(vars, vals);
    const Cnf reduced = apply_cube(cnf, cube);
    CHECK(reduced.num_clauses() <= cnf.num_clauses());
    std::size_t max_before = 0;
    std::size_t max_after = 0;
    for (const auto &cl : cnf.clauses()) max_before = std::max(max_before, cl.size());
    for (const auto &cl : reduced.clauses()) max_after = std::max(max_after, cl.size());
    CHECK(max_after <= max_before);

    // every total extension of the cube evaluates identically
    for (std::uint32_t tau = 0; tau < (1U << n); ++tau) {
      Bits full(n);
      for (Var v = 0; v < n; ++v) full[v] = ((tau >> v) & 1U) != 0;
      if (!agrees_with(cube, full)) continue;
      CHECK(evaluate(cnf, full) == evaluate(reduced, full));
    }
  }
}

TEST_CASE("bit strings")
{
  CHECK(bits_to_string({true, false, true}) == "101");
  CHECK(bits_from_string("1 0\n1") == Bits{true, false, true});
  CHECK_THROWS_AS(bits_from_string("102"), std::invalid_argument);
}
