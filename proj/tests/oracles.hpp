// Test-only oracles. Nothing here calls into the solver, the partitioner or
// the grid, so they can be used to check those independently.
#ifndef LFSRSAT_TESTS_ORACLES_HPP
#define LFSRSAT_TESTS_ORACLES_HPP

#include "lfsrsat/cnf.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace lfsrsat::testing {

/// Random clauses of exactly `width` distinct variables (width <= vars).
inline Cnf random_kcnf(std::mt19937_64 &rng, Var vars, std::size_t clauses, std::size_t width)
{
  Cnf cnf(vars);
  std::uniform_int_distribution<Var> pick(1, vars);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t c = 0; c < clauses; ++c) {
    std::vector<Lit> lits;
    while (lits.size() < width) {
      const Var v = pick(rng);
      if (std::any_of(lits.begin(), lits.end(), [&](Lit l) { return l.var() == v; })) continue;
      lits.emplace_back(v, sign(rng));
    }
    cnf.add_clause(Clause(std::move(lits)));
  }
  return cnf;
}

/// Random clauses of mixed width 1..max_width, occasionally empty formulas.
inline Cnf random_cnf(std::mt19937_64 &rng, Var vars, std::size_t clauses, std::size_t max_width)
{
  Cnf cnf(vars);
  std::uniform_int_distribution<std::size_t> width(1, std::min<std::size_t>(max_width, vars));
  std::uniform_int_distribution<Var> pick(1, vars);
  std::bernoulli_distribution sign(0.5);
  for (std::size_t c = 0; c < clauses; ++c) {
    const std::size_t w = width(rng);
    std::vector<Lit> lits;
    while (lits.size() < w) {
      const Var v = pick(rng);
      if (std::any_of(lits.begin(), lits.end(), [&](Lit l) { return l.var() == v; })) continue;
      lits.emplace_back(v, sign(rng));
    }
    cnf.add_clause(Clause(std::move(lits)));
  }
  return cnf;
}

/// Exhaustive truth-table search, 64 assignments per machine word. Returns
/// the lexicographically first model (variable 1 least significant).
inline std::optional<Bits> brute_force_model(const Cnf &cnf)
{
  const Var n = cnf.num_vars();
  if (n > 26) throw std::invalid_argument("brute force limited to 26 variables");
  static constexpr std::uint64_t lane_pattern[6] = {0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL,
    0xF0F0F0F0F0F0F0F0ULL, 0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
  const std::uint64_t valid = n >= 6 ? ~0ULL : ((1ULL << (1U << n)) - 1ULL);
  const std::uint64_t words = n > 6 ? (1ULL << (n - 6)) : 1ULL;
  for (std::uint64_t w = 0; w < words; ++w) {
    std::uint64_t acc = valid;
    for (const auto &clause : cnf.clauses()) {
      std::uint64_t m = 0;
      for (const Lit l : clause) {
        const Var i = l.var() - 1;
        std::uint64_t x = 0;
        if (i < 6) x = lane_pattern[i];
        else x = ((w >> (i - 6)) & 1ULL) ? ~0ULL : 0ULL;
        m |= l.positive() ? x : ~x;
      }
      acc &= m;
      if (acc == 0) break;
    }
    if (acc != 0) {
      const auto lane = static_cast<std::uint64_t>(std::countr_zero(acc));
      const std::uint64_t index = (w << 6U) | lane;
      Bits model(n);
      for (Var v = 0; v < n; ++v) model[v] = ((index >> v) & 1ULL) != 0;
      return model;
    }
  }
  return std::nullopt;
}

/// Calls `visit(model)` for every satisfying assignment, in index order.
template<typename Visit> void for_each_model(const Cnf &cnf, Visit visit)
{
  const Var n = cnf.num_vars();
  if (n > 26) throw std::invalid_argument("brute force limited to 26 variables");
  static constexpr std::uint64_t lane_pattern[6] = {0xAAAAAAAAAAAAAAAAULL, 0xCCCCCCCCCCCCCCCCULL,
    0xF0F0F0F0F0F0F0F0ULL, 0xFF00FF00FF00FF00ULL, 0xFFFF0000FFFF0000ULL, 0xFFFFFFFF00000000ULL};
  const std::uint64_t valid = n >= 6 ? ~0ULL : ((1ULL << (1U << n)) - 1ULL);
  const std::uint64_t words = n > 6 ? (1ULL << (n - 6)) : 1ULL;
  for (std::uint64_t w = 0; w < words; ++w) {
    std::uint64_t acc = valid;
    for (const auto &clause : cnf.clauses()) {
      std::uint64_t m = 0;
      for (const Lit l : clause) {
        const Var i = l.var() - 1;
        const std::uint64_t x = i < 6 ? lane_pattern[i] : (((w >> (i - 6)) & 1ULL) ? ~0ULL : 0ULL);
        m |= l.positive() ? x : ~x;
      }
      acc &= m;
      if (acc == 0) break;
    }
    while (acc != 0) {
      const auto lane = static_cast<std::uint64_t>(std::countr_zero(acc));
      acc &= acc - 1;
      const std::uint64_t index = (w << 6U) | lane;
      Bits model(n);
      for (Var v = 0; v < n; ++v) model[v] = ((index >> v) & 1ULL) != 0;
      visit(model);
    }
  }
}

inline bool brute_force_sat(const Cnf &cnf) { return brute_force_model(cnf).has_value(); }

/// Checks that `clause` holds in every model of `cnf` by refuting cnf & !clause.
inline bool entails(const Cnf &cnf, const Clause &clause)
{
  Cnf probe = cnf;
  for (const Lit l : clause) probe.add_clause(Clause{~l});
  return !brute_force_sat(probe);
}

} // namespace lfsrsat::testing

#endif
