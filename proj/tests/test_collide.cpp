#include "doctest.h"

#include "lfsrsat/collide.hpp"

#include <algorithm>
#include <map>
#include <sstream>

using namespace lfsrsat;

namespace {

// every toy keystream with its preimages, by brute force over 2^18 keys
const std::map<Bits, std::vector<Bits>> &toy_preimages()
{
  static const auto table = [] {
    std::map<Bits, std::vector<Bits>> t;
    const GeneratorSpec spec = toy_preset();
    const std::size_t n = spec.key_length();
    for (std::uint64_t k = 0; k < (std::uint64_t{1} << n); ++k) {
      Bits key = unpack_bits(k, n);
      t[keystream(spec, key)].push_back(std::move(key));
    }
    return t;
  }();
  return table;
}

std::vector<Bits> sorted(std::vector<Bits> v)
{
  std::sort(v.begin(), v.end());
  return v;
}

// first keystreams (in table order) with the requested preimage counts
std::vector<std::pair<Bits, std::vector<Bits>>> pick(std::size_t want, bool multiple, std::size_t most = 1U << 18)
{
  std::vector<std::pair<Bits, std::vector<Bits>>> out;
  for (const auto &[ks, keys] : toy_preimages()) {
    if ((keys.size() > 1) != multiple || keys.size() > most) continue;
    out.emplace_back(ks, keys);
    if (out.size() == want) break;
  }
  return out;
}

} // namespace

TEST_CASE("toy enumeration matches the brute-force preimage sets")
{
  const GeneratorSpec spec = toy_preset();
  std::size_t total_keys = 0;
  for (const bool multiple : {true, false}) {
    for (const auto &[ks, keys] : pick(4, multiple)) {
      const CollisionReport r = find_collisions(spec, ks);
      CHECK(r.exhausted);
      CHECK(r.stop_reason == "unsat");
      CHECK(sorted(r.keys) == sorted(keys));
      CHECK(r.solves == keys.size() + 1);
      total_keys += keys.size();
    }
  }
  CHECK(total_keys >= 4 + 4 * 2);
}

TEST_CASE("a keystream without preimage yields nothing")
{
  const GeneratorSpec spec = toy_preset();
  const auto &table = toy_preimages();
  Bits ks(spec.keystream_len, false);
  for (std::uint64_t v = 0;; ++v) {
    ks = unpack_bits(v * 2654435761ULL % (std::uint64_t{1} << spec.keystream_len), spec.keystream_len);
    if (!table.contains(ks)) break;
  }
  const CollisionReport r = find_collisions(spec, ks);
  CHECK(r.keys.empty());
  CHECK(r.exhausted);
}

TEST_CASE("limit stops after one key")
{
  const GeneratorSpec spec = toy_preset();
  const auto [ks, keys] = pick(1, true).front();
  CollisionOptions o;
  o.limit = 1;
  const CollisionReport r = find_collisions(spec, ks, o);
  REQUIRE(r.keys.size() == 1);
  CHECK(keystream(spec, r.keys[0]) == ks);
  CHECK_FALSE(r.exhausted);
  CHECK(r.stop_reason == "limit");

  // with a single preimage the second pass proves there is none left
  const auto [ks1, keys1] = pick(1, false).front();
  const CollisionReport u = find_collisions(spec, ks1, o);
  CHECK(u.keys == keys1);
  CHECK(u.exhausted);
}

TEST_CASE("a tiny budget leaves the enumeration open")
{
  const GeneratorSpec spec = toy_preset();
  const auto [ks, keys] = pick(1, true).front();
  CollisionOptions o;
  o.budget.max_conflicts = 1;
  const CollisionReport r = find_collisions(spec, ks, o);
  CHECK_FALSE(r.exhausted);
  CHECK(r.stop_reason == "budget");
  for (const Bits &k : r.keys) CHECK(keystream(spec, k) == ks);
}

TEST_CASE("fixed bits restrict the preimage set")
{
  const GeneratorSpec spec = toy_preset();
  for (const auto &[ks, keys] : pick(3, true)) {
    CollisionOptions o;
    o.fixed = fix_range(keys[0], 9, 18);
    std::vector<Bits> expect;
    for (const Bits &k : keys)
      if (std::equal(k.begin() + 9, k.end(), keys[0].begin() + 9)) expect.push_back(k);
    const CollisionReport r = find_collisions(spec, ks, o);
    CHECK(r.exhausted);
    CHECK(sorted(r.keys) == sorted(expect));
  }

  CollisionOptions all;
  const auto [ks, keys] = pick(1, false).front();
  all.fixed = fix_range(keys[0], 0, 18);
  const CollisionReport r = find_collisions(spec, ks, all);
  CHECK(r.keys == keys);
  CHECK(r.exhausted);
}

TEST_CASE("split and grid routes agree with the direct route")
{
  const GeneratorSpec spec = toy_preset();
  for (const auto &[ks, keys] : pick(2, true, 3)) {
    CollisionOptions split;
    split.split = {0, 1, 2, 3};
    const CollisionReport s = find_collisions(spec, ks, split);
    CHECK(s.exhausted);
    CHECK(sorted(s.keys) == sorted(keys));

    // the grid solves each cube twice without shared learning, so keep the
    // cubes small by fixing the tail
    CollisionOptions grid = split;
    grid.fixed = fix_range(keys[0], 12, 18);
    GridOptions g;
    g.workers = 2;
    g.batch = 4;
    grid.grid = g;
    const CollisionReport direct = find_collisions(spec, ks, CollisionOptions{.fixed = grid.fixed});
    const CollisionReport r = find_collisions(spec, ks, grid);
    CHECK(r.exhausted);
    CHECK(direct.exhausted);
    CHECK(sorted(r.keys) == sorted(direct.keys));
    CHECK(r.solves == r.keys.size() + 1);
  }
}

TEST_CASE("argument errors")
{
  const GeneratorSpec spec = toy_preset();
  CHECK_THROWS_AS(find_collisions(spec, Bits(spec.keystream_len - 1)), std::invalid_argument);
  CollisionOptions bad;
  bad.fixed[18] = true;
  CHECK_THROWS_AS(find_collisions(spec, Bits(spec.keystream_len), bad), std::out_of_range);
  CollisionOptions grid;
  grid.grid = GridOptions{};
  CHECK_THROWS_AS(find_collisions(spec, Bits(spec.keystream_len), grid), std::invalid_argument);
  CHECK_THROWS_AS(fix_range(Bits(4), 3, 5), std::out_of_range);
}

TEST_CASE("A5/1 with 40 known bits: both keys of a colliding pair")
{
  const GeneratorSpec spec = a51_spec();
  const Bits a = key_from_hex(spec, "F43FF04CD4F45660");
  const Bits b = key_from_hex(spec, "7A1FF04CD4F45660");
  CollisionOptions o;
  o.fixed = fix_range(a, 24, 64);
  o.max_seconds = 300;
  const CollisionReport r = find_collisions(spec, keystream(spec, a), o);
  CHECK(r.exhausted);
  CHECK(sorted(r.keys) == sorted({a, b}));

  std::ostringstream out;
  write_collisions(out, r);
  CHECK(out.str().ends_with("exhausted yes\n"));
}
