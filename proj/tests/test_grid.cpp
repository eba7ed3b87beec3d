#include "doctest.h"
#include "toy_instance.hpp"

#include "lfsrsat/grid.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

using namespace lfsrsat;

namespace {

// toy instance with its last 8 key bits fixed; for an UNSAT fixture one of
// them is wrong, and satisfiability is settled by simulating all prefixes
struct Fixture
{
  testing::ToyInstance t;
  bool sat = false;
};

Fixture fixture(std::uint64_t seed, bool want_sat)
{
  for (std::uint64_t s = seed;; ++s) {
    auto t = testing::toy_instance(s);
    Bits suffix(t.key.end() - 8, t.key.end());
    if (!want_sat) suffix.back() = !suffix.back();
    for (std::size_t i = 0; i < 8; ++i) t.cnf.add_clause(Clause{Lit(t.encoding.input_vars[10 + i], suffix[i])});
    bool sat = false;
    for (std::uint64_t p = 0; p < 1024 && !sat; ++p) {
      Bits key = unpack_bits(p, 10);
      key.insert(key.end(), suffix.begin(), suffix.end());
      sat = keystream(t.spec, key) == t.keystream;
    }
    if (sat == want_sat) return {std::move(t), sat};
  }
}

DecompositionSet prefix_set(const testing::ToyInstance &t, std::size_t k)
{
  return DecompositionSet(testing::input_prefix(t.encoding, k));
}

std::string temp_path(const std::string &name)
{
  const auto p = std::filesystem::temp_directory_path() / ("lfsrsat_" + std::to_string(::getpid()) + "_" + name);
  std::filesystem::remove(p);
  return p.string();
}

// true if any unit went out after the certificate was accepted
bool dispatch_after_sat(const GridReport &r)
{
  std::size_t last = r.events.size();
  for (std::size_t i = 0; i < r.events.size(); ++i)
    if (r.events[i].kind == GridEvent::Validated) last = i;
  for (std::size_t i = last; i < r.events.size(); ++i)
    if (r.events[i].kind == GridEvent::Dispatch) return true;
  return false;
}

void check_sat_model(const testing::ToyInstance &t, const GridReport &r)
{
  REQUIRE(r.status == GridStatus::Sat);
  CHECK(evaluate(t.cnf, r.model));
  const Bits key = extract_input(t.encoding, t.cnf, r.model);
  CHECK(keystream(t.spec, key) == t.keystream);
}

} // namespace

TEST_CASE("frames")
{
  const wire::Frame f{wire::FrameType::Result, {1, 2, 3, 250}};
  const auto bytes = wire::encode(f);
  REQUIRE(bytes.size() == wire::header_size + 4);
  CHECK(bytes[0] == 0xA5);
  CHECK(bytes[1] == 1);
  CHECK(bytes[2] == 2);
  CHECK(bytes[3] == 4);
  CHECK(bytes[6] == 0);

  wire::FrameReader r;
  for (std::size_t rep = 0; rep < 3; ++rep)
    for (const auto b : bytes) r.feed(&b, 1);
  for (int i = 0; i < 3; ++i) {
    const auto g = r.next();
    REQUIRE(g.has_value());
    CHECK(*g == f);
  }
  CHECK_FALSE(r.next().has_value());

  auto broken = bytes;
  broken[0] = 0x5A;
  wire::FrameReader bad;
  bad.feed(broken.data(), broken.size());
  CHECK_THROWS_AS((void)bad.next(), wire::ProtocolError);
  broken = bytes;
  broken[1] = 2;
  wire::FrameReader version;
  version.feed(broken.data(), broken.size());
  CHECK_THROWS_AS((void)version.next(), wire::ProtocolError);
  broken = bytes;
  broken[2] = 9;
  wire::FrameReader type;
  type.feed(broken.data(), broken.size());
  CHECK_THROWS_AS((void)type.next(), wire::ProtocolError);

  const auto payload = wire::Writer().u8(7).u32(0xDEADBEEF).u64(1ULL << 40).f64(0.25).str("abc").take();
  wire::Reader rd(payload);
  CHECK(rd.u8() == 7);
  CHECK(rd.u32() == 0xDEADBEEF);
  CHECK(rd.u64() == 1ULL << 40);
  CHECK(rd.f64() == 0.25);
  CHECK(rd.str() == "abc");
  rd.finish();
  CHECK_THROWS_AS((void)rd.u8(), wire::ProtocolError);
}

TEST_CASE("assignment and result messages round trip")
{
  Assignment a;
  a.unit = {3, 24, 8, "ab12", DecompositionSet({2, 5, 9}), {}};
  a.unit.budget.max_conflicts = 500;
  a.replica = 1;
  a.attempt = 2;
  CHECK(decode_assignment(encode_assignment(a)) == a);
  a.unit.budget.max_seconds = 1.5;
  CHECK(decode_assignment(encode_assignment(a)) == a);

  WorkResult r;
  r.unit = 3;
  r.replica = 1;
  r.attempt = 2;
  r.worker = 4;
  r.claim = Claim::Sat;
  r.cube = 27;
  r.model = {true, false, true, true, false, false, false, false, true};
  r.conflicts = 99;
  r.seconds = 0.125;
  CHECK(decode_result(encode_result(r)) == r);
  CHECK_THROWS_AS((void)decode_result(encode_assignment(a)), wire::ProtocolError);
  auto f = encode_result(r);
  f.payload.pop_back();
  CHECK_THROWS_AS((void)decode_result(f), wire::ProtocolError);
}

TEST_CASE("cnf digest")
{
  Cnf c(2);
  c.add_clause(Clause{Lit(1, true), Lit(2, false)});
  CHECK(cnf_digest(c) == "16c839d02401701c2a72e7c21131959b9c5ca74b8cbd550866d527bd1289c868");
  Cnf d = c;
  d.add_comment("ignored");
  CHECK(cnf_digest(d) == cnf_digest(c));
  d.add_clause(Clause{Lit(2, true)});
  CHECK(cnf_digest(d) != cnf_digest(c));
}

TEST_CASE("work generation")
{
  WorkGenerator g(DecompositionSet({1, 2, 3, 4}), 8, "d");
  CHECK(g.unit_count() == 2);
  const auto u0 = g.next();
  const auto u1 = g.next();
  REQUIRE(u0);
  REQUIRE(u1);
  CHECK(u0->first == 0);
  CHECK(u0->count == 8);
  CHECK(u1->first == 8);
  CHECK(u1->count == 8);
  CHECK_FALSE(g.next().has_value());

  std::mt19937_64 rng(8);
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = 1 + rng() % 12;
    const std::uint64_t batch = 1 + rng() % 300;
    std::vector<Var> vars;
    for (Var v = 1; v <= k; ++v) vars.push_back(v);
    WorkGenerator w(DecompositionSet(vars), batch, "d");
    std::vector<int> covered(1ULL << k, 0);
    std::uint64_t units = 0;
    while (auto u = w.next()) {
      CHECK(u->id == units);
      CHECK(u->count >= 1);
      CHECK(u->count <= batch);
      for (std::uint64_t j = u->first; j < u->first + u->count; ++j) ++covered[j];
      ++units;
    }
    CHECK(units == w.unit_count());
    CHECK(std::all_of(covered.begin(), covered.end(), [](int c) { return c == 1; }));
  }

  std::vector<Var> big;
  for (Var v = 1; v <= 31; ++v) big.push_back(v);
  WorkGenerator huge(DecompositionSet(big), 1U << 20, "d");
  CHECK(huge.cube_count() == 1ULL << 31);
  CHECK(huge.unit_count() == 2048);
  CHECK(huge.unit(2047).first == (1ULL << 31) - (1U << 20));
  CHECK(huge.next({0, 1, 2})->id == 3);

  big.clear();
  for (Var v = 1; v <= 49; ++v) big.push_back(v);
  CHECK_THROWS_AS(WorkGenerator(DecompositionSet(big), 8, "d"), std::invalid_argument);
  CHECK_THROWS_AS(WorkGenerator(DecompositionSet({1}), 0, "d"), std::invalid_argument);
}

TEST_CASE("processing units and checking certificates")
{
  const auto fx = fixture(1, true);
  const auto &t = fx.t;
  const DecompositionSet set = prefix_set(t, 6);
  WorkGenerator g(set, 8, cnf_digest(t.cnf));
  const Estimate exact = enumerate_exact(t.cnf, set, {});
  for (std::uint64_t id = 0; id < g.unit_count(); ++id) {
    const WorkUnit u = g.unit(id);
    const WorkResult r = process_unit(t.cnf, u);
    bool any_sat = false;
    for (std::uint64_t j = u.first; j < u.first + u.count; ++j) any_sat |= exact.statuses[j] == Status::Sat;
    CHECK((r.claim == Claim::Sat) == any_sat);
    if (r.claim != Claim::Sat) continue;
    CHECK(check_certificate(t.cnf, u, r));
    CHECK(exact.statuses[r.cube] == Status::Sat);

    WorkResult bad = r;
    bad.model.flip();
    CHECK_FALSE(check_certificate(t.cnf, u, bad));
    bad = r;
    bad.cube = u.first + u.count;
    CHECK_FALSE(check_certificate(t.cnf, u, bad));
    bad = r;
    bad.model.pop_back();
    CHECK_FALSE(check_certificate(t.cnf, u, bad));
    // model valid for the formula but outside the claimed cube
    bad = r;
    bad.cube = r.cube == u.first ? u.first + 1 : u.first;
    CHECK_FALSE(check_certificate(t.cnf, u, bad));
    bad = r;
    bad.claim = Claim::UnsatAll;
    CHECK_FALSE(check_certificate(t.cnf, u, bad));
  }
}

TEST_CASE("validation rules")
{
  const auto fx = fixture(1, true);
  const auto &t = fx.t;
  const DecompositionSet set = prefix_set(t, 6);
  WorkGenerator g(set, 64, cnf_digest(t.cnf));
  const WorkUnit u = g.unit(0);
  const WorkResult sat = process_unit(t.cnf, u);
  REQUIRE(sat.claim == Claim::Sat);
  WorkResult unsat;
  unsat.claim = Claim::UnsatAll;
  WorkResult bogus = sat;
  bogus.model.flip();
  WorkResult unknown;

  Validation v = validate_result(sat, unsat, t.cnf, u);
  CHECK(v.verdict == Verdict::Sat);
  CHECK(v.certificate == 0);
  CHECK_FALSE(v.replica_invalid[0]);
  CHECK(v.replica_invalid[1]);
  v = validate_result(unsat, sat, t.cnf, u);
  CHECK(v.certificate == 1);
  v = validate_result(unsat, unsat, t.cnf, u);
  CHECK(v.verdict == Verdict::Unsat);
  v = validate_result(bogus, unsat, t.cnf, u);
  CHECK(v.verdict == Verdict::Invalid);
  CHECK(v.replica_invalid[0]);
  CHECK_FALSE(v.replica_invalid[1]);
  v = validate_result(bogus, sat, t.cnf, u);
  CHECK(v.verdict == Verdict::Sat);
  CHECK(v.replica_invalid[0]);
  v = validate_result(unknown, unsat, t.cnf, u);
  CHECK(v.verdict == Verdict::Invalid);
  CHECK_FALSE(v.replica_invalid[0]);
}

TEST_CASE("grid finds the key and stops dispatching")
{
  const auto fx = fixture(2, true);
  GridOptions o;
  o.workers = 3;
  o.batch = 4;
  const GridReport r = run_grid(fx.t.cnf, prefix_set(fx.t, 6), o);
  check_sat_model(fx.t, r);
  CHECK_FALSE(dispatch_after_sat(r));
  CHECK(r.units_total == 16);
  CHECK(r.events.back().kind == GridEvent::Cancel);
  CHECK(r.respawns == 0);
}

TEST_CASE("grid proves UNSAT and agrees with exact enumeration")
{
  const auto fx = fixture(3, false);
  const DecompositionSet set = prefix_set(fx.t, 5);
  const Estimate exact = enumerate_exact(fx.t.cnf, set, {});
  CHECK(exact.sat_cubes.empty());
  for (const std::size_t workers : {std::size_t{1}, std::size_t{2}, std::size_t{4}}) {
    CAPTURE(workers);
    GridOptions o;
    o.workers = workers;
    o.batch = 4;
    const GridReport r = run_grid(fx.t.cnf, set, o);
    CHECK(r.status == GridStatus::Unsat);
    CHECK(r.units_validated == 8);
    CHECK(r.results.size() == 16);
    std::set<std::pair<std::uint64_t, std::uint32_t>> who;
    for (const auto &rec : r.results) {
      CHECK(rec.mark == Mark::Valid);
      who.insert({rec.result.unit, rec.result.worker});
    }
    // two distinct workers per unit when there are two
    CHECK(who.size() == (workers >= 2 ? 16 : 8));
  }
}

TEST_CASE("injected faults are caught")
{
  for (const bool want_sat : {true, false}) {
    CAPTURE(want_sat);
    const auto fx = fixture(4, want_sat);
    GridOptions o;
    o.workers = 4;
    o.batch = 4;
    o.faults = {{1, FaultMode::CorruptModels}, {2, FaultMode::FlipUnsat}};
    const GridReport r = run_grid(fx.t.cnf, prefix_set(fx.t, 5), o);
    CHECK(r.status == (want_sat ? GridStatus::Sat : GridStatus::Unsat));
    if (want_sat) check_sat_model(fx.t, r);
    std::size_t injected = 0;
    for (const auto &rec : r.results) {
      if (!rec.injected) continue;
      ++injected;
      CHECK(rec.mark == Mark::Invalid);
    }
    CHECK(injected > 0);
    CHECK(r.invalid_units > 0);
  }
}

TEST_CASE("one honest worker among liars still settles every unit")
{
  for (const bool want_sat : {true, false}) {
    CAPTURE(want_sat);
    const auto fx = fixture(6, want_sat);
    GridOptions o;
    o.workers = 3;
    o.batch = 8;
    o.faults = {{1, FaultMode::CorruptModels}, {2, FaultMode::FlipUnsat}};
    const GridReport r = run_grid(fx.t.cnf, prefix_set(fx.t, 5), o);
    CHECK(r.status == (want_sat ? GridStatus::Sat : GridStatus::Unsat));
    for (const auto &rec : r.results) {
      if (rec.injected) CHECK(rec.mark == Mark::Invalid);
      if (rec.mark == Mark::Valid) CHECK(rec.result.worker == 0);
    }
  }
}

TEST_CASE("a crashed worker is replaced and its unit reissued")
{
  const auto fx = fixture(5, false);
  GridOptions o;
  o.workers = 2;
  o.batch = 8;
  o.faults = {{0, FaultMode::CrashOnce}};
  const GridReport r = run_grid(fx.t.cnf, prefix_set(fx.t, 4), o);
  CHECK(r.status == GridStatus::Unsat);
  CHECK(r.respawns == 1);
  CHECK(r.units_validated == 2);
}

TEST_CASE("unknown replicas are retried with doubled budgets, then interrupt")
{
  const auto t = testing::toy_instance(6);
  GridOptions o;
  o.workers = 1;
  o.batch = 1;
  o.budget.max_conflicts = 1;
  const GridReport r = run_grid(t.cnf, prefix_set(t, 2), o);
  CHECK(r.status == GridStatus::Interrupted);
  CHECK(r.retries == 4);
  CHECK(r.reason.find("still unknown") != std::string::npos);
}

TEST_CASE("journal resume")
{
  const auto fx = fixture(7, false);
  const DecompositionSet set = prefix_set(fx.t, 5);
  const std::string path = temp_path("resume.journal");
  GridOptions o;
  o.workers = 2;
  o.batch = 2;
  o.journal = path;
  o.stop_after_validated = 5;
  const GridReport first = run_grid(fx.t.cnf, set, o);
  CHECK(first.status == GridStatus::Interrupted);
  CHECK(read_journal(path).unsat_units.size() == 5);

  o.stop_after_validated.reset();
  const GridReport second = run_grid(fx.t.cnf, set, o);
  CHECK(second.status == GridStatus::Unsat);
  CHECK(second.units_resumed == 5);
  CHECK(second.units_validated == 11);
  for (const auto &rec : second.results) CHECK(read_journal(path).unsat_units.contains(rec.result.unit));
  const JournalState st = read_journal(path);
  CHECK(st.validated_order.size() == 16);
  CHECK(std::set<std::uint64_t>(st.validated_order.begin(), st.validated_order.end()).size() == 16);

  // completed run: nothing left to do
  const GridReport third = run_grid(fx.t.cnf, set, o);
  CHECK(third.status == GridStatus::Unsat);
  CHECK(third.results.empty());

  // a journal from another run is refused
  const auto other = fixture(8, false);
  CHECK_THROWS_AS((void)run_grid(other.t.cnf, set, o), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("kill the coordinator mid-run and resume")
{
  // the key sits in the second half of the cube order, so several units
  // are validated UNSAT before the certificate turns up
  std::uint64_t seed = 9;
  auto fx = fixture(seed, true);
  while (pack_bits(Bits(fx.t.key.begin(), fx.t.key.begin() + 7)) < 64) fx = fixture(++seed, true);
  const DecompositionSet set = prefix_set(fx.t, 7);
  const std::string path = temp_path("kill.journal");
  GridOptions o;
  o.workers = 2;
  o.batch = 4;
  o.journal = path;

  GridOptions plain = o;
  plain.journal.clear();
  const GridReport reference = run_grid(fx.t.cnf, set, plain);
  check_sat_model(fx.t, reference);

  const pid_t child = ::fork();
  REQUIRE(child >= 0);
  if (child == 0) {
    GridOptions slow = o;
    slow.workers = 1;
    try {
      (void)run_grid(fx.t.cnf, set, slow);
    } catch (...) {
    }
    ::_exit(0);
  }
  bool killed = false;
  for (int i = 0; i < 20000 && !killed; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1));
    try {
      if (std::filesystem::exists(path) && read_journal(path).validated_order.size() >= 3) {
        ::kill(child, SIGKILL);
        killed = true;
      }
    } catch (const std::runtime_error &) {
    }
  }
  ::waitpid(child, nullptr, 0);
  REQUIRE(killed);
  const std::size_t before = read_journal(path).validated_order.size();
  if (read_journal(path).sat_cube) MESSAGE("killed after the certificate was journaled");

  const GridReport resumed = run_grid(fx.t.cnf, set, o);
  check_sat_model(fx.t, resumed);
  CHECK(resumed.units_resumed >= 3);
  const JournalState st = read_journal(path);
  CHECK(st.validated_order.size() >= before);
  CHECK(std::set<std::uint64_t>(st.validated_order.begin(), st.validated_order.end()).size()
        == st.validated_order.size());
  std::filesystem::remove(path);
}
