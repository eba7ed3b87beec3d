#ifndef LFSRSAT_GRID_HPP
#define LFSRSAT_GRID_HPP

#include "lfsrsat/partition.hpp"
#include "lfsrsat/wire.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace lfsrsat {

std::string sha256_hex(std::string_view data);

/// Hex SHA-256 of the formula's header and clauses (comments excluded).
std::string cnf_digest(const Cnf &cnf);

/// A contiguous range of cube indices, in the set's lexicographic order.
struct WorkUnit
{
  std::uint64_t id = 0;
  std::uint64_t first = 0;
  std::uint64_t count = 0;
  std::string cnf_digest;
  DecompositionSet set;
  Budget budget; ///< per cube
  friend bool operator==(const WorkUnit &, const WorkUnit &) = default;
};

/// Lazily cuts 0..2^|set|-1 into units of `batch` cubes (the last may be short).
class WorkGenerator
{
public:
  static constexpr std::size_t max_set_size = 48;

  WorkGenerator(DecompositionSet set, std::uint64_t batch, std::string digest, Budget budget = {});

  [[nodiscard]] std::uint64_t cube_count() const { return cubes_; }
  [[nodiscard]] std::uint64_t unit_count() const { return units_; }
  [[nodiscard]] std::uint64_t batch() const { return batch_; }
  [[nodiscard]] WorkUnit unit(std::uint64_t id) const;
  /// The next unit in id order, skipping ids in `skip`.
  std::optional<WorkUnit> next(const std::set<std::uint64_t> &skip = {});

private:
  DecompositionSet set_;
  std::uint64_t batch_;
  std::string digest_;
  Budget budget_;
  std::uint64_t cubes_;
  std::uint64_t units_;
  std::uint64_t next_ = 0;
};

enum class Claim : std::uint8_t { UnsatAll = 0, Sat = 1, Unknown = 2 };
std::string_view to_string(Claim claim);

struct WorkResult
{
  std::uint64_t unit = 0;
  std::uint32_t replica = 0;
  std::uint32_t attempt = 0;
  std::uint32_t worker = 0;
  Claim claim = Claim::Unknown;
  std::uint64_t cube = 0; ///< satisfying cube index, or the resume point when Unknown
  Bits model;             ///< full assignment when claim == Sat
  std::uint64_t conflicts = 0;
  double seconds = 0.0;
  friend bool operator==(const WorkResult &, const WorkResult &) = default;
};

struct Assignment
{
  WorkUnit unit;
  std::uint32_t replica = 0;
  std::uint32_t attempt = 0;
  friend bool operator==(const Assignment &, const Assignment &) = default;
};

wire::Frame encode_assignment(const Assignment &a);
Assignment decode_assignment(const wire::Frame &f);
wire::Frame encode_result(const WorkResult &r);
WorkResult decode_result(const wire::Frame &f);

/// Solves the unit's cubes in order on one incremental solver.
WorkResult process_unit(const Cnf &cnf, const WorkUnit &unit, const std::atomic<bool> *stop = nullptr,
  std::uint64_t solver_seed = 0);

/// A SAT claim is a certificate when its cube lies in the unit and the model
/// satisfies the formula and agrees with the cube.
bool check_certificate(const Cnf &cnf, const WorkUnit &unit, const WorkResult &r);

enum class Verdict : std::uint8_t { Unsat, Sat, Invalid };
std::string_view to_string(Verdict v);

struct Validation
{
  Verdict verdict = Verdict::Invalid;
  std::optional<std::size_t> certificate; ///< which replica proved SAT
  std::array<bool, 2> replica_invalid{};  ///< replica shown wrong
};

/// Certificate wins; UNSAT needs both replicas; anything else is INVALID.
Validation validate_result(const WorkResult &a, const WorkResult &b, const Cnf &cnf, const WorkUnit &unit);

enum class FaultMode : std::uint8_t {
  None,
  CorruptModels, ///< every answer becomes a SAT claim with a broken model
  FlipUnsat,     ///< SAT reported as UNSAT and UNSAT as SAT (without a model)
  CrashOnce      ///< the first process in this slot dies on its first unit
};
std::string_view to_string(FaultMode mode);
FaultMode parse_fault(std::string_view text);

enum class GridStatus : std::uint8_t { Sat, Unsat, Interrupted };
std::string_view to_string(GridStatus s);

struct GridOptions
{
  std::size_t workers = 1;
  std::uint64_t batch = 64;
  Budget budget; ///< per cube
  std::uint64_t solver_seed = 0;
  std::string journal; ///< empty: no checkpoint
  std::size_t max_retries = 3;        ///< doubled-budget reissues of an UNKNOWN replica
  std::size_t max_invalid_rounds = 16; ///< reissues of a diverging unit
  double heartbeat_timeout = 60.0;
  std::map<std::size_t, FaultMode> faults; ///< by worker slot
  std::optional<std::size_t> stop_after_validated;
  const std::atomic<bool> *stop = nullptr;
};

enum class Mark : std::uint8_t { Pending, Valid, Invalid, Discarded };
std::string_view to_string(Mark m);

struct ResultRecord
{
  WorkResult result;
  Mark mark = Mark::Pending;
  bool injected = false; ///< produced by a faulty slot and altered by its fault
};

struct GridEvent
{
  enum Kind : std::uint8_t { Dispatch, Validated, Invalidated, Crash, Cancel } kind;
  std::uint64_t unit = 0;
  std::uint32_t worker = 0;
};

struct GridReport
{
  GridStatus status = GridStatus::Interrupted;
  std::string reason;
  std::optional<std::uint64_t> sat_cube;
  Bits model;
  std::uint64_t units_total = 0;
  std::uint64_t units_validated = 0; ///< in this run
  std::uint64_t units_resumed = 0;   ///< validated by an earlier run, from the journal
  std::size_t invalid_units = 0; ///< bad certificates plus diverged replica pairs
  std::size_t retries = 0;
  std::size_t respawns = 0;
  std::vector<ResultRecord> results;
  std::vector<GridEvent> events;
};

/// Coordinator: forks `workers` processes, schedules two replicas per unit,
/// validates, journals, and cancels everything on the first validated SAT.
GridReport run_grid(const Cnf &cnf, const DecompositionSet &set, const GridOptions &options);

void write_report(std::ostream &out, const GridReport &r);

/// Unit ids validated UNSAT (and a SAT line if any) recorded in a journal.
struct JournalState
{
  std::string digest;
  std::string set;
  std::uint64_t batch = 0;
  std::set<std::uint64_t> unsat_units;
  std::vector<std::uint64_t> validated_order; ///< every validated line, in order
  std::optional<std::uint64_t> sat_cube;
  Bits sat_model;
};
JournalState read_journal(const std::string &path);

} // namespace lfsrsat

#endif
