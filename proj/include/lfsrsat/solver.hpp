#ifndef LFSRSAT_SOLVER_HPP
#define LFSRSAT_SOLVER_HPP

#include "lfsrsat/cnf.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

namespace lfsrsat {

enum class Status : std::uint8_t { Sat, Unsat, Unknown };
std::string_view to_string(Status status);

/// Resource bounds for one solve call. An empty bound is unlimited.
struct Budget
{
  std::optional<std::uint64_t> max_conflicts;
  std::optional<double> max_seconds;

  [[nodiscard]] bool unlimited() const { return !max_conflicts && !max_seconds; }
  /// Multiplies every present bound by `factor`.
  [[nodiscard]] Budget scaled(double factor) const;
  friend bool operator==(const Budget &, const Budget &) = default;
};

struct SolveStats
{
  std::uint64_t decisions = 0;
  std::uint64_t conflicts = 0;
  std::uint64_t propagations = 0;
  std::uint64_t restarts = 0;
  double elapsed = 0.0;
  /// Per-variable branching activity at exit (index v-1), expressed in units
  /// of the most recent bump, i.e. sum over bumps of decay^(conflicts since).
  std::vector<double> activity;
};

/// Flat "key=value" block, one pair per line. Activity is summarised.
void write_stats(std::ostream &out, const SolveStats &stats);

struct SolveOutcome
{
  Status status = Status::Unknown;
  Bits model; ///< present iff status == Sat; model[v-1] is the value of v
  SolveStats stats;
};

enum class Propagation : std::uint8_t { SatByPropagation, Conflict, Undetermined };
std::string_view to_string(Propagation p);

struct SolverOptions
{
  double var_decay = 0.95;
  double clause_decay = 0.999;
  std::uint64_t restart_unit = 100;
  double learnt_size_factor = 1.0 / 3.0;
  double learnt_size_inc = 1.1;
  std::size_t min_learnts = 2000;
};

/// CDCL engine: two-watched-literal propagation, first-UIP learning with
/// recursive minimisation, activity branching with phase saving, Luby
/// restarts and activity-based learnt clause reduction. Clauses may be added
/// between solve calls; assumptions are not retained across calls.
class Solver
{
public:
  explicit Solver(const Cnf &cnf, std::uint64_t seed = 0, SolverOptions options = {});

  Solver(const Solver &) = delete;
  Solver &operator=(const Solver &) = delete;

  void add_clause(const Clause &clause);

  SolveOutcome solve(const Cube &assumptions = {}, const Budget &budget = {});

  /// Unit propagation under the assumptions, no decisions.
  Propagation propagate_only(const Cube &assumptions = {});

  /// Polled between propagations; a raised flag ends the search with Unknown.
  void set_stop_flag(const std::atomic<bool> *flag) { stop_ = flag; }

  /// Learnt clauses currently stored, plus learnt root-level units.
  [[nodiscard]] std::vector<Clause> learnt_clauses() const;

  [[nodiscard]] Var num_vars() const { return formula_.num_vars(); }
  [[nodiscard]] const Cnf &formula() const { return formula_; }

private:
  using ILit = std::uint32_t; // 2*var + sign, var 0-based
  using CRef = std::uint32_t;
  static constexpr CRef no_reason = UINT32_MAX;
  static constexpr ILit no_lit = UINT32_MAX;

  struct Watcher
  {
    CRef cref;
    ILit blocker;
  };

  class VarHeap
  {
  public:
    VarHeap(const std::vector<double> &activity, const std::vector<std::uint32_t> &tiebreak)
      : act_(activity), rank_(tiebreak)
    {}
    void resize(std::size_t n) { pos_.resize(n, -1); }
    [[nodiscard]] bool contains(std::uint32_t v) const { return pos_[v] >= 0; }
    [[nodiscard]] bool empty() const { return heap_.empty(); }
    void insert(std::uint32_t v);
    void increased(std::uint32_t v) { up(static_cast<std::size_t>(pos_[v])); }
    std::uint32_t pop();

  private:
    [[nodiscard]] bool before(std::uint32_t a, std::uint32_t b) const
    {
      return act_[a] > act_[b] || (act_[a] == act_[b] && rank_[a] < rank_[b]);
    }
    void up(std::size_t i);
    void down(std::size_t i);

    const std::vector<double> &act_;
    const std::vector<std::uint32_t> &rank_;
    std::vector<std::uint32_t> heap_;
    std::vector<int> pos_;
  };

  static ILit to_ilit(Lit l) { return l.code(); }
  static std::uint32_t var_of(ILit l) { return l >> 1U; }
  static Lit to_lit(ILit l) { return {var_of(l) + 1, (l & 1U) == 0}; }

  [[nodiscard]] int value(ILit l) const
  {
    const int a = assigns_[l >> 1U];
    return (l & 1U) ? -a : a;
  }
  [[nodiscard]] std::uint32_t decision_level() const { return static_cast<std::uint32_t>(trail_lim_.size()); }

  // Clause arena: [size << 2 | removed << 1 | learnt] [activity bits] [lits...]
  [[nodiscard]] std::uint32_t csize(CRef c) const { return arena_[c] >> 2U; }
  [[nodiscard]] bool is_learnt(CRef c) const { return (arena_[c] & 1U) != 0; }
  [[nodiscard]] bool is_removed(CRef c) const { return (arena_[c] & 2U) != 0; }
  ILit *lits(CRef c) { return arena_.data() + c + 2; }
  [[nodiscard]] const ILit *lits(CRef c) const { return arena_.data() + c + 2; }
  [[nodiscard]] float clause_activity(CRef c) const;
  void set_clause_activity(CRef c, float a);

  void add_original(const ILit *lits, std::size_t n);
  CRef store(const std::vector<ILit> &lits, bool learnt);
  void remove_clause(CRef c);
  void collect_garbage();
  void attach(CRef c);
  void enqueue(ILit l, CRef reason);
  CRef propagate();
  void analyze(CRef conflict, std::vector<ILit> &learnt, std::uint32_t &backjump);
  bool redundant(ILit l, std::uint32_t abstract_levels);
  [[nodiscard]] std::uint32_t abstract_level(std::uint32_t v) const { return 1U << (level_[v] & 31U); }
  void cancel_until(std::uint32_t level);
  void bump_var(std::uint32_t v);
  void bump_clause(CRef c);
  void reduce_db();
  [[nodiscard]] bool locked(CRef c) const;
  [[nodiscard]] bool all_original_satisfied() const;
  [[nodiscard]] bool stop_requested() const { return stop_ && stop_->load(std::memory_order_relaxed); }
  [[nodiscard]] std::vector<double> exported_activity() const;
  Status search(const std::vector<ILit> &assumptions, std::uint64_t conflict_limit, const Budget &budget,
    std::chrono::steady_clock::time_point start, SolveStats &stats);

  Cnf formula_;
  SolverOptions opts_;
  std::mt19937_64 rng_;
  const std::atomic<bool> *stop_ = nullptr;
  bool ok_ = true;

  std::vector<std::uint32_t> arena_;
  std::size_t wasted_ = 0;
  std::vector<ILit> scratch_;
  std::vector<ILit> kept_;
  std::vector<CRef> learnts_;
  std::vector<ILit> learnt_units_;
  std::vector<std::vector<Watcher>> watches_;
  std::vector<signed char> assigns_;
  std::vector<signed char> phase_;
  std::vector<std::uint32_t> level_;
  std::vector<CRef> reason_;
  std::vector<ILit> trail_;
  std::vector<std::uint32_t> trail_lim_;
  std::size_t qhead_ = 0;

  std::vector<double> activity_;
  std::vector<std::uint32_t> tiebreak_; // breaks activity ties: index order, or a seeded permutation
  double var_inc_ = 1.0;
  double cla_inc_ = 1.0;
  VarHeap order_{activity_, tiebreak_};
  double max_learnts_ = 0.0;

  std::vector<char> seen_;
  std::vector<ILit> analyze_stack_;
  std::vector<ILit> analyze_clear_;

  std::uint64_t total_conflicts_ = 0;
  std::uint64_t total_propagations_ = 0;
  std::uint64_t total_decisions_ = 0;
};

/// One-shot solve with a fresh engine.
SolveOutcome solve(const Cnf &cnf, const Cube &assumptions = {}, const Budget &budget = {}, std::uint64_t seed = 0,
  const std::atomic<bool> *stop = nullptr);

Propagation propagate_only(const Cnf &cnf, const Cube &assumptions = {});

/// Luby sequence 1,1,2,1,1,2,4,... (index from 0).
std::uint64_t luby(std::uint64_t index);

} // namespace lfsrsat

#endif
