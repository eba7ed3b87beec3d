#ifndef LFSRSAT_PARTITION_HPP
#define LFSRSAT_PARTITION_HPP

#include "lfsrsat/cnf.hpp"
#include "lfsrsat/solver.hpp"

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace lfsrsat {

/// A nonempty, sorted set of distinct variables whose assignments split a formula.
class DecompositionSet
{
public:
  DecompositionSet() = default;
  explicit DecompositionSet(std::vector<Var> variables);

  [[nodiscard]] const std::vector<Var> &variables() const { return vars_; }
  [[nodiscard]] std::size_t size() const { return vars_.size(); }
  [[nodiscard]] bool empty() const { return vars_.empty(); }

  /// Number of cubes, 2^size. Throws when size exceeds 63.
  [[nodiscard]] std::uint64_t cube_count() const;

  /// Cube number `index` in lexicographic order: the first variable is the
  /// most significant bit, so index 0 is all-false.
  [[nodiscard]] Cube cube(std::uint64_t index) const;
  [[nodiscard]] std::uint64_t index_of(const Bits &values) const;

  /// Throws std::out_of_range when a variable exceeds num_vars.
  void check_range(Var num_vars) const;

  friend bool operator==(const DecompositionSet &, const DecompositionSet &) = default;

private:
  std::vector<Var> vars_;
};

std::string to_string(const DecompositionSet &set);     ///< "3,7,12"
DecompositionSet parse_set(std::string_view text);      ///< inverse of to_string

enum class CostUnit : std::uint8_t { Seconds, Conflicts };
std::string_view to_string(CostUnit unit);
CostUnit parse_unit(std::string_view text);

/// Uniform independent cubes over the set, reproducible from the seed.
std::vector<Cube> sample_cubes(const DecompositionSet &set, std::size_t n, std::uint64_t seed);

struct EstimateOptions
{
  std::size_t samples = 100;
  std::uint64_t seed = 0;      ///< cube sampling stream
  std::uint64_t solver_seed = 0;
  Budget budget;               ///< per cube
  CostUnit unit = CostUnit::Seconds;
  std::size_t workers = 1;
  const std::atomic<bool> *stop = nullptr;
};

/// Monte-Carlo (or exact) cost of processing a partitioning.
struct Estimate
{
  DecompositionSet set;
  CostUnit unit = CostUnit::Conflicts;
  std::size_t sample_size = 0;
  std::vector<double> samples;  ///< per-cube cost, in cube order
  std::vector<Status> statuses; ///< per-cube outcome
  double mean = 0.0;
  double value = 0.0;           ///< 2^|set| * mean
  double std_error = 0.0;       ///< standard error of value
  bool censored = false;        ///< some cube hit the budget; value is a lower bound
  std::size_t censored_count = 0;
  bool exact = false;           ///< every cube processed
  double set_activity = 0.0;    ///< mean over cubes of summed activity of the set variables
  std::vector<std::uint64_t> sat_cubes; ///< cube indices found satisfiable (exact runs)
};

/// Samples `options.samples` cubes and solves each with a fresh engine.
Estimate estimate(const Cnf &cnf, const DecompositionSet &set, const EstimateOptions &options);

/// Processes all 2^|set| cubes (|set| <= 24). options.samples is ignored.
Estimate enumerate_exact(const Cnf &cnf, const DecompositionSet &set, const EstimateOptions &options);

/// Builds the Estimate statistics from per-cube costs.
Estimate summarize(const DecompositionSet &set, CostUnit unit, std::vector<double> costs, std::vector<Status> statuses);

/// Multi-line human report.
void write_report(std::ostream &out, const Estimate &e);

/// One line, space-separated key=value pairs.
std::string to_record(const Estimate &e);

} // namespace lfsrsat

#endif
