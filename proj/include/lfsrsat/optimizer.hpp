#ifndef LFSRSAT_OPTIMIZER_HPP
#define LFSRSAT_OPTIMIZER_HPP

#include "lfsrsat/partition.hpp"

#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lfsrsat {

/// A nonempty subset of M <= 64 candidate variables. Candidate 0 is the most
/// significant bit of bits(), so numeric order is lexicographic mask order.
class SearchPoint
{
public:
  SearchPoint() = default;
  SearchPoint(std::uint64_t bits, std::size_t width);
  explicit SearchPoint(const Bits &mask);

  static SearchPoint full(std::size_t width);

  [[nodiscard]] std::uint64_t bits() const { return bits_; }
  [[nodiscard]] std::size_t width() const { return width_; }
  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] bool test(std::size_t candidate) const;
  [[nodiscard]] Bits mask() const;

  friend auto operator<=>(const SearchPoint &, const SearchPoint &) = default;

private:
  std::uint64_t bits_ = 0;
  std::size_t width_ = 0;
};

std::string to_hex(const SearchPoint &p);
SearchPoint point_from_hex(std::string_view hex, std::size_t width);
std::size_t hamming(const SearchPoint &a, const SearchPoint &b);

/// The candidates selected by p, as a decomposition set.
DecompositionSet to_set(const SearchPoint &p, const std::vector<Var> &candidates);

/// Points at distance exactly r from p, empty mask skipped, shuffled by seed.
std::vector<SearchPoint> shell(const SearchPoint &p, std::size_t r, std::uint64_t seed);

/// N_rho(p): shells 1..rho in order, each shuffled from the seed.
std::vector<SearchPoint> neighborhood(const SearchPoint &p, std::size_t rho, std::uint64_t seed);

/// |N_rho(p)| without materialising it.
std::uint64_t neighborhood_size(const SearchPoint &p, std::size_t rho);

/// One value of the predictive function.
struct Evaluation
{
  double value = 0.0;
  double std_error = 0.0;
  double activity = 0.0;
  bool censored = false;
  std::size_t samples = 0;
  std::string unit = "none";
};

using Objective = std::function<Evaluation(const SearchPoint &)>;

/// F(chi) by Monte-Carlo estimate over the chosen candidates.
Objective estimate_objective(const Cnf &cnf, std::vector<Var> candidates, EstimateOptions options);

struct SaSchedule
{
  std::optional<double> t0;    ///< default F(start) / 10
  double q = 0.98;
  std::optional<double> t_inf; ///< default t0 * 1e-6
};

struct SearchLimits
{
  std::optional<double> max_seconds;
  std::optional<std::size_t> max_evaluations; ///< fresh objective calls
  const std::atomic<bool> *stop = nullptr;
};

struct SearchOptions
{
  SearchLimits limits;
  std::uint64_t seed = 0;
  /// Count as improvement only drops larger than the incumbent's standard error.
  bool noise_guard = true;
  std::size_t tabu_radius = 1;
  /// Append one line per fresh evaluation here.
  std::ostream *log = nullptr;
  /// Values known from an earlier run, by mask bits.
  std::map<std::uint64_t, Evaluation> known;
};

struct SearchResult
{
  SearchPoint best;
  Evaluation best_value;
  SearchPoint start;
  Evaluation start_value;
  std::vector<SearchPoint> evaluated; ///< fresh objective calls, in order
  std::size_t cache_hits = 0;
  std::size_t l1 = 0;
  std::size_t l2 = 0;
  std::string stop_reason;
  double temperature = 0.0;
};

/// Simulated annealing over Hamming balls, with per-center checked marks.
SearchResult minimize_sa(const Objective &f, const SearchPoint &start, const SaSchedule &schedule,
  const SearchOptions &options);

/// Tabu search with lists L1 (neighbourhood checked) and L2 (not yet).
SearchResult minimize_ts(const Objective &f, const SearchPoint &start, const SearchOptions &options);

/// Log line: "<hex> k=.. n=.. unit=.. F=.. se=.. activity=.. censored=.. decision=.."
std::string log_line(const SearchPoint &p, const Evaluation &e, std::string_view decision);

/// Reads a log back into SearchOptions::known. Later lines win.
std::map<std::uint64_t, Evaluation> read_log(std::istream &in, std::size_t width);

void write_result(std::ostream &out, const SearchResult &r, const std::vector<Var> &candidates);

} // namespace lfsrsat

#endif
