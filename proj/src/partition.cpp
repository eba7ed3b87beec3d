#include "lfsrsat/partition.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lfsrsat {

DecompositionSet::DecompositionSet(std::vector<Var> variables) : vars_(std::move(variables))
{
  if (vars_.empty()) throw std::invalid_argument("decomposition set must not be empty");
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i] == 0) throw std::invalid_argument("variable 0 in decomposition set");
    if (i > 0 && vars_[i] <= vars_[i - 1])
      throw std::invalid_argument("decomposition set variables must be sorted and distinct");
  }
}

std::uint64_t DecompositionSet::cube_count() const
{
  if (vars_.size() > 63) throw std::out_of_range("decomposition set too large to index");
  return 1ULL << vars_.size();
}

Cube DecompositionSet::cube(std::uint64_t index) const
{
  if (index >= cube_count()) throw std::out_of_range("cube index " + std::to_string(index) + " out of range");
  const std::size_t k = vars_.size();
  Bits values(k);
  for (std::size_t i = 0; i < k; ++i) values[i] = ((index >> (k - 1 - i)) & 1ULL) != 0;
  return {vars_, std::move(values)};
}

std::uint64_t DecompositionSet::index_of(const Bits &values) const
{
  if (values.size() != vars_.size()) throw std::invalid_argument("cube length does not match the set");
  std::uint64_t index = 0;
  for (const bool b : values) index = (index << 1U) | (b ? 1U : 0U);
  return index;
}

void DecompositionSet::check_range(Var num_vars) const
{
  if (!vars_.empty() && vars_.back() > num_vars)
    throw std::out_of_range("decomposition set variable " + std::to_string(vars_.back()) + " exceeds "
                            + std::to_string(num_vars));
}

std::string to_string(const DecompositionSet &set)
{
  std::string out;
  for (const Var v : set.variables()) {
    if (!out.empty()) out += ',';
    out += std::to_string(v);
  }
  return out;
}

DecompositionSet parse_set(std::string_view text)
{
  std::vector<Var> vars;
  std::string token;
  std::istringstream in{std::string(text)};
  while (std::getline(in, token, ',')) {
    const auto first = token.find_first_not_of(" \t");
    if (first == std::string::npos) throw std::invalid_argument("empty entry in variable list");
    std::size_t used = 0;
    const unsigned long v = std::stoul(token.substr(first), &used);
    if (token.find_first_not_of(" \t", first + used) != std::string::npos)
      throw std::invalid_argument("bad variable '" + token + "'");
    vars.push_back(static_cast<Var>(v));
  }
  return DecompositionSet(std::move(vars));
}

std::string_view to_string(CostUnit unit) { return unit == CostUnit::Seconds ? "seconds" : "conflicts"; }

CostUnit parse_unit(std::string_view text)
{
  if (text == "seconds") return CostUnit::Seconds;
  if (text == "conflicts") return CostUnit::Conflicts;
  throw std::invalid_argument("unknown cost unit '" + std::string(text) + "'");
}

std::vector<Cube> sample_cubes(const DecompositionSet &set, std::size_t n, std::uint64_t seed)
{
  if (n < 1) throw std::invalid_argument("sample size must be at least 1");
  if (set.empty()) throw std::invalid_argument("decomposition set must not be empty");
  std::mt19937_64 rng(seed);
  std::vector<Cube> cubes;
  cubes.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    Bits values(set.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (rng() >> 63U) != 0;
    cubes.emplace_back(set.variables(), std::move(values));
  }
  return cubes;
}

Estimate summarize(const DecompositionSet &set, CostUnit unit, std::vector<double> costs, std::vector<Status> statuses)
{
  Estimate e;
  e.set = set;
  e.unit = unit;
  e.sample_size = costs.size();
  const double scale = std::ldexp(1.0, static_cast<int>(set.size()));
  if (!costs.empty()) {
    double sum = 0.0;
    for (const double c : costs) sum += c;
    e.mean = sum / static_cast<double>(costs.size());
    if (costs.size() > 1) {
      double ss = 0.0;
      for (const double c : costs) ss += (c - e.mean) * (c - e.mean);
      const double sd = std::sqrt(ss / static_cast<double>(costs.size() - 1));
      e.std_error = scale * sd / std::sqrt(static_cast<double>(costs.size()));
    }
  }
  e.value = scale * e.mean;
  e.censored_count = static_cast<std::size_t>(std::count(statuses.begin(), statuses.end(), Status::Unknown));
  e.censored = e.censored_count > 0;
  e.samples = std::move(costs);
  e.statuses = std::move(statuses);
  return e;
}

namespace {

  double cube_cost(const SolveOutcome &r, CostUnit unit, const Budget &budget)
  {
    if (r.status == Status::Unknown) {
      // censored: charge the budget, which bounds the true cost from below
      if (unit == CostUnit::Conflicts && budget.max_conflicts) return static_cast<double>(*budget.max_conflicts);
      if (unit == CostUnit::Seconds && budget.max_seconds) return *budget.max_seconds;
    }
    return unit == CostUnit::Conflicts ? static_cast<double>(r.stats.conflicts) : r.stats.elapsed;
  }

  struct CubeRun
  {
    std::vector<double> cost;
    std::vector<Status> status;
    std::vector<double> activity;
    std::vector<char> done;
  };

  // Leader hands out cube numbers from a shared counter; followers each
  // solve with a fresh engine so a cube's cost does not depend on which
  // follower picked it up or in what order.
  template<typename CubeOf>
  CubeRun run_cubes(const Cnf &cnf, const DecompositionSet &set, std::size_t count, CubeOf cube_of,
    const EstimateOptions &options)
  {
    set.check_range(cnf.num_vars());
    CubeRun run;
    run.cost.assign(count, 0.0);
    run.status.assign(count, Status::Unknown);
    run.activity.assign(count, 0.0);
    run.done.assign(count, 0);

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::atomic<bool> abort{false};

    auto follower = [&] {
      try {
        for (;;) {
          if (abort.load() || (options.stop && options.stop->load())) return;
          const std::size_t j = next.fetch_add(1);
          if (j >= count) return;
          Solver solver(cnf, options.solver_seed);
          solver.set_stop_flag(options.stop);
          const SolveOutcome r = solver.solve(cube_of(j), options.budget);
          if (r.status == Status::Unknown && options.stop && options.stop->load()) return;
          run.cost[j] = cube_cost(r, options.unit, options.budget);
          run.status[j] = r.status;
          double act = 0.0;
          for (const Var v : set.variables()) act += r.stats.activity[v - 1];
          run.activity[j] = act;
          run.done[j] = 1;
        }
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        abort = true;
      }
    };

    const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, count));
    if (workers == 1) {
      follower();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(follower);
      for (auto &t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    return run;
  }

  Estimate finish(const DecompositionSet &set, const EstimateOptions &options, CubeRun run, bool exact)
  {
    std::vector<double> costs;
    std::vector<Status> statuses;
    std::vector<std::uint64_t> sat;
    double activity = 0.0;
    for (std::size_t j = 0; j < run.done.size(); ++j) {
      if (!run.done[j]) continue;
      costs.push_back(run.cost[j]);
      statuses.push_back(run.status[j]);
      activity += run.activity[j];
      if (exact && run.status[j] == Status::Sat) sat.push_back(j);
    }
    const bool complete = costs.size() == run.done.size();
    Estimate e = summarize(set, options.unit, std::move(costs), std::move(statuses));
    if (!complete) e.censored = true;
    e.exact = exact && complete;
    if (e.sample_size > 0) e.set_activity = activity / static_cast<double>(e.sample_size);
    e.sat_cubes = std::move(sat);
    return e;
  }

} // namespace

Estimate estimate(const Cnf &cnf, const DecompositionSet &set, const EstimateOptions &options)
{
  const std::vector<Cube> cubes = sample_cubes(set, options.samples, options.seed);
  CubeRun run = run_cubes(cnf, set, cubes.size(), [&](std::size_t j) { return cubes[j]; }, options);
  return finish(set, options, std::move(run), false);
}

Estimate enumerate_exact(const Cnf &cnf, const DecompositionSet &set, const EstimateOptions &options)
{
  if (set.empty()) throw std::invalid_argument("decomposition set must not be empty");
  if (set.size() > 24) throw std::invalid_argument("exact enumeration limited to 24 set variables");
  const auto count = static_cast<std::size_t>(set.cube_count());
  CubeRun run = run_cubes(cnf, set, count, [&](std::size_t j) { return set.cube(j); }, options);
  return finish(set, options, std::move(run), true);
}

namespace {

  std::string number(double x)
  {
    std::ostringstream s;
    s << std::setprecision(12) << x;
    return s.str();
  }

} // namespace

void write_report(std::ostream &out, const Estimate &e)
{
  out << "set " << to_string(e.set) << "\n";
  out << "set_size " << e.set.size() << "\n";
  out << "mode " << (e.exact ? "exact" : "sampled") << "\n";
  out << "N " << e.sample_size << "\n";
  out << "unit " << to_string(e.unit) << "\n";
  out << "mean " << number(e.mean) << "\n";
  out << "F " << number(e.value) << "\n";
  out << "std_error " << number(e.std_error) << "\n";
  out << "censored " << (e.censored ? "yes" : "no") << " (" << e.censored_count << " cubes at budget)\n";
  if (e.exact) out << "sat_cubes " << e.sat_cubes.size() << "\n";
}

std::string to_record(const Estimate &e)
{
  std::ostringstream s;
  s << "set=" << to_string(e.set) << " k=" << e.set.size() << " n=" << e.sample_size << " unit=" << to_string(e.unit)
    << " mean=" << number(e.mean) << " F=" << number(e.value) << " se=" << number(e.std_error)
    << " censored=" << (e.censored ? 1 : 0) << " activity=" << number(e.set_activity);
  return s.str();
}

} // namespace lfsrsat
