#include "lfsrsat/collide.hpp"

#include "lfsrsat/circuit.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

namespace lfsrsat {

std::map<std::size_t, bool> fix_range(const Bits &key, std::size_t lo, std::size_t hi)
{
  if (lo > hi || hi > key.size()) throw std::out_of_range("fixed range outside the key");
  std::map<std::size_t, bool> out;
  for (std::size_t i = lo; i < hi; ++i) out[i] = key[i];
  return out;
}

namespace {

  class Enumeration
  {
  public:
    Enumeration(const GeneratorSpec &spec, const Bits &keystream, const CollisionOptions &options)
      : spec_(spec), options_(options), began_(std::chrono::steady_clock::now())
    {
      if (keystream.size() != spec.keystream_len)
        throw std::invalid_argument("keystream has " + std::to_string(keystream.size()) + " bits, generator emits "
                                    + std::to_string(spec.keystream_len));
      report_.keystream = keystream;
      encoding_ = tseitin_encode(build_circuit(spec));
      cnf_ = fix_outputs(encoding_, keystream);
      for (const auto &[pos, value] : options.fixed) {
        if (pos >= encoding_.input_vars.size()) throw std::out_of_range("fixed key bit outside the key");
        cnf_.add_clause(Clause{Lit(encoding_.input_vars[pos], value)});
      }
      std::vector<std::size_t> split = options.split;
      std::sort(split.begin(), split.end());
      for (const auto pos : split) {
        if (pos >= encoding_.input_vars.size()) throw std::out_of_range("split position outside the key");
        split_vars_.push_back(encoding_.input_vars[pos]);
      }
      if (options.grid && split_vars_.empty()) throw std::invalid_argument("the grid route needs split positions");
    }

    CollisionReport run()
    {
      if (options_.grid) run_grid_passes();
      else run_direct();
      return std::move(report_);
    }

  private:
    // remaining time, if limited; throws nothing, returns 0 when spent
    std::optional<double> remaining() const
    {
      if (!options_.max_seconds) return std::nullopt;
      const double used = std::chrono::duration<double>(std::chrono::steady_clock::now() - began_).count();
      return std::max(0.0, *options_.max_seconds - used);
    }

    Budget pass_budget() const
    {
      Budget b = options_.budget;
      if (const auto left = remaining()) b.max_seconds = b.max_seconds ? std::min(*b.max_seconds, *left) : *left;
      return b;
    }

    // false once enumeration should stop
    bool accept(const Bits &model, std::optional<Clause> &block)
    {
      if (options_.limit && report_.keys.size() >= *options_.limit) {
        report_.stop_reason = "limit";
        return false;
      }
      const Bits key = extract_input(encoding_, cnf_, model);
      if (keystream(spec_, key) != report_.keystream)
        throw std::logic_error("encoding produced key " + key_to_hex(key) + " that does not reproduce the keystream");
      if (std::find(report_.keys.begin(), report_.keys.end(), key) != report_.keys.end())
        throw std::logic_error("key " + key_to_hex(key) + " found twice");
      report_.keys.push_back(key);
      std::vector<Lit> lits;
      for (std::size_t i = 0; i < key.size(); ++i)
        if (!options_.fixed.contains(i)) lits.emplace_back(encoding_.input_vars[i], !key[i]);
      if (lits.empty()) {
        // every key bit is fixed, so this was the only candidate
        report_.exhausted = true;
        report_.stop_reason = "unsat";
        return false;
      }
      block = Clause(std::move(lits));
      return true;
    }

    void run_direct()
    {
      Solver solver(cnf_, options_.seed);
      std::vector<Cube> cubes;
      if (split_vars_.empty()) {
        cubes.emplace_back();
      } else {
        const DecompositionSet set(split_vars_);
        for (std::uint64_t j = 0; j < set.cube_count(); ++j) cubes.push_back(set.cube(j));
      }
      for (const Cube &cube : cubes) {
        for (;;) {
          const Budget b = pass_budget();
          if (b.max_seconds && *b.max_seconds <= 0.0) {
            report_.stop_reason = "time";
            return;
          }
          ++report_.solves;
          const SolveOutcome o = solver.solve(cube, b);
          if (o.status == Status::Unsat) break;
          if (o.status == Status::Unknown) {
            report_.stop_reason = "budget";
            return;
          }
          std::optional<Clause> block;
          if (!accept(o.model, block)) return;
          solver.add_clause(*block);
        }
      }
      report_.exhausted = true;
      report_.stop_reason = "unsat";
    }

    void run_grid_passes()
    {
      GridOptions g = *options_.grid;
      g.journal.clear(); // every pass changes the formula
      g.budget = options_.budget;
      const DecompositionSet set(split_vars_);
      for (;;) {
        if (const auto left = remaining(); left && *left <= 0.0) {
          report_.stop_reason = "time";
          return;
        }
        ++report_.solves;
        const GridReport r = lfsrsat::run_grid(cnf_, set, g);
        if (r.status == GridStatus::Unsat) {
          report_.exhausted = true;
          report_.stop_reason = "unsat";
          return;
        }
        if (r.status == GridStatus::Interrupted) {
          report_.stop_reason = "grid interrupted: " + r.reason;
          return;
        }
        std::optional<Clause> block;
        if (!accept(r.model, block)) return;
        cnf_.add_clause(*block);
      }
    }

    const GeneratorSpec &spec_;
    const CollisionOptions &options_;
    std::chrono::steady_clock::time_point began_;
    Encoding encoding_;
    Cnf cnf_;
    std::vector<Var> split_vars_;
    CollisionReport report_;
  };

} // namespace

CollisionReport find_collisions(const GeneratorSpec &spec, const Bits &keystream, const CollisionOptions &options)
{
  return Enumeration(spec, keystream, options).run();
}

void write_collisions(std::ostream &out, const CollisionReport &r)
{
  for (const Bits &k : r.keys) out << key_to_hex(k) << "\n";
  out << "exhausted " << (r.exhausted ? "yes" : "no") << "\n";
}

} // namespace lfsrsat
