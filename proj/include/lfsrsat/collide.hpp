#ifndef LFSRSAT_COLLIDE_HPP
#define LFSRSAT_COLLIDE_HPP

#include "lfsrsat/generator.hpp"
#include "lfsrsat/grid.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lfsrsat {

struct CollisionOptions
{
  std::optional<std::size_t> limit; ///< stop after this many keys
  Budget budget;                    ///< per solve call
  std::optional<double> max_seconds;
  std::map<std::size_t, bool> fixed; ///< known key bits, by key position (0 = first bit)
  /// Key positions to split on: each cube is enumerated in turn.
  std::vector<std::size_t> split;
  /// Route every pass through the grid over `split` instead.
  std::optional<GridOptions> grid;
  std::uint64_t seed = 0;
};

struct CollisionReport
{
  Bits keystream;
  std::vector<Bits> keys;
  bool exhausted = false; ///< no further key exists
  std::string stop_reason;
  std::size_t solves = 0;
};

/// All keys whose keystream equals `keystream`, by repeated solving with a
/// blocking clause over the key variables after each model.
CollisionReport find_collisions(const GeneratorSpec &spec, const Bits &keystream, const CollisionOptions &options = {});

/// Hex keys, one per line, then "exhausted yes|no".
void write_collisions(std::ostream &out, const CollisionReport &r);

/// Positions lo..hi-1 of `key`, as CollisionOptions::fixed entries.
std::map<std::size_t, bool> fix_range(const Bits &key, std::size_t lo, std::size_t hi);

} // namespace lfsrsat

#endif
