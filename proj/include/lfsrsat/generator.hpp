#ifndef LFSRSAT_GENERATOR_HPP
#define LFSRSAT_GENERATOR_HPP

#include "lfsrsat/circuit.hpp"
#include "lfsrsat/cnf.hpp"

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lfsrsat {

/// One shift register. Cell positions are 1-based and register-local. A
/// shift moves cell i into cell i+1 and loads the XOR of the feedback taps
/// into cell 1.
struct LfsrSpec
{
  std::size_t length = 0;
  std::vector<std::size_t> feedback_taps;
  std::size_t clock_tap = 0;
  std::size_t output_tap = 0;

  void validate() const;
  friend bool operator==(const LfsrSpec &, const LfsrSpec &) = default;
};

/// Three majority-clocked registers. The key is the initial content of the
/// registers, R1 cells 1..l1 first, then R2, then R3.
struct GeneratorSpec
{
  std::array<LfsrSpec, 3> registers;
  std::size_t keystream_len = 0;

  [[nodiscard]] std::size_t key_length() const;
  void validate() const;
  /// Compact single-line description, e.g. for file headers.
  [[nodiscard]] std::string describe() const;
  friend bool operator==(const GeneratorSpec &, const GeneratorSpec &) = default;
};

struct GeneratorState
{
  std::array<Bits, 3> cells;
  std::size_t t = 0;

  static GeneratorState from_key(const GeneratorSpec &spec, const Bits &key);
};

/// Registers 19/22/23 with the A5/1 feedback polynomials, clocking cells 9,
/// 30, 52 and output cells 19, 41, 64 (global numbering), 114-bit bursts.
GeneratorSpec a51_spec();

/// Small structurally identical generator. Keystream length defaults to
/// twice the key length when `keystream_len` is 0.
GeneratorSpec toy_spec(std::array<std::size_t, 3> lengths, std::array<std::vector<std::size_t>, 3> feedback_taps,
  std::array<std::size_t, 3> clock_taps, std::array<std::size_t, 3> output_taps, std::size_t keystream_len = 0);

/// Inverse of GeneratorSpec::describe(). Throws std::invalid_argument.
GeneratorSpec parse_spec(std::string_view text);

/// 5/6/7-cell preset with an 18-bit key and a 36-bit keystream.
GeneratorSpec toy_preset();

/// Maps a 1-based global cell number onto (register index 0..2, local cell).
std::pair<std::size_t, std::size_t> global_to_local(const GeneratorSpec &spec, std::size_t global_cell);

/// Clocks once and returns the keystream bit read after the shift.
bool step(GeneratorState &state, const GeneratorSpec &spec);

/// Number of registers that shift at the next step (always 2 or 3).
std::size_t shifting_registers(const GeneratorState &state, const GeneratorSpec &spec);

Bits keystream(const GeneratorSpec &spec, const Bits &key);

/// Circuit with key_length() inputs and keystream_len outputs computing
/// keystream(). Conditional shifts are multiplexers driven by the majority
/// of the clocking cells.
Circuit build_circuit(const GeneratorSpec &spec);

/// Keys are n-bit big-endian hex numbers: the most significant bit is R1 cell 1.
Bits key_from_hex(const GeneratorSpec &spec, std::string_view hex);
std::string key_to_hex(const Bits &key);

/// Packs up to 64 bits into an integer, first bit most significant.
std::uint64_t pack_bits(const Bits &bits);
Bits unpack_bits(std::uint64_t value, std::size_t width);

} // namespace lfsrsat

#endif
