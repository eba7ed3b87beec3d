#ifndef LFSRSAT_CIRCUIT_HPP
#define LFSRSAT_CIRCUIT_HPP

#include "lfsrsat/cnf.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace lfsrsat {

using GateId = std::uint32_t;

enum class GateKind : std::uint8_t { Input, Not, And, Xor, Or, Maj3 };

std::string_view to_string(GateKind kind);
std::size_t arity(GateKind kind);

struct Gate
{
  GateKind kind = GateKind::Input;
  std::array<GateId, 3> operands{};

  friend bool operator==(const Gate &, const Gate &) = default;
};

/// Acyclic gate graph; every gate refers only to gates created before it.
/// Binary and ternary gates reject repeated operands.
class Circuit
{
public:
  GateId add_input();
  GateId add_not(GateId a);
  GateId add_and(GateId a, GateId b);
  GateId add_xor(GateId a, GateId b);
  GateId add_or(GateId a, GateId b);
  GateId add_maj3(GateId a, GateId b, GateId c);
  void mark_output(GateId g);

  [[nodiscard]] const std::vector<Gate> &gates() const { return gates_; }
  [[nodiscard]] const Gate &gate(GateId g) const { return gates_.at(g); }
  [[nodiscard]] const std::vector<GateId> &inputs() const { return inputs_; }
  [[nodiscard]] const std::vector<GateId> &outputs() const { return outputs_; }
  [[nodiscard]] std::size_t size() const { return gates_.size(); }

  /// Direct evaluation; `input_values` follows inputs() order.
  [[nodiscard]] Bits simulate(const Bits &input_values) const;
  /// Value of every gate, indexed by GateId.
  [[nodiscard]] Bits simulate_all(const Bits &input_values) const;

  /// Throws std::invalid_argument unless there is at least one input and one output.
  void validate() const;

private:
  GateId push(Gate gate);

  std::vector<Gate> gates_;
  std::vector<GateId> inputs_;
  std::vector<GateId> outputs_;
};

/// Result of rewriting a circuit into the {AND, NOT} basis.
struct LoweredCircuit
{
  Circuit circuit;
  /// Original gate id -> gate of `circuit` carrying the same value.
  std::vector<GateId> image;
};

/// XOR, OR and MAJ3 become AND/NOT subgraphs. Each gate gets at most one
/// NOT in the lowered graph. Outputs that are bare inputs are routed
/// through a double negation so every output owns an auxiliary gate.
LoweredCircuit lower(const Circuit &circuit);

struct Encoding
{
  Cnf cnf;
  std::vector<Var> input_vars;
  std::vector<Var> output_vars;
  /// Original gate id -> variable v(G).
  std::vector<Var> gate_var;
};

/// Tseitin transformation. Inputs take variables 1..n in input order; the
/// gates of the lowered circuit follow in topological order.
Encoding tseitin_encode(const Circuit &circuit);

/// C(f) with one unit clause per output: y_i if beta_i = 1, else -y_i.
Cnf fix_outputs(const Encoding &encoding, const Bits &beta);

/// Reads x_1..x_n off a model. Throws std::invalid_argument if the model does
/// not satisfy `cnf` (normally the output-fixed formula the model came from).
Bits extract_input(const Encoding &encoding, const Cnf &cnf, const Bits &model);

/// Reads the output variables off a total assignment.
Bits extract_output(const Encoding &encoding, const Bits &model);

/// One gate per line: "<index> <KIND> <operand>...". Inputs and outputs are
/// listed in trailing "inputs" and "outputs" lines.
void write_netlist(std::ostream &out, const Circuit &circuit);

} // namespace lfsrsat

#endif
