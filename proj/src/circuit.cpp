#include "lfsrsat/circuit.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace lfsrsat {

std::string_view to_string(GateKind kind)
{
  switch (kind) {
  case GateKind::Input: return "INPUT";
  case GateKind::Not: return "NOT";
  case GateKind::And: return "AND";
  case GateKind::Xor: return "XOR";
  case GateKind::Or: return "OR";
  case GateKind::Maj3: return "MAJ3";
  }
  return "?";
}

std::size_t arity(GateKind kind)
{
  switch (kind) {
  case GateKind::Input: return 0;
  case GateKind::Not: return 1;
  case GateKind::And:
  case GateKind::Xor:
  case GateKind::Or: return 2;
  case GateKind::Maj3: return 3;
  }
  return 0;
}

GateId Circuit::push(Gate gate)
{
  const auto id = static_cast<GateId>(gates_.size());
  const std::size_t n = arity(gate.kind);
  for (std::size_t i = 0; i < n; ++i) {
    if (gate.operands[i] >= id) throw std::invalid_argument("gate operand must precede the gate");
    for (std::size_t j = 0; j < i; ++j)
      if (gate.operands[i] == gate.operands[j]) throw std::invalid_argument("gate has repeated operand");
  }
  gates_.push_back(gate);
  return id;
}

GateId Circuit::add_input()
{
  const GateId id = push({GateKind::Input, {}});
  inputs_.push_back(id);
  return id;
}

GateId Circuit::add_not(GateId a) { return push({GateKind::Not, {a, 0, 0}}); }
GateId Circuit::add_and(GateId a, GateId b) { return push({GateKind::And, {a, b, 0}}); }
GateId Circuit::add_xor(GateId a, GateId b) { return push({GateKind::Xor, {a, b, 0}}); }
GateId Circuit::add_or(GateId a, GateId b) { return push({GateKind::Or, {a, b, 0}}); }
GateId Circuit::add_maj3(GateId a, GateId b, GateId c) { return push({GateKind::Maj3, {a, b, c}}); }

void Circuit::mark_output(GateId g)
{
  if (g >= gates_.size()) throw std::out_of_range("output gate does not exist");
  outputs_.push_back(g);
}

void Circuit::validate() const
{
  if (inputs_.empty()) throw std::invalid_argument("circuit has no inputs");
  if (outputs_.empty()) throw std::invalid_argument("circuit has no outputs");
}

Bits Circuit::simulate_all(const Bits &input_values) const
{
  if (input_values.size() != inputs_.size())
    throw std::invalid_argument("expected " + std::to_string(inputs_.size()) + " input values");
  Bits value(gates_.size(), false);
  std::size_t next_input = 0;
  for (std::size_t g = 0; g < gates_.size(); ++g) {
    const auto &[kind, op] = gates_[g];
    switch (kind) {
    case GateKind::Input: value[g] = input_values[next_input++]; break;
    case GateKind::Not: value[g] = !value[op[0]]; break;
    case GateKind::And: value[g] = value[op[0]] && value[op[1]]; break;
    case GateKind::Xor: value[g] = value[op[0]] != value[op[1]]; break;
    case GateKind::Or: value[g] = value[op[0]] || value[op[1]]; break;
    case GateKind::Maj3:
      value[g] = (value[op[0]] && value[op[1]]) || (value[op[0]] && value[op[2]]) || (value[op[1]] && value[op[2]]);
      break;
    }
  }
  return value;
}

Bits Circuit::simulate(const Bits &input_values) const
{
  const Bits all = simulate_all(input_values);
  Bits out;
  out.reserve(outputs_.size());
  for (const GateId g : outputs_) out.push_back(all[g]);
  return out;
}

namespace {

  class Lowerer
  {
  public:
    GateId neg(GateId a)
    {
      if (auto it = not_of_.find(a); it != not_of_.end()) return it->second;
      const GateId n = out_.add_not(a);
      not_of_.emplace(a, n);
      return n;
    }

    GateId conj(GateId a, GateId b) { return out_.add_and(a, b); }

    // a | b = !(!a & !b)
    GateId disj(GateId a, GateId b) { return neg(conj(neg(a), neg(b))); }

    // a ^ b = !(a & b) & !(!a & !b)
    GateId exclusive(GateId a, GateId b) { return conj(neg(conj(a, b)), neg(conj(neg(a), neg(b)))); }

    GateId majority(GateId a, GateId b, GateId c) { return disj(disj(conj(a, b), conj(a, c)), conj(b, c)); }

    // Gates of the source circuit always get a fresh image, so distinct
    // operands stay distinct after lowering.
    GateId fresh_neg(GateId a)
    {
      const GateId n = out_.add_not(a);
      not_of_.try_emplace(a, n);
      return n;
    }

    Circuit &circuit() { return out_; }

  private:
    Circuit out_;
    std::unordered_map<GateId, GateId> not_of_;
  };

} // namespace

LoweredCircuit lower(const Circuit &circuit)
{
  Lowerer lw;
  std::vector<GateId> image(circuit.size());
  for (std::size_t g = 0; g < circuit.size(); ++g) {
    const auto &[kind, op] = circuit.gates()[g];
    switch (kind) {
    case GateKind::Input: image[g] = lw.circuit().add_input(); break;
    case GateKind::Not: image[g] = lw.fresh_neg(image[op[0]]); break;
    case GateKind::And: image[g] = lw.conj(image[op[0]], image[op[1]]); break;
    case GateKind::Xor: image[g] = lw.exclusive(image[op[0]], image[op[1]]); break;
    case GateKind::Or: image[g] = lw.disj(image[op[0]], image[op[1]]); break;
    case GateKind::Maj3: image[g] = lw.majority(image[op[0]], image[op[1]], image[op[2]]); break;
    }
  }
  for (const GateId o : circuit.outputs()) {
    GateId target = image[o];
    if (lw.circuit().gate(target).kind == GateKind::Input) {
      // Buffer through a fresh double negation, bypassing the NOT cache so the
      // output owns its own gate.
      target = lw.circuit().add_not(lw.circuit().add_not(target));
    }
    lw.circuit().mark_output(target);
  }
  return {std::move(lw.circuit()), std::move(image)};
}

Encoding tseitin_encode(const Circuit &circuit)
{
  circuit.validate();
  const LoweredCircuit lowered = lower(circuit);
  const Circuit &basic = lowered.circuit;

  std::vector<Var> var_of(basic.size(), 0);
  Var next = 1;
  for (const GateId g : basic.inputs()) var_of[g] = next++;
  for (std::size_t g = 0; g < basic.size(); ++g)
    if (basic.gates()[g].kind != GateKind::Input) var_of[g] = next++;

  Encoding enc;
  enc.cnf = Cnf(next - 1);
  for (std::size_t g = 0; g < basic.size(); ++g) {
    const auto &[kind, op] = basic.gates()[g];
    const Var v = var_of[g];
    if (kind == GateKind::Not) {
      const Var u = var_of[op[0]];
      enc.cnf.add_clause(Clause{Lit(v, true), Lit(u, true)});
      enc.cnf.add_clause(Clause{Lit(v, false), Lit(u, false)});
    } else if (kind == GateKind::And) {
      const Var u = var_of[op[0]];
      const Var w = var_of[op[1]];
      enc.cnf.add_clause(Clause{Lit(v, true), Lit(u, false), Lit(w, false)});
      enc.cnf.add_clause(Clause{Lit(v, false), Lit(u, true)});
      enc.cnf.add_clause(Clause{Lit(v, false), Lit(w, true)});
    }
  }

  for (const GateId g : basic.inputs()) enc.input_vars.push_back(var_of[g]);
  for (const GateId g : basic.outputs()) enc.output_vars.push_back(var_of[g]);
  enc.gate_var.reserve(circuit.size());
  for (const GateId g : lowered.image) enc.gate_var.push_back(var_of[g]);
  return enc;
}

Cnf fix_outputs(const Encoding &encoding, const Bits &beta)
{
  if (beta.size() != encoding.output_vars.size())
    throw std::invalid_argument("expected " + std::to_string(encoding.output_vars.size()) + " output values, got "
                                + std::to_string(beta.size()));
  Cnf cnf = encoding.cnf;
  for (std::size_t i = 0; i < beta.size(); ++i) cnf.add_clause(Clause{Lit(encoding.output_vars[i], beta[i])});
  return cnf;
}

Bits extract_input(const Encoding &encoding, const Cnf &cnf, const Bits &model)
{
  if (!evaluate(cnf, model)) throw std::invalid_argument("model does not satisfy the formula");
  Bits key;
  key.reserve(encoding.input_vars.size());
  for (const Var v : encoding.input_vars) key.push_back(model[v - 1]);
  return key;
}

Bits extract_output(const Encoding &encoding, const Bits &model)
{
  Bits out;
  out.reserve(encoding.output_vars.size());
  for (const Var v : encoding.output_vars) out.push_back(model.at(v - 1));
  return out;
}

void write_netlist(std::ostream &out, const Circuit &circuit)
{
  for (std::size_t g = 0; g < circuit.size(); ++g) {
    const auto &gate = circuit.gates()[g];
    out << g << ' ' << to_string(gate.kind);
    for (std::size_t i = 0; i < arity(gate.kind); ++i) out << ' ' << gate.operands[i];
    out << '\n';
  }
  out << "inputs";
  for (const GateId g : circuit.inputs()) out << ' ' << g;
  out << "\noutputs";
  for (const GateId g : circuit.outputs()) out << ' ' << g;
  out << '\n';
}

} // namespace lfsrsat
