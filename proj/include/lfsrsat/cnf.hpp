#ifndef LFSRSAT_CNF_HPP
#define LFSRSAT_CNF_HPP

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lfsrsat {

/// 1-based propositional variable index, as in DIMACS. 0 is never a variable.
using Var = std::uint32_t;

/// Plain bit vector used for keys, keystreams, models and cube values.
using Bits = std::vector<bool>;

class Lit
{
public:
  constexpr Lit() = default;
  Lit(Var var, bool positive);

  /// Builds a literal from a nonzero signed DIMACS integer.
  static Lit from_dimacs(int value);

  [[nodiscard]] constexpr Var var() const { return var_; }
  [[nodiscard]] constexpr bool positive() const { return positive_; }
  [[nodiscard]] int to_dimacs() const;

  /// Dense code 2*(var-1) + (negative ? 1 : 0); used to index watch lists.
  [[nodiscard]] constexpr std::uint32_t code() const { return 2U * (var_ - 1U) + (positive_ ? 0U : 1U); }

  [[nodiscard]] constexpr Lit operator~() const
  {
    Lit l = *this;
    l.positive_ = !positive_;
    return l;
  }

  /// True if this literal is satisfied when its variable takes `value`.
  [[nodiscard]] constexpr bool satisfied_by(bool value) const { return value == positive_; }

  friend constexpr bool operator==(Lit a, Lit b) = default;
  friend constexpr bool operator<(Lit a, Lit b) { return a.code() < b.code(); }

private:
  Var var_ = 1;
  bool positive_ = true;
};

/// Disjunction of literals. Duplicate literals and tautologies are rejected.
class Clause
{
public:
  Clause() = default;
  explicit Clause(std::vector<Lit> lits);
  Clause(std::initializer_list<Lit> lits) : Clause(std::vector<Lit>(lits)) {}

  [[nodiscard]] const std::vector<Lit> &lits() const { return lits_; }
  [[nodiscard]] std::size_t size() const { return lits_.size(); }
  [[nodiscard]] bool empty() const { return lits_.empty(); }
  [[nodiscard]] auto begin() const { return lits_.begin(); }
  [[nodiscard]] auto end() const { return lits_.end(); }
  [[nodiscard]] Var max_var() const;

  friend bool operator==(const Clause &, const Clause &) = default;

private:
  std::vector<Lit> lits_;
};

/// Assignment of values to a sorted set of distinct variables (a subproblem selector).
class Cube
{
public:
  Cube() = default;
  Cube(std::vector<Var> variables, Bits values);

  [[nodiscard]] const std::vector<Var> &variables() const { return variables_; }
  [[nodiscard]] const Bits &values() const { return values_; }
  [[nodiscard]] std::size_t size() const { return variables_.size(); }
  [[nodiscard]] bool empty() const { return variables_.empty(); }
  [[nodiscard]] Lit literal(std::size_t i) const { return Lit(variables_[i], values_[i]); }

  friend bool operator==(const Cube &, const Cube &) = default;

private:
  std::vector<Var> variables_;
  Bits values_;
};

class Cnf
{
public:
  Cnf() = default;
  explicit Cnf(Var num_vars) : num_vars_(num_vars) {}

  [[nodiscard]] Var num_vars() const { return num_vars_; }
  [[nodiscard]] const std::vector<Clause> &clauses() const { return clauses_; }
  [[nodiscard]] std::size_t num_clauses() const { return clauses_.size(); }
  [[nodiscard]] const std::vector<std::string> &comments() const { return comments_; }

  /// Throws std::out_of_range if a literal mentions a variable above num_vars.
  void add_clause(Clause clause);
  void add_comment(std::string line) { comments_.push_back(std::move(line)); }
  /// Grows the variable range; never shrinks it.
  void reserve_vars(Var num_vars);

  friend bool operator==(const Cnf &a, const Cnf &b)
  {
    return a.num_vars_ == b.num_vars_ && a.clauses_ == b.clauses_;
  }

private:
  Var num_vars_ = 0;
  std::vector<Clause> clauses_;
  std::vector<std::string> comments_;
};

class DimacsError : public std::runtime_error
{
public:
  DimacsError(std::size_t line, const std::string &what);
  [[nodiscard]] std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Parses DIMACS cnf text. Duplicate literals inside a clause are merged;
/// tautological clauses, bad headers, out-of-range literals and missing
/// terminators raise DimacsError with the offending line number.
Cnf parse_dimacs(std::istream &in);
Cnf parse_dimacs(std::string_view text);
Cnf read_dimacs_file(const std::string &path);

void write_dimacs(std::ostream &out, const Cnf &cnf);
std::string to_dimacs(const Cnf &cnf);

/// C[X/alpha]: drops satisfied clauses and falsified literals. Variable
/// numbering is kept, so the result may contain the empty clause.
Cnf apply_cube(const Cnf &cnf, const Cube &cube);

/// `assignment[v-1]` is the value of variable v. Throws std::invalid_argument
/// on a length mismatch.
bool evaluate(const Cnf &cnf, const Bits &assignment);

/// True if every variable of the cube receives the cube's value in `assignment`.
bool agrees_with(const Cube &cube, const Bits &assignment);

std::string bits_to_string(const Bits &bits);
Bits bits_from_string(std::string_view text);

} // namespace lfsrsat

#endif
