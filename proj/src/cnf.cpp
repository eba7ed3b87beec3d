#include "lfsrsat/cnf.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace lfsrsat {

Lit::Lit(Var var, bool positive) : var_(var), positive_(positive)
{
  if (var == 0) throw std::invalid_argument("literal variable must be >= 1");
}

Lit Lit::from_dimacs(int value)
{
  if (value == 0) throw std::invalid_argument("0 is not a literal");
  const auto magnitude = static_cast<Var>(value < 0 ? -static_cast<long long>(value) : value);
  return {magnitude, value > 0};
}

int Lit::to_dimacs() const
{
  const int v = static_cast<int>(var_);
  return positive_ ? v : -v;
}

Clause::Clause(std::vector<Lit> lits) : lits_(std::move(lits))
{
  std::vector<Lit> sorted = lits_;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i] == sorted[i - 1])
      throw std::invalid_argument("duplicate literal " + std::to_string(sorted[i].to_dimacs()));
    if (sorted[i].var() == sorted[i - 1].var())
      throw std::invalid_argument("tautological clause on variable " + std::to_string(sorted[i].var()));
  }
}

Var Clause::max_var() const
{
  Var m = 0;
  for (const Lit l : lits_) m = std::max(m, l.var());
  return m;
}

Cube::Cube(std::vector<Var> variables, Bits values) : variables_(std::move(variables)), values_(std::move(values))
{
  if (variables_.size() != values_.size()) throw std::invalid_argument("cube variables and values differ in length");
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i] == 0) throw std::invalid_argument("cube variable must be >= 1");
    if (i > 0 && variables_[i] <= variables_[i - 1])
      throw std::invalid_argument("cube variables must be distinct and ascending");
  }
}

void Cnf::add_clause(Clause clause)
{
  if (clause.max_var() > num_vars_)
    throw std::out_of_range("clause mentions variable " + std::to_string(clause.max_var()) + " but formula has "
                            + std::to_string(num_vars_));
  clauses_.push_back(std::move(clause));
}

void Cnf::reserve_vars(Var num_vars) { num_vars_ = std::max(num_vars_, num_vars); }

DimacsError::DimacsError(std::size_t line, const std::string &what)
  : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
{}

namespace {

  std::vector<std::string_view> split_ws(std::string_view line)
  {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
      if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
  }

  template<typename T> bool parse_int(std::string_view tok, T &out)
  {
    const auto *first = tok.data();
    const auto *last = tok.data() + tok.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
  }

} // namespace

Cnf parse_dimacs(std::istream &in)
{
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  long long declared_clauses = 0;
  Cnf cnf;
  std::vector<std::string> comments;
  std::vector<Lit> pending;
  std::size_t pending_line = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks[0][0] == 'c') {
      if (!have_header) {
        std::string_view body = line;
        body.remove_prefix(std::min<std::size_t>(body.find('c') + 1, body.size()));
        if (!body.empty() && body.front() == ' ') body.remove_prefix(1);
        if (!body.empty() && body.back() == '\r') body.remove_suffix(1);
        comments.emplace_back(body);
      }
      continue;
    }
    if (toks[0] == "%") break;
    if (toks[0] == "p") {
      if (have_header) throw DimacsError(lineno, "duplicate header");
      long long vars = 0;
      if (toks.size() != 4 || toks[1] != "cnf" || !parse_int(toks[2], vars) || !parse_int(toks[3], declared_clauses)
          || vars < 0 || declared_clauses < 0 || vars > std::numeric_limits<int>::max())
        throw DimacsError(lineno, "malformed header, expected 'p cnf <vars> <clauses>'");
      cnf = Cnf(static_cast<Var>(vars));
      have_header = true;
      continue;
    }
    if (!have_header) throw DimacsError(lineno, "clause before 'p cnf' header");
    for (const auto tok : toks) {
      int value = 0;
      if (!parse_int(tok, value)) throw DimacsError(lineno, "bad literal '" + std::string(tok) + "'");
      if (value == 0) {
        std::vector<Lit> merged;
        for (const Lit l : pending)
          if (std::find(merged.begin(), merged.end(), l) == merged.end()) merged.push_back(l);
        pending.swap(merged);
        try {
          cnf.add_clause(Clause(std::move(pending)));
        } catch (const std::invalid_argument &e) {
          throw DimacsError(pending_line ? pending_line : lineno, e.what());
        }
        pending.clear();
        pending_line = 0;
        continue;
      }
      const auto var = static_cast<long long>(value < 0 ? -static_cast<long long>(value) : value);
      if (var > static_cast<long long>(cnf.num_vars()))
        throw DimacsError(lineno, "literal " + std::string(tok) + " out of range 1.." + std::to_string(cnf.num_vars()));
      if (pending.empty()) pending_line = lineno;
      pending.push_back(Lit::from_dimacs(value));
    }
  }
  if (!have_header) throw DimacsError(lineno, "missing 'p cnf' header");
  if (!pending.empty()) throw DimacsError(pending_line, "unterminated clause (missing 0)");
  if (static_cast<long long>(cnf.num_clauses()) != declared_clauses)
    throw DimacsError(lineno,
      "header declares " + std::to_string(declared_clauses) + " clauses, found "
        + std::to_string(cnf.num_clauses()));
  for (auto &c : comments) cnf.add_comment(std::move(c));
  return cnf;
}

Cnf parse_dimacs(std::string_view text)
{
  std::istringstream in{std::string(text)};
  return parse_dimacs(in);
}

Cnf read_dimacs_file(const std::string &path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_dimacs(in);
}

void write_dimacs(std::ostream &out, const Cnf &cnf)
{
  for (const auto &c : cnf.comments()) out << "c " << c << '\n';
  out << "p cnf " << cnf.num_vars() << ' ' << cnf.num_clauses() << '\n';
  std::string buf;
  for (const auto &clause : cnf.clauses()) {
    buf.clear();
    for (const Lit l : clause) {
      buf += std::to_string(l.to_dimacs());
      buf += ' ';
    }
    buf += "0\n";
    out << buf;
  }
}

std::string to_dimacs(const Cnf &cnf)
{
  std::ostringstream out;
  write_dimacs(out, cnf);
  return out.str();
}

Cnf apply_cube(const Cnf &cnf, const Cube &cube)
{
  // value_of[v]: -1 unassigned, else 0/1
  std::vector<signed char> value_of(static_cast<std::size_t>(cnf.num_vars()) + 1, -1);
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const Var v = cube.variables()[i];
    if (v > cnf.num_vars()) throw std::out_of_range("cube variable " + std::to_string(v) + " outside formula");
    value_of[v] = cube.values()[i] ? 1 : 0;
  }

  Cnf out(cnf.num_vars());
  for (const auto &c : cnf.comments()) out.add_comment(c);
  std::vector<Lit> kept;
  for (const auto &clause : cnf.clauses()) {
    kept.clear();
    bool satisfied = false;
    for (const Lit l : clause) {
      const auto val = value_of[l.var()];
      if (val < 0) {
        kept.push_back(l);
      } else if (l.satisfied_by(val == 1)) {
        satisfied = true;
        break;
      }
    }
    if (!satisfied) out.add_clause(Clause(kept));
  }
  return out;
}

bool evaluate(const Cnf &cnf, const Bits &assignment)
{
  if (assignment.size() != cnf.num_vars())
    throw std::invalid_argument("assignment has " + std::to_string(assignment.size()) + " values, formula has "
                                + std::to_string(cnf.num_vars()) + " variables");
  return std::all_of(cnf.clauses().begin(), cnf.clauses().end(), [&](const Clause &c) {
    return std::any_of(c.begin(), c.end(), [&](Lit l) { return l.satisfied_by(assignment[l.var() - 1]); });
  });
}

bool agrees_with(const Cube &cube, const Bits &assignment)
{
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const Var v = cube.variables()[i];
    if (v > assignment.size() || assignment[v - 1] != cube.values()[i]) return false;
  }
  return true;
}

std::string bits_to_string(const Bits &bits)
{
  std::string s;
  s.reserve(bits.size());
  for (const bool b : bits) s += b ? '1' : '0';
  return s;
}

Bits bits_from_string(std::string_view text)
{
  Bits bits;
  bits.reserve(text.size());
  for (const char ch : text) {
    if (ch == '0' || ch == '1') {
      bits.push_back(ch == '1');
    } else if (ch != ' ' && ch != '\n' && ch != '\r' && ch != '\t') {
      throw std::invalid_argument(std::string("bit string contains '") + ch + "'");
    }
  }
  return bits;
}

} // namespace lfsrsat
