// lfsrsat command-line workbench.
#include "CLI11.hpp"

#include "lfsrsat/circuit.hpp"
#include "lfsrsat/collide.hpp"
#include "lfsrsat/generator.hpp"
#include "lfsrsat/grid.hpp"
#include "lfsrsat/optimizer.hpp"
#include "lfsrsat/partition.hpp"
#include "lfsrsat/solver.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#ifndef LFSRSAT_VERSION
#define LFSRSAT_VERSION "0.0.0"
#endif

using namespace lfsrsat;

namespace {

constexpr int exit_sat = 10;
constexpr int exit_unsat = 20;
constexpr int exit_differ = 2;

struct UsageError : std::runtime_error
{
  using std::runtime_error::runtime_error;
};

// "3,5-8,12" -> 3 5 6 7 8 12
std::vector<std::size_t> parse_list(const std::string &text)
{
  std::vector<std::size_t> out;
  std::istringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    if (item.empty()) continue;
    const auto dash = item.find('-');
    try {
      if (dash == std::string::npos) {
        out.push_back(std::stoul(item));
      } else {
        const std::size_t lo = std::stoul(item.substr(0, dash));
        const std::size_t hi = std::stoul(item.substr(dash + 1));
        if (lo > hi) throw UsageError("empty range " + item);
        for (std::size_t i = lo; i <= hi; ++i) out.push_back(i);
      }
    } catch (const std::logic_error &) {
      throw UsageError("bad list item '" + item + "'");
    }
  }
  return out;
}

std::vector<Var> parse_vars(const std::string &text)
{
  std::vector<Var> out;
  for (const auto v : parse_list(text)) {
    if (v == 0 || v > std::numeric_limits<Var>::max()) throw UsageError("variable " + std::to_string(v) + " out of range");
    out.push_back(static_cast<Var>(v));
  }
  return out;
}

Cnf load_cnf(const std::string &path)
{
  if (path == "-") return parse_dimacs(std::cin);
  return read_dimacs_file(path);
}

// "inputs 1-64" comment written by encode
std::optional<std::vector<Var>> recorded_inputs(const Cnf &cnf)
{
  static const std::regex re(R"(^inputs ([0-9,-]+)\s*$)");
  for (const auto &c : cnf.comments()) {
    std::smatch m;
    if (std::regex_match(c, m, re)) return parse_vars(m[1]);
  }
  return std::nullopt;
}

std::string range_text(const std::vector<Var> &vars)
{
  std::string out;
  for (std::size_t i = 0; i < vars.size();) {
    std::size_t j = i;
    while (j + 1 < vars.size() && vars[j + 1] == vars[j] + 1) ++j;
    out += (out.empty() ? "" : ",") + std::to_string(vars[i]);
    if (j > i) out += "-" + std::to_string(vars[j]);
    i = j + 1;
  }
  return out;
}

Bits read_keystream_text(std::istream &in)
{
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == '#') continue;
    return bits_from_string(line.substr(0, line.find_last_not_of(" \r\t") + 1));
  }
  throw UsageError("no keystream on input");
}

struct GeneratorArgs
{
  std::string preset = "a51";
  std::string spec;

  void add(CLI::App *app)
  {
    app->add_option("--preset", preset, "generator preset")->check(CLI::IsMember({"a51", "toy"}));
    app->add_option("--spec", spec, "custom generator, in the format printed in output headers");
  }

  [[nodiscard]] GeneratorSpec get() const
  {
    if (!spec.empty()) return parse_spec(spec);
    return preset == "toy" ? toy_preset() : a51_spec();
  }
};

struct BudgetArgs
{
  std::optional<std::uint64_t> max_conflicts;
  std::optional<double> max_seconds;

  void add(CLI::App *app, const std::string &what)
  {
    app->add_option("--max-conflicts", max_conflicts, "conflict budget " + what);
    app->add_option("--max-seconds", max_seconds, "time budget " + what + " (wall time)");
  }

  [[nodiscard]] Budget get() const { return {max_conflicts, max_seconds}; }
};

// decomposition set from --set, or --mask over --candidates
struct SetArgs
{
  std::string set;
  std::string mask;
  std::string candidates;

  void add(CLI::App *app)
  {
    app->add_option("--set", set, "decomposition set as a variable list, e.g. 1-10,17");
    app->add_option("--mask", mask, "decomposition set as a hex mask over the candidates (first candidate = MSB)");
    app->add_option("--candidates", candidates, "candidate variables (default: the inputs recorded in the CNF)");
  }

  [[nodiscard]] std::vector<Var> candidate_vars(const Cnf &cnf) const
  {
    if (!candidates.empty()) return parse_vars(candidates);
    if (auto in = recorded_inputs(cnf)) return *in;
    throw UsageError("--candidates is required for a CNF without an inputs comment");
  }

  [[nodiscard]] DecompositionSet get(const Cnf &cnf) const
  {
    if (set.empty() == mask.empty()) throw UsageError("give exactly one of --set and --mask");
    DecompositionSet s = set.empty() ? to_set(point_from_hex(mask, candidate_vars(cnf).size()), candidate_vars(cnf))
                                     : DecompositionSet(parse_vars(set));
    s.check_range(cnf.num_vars());
    return s;
  }
};

// Every output starts with these lines: version, digest of the effective
// configuration, the configuration itself and the fields that depend on time.
void header(std::ostream &out, const CLI::App &sub, const std::string &prefix, const std::string &wall_time)
{
  const std::string config = sub.config_to_str(true, false);
  out << prefix << "lfsrsat " << LFSRSAT_VERSION << " " << sub.get_name() << " config=" << sha256_hex(config).substr(0, 16)
      << "\n";
  std::istringstream lines(config);
  for (std::string line; std::getline(lines, line);) out << prefix << "  " << line << "\n";
  out << prefix << "wall-time: " << (wall_time.empty() ? "none" : wall_time) << "\n";
}

std::string budget_wall(const BudgetArgs &b, const std::string &extra = {})
{
  std::string s = extra;
  if (b.max_seconds) s += std::string(s.empty() ? "" : ", ") + "outcome (time budget)";
  return s;
}

// key=value file -> "--key=value" arguments
std::vector<std::string> config_args(const std::string &path)
{
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config " + path);
  std::vector<std::string> out;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path + ":" + std::to_string(lineno) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw UsageError(path + ":" + std::to_string(lineno) + ": empty key");
    out.push_back("--" + key + "=" + value);
  }
  return out;
}

int run(int argc, char **argv)
{
  CLI::App app{"SAT-based cryptanalysis workbench for majority-clocked LFSR generators"};
  app.name("lfsrsat");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LFSRSAT_VERSION));
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path; // consumed before parsing, listed for --help
  app.add_option("--config", config_path, "key=value file with subcommand options; flags override it");

  // encode
  auto *encode = app.add_subcommand("encode", "generator circuit to DIMACS, optionally with the keystream fixed");
  GeneratorArgs encode_gen;
  encode_gen.add(encode);
  std::string encode_keystream, encode_key, encode_output = "-", encode_netlist;
  encode->add_option("--keystream", encode_keystream, "keystream bits to fix, e.g. 0110...");
  encode->add_option("--key", encode_key, "hex key whose keystream is fixed");
  encode->add_option("-o,--output", encode_output, "DIMACS file, - for stdout");
  encode->add_option("--netlist", encode_netlist, "also write the gate netlist here");

  // keystream
  auto *ks = app.add_subcommand("keystream", "keystream of a key");
  GeneratorArgs ks_gen;
  ks_gen.add(ks);
  std::string ks_key;
  ks->add_option("--key", ks_key, "hex key")->required();

  // keystream-compare
  auto *cmp = app.add_subcommand("keystream-compare", "compare a keystream with the keystream of a key");
  GeneratorArgs cmp_gen;
  cmp_gen.add(cmp);
  std::string cmp_key, cmp_keystream, cmp_input = "-";
  cmp->add_option("--key", cmp_key, "hex key")->required();
  cmp->add_option("--keystream", cmp_keystream, "keystream bits (default: read from --input)");
  cmp->add_option("--input", cmp_input, "file holding keystream output, - for stdin");

  // solve
  auto *solve_cmd = app.add_subcommand("solve", "solve a DIMACS formula under optional assumptions");
  std::string solve_cnf, solve_assume;
  std::uint64_t solve_seed = 0;
  BudgetArgs solve_budget;
  solve_cmd->add_option("cnf", solve_cnf, "DIMACS file, - for stdin")->required();
  solve_cmd->add_option("--assume", solve_assume, "assumption literals, e.g. 1,-3,7");
  solve_cmd->add_option("--seed", solve_seed, "solver seed");
  solve_budget.add(solve_cmd, "for the solve");

  // estimate
  auto *est = app.add_subcommand("estimate", "predictive cost of a decomposition set");
  std::string est_cnf;
  SetArgs est_set;
  std::size_t est_n = 100, est_workers = 1;
  std::string est_unit = "conflicts";
  std::uint64_t est_seed = 0, est_solver_seed = 0;
  bool est_exact = false;
  BudgetArgs est_budget;
  est->add_option("cnf", est_cnf, "DIMACS file")->required();
  est_set.add(est);
  est->add_option("--n", est_n, "sample size");
  est->add_option("--unit", est_unit, "cost unit")->check(CLI::IsMember({"conflicts", "seconds"}));
  est->add_option("--seed", est_seed, "cube sampling seed");
  est->add_option("--solver-seed", est_solver_seed, "solver seed");
  est->add_option("--workers", est_workers, "solver threads");
  est->add_flag("--exact", est_exact, "process every cube instead of sampling");
  est_budget.add(est, "per cube");

  // optimize
  auto *opt = app.add_subcommand("optimize", "search for a decomposition set with low predicted cost");
  std::string opt_cnf, opt_method = "ts", opt_start, opt_candidates, opt_log, opt_unit = "conflicts";
  std::size_t opt_n = 100, opt_radius = 1, opt_workers = 1;
  std::uint64_t opt_seed = 0, opt_sample_seed = 0, opt_solver_seed = 0;
  std::optional<double> opt_t0, opt_t_inf, opt_time;
  std::optional<std::size_t> opt_evals;
  double opt_q = 0.98;
  bool opt_no_guard = false;
  BudgetArgs opt_budget;
  opt->add_option("cnf", opt_cnf, "DIMACS file")->required();
  opt->add_option("--method", opt_method, "search method")->check(CLI::IsMember({"sa", "ts"}));
  opt->add_option("--start", opt_start, "hex start mask (default: every candidate)");
  opt->add_option("--candidates", opt_candidates, "candidate variables (default: the inputs recorded in the CNF)");
  opt->add_option("--n", opt_n, "sample size per evaluation");
  opt->add_option("--unit", opt_unit, "cost unit")->check(CLI::IsMember({"conflicts", "seconds"}));
  opt->add_option("--seed", opt_seed, "search seed");
  opt->add_option("--sample-seed", opt_sample_seed, "cube sampling seed");
  opt->add_option("--solver-seed", opt_solver_seed, "solver seed");
  opt->add_option("--workers", opt_workers, "solver threads per evaluation");
  opt->add_option("--log", opt_log, "evaluation log; an existing log is read back first");
  opt->add_option("--t0", opt_t0, "initial temperature (sa)");
  opt->add_option("--q", opt_q, "cooling factor (sa)");
  opt->add_option("--t-inf", opt_t_inf, "final temperature (sa)");
  opt->add_option("--radius", opt_radius, "tabu marking radius (ts)");
  opt->add_flag("--no-noise-guard", opt_no_guard, "count any decrease as an improvement");
  opt->add_option("--time-limit", opt_time, "search time limit in seconds (wall time)");
  opt->add_option("--max-evaluations", opt_evals, "limit on fresh evaluations");
  opt_budget.add(opt, "per cube");

  // grid-run
  auto *grid_cmd = app.add_subcommand("grid-run", "solve every cube of a decomposition set on worker processes");
  std::string grid_cnf, grid_journal;
  SetArgs grid_set;
  std::size_t grid_workers = 1, grid_retries = 3;
  std::uint64_t grid_batch = 64, grid_seed = 0;
  double grid_heartbeat = 60.0;
  std::vector<std::string> grid_faults;
  BudgetArgs grid_budget;
  grid_cmd->add_option("cnf", grid_cnf, "DIMACS file")->required();
  grid_set.add(grid_cmd);
  grid_cmd->add_option("--workers", grid_workers, "worker processes");
  grid_cmd->add_option("--batch", grid_batch, "cubes per work unit");
  grid_cmd->add_option("--solver-seed", grid_seed, "solver seed");
  grid_cmd->add_option("--journal", grid_journal, "checkpoint file; an existing journal is resumed");
  grid_cmd->add_option("--max-retries", grid_retries, "doubled-budget reissues of an unknown replica");
  grid_cmd->add_option("--heartbeat-timeout", grid_heartbeat, "seconds of worker silence before respawn");
  grid_cmd->add_option("--fault", grid_faults, "SLOT:MODE fault injection, MODE one of corrupt-models, flip-unsat, crash-once")
    ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  grid_budget.add(grid_cmd, "per cube");

  // collide
  auto *col = app.add_subcommand("collide", "enumerate all keys that produce a keystream");
  GeneratorArgs col_gen;
  col_gen.add(col);
  std::string col_keystream, col_key, col_known, col_known_range, col_split;
  std::optional<std::size_t> col_limit;
  std::optional<double> col_time;
  std::size_t col_grid_workers = 0;
  std::uint64_t col_batch = 64, col_seed = 0;
  BudgetArgs col_budget;
  col->add_option("--keystream", col_keystream, "keystream bits");
  col->add_option("--key", col_key, "hex key whose keystream is used");
  col->add_option("--known", col_known, "hex key supplying known bits");
  col->add_option("--known-range", col_known_range, "LO:HI, key positions LO..HI-1 (0 = first bit) taken from --known");
  col->add_option("--split", col_split, "key positions to split on, e.g. 0-7");
  col->add_option("--limit", col_limit, "stop after this many keys");
  col->add_option("--time-limit", col_time, "overall time limit in seconds (wall time)");
  col->add_option("--grid-workers", col_grid_workers, "route every pass through the grid with this many workers (0: direct)");
  col->add_option("--batch", col_batch, "cubes per grid work unit");
  col->add_option("--seed", col_seed, "solver seed");
  col_budget.add(col, "per solve");

  // splice the config file in front of the subcommand's own flags
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path.empty()) {
    const auto subs = app.get_subcommands([](const CLI::App *) { return true; });
    const auto sub = std::find_if(args.begin(), args.end(), [&](const std::string &a) {
      return std::any_of(subs.begin(), subs.end(), [&](const CLI::App *s) { return s->get_name() == a; });
    });
    if (sub == args.end()) throw UsageError("--config needs a subcommand");
    const auto extra = config_args(path);
    args.insert(sub + 1, extra.begin(), extra.end());
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 1;
  }

  std::ostream &out = std::cout;

  if (*encode) {
    const GeneratorSpec spec = encode_gen.get();
    if (!encode_keystream.empty() && !encode_key.empty()) throw UsageError("give at most one of --keystream and --key");
    const Circuit circuit = build_circuit(spec);
    const Encoding e = tseitin_encode(circuit);
    Cnf cnf = e.cnf;
    std::optional<Bits> beta;
    if (!encode_keystream.empty()) beta = bits_from_string(encode_keystream);
    if (!encode_key.empty()) beta = keystream(spec, key_from_hex(spec, encode_key));
    if (beta) cnf = fix_outputs(e, *beta);
    std::ostringstream head;
    header(head, *encode, "", "");
    Cnf doc(cnf.num_vars());
    std::istringstream lines(head.str());
    for (std::string line; std::getline(lines, line);) doc.add_comment(line);
    doc.add_comment("generator " + spec.describe());
    doc.add_comment("convention key hex MSB = R1 cell 1, registers R1 R2 R3; output read after each shift");
    doc.add_comment("inputs " + range_text(e.input_vars));
    doc.add_comment("outputs " + range_text(e.output_vars));
    if (beta) doc.add_comment("keystream " + bits_to_string(*beta));
    for (const Clause &c : cnf.clauses()) doc.add_clause(c);
    if (encode_output == "-") {
      write_dimacs(out, doc);
    } else {
      std::ofstream f(encode_output);
      if (!f) throw std::runtime_error("cannot write " + encode_output);
      write_dimacs(f, doc);
    }
    if (!encode_netlist.empty()) {
      std::ofstream f(encode_netlist);
      if (!f) throw std::runtime_error("cannot write " + encode_netlist);
      write_netlist(f, circuit);
    }
    return 0;
  }

  if (*ks) {
    const GeneratorSpec spec = ks_gen.get();
    header(out, *ks, "# ", "");
    out << bits_to_string(keystream(spec, key_from_hex(spec, ks_key))) << "\n";
    return 0;
  }

  if (*cmp) {
    const GeneratorSpec spec = cmp_gen.get();
    Bits given;
    if (!cmp_keystream.empty()) {
      given = bits_from_string(cmp_keystream);
    } else if (cmp_input == "-") {
      given = read_keystream_text(std::cin);
    } else {
      std::ifstream f(cmp_input);
      if (!f) throw std::runtime_error("cannot open " + cmp_input);
      given = read_keystream_text(f);
    }
    const Bits mine = keystream(spec, key_from_hex(spec, cmp_key));
    header(out, *cmp, "# ", "");
    if (given == mine) {
      out << "equal\n";
      return 0;
    }
    std::size_t at = 0;
    while (at < given.size() && at < mine.size() && given[at] == mine[at]) ++at;
    out << "different (first difference at bit " << at << ")\n";
    return exit_differ;
  }

  if (*solve_cmd) {
    const Cnf cnf = load_cnf(solve_cnf);
    std::vector<Lit> lits;
    for (const std::string &item : [&] {
           std::vector<std::string> v;
           std::istringstream in(solve_assume);
           for (std::string t; std::getline(in, t, ',');)
             if (!t.empty()) v.push_back(t);
           return v;
         }()) {
      int value = 0;
      try {
        value = std::stoi(item);
      } catch (const std::logic_error &) {
        throw UsageError("bad literal '" + item + "'");
      }
      const Lit l = Lit::from_dimacs(value);
      if (l.var() > cnf.num_vars()) throw UsageError("assumption " + item + " outside the formula");
      lits.push_back(l);
    }
    std::map<Var, bool> assumed;
    for (const Lit l : lits)
      if (!assumed.emplace(l.var(), l.positive()).first->second == l.positive())
        throw UsageError("contradictory assumptions on variable " + std::to_string(l.var()));
    std::vector<Var> vars;
    Bits values;
    for (const auto &[v, value] : assumed) {
      vars.push_back(v);
      values.push_back(value);
    }
    const SolveOutcome o = solve(cnf, Cube(vars, values), solve_budget.get(), solve_seed);
    header(out, *solve_cmd, "c ", budget_wall(solve_budget, "elapsed"));
    std::ostringstream stats;
    write_stats(stats, o.stats);
    std::istringstream lines(stats.str());
    for (std::string line; std::getline(lines, line);) out << "c " << line << "\n";
    if (o.status == Status::Sat) {
      out << "s SATISFIABLE\n";
      std::string v = "v";
      for (Var i = 1; i <= cnf.num_vars(); ++i) {
        const std::string lit = " " + std::string(o.model[i - 1] ? "" : "-") + std::to_string(i);
        if (v.size() + lit.size() > 78) {
          out << v << "\n";
          v = "v";
        }
        v += lit;
      }
      out << v << " 0\n";
      return exit_sat;
    }
    if (o.status == Status::Unsat) {
      out << "s UNSATISFIABLE\n";
      return exit_unsat;
    }
    out << "s UNKNOWN\n";
    return 0;
  }

  if (*est) {
    const Cnf cnf = load_cnf(est_cnf);
    const DecompositionSet set = est_set.get(cnf);
    EstimateOptions o;
    o.samples = est_n;
    o.seed = est_seed;
    o.solver_seed = est_solver_seed;
    o.budget = est_budget.get();
    o.unit = parse_unit(est_unit);
    o.workers = est_workers;
    const Estimate e = est_exact ? enumerate_exact(cnf, set, o) : estimate(cnf, set, o);
    header(out, *est, "# ", budget_wall(est_budget, est_unit == "seconds" ? "mean, F, std_error" : ""));
    write_report(out, e);
    out << "record " << to_record(e) << "\n";
    return 0;
  }

  if (*opt) {
    const Cnf cnf = load_cnf(opt_cnf);
    SetArgs cands;
    cands.candidates = opt_candidates;
    const std::vector<Var> candidates = cands.candidate_vars(cnf);
    DecompositionSet(candidates).check_range(cnf.num_vars());
    EstimateOptions eo;
    eo.samples = opt_n;
    eo.seed = opt_sample_seed;
    eo.solver_seed = opt_solver_seed;
    eo.budget = opt_budget.get();
    eo.unit = parse_unit(opt_unit);
    eo.workers = opt_workers;
    const SearchPoint start = opt_start.empty() ? SearchPoint::full(candidates.size())
                                                : point_from_hex(opt_start, candidates.size());
    SearchOptions so;
    so.seed = opt_seed;
    so.noise_guard = !opt_no_guard;
    so.tabu_radius = opt_radius;
    so.limits.max_seconds = opt_time;
    so.limits.max_evaluations = opt_evals;
    std::ofstream log;
    if (!opt_log.empty()) {
      if (std::filesystem::exists(opt_log)) {
        std::ifstream in(opt_log);
        so.known = read_log(in, candidates.size());
      }
      log.open(opt_log, std::ios::app);
      if (!log) throw std::runtime_error("cannot write " + opt_log);
      so.log = &log;
    }
    const Objective f = estimate_objective(cnf, candidates, eo);
    const SearchResult r = opt_method == "sa" ? minimize_sa(f, start, {opt_t0, opt_q, opt_t_inf}, so)
                                              : minimize_ts(f, start, so);
    std::string wall = budget_wall(opt_budget, opt_unit == "seconds" ? "every F and the search path" : "");
    if (opt_time) wall += std::string(wall.empty() ? "" : ", ") + "stop point (time limit)";
    header(out, *opt, "# ", wall);
    write_result(out, r, candidates);
    return 0;
  }

  if (*grid_cmd) {
    const Cnf cnf = load_cnf(grid_cnf);
    const DecompositionSet set = grid_set.get(cnf);
    GridOptions g;
    g.workers = grid_workers;
    g.batch = grid_batch;
    g.budget = grid_budget.get();
    g.solver_seed = grid_seed;
    g.journal = grid_journal;
    g.max_retries = grid_retries;
    g.heartbeat_timeout = grid_heartbeat;
    for (const std::string &f : grid_faults) {
      const auto colon = f.find(':');
      if (colon == std::string::npos) throw UsageError("--fault expects SLOT:MODE, got " + f);
      std::size_t slot = 0;
      try {
        slot = std::stoul(f.substr(0, colon));
      } catch (const std::logic_error &) {
        throw UsageError("bad fault slot in " + f);
      }
      g.faults[slot] = parse_fault(f.substr(colon + 1));
    }
    const GridReport r = run_grid(cnf, set, g);
    header(out, *grid_cmd, "# ", budget_wall(grid_budget, "worker assignment, results, retries"));
    write_report(out, r);
    if (r.status == GridStatus::Sat) {
      if (const auto inputs = recorded_inputs(cnf)) {
        Bits key;
        for (const Var v : *inputs) key.push_back(r.model.at(v - 1));
        out << "key " << key_to_hex(key) << "\n";
      }
      return exit_sat;
    }
    return r.status == GridStatus::Unsat ? exit_unsat : 0;
  }

  if (*col) {
    const GeneratorSpec spec = col_gen.get();
    if (col_keystream.empty() == col_key.empty()) throw UsageError("give exactly one of --keystream and --key");
    const Bits target = col_key.empty() ? bits_from_string(col_keystream) : keystream(spec, key_from_hex(spec, col_key));
    CollisionOptions o;
    o.limit = col_limit;
    o.budget = col_budget.get();
    o.max_seconds = col_time;
    o.seed = col_seed;
    if (col_known.empty() != col_known_range.empty()) throw UsageError("--known and --known-range go together");
    if (!col_known.empty()) {
      const auto colon = col_known_range.find(':');
      if (colon == std::string::npos) throw UsageError("--known-range expects LO:HI");
      try {
        o.fixed = fix_range(key_from_hex(spec, col_known), std::stoul(col_known_range.substr(0, colon)),
                            std::stoul(col_known_range.substr(colon + 1)));
      } catch (const std::invalid_argument &) {
        throw UsageError("bad --known-range " + col_known_range);
      }
    }
    if (!col_split.empty()) o.split = parse_list(col_split);
    if (col_grid_workers > 0) {
      GridOptions g;
      g.workers = col_grid_workers;
      g.batch = col_batch;
      g.solver_seed = col_seed;
      o.grid = g;
    }
    const CollisionReport r = find_collisions(spec, target, o);
    std::string wall = budget_wall(col_budget);
    if (col_time) wall += std::string(wall.empty() ? "" : ", ") + "outcome (time limit)";
    header(out, *col, "# ", wall);
    out << "# keystream " << bits_to_string(r.keystream) << "\n";
    write_collisions(out, r);
    out << "stop " << r.stop_reason << "\n";
    return 0;
  }
  return 1;
}

} // namespace

int main(int argc, char **argv)
{
  try {
    return run(argc, argv);
  } catch (const UsageError &e) {
    std::cerr << "lfsrsat: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "lfsrsat: error: " << e.what() << "\n";
    return 1;
  }
}
