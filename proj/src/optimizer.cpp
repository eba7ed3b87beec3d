#include "lfsrsat/optimizer.hpp"

#include "lfsrsat/generator.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

namespace lfsrsat {

namespace {

  std::uint64_t width_mask(std::size_t width) { return width == 64 ? ~0ULL : (1ULL << width) - 1; }

  std::uint64_t candidate_bit(std::size_t candidate, std::size_t width) { return 1ULL << (width - 1 - candidate); }

} // namespace

SearchPoint::SearchPoint(std::uint64_t bits, std::size_t width) : bits_(bits), width_(width)
{
  if (width < 1 || width > 64) throw std::invalid_argument("search point width must be 1..64");
  if ((bits & ~width_mask(width)) != 0) throw std::invalid_argument("search point has bits beyond its width");
  if (bits == 0) throw std::invalid_argument("search point must select at least one variable");
}

SearchPoint::SearchPoint(const Bits &mask) : SearchPoint(mask.size() <= 64 ? pack_bits(mask) : 0, mask.size()) {}

SearchPoint SearchPoint::full(std::size_t width) { return {width_mask(width), width}; }

std::size_t SearchPoint::count() const { return static_cast<std::size_t>(std::popcount(bits_)); }

bool SearchPoint::test(std::size_t candidate) const
{
  if (candidate >= width_) throw std::out_of_range("candidate index out of range");
  return (bits_ & candidate_bit(candidate, width_)) != 0;
}

Bits SearchPoint::mask() const { return unpack_bits(bits_, width_); }

std::string to_hex(const SearchPoint &p) { return key_to_hex(p.mask()); }

SearchPoint point_from_hex(std::string_view hex, std::size_t width)
{
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.empty() || hex.size() > 16) throw std::invalid_argument("bad mask '" + std::string(hex) + "'");
  std::uint64_t v = 0;
  for (const char ch : hex) {
    int d = 0;
    if (ch >= '0' && ch <= '9') d = ch - '0';
    else if (ch >= 'a' && ch <= 'f') d = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') d = ch - 'A' + 10;
    else throw std::invalid_argument(std::string("bad hex digit '") + ch + "'");
    v = (v << 4U) | static_cast<std::uint64_t>(d);
  }
  return {v, width};
}

std::size_t hamming(const SearchPoint &a, const SearchPoint &b)
{
  if (a.width() != b.width()) throw std::invalid_argument("points of different width");
  return static_cast<std::size_t>(std::popcount(a.bits() ^ b.bits()));
}

DecompositionSet to_set(const SearchPoint &p, const std::vector<Var> &candidates)
{
  if (candidates.size() != p.width())
    throw std::invalid_argument("point width " + std::to_string(p.width()) + " does not match "
                                + std::to_string(candidates.size()) + " candidates");
  std::vector<Var> vars;
  for (std::size_t i = 0; i < p.width(); ++i)
    if (p.test(i)) vars.push_back(candidates[i]);
  std::sort(vars.begin(), vars.end());
  return DecompositionSet(std::move(vars));
}

namespace {

  std::uint64_t binomial(std::size_t n, std::size_t r)
  {
    if (r > n) return 0;
    r = std::min(r, n - r);
    unsigned __int128 v = 1;
    for (std::size_t i = 1; i <= r; ++i) {
      v = v * (n - r + i) / i;
      if (v > UINT64_MAX) return UINT64_MAX;
    }
    return static_cast<std::uint64_t>(v);
  }

  constexpr std::uint64_t max_shell = 1ULL << 24;

  // every flip pattern of weight r over the width, ascending
  std::vector<SearchPoint> plain_shell(const SearchPoint &p, std::size_t r)
  {
    const std::size_t m = p.width();
    std::vector<SearchPoint> out;
    if (r < 1 || r > m) return out;
    if (binomial(m, r) > max_shell) throw std::length_error("neighbourhood shell too large to enumerate");
    out.reserve(static_cast<std::size_t>(binomial(m, r)));
    std::vector<std::size_t> idx(r);
    for (std::size_t i = 0; i < r; ++i) idx[i] = i;
    for (;;) {
      std::uint64_t flip = 0;
      for (const auto i : idx) flip |= candidate_bit(i, m);
      const std::uint64_t bits = p.bits() ^ flip;
      if (bits != 0) out.emplace_back(bits, m);
      std::size_t k = r;
      while (k > 0 && idx[k - 1] == m - r + k - 1) --k;
      if (k == 0) break;
      ++idx[k - 1];
      for (std::size_t j = k; j < r; ++j) idx[j] = idx[j - 1] + 1;
    }
    return out;
  }

} // namespace

std::vector<SearchPoint> shell(const SearchPoint &p, std::size_t r, std::uint64_t seed)
{
  std::vector<SearchPoint> out = plain_shell(p, r);
  std::mt19937_64 rng(seed);
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<SearchPoint> neighborhood(const SearchPoint &p, std::size_t rho, std::uint64_t seed)
{
  if (rho < 1) throw std::invalid_argument("neighbourhood radius must be at least 1");
  std::vector<SearchPoint> out;
  std::mt19937_64 rng(seed);
  for (std::size_t r = 1; r <= rho && r <= p.width(); ++r) {
    auto s = shell(p, r, rng());
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

std::uint64_t neighborhood_size(const SearchPoint &p, std::size_t rho)
{
  std::uint64_t n = 0;
  for (std::size_t r = 1; r <= rho && r <= p.width(); ++r) n += binomial(p.width(), r);
  // the empty mask is the one point at distance count()
  if (p.count() <= rho) --n;
  return n;
}

Objective estimate_objective(const Cnf &cnf, std::vector<Var> candidates, EstimateOptions options)
{
  auto formula = std::make_shared<const Cnf>(cnf);
  return [formula, candidates = std::move(candidates), options](const SearchPoint &p) {
    const Estimate e = estimate(*formula, to_set(p, candidates), options);
    Evaluation v;
    v.value = e.value;
    v.std_error = e.std_error;
    v.activity = e.set_activity;
    v.censored = e.censored;
    v.samples = e.sample_size;
    v.unit = std::string(to_string(e.unit));
    return v;
  };
}

namespace {

  std::string number(double x)
  {
    std::ostringstream s;
    s << std::setprecision(17) << x;
    return s.str();
  }

  class Evaluator
  {
  public:
    Evaluator(const Objective &f, const SearchOptions &options, SearchResult &result)
      : f_(f), options_(options), result_(result), cache_(options.known), began_(std::chrono::steady_clock::now())
    {}

    // nonempty when a limit forbids another fresh evaluation
    [[nodiscard]] std::string blocked(const SearchPoint &p) const
    {
      if (cache_.contains(p.bits())) return {};
      if (options_.limits.stop && options_.limits.stop->load()) return "stopped";
      if (options_.limits.max_evaluations && result_.evaluated.size() >= *options_.limits.max_evaluations)
        return "evaluations";
      if (options_.limits.max_seconds && elapsed() >= *options_.limits.max_seconds) return "time";
      return {};
    }

    // value of F at p and whether it was freshly computed
    std::pair<Evaluation, bool> operator()(const SearchPoint &p)
    {
      if (const auto it = cache_.find(p.bits()); it != cache_.end()) {
        ++result_.cache_hits;
        return {it->second, false};
      }
      Evaluation e = f_(p);
      cache_.emplace(p.bits(), e);
      result_.evaluated.push_back(p);
      return {e, true};
    }

    void log(const SearchPoint &p, const Evaluation &e, bool fresh, std::string_view decision) const
    {
      if (fresh && options_.log) *options_.log << log_line(p, e, decision) << "\n" << std::flush;
    }

    [[nodiscard]] bool improves(const Evaluation &e, const Evaluation &incumbent) const
    {
      const double margin = options_.noise_guard ? incumbent.std_error : 0.0;
      return e.value < incumbent.value - margin;
    }

  private:
    [[nodiscard]] double elapsed() const
    {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - began_).count();
    }

    const Objective &f_;
    const SearchOptions &options_;
    SearchResult &result_;
    std::map<std::uint64_t, Evaluation> cache_;
    std::chrono::steady_clock::time_point began_;
  };

  void begin(SearchResult &r, Evaluator &eval, const SearchPoint &start)
  {
    const auto [e, fresh] = eval(start);
    eval.log(start, e, fresh, "start");
    r.start = r.best = start;
    r.start_value = r.best_value = e;
  }

} // namespace

SearchResult minimize_sa(const Objective &f, const SearchPoint &start, const SaSchedule &schedule,
  const SearchOptions &options)
{
  if (!(schedule.q > 0.0 && schedule.q < 1.0)) throw std::invalid_argument("cooling factor must lie in (0,1)");
  SearchResult r;
  Evaluator eval(f, options, r);
  begin(r, eval, start);

  double t = schedule.t0 ? *schedule.t0 : r.start_value.value / 10.0;
  const double t_inf = schedule.t_inf ? *schedule.t_inf : t * 1e-6;
  if (t_inf < 0.0) throw std::invalid_argument("temperature threshold must not be negative");
  r.temperature = t;
  if (!(t > t_inf)) {
    r.stop_reason = "temperature";
    return r;
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  SearchPoint center = start;
  Evaluation current = r.start_value;

  for (;;) {
    // checked marks of this center: shells below rho, plus pending[0..next)
    std::size_t rho = 1;
    std::vector<SearchPoint> pending = shell(center, rho, rng());
    std::size_t next = 0;
    bool moved = false;
    while (!moved) {
      if (t < t_inf) {
        r.stop_reason = "temperature";
        return r;
      }
      if (next == pending.size()) {
        if (++rho > center.width() || binomial(center.width(), rho) > max_shell) {
          r.stop_reason = "exhausted";
          return r;
        }
        pending = shell(center, rho, rng());
        next = 0;
        continue;
      }
      const SearchPoint chi = pending[next];
      if (const std::string why = eval.blocked(chi); !why.empty()) {
        r.stop_reason = why;
        return r;
      }
      ++next;
      const auto [e, fresh] = eval(chi);
      const double delta = e.value - current.value;
      moved = delta < 0.0 || coin(rng) < std::exp(-delta / t);
      std::string decision = moved ? "accept" : "reject";
      if (eval.improves(e, r.best_value)) {
        r.best = chi;
        r.best_value = e;
        decision += ",best";
      }
      eval.log(chi, e, fresh, decision);
      if (moved) {
        center = chi;
        current = e;
      }
      t *= schedule.q;
      r.temperature = t;
    }
  }
}

SearchResult minimize_ts(const Objective &f, const SearchPoint &start, const SearchOptions &options)
{
  const std::size_t rho = options.tabu_radius;
  if (rho < 1) throw std::invalid_argument("neighbourhood radius must be at least 1");
  SearchResult r;
  Evaluator eval(f, options, r);

  struct Node
  {
    double activity = 0.0;
    std::uint64_t checked = 0;
    std::uint64_t size = 0;
  };
  std::map<std::uint64_t, Node> nodes;
  std::set<std::uint64_t> l1;
  std::set<std::uint64_t> l2;

  auto ball = [&](const SearchPoint &p) {
    std::vector<SearchPoint> out;
    for (std::size_t k = 1; k <= rho && k <= p.width(); ++k) {
      auto s = plain_shell(p, k);
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  };
  auto settle = [&](std::uint64_t bits, Node &n) {
    if (n.checked == n.size && l2.erase(bits) > 0) l1.insert(bits);
  };
  // markPointInTabuLists
  auto mark = [&](const SearchPoint &chi, const Evaluation &e) {
    Node n{e.activity, 0, neighborhood_size(chi, rho)};
    for (const SearchPoint &q : ball(chi)) {
      const auto it = nodes.find(q.bits());
      if (it == nodes.end()) continue;
      ++n.checked;
      ++it->second.checked;
      settle(q.bits(), it->second);
    }
    l2.insert(chi.bits());
    settle(chi.bits(), nodes.emplace(chi.bits(), n).first->second);
  };
  auto finish = [&](std::string why) {
    r.stop_reason = std::move(why);
    r.l1 = l1.size();
    r.l2 = l2.size();
    return r;
  };

  begin(r, eval, start);
  mark(start, r.start_value);
  std::mt19937_64 rng(options.seed);
  SearchPoint center = start;

  for (;;) {
    if (l2.empty()) return finish("exhausted");
    bool updated = false;
    for (const SearchPoint &chi : neighborhood(center, rho, rng())) {
      if (nodes.contains(chi.bits())) continue;
      if (const std::string why = eval.blocked(chi); !why.empty()) return finish(why);
      const auto [e, fresh] = eval(chi);
      mark(chi, e);
      std::string decision = "checked";
      if (eval.improves(e, r.best_value)) {
        r.best = chi;
        r.best_value = e;
        updated = true;
        decision = "improve";
      }
      eval.log(chi, e, fresh, decision);
    }
    if (updated) {
      center = r.best;
      continue;
    }
    // getPoint: the L2 point with the most set activity, lowest mask on ties
    if (l2.empty()) return finish("exhausted");
    std::uint64_t pick = *l2.begin();
    for (const auto bits : l2)
      if (nodes.at(bits).activity > nodes.at(pick).activity) pick = bits;
    center = SearchPoint(pick, start.width());
  }
}

std::string log_line(const SearchPoint &p, const Evaluation &e, std::string_view decision)
{
  std::ostringstream s;
  s << to_hex(p) << " k=" << p.count() << " n=" << e.samples << " unit=" << e.unit << " F=" << number(e.value)
    << " se=" << number(e.std_error) << " activity=" << number(e.activity) << " censored=" << (e.censored ? 1 : 0)
    << " decision=" << decision;
  return s.str();
}

std::map<std::uint64_t, Evaluation> read_log(std::istream &in, std::size_t width)
{
  std::map<std::uint64_t, Evaluation> known;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string hex;
    fields >> hex;
    Evaluation e;
    bool have_value = false;
    try {
      const SearchPoint p = point_from_hex(hex, width);
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("field without '='");
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "n") e.samples = std::stoul(val);
        else if (key == "unit") e.unit = val;
        else if (key == "F") {
          e.value = std::stod(val);
          have_value = true;
        } else if (key == "se") e.std_error = std::stod(val);
        else if (key == "activity") e.activity = std::stod(val);
        else if (key == "censored") e.censored = val == "1";
      }
      if (!have_value) throw std::invalid_argument("missing F");
      known[p.bits()] = e;
    } catch (const std::exception &ex) {
      throw std::runtime_error("optimizer log line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return known;
}

void write_result(std::ostream &out, const SearchResult &r, const std::vector<Var> &candidates)
{
  out << "best " << to_hex(r.best) << "\n";
  out << "set " << to_string(to_set(r.best, candidates)) << "\n";
  out << "set_size " << r.best.count() << "\n";
  out << "F " << number(r.best_value.value) << "\n";
  out << "std_error " << number(r.best_value.std_error) << "\n";
  out << "unit " << r.best_value.unit << "\n";
  out << "start " << to_hex(r.start) << " F " << number(r.start_value.value) << "\n";
  out << "evaluations " << r.evaluated.size() << "\n";
  out << "cache_hits " << r.cache_hits << "\n";
  out << "stop " << r.stop_reason << "\n";
}

} // namespace lfsrsat
