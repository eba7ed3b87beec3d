#include "lfsrsat/solver.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace lfsrsat {

std::string_view to_string(Status status)
{
  switch (status) {
  case Status::Sat: return "SAT";
  case Status::Unsat: return "UNSAT";
  case Status::Unknown: return "UNKNOWN";
  }
  return "?";
}

std::string_view to_string(Propagation p)
{
  switch (p) {
  case Propagation::SatByPropagation: return "SAT-by-propagation";
  case Propagation::Conflict: return "CONFLICT";
  case Propagation::Undetermined: return "UNDETERMINED";
  }
  return "?";
}

Budget Budget::scaled(double factor) const
{
  Budget b = *this;
  if (b.max_conflicts) b.max_conflicts = static_cast<std::uint64_t>(std::ceil(static_cast<double>(*b.max_conflicts) * factor));
  if (b.max_seconds) b.max_seconds = *b.max_seconds * factor;
  return b;
}

void write_stats(std::ostream &out, const SolveStats &stats)
{
  const double total = std::accumulate(stats.activity.begin(), stats.activity.end(), 0.0);
  const double peak = stats.activity.empty() ? 0.0 : *std::max_element(stats.activity.begin(), stats.activity.end());
  out << "decisions=" << stats.decisions << '\n'
      << "conflicts=" << stats.conflicts << '\n'
      << "propagations=" << stats.propagations << '\n'
      << "restarts=" << stats.restarts << '\n'
      << "elapsed=" << stats.elapsed << '\n'
      << "activity_total=" << total << '\n'
      << "activity_max=" << peak << '\n';
}

std::uint64_t luby(std::uint64_t index)
{
  std::uint64_t size = 1;
  std::uint64_t seq = 0;
  while (size < index + 1) {
    ++seq;
    size = 2 * size + 1;
  }
  while (size - 1 != index) {
    size = (size - 1) >> 1U;
    --seq;
    index %= size;
  }
  return std::uint64_t{1} << seq;
}

// ---------------------------------------------------------------------------
// heap

void Solver::VarHeap::insert(std::uint32_t v)
{
  if (contains(v)) return;
  pos_[v] = static_cast<int>(heap_.size());
  heap_.push_back(v);
  up(heap_.size() - 1);
}

std::uint32_t Solver::VarHeap::pop()
{
  const std::uint32_t top = heap_.front();
  heap_.front() = heap_.back();
  pos_[heap_.front()] = 0;
  heap_.pop_back();
  pos_[top] = -1;
  if (!heap_.empty()) down(0);
  return top;
}

void Solver::VarHeap::up(std::size_t i)
{
  const std::uint32_t v = heap_[i];
  while (i > 0) {
    const std::size_t parent = (i - 1) >> 1U;
    if (!before(v, heap_[parent])) break;
    heap_[i] = heap_[parent];
    pos_[heap_[i]] = static_cast<int>(i);
    i = parent;
  }
  heap_[i] = v;
  pos_[v] = static_cast<int>(i);
}

void Solver::VarHeap::down(std::size_t i)
{
  const std::uint32_t v = heap_[i];
  for (;;) {
    std::size_t child = 2 * i + 1;
    if (child >= heap_.size()) break;
    if (child + 1 < heap_.size() && before(heap_[child + 1], heap_[child])) ++child;
    if (!before(heap_[child], v)) break;
    heap_[i] = heap_[child];
    pos_[heap_[i]] = static_cast<int>(i);
    i = child;
  }
  heap_[i] = v;
  pos_[v] = static_cast<int>(i);
}

// ---------------------------------------------------------------------------
// construction

Solver::Solver(const Cnf &cnf, std::uint64_t seed, SolverOptions options)
  : formula_(cnf), opts_(options), rng_(seed)
{
  const std::size_t n = cnf.num_vars();
  watches_.resize(2 * n);
  assigns_.assign(n, 0);
  phase_.assign(n, -1);
  level_.assign(n, 0);
  reason_.assign(n, no_reason);
  seen_.assign(n, 0);
  activity_.assign(n, 0.0);
  tiebreak_.resize(n);
  std::iota(tiebreak_.begin(), tiebreak_.end(), 0U);
  // seed 0 keeps index order, so the circuit inputs are tried first
  if (seed != 0) std::shuffle(tiebreak_.begin(), tiebreak_.end(), rng_);
  order_.resize(n);
  for (std::uint32_t v = 0; v < n; ++v) order_.insert(v);

  std::size_t total = 0;
  for (const auto &clause : cnf.clauses()) total += clause.size() + 2;
  arena_.reserve(total);
  for (const auto &clause : cnf.clauses()) {
    if (!ok_) break;
    scratch_.clear();
    for (const Lit l : clause) scratch_.push_back(to_ilit(l));
    add_original(scratch_.data(), scratch_.size());
  }
  max_learnts_ = std::max(static_cast<double>(opts_.min_learnts), static_cast<double>(cnf.num_clauses()) * opts_.learnt_size_factor);
}

void Solver::add_clause(const Clause &clause)
{
  formula_.add_clause(clause);
  if (!ok_) return;
  cancel_until(0);
  scratch_.clear();
  for (const Lit l : clause) scratch_.push_back(to_ilit(l));
  add_original(scratch_.data(), scratch_.size());
}

void Solver::add_original(const ILit *in, std::size_t n)
{
  std::vector<ILit> &kept = kept_;
  kept.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const int v = value(in[i]);
    if (v > 0) return; // satisfied at root
    if (v == 0) kept.push_back(in[i]);
  }
  if (kept.empty()) {
    ok_ = false;
    return;
  }
  if (kept.size() == 1) {
    enqueue(kept[0], no_reason);
    if (propagate() != no_reason) ok_ = false;
    return;
  }
  attach(store(kept, false));
}

Solver::CRef Solver::store(const std::vector<ILit> &in, bool learnt)
{
  if (arena_.size() + in.size() + 2 >= no_reason) throw std::length_error("clause arena exhausted");
  const auto ref = static_cast<CRef>(arena_.size());
  arena_.push_back(static_cast<std::uint32_t>(in.size() << 2U) | (learnt ? 1U : 0U));
  arena_.push_back(0);
  arena_.insert(arena_.end(), in.begin(), in.end());
  if (learnt) learnts_.push_back(ref);
  return ref;
}

float Solver::clause_activity(CRef c) const { return std::bit_cast<float>(arena_[c + 1]); }

void Solver::set_clause_activity(CRef c, float a) { arena_[c + 1] = std::bit_cast<std::uint32_t>(a); }

void Solver::attach(CRef c)
{
  const ILit *l = lits(c);
  watches_[l[0]].push_back({c, l[1]});
  watches_[l[1]].push_back({c, l[0]});
}

void Solver::remove_clause(CRef c)
{
  arena_[c] |= 2U;
  wasted_ += csize(c) + 2;
}

void Solver::enqueue(ILit l, CRef reason)
{
  const std::uint32_t v = var_of(l);
  assigns_[v] = (l & 1U) ? -1 : 1;
  level_[v] = decision_level();
  reason_[v] = reason;
  trail_.push_back(l);
}

// ---------------------------------------------------------------------------
// propagation

Solver::CRef Solver::propagate()
{
  CRef conflict = no_reason;
  while (qhead_ < trail_.size()) {
    const ILit p = trail_[qhead_++];
    const ILit false_lit = p ^ 1U;
    auto &ws = watches_[false_lit];
    ++total_propagations_;

    std::size_t i = 0;
    std::size_t j = 0;
    const std::size_t end = ws.size();
    while (i < end) {
      const Watcher w = ws[i];
      if (value(w.blocker) > 0) {
        ws[j++] = ws[i++];
        continue;
      }
      ILit *cl = lits(w.cref);
      const std::uint32_t size = csize(w.cref);
      if (cl[0] == false_lit) std::swap(cl[0], cl[1]);
      ++i;
      const ILit first = cl[0];
      if (first != w.blocker && value(first) > 0) {
        ws[j++] = {w.cref, first};
        continue;
      }
      bool moved = false;
      for (std::uint32_t k = 2; k < size; ++k) {
        if (value(cl[k]) >= 0) {
          std::swap(cl[1], cl[k]);
          watches_[cl[1]].push_back({w.cref, first});
          moved = true;
          break;
        }
      }
      if (moved) continue;

      ws[j++] = {w.cref, first};
      if (value(first) < 0) {
        conflict = w.cref;
        qhead_ = trail_.size();
        while (i < end) ws[j++] = ws[i++];
      } else {
        enqueue(first, w.cref);
      }
    }
    ws.resize(j);
    if (conflict != no_reason) break;
  }
  return conflict;
}

// ---------------------------------------------------------------------------
// conflict analysis

void Solver::bump_var(std::uint32_t v)
{
  activity_[v] += var_inc_;
  if (activity_[v] > 1e100) {
    for (auto &a : activity_) a *= 1e-100;
    var_inc_ *= 1e-100;
  }
  if (order_.contains(v)) order_.increased(v);
}

void Solver::bump_clause(CRef c)
{
  const float a = clause_activity(c) + static_cast<float>(cla_inc_);
  set_clause_activity(c, a);
  if (a > 1e20F) {
    for (const CRef r : learnts_) set_clause_activity(r, clause_activity(r) * 1e-20F);
    cla_inc_ *= 1e-20;
  }
}

void Solver::analyze(CRef conflict, std::vector<ILit> &learnt, std::uint32_t &backjump)
{
  learnt.clear();
  learnt.push_back(no_lit);
  int path = 0;
  ILit p = no_lit;
  std::size_t index = trail_.size();
  CRef confl = conflict;

  do {
    if (is_learnt(confl)) bump_clause(confl);
    const ILit *cl = lits(confl);
    const std::uint32_t size = csize(confl);
    for (std::uint32_t k = (p == no_lit ? 0 : 1); k < size; ++k) {
      const ILit q = cl[k];
      const std::uint32_t v = var_of(q);
      if (seen_[v] || level_[v] == 0) continue;
      bump_var(v);
      seen_[v] = 1;
      if (level_[v] >= decision_level()) ++path;
      else learnt.push_back(q);
    }
    do {
      --index;
    } while (!seen_[var_of(trail_[index])]);
    p = trail_[index];
    confl = reason_[var_of(p)];
    seen_[var_of(p)] = 0;
    --path;
  } while (path > 0);
  learnt[0] = p ^ 1U;

  // recursive minimisation
  analyze_clear_.assign(learnt.begin(), learnt.end());
  std::uint32_t levels = 0;
  for (std::size_t k = 1; k < learnt.size(); ++k) levels |= abstract_level(var_of(learnt[k]));
  std::size_t keep = 1;
  for (std::size_t k = 1; k < learnt.size(); ++k) {
    const std::uint32_t v = var_of(learnt[k]);
    if (reason_[v] == no_reason || !redundant(learnt[k], levels)) learnt[keep++] = learnt[k];
  }
  learnt.resize(keep);

  if (learnt.size() == 1) {
    backjump = 0;
  } else {
    std::size_t max_i = 1;
    for (std::size_t k = 2; k < learnt.size(); ++k)
      if (level_[var_of(learnt[k])] > level_[var_of(learnt[max_i])]) max_i = k;
    std::swap(learnt[1], learnt[max_i]);
    backjump = level_[var_of(learnt[1])];
  }
  for (const ILit l : analyze_clear_) seen_[var_of(l)] = 0;
}

bool Solver::redundant(ILit l, std::uint32_t abstract_levels)
{
  analyze_stack_.clear();
  analyze_stack_.push_back(l);
  const std::size_t top = analyze_clear_.size();
  while (!analyze_stack_.empty()) {
    const ILit cur = analyze_stack_.back();
    analyze_stack_.pop_back();
    const CRef r = reason_[var_of(cur)];
    const ILit *cl = lits(r);
    const std::uint32_t size = csize(r);
    for (std::uint32_t k = 1; k < size; ++k) {
      const ILit q = cl[k];
      const std::uint32_t v = var_of(q);
      if (seen_[v] || level_[v] == 0) continue;
      if (reason_[v] != no_reason && (abstract_level(v) & abstract_levels) != 0) {
        seen_[v] = 1;
        analyze_stack_.push_back(q);
        analyze_clear_.push_back(q);
      } else {
        for (std::size_t m = top; m < analyze_clear_.size(); ++m) seen_[var_of(analyze_clear_[m])] = 0;
        analyze_clear_.resize(top);
        return false;
      }
    }
  }
  return true;
}

void Solver::cancel_until(std::uint32_t level)
{
  if (decision_level() <= level) return;
  for (std::size_t k = trail_.size(); k > trail_lim_[level]; --k) {
    const std::uint32_t v = var_of(trail_[k - 1]);
    phase_[v] = assigns_[v];
    assigns_[v] = 0;
    reason_[v] = no_reason;
    order_.insert(v);
  }
  trail_.resize(trail_lim_[level]);
  trail_lim_.resize(level);
  qhead_ = trail_.size();
}

// ---------------------------------------------------------------------------
// clause database

bool Solver::locked(CRef c) const
{
  const ILit first = lits(c)[0];
  return value(first) > 0 && reason_[var_of(first)] == c;
}

void Solver::reduce_db()
{
  std::vector<CRef> candidates;
  candidates.reserve(learnts_.size());
  for (const CRef r : learnts_)
    if (csize(r) > 2 && !locked(r)) candidates.push_back(r);
  std::sort(candidates.begin(), candidates.end(), [&](CRef a, CRef b) {
    if (clause_activity(a) != clause_activity(b)) return clause_activity(a) < clause_activity(b);
    return a < b;
  });
  const std::size_t drop = candidates.size() / 2;
  for (std::size_t k = 0; k < drop; ++k) remove_clause(candidates[k]);
  std::erase_if(learnts_, [&](CRef r) { return is_removed(r); });
  for (auto &ws : watches_) std::erase_if(ws, [&](const Watcher &w) { return is_removed(w.cref); });
  if (wasted_ * 2 > arena_.size()) collect_garbage();
}

// Compacts the arena. Removed clauses are already unwatched and unlearnt;
// live ones are copied and every reference is rewritten.
void Solver::collect_garbage()
{
  std::vector<std::uint32_t> fresh;
  fresh.reserve(arena_.size() - wasted_);
  std::vector<CRef> from;
  std::vector<CRef> to;
  for (CRef c = 0; c < arena_.size(); c += 2 + csize(c)) {
    if (is_removed(c)) continue;
    from.push_back(c);
    to.push_back(static_cast<CRef>(fresh.size()));
    fresh.insert(fresh.end(), arena_.begin() + c, arena_.begin() + c + 2 + csize(c));
  }
  auto lookup = [&](CRef c) {
    const auto it = std::lower_bound(from.begin(), from.end(), c);
    return to[static_cast<std::size_t>(it - from.begin())];
  };
  for (auto &ws : watches_)
    for (auto &w : ws) w.cref = lookup(w.cref);
  for (auto &r : learnts_) r = lookup(r);
  for (const ILit l : trail_) {
    CRef &r = reason_[var_of(l)];
    if (r != no_reason) r = is_removed(r) ? no_reason : lookup(r);
  }
  arena_ = std::move(fresh);
  wasted_ = 0;
}

bool Solver::all_original_satisfied() const
{
  for (const auto &clause : formula_.clauses()) {
    bool sat = false;
    for (const Lit l : clause) {
      if (value(to_ilit(l)) > 0) {
        sat = true;
        break;
      }
    }
    if (!sat) return false;
  }
  return true;
}

std::vector<double> Solver::exported_activity() const
{
  std::vector<double> out(activity_.size());
  for (std::size_t v = 0; v < activity_.size(); ++v) out[v] = activity_[v] / var_inc_;
  return out;
}

std::vector<Clause> Solver::learnt_clauses() const
{
  std::vector<Clause> out;
  for (const ILit u : learnt_units_) out.push_back(Clause{to_lit(u)});
  for (const CRef r : learnts_) {
    std::vector<Lit> clause;
    for (std::uint32_t k = 0; k < csize(r); ++k) clause.push_back(to_lit(lits(r)[k]));
    out.emplace_back(std::move(clause));
  }
  return out;
}

// ---------------------------------------------------------------------------
// search

Status Solver::search(const std::vector<ILit> &assumptions, std::uint64_t conflict_limit, const Budget &budget,
  std::chrono::steady_clock::time_point start, SolveStats &stats)
{
  std::uint64_t local_conflicts = 0;
  std::vector<ILit> learnt;
  std::uint32_t tick = 0;

  for (;;) {
    if (stop_requested()) return Status::Unknown;
    if ((++tick & 255U) == 0 && budget.max_seconds) {
      const std::chrono::duration<double> el = std::chrono::steady_clock::now() - start;
      if (el.count() >= *budget.max_seconds) return Status::Unknown;
    }
    const CRef conflict = propagate();
    if (conflict != no_reason) {
      ++stats.conflicts;
      ++local_conflicts;
      ++total_conflicts_;
      if (decision_level() == 0) {
        ok_ = false;
        return Status::Unsat;
      }
      std::uint32_t backjump = 0;
      analyze(conflict, learnt, backjump);
      cancel_until(backjump);
      if (learnt.size() == 1) {
        learnt_units_.push_back(learnt[0]);
        enqueue(learnt[0], no_reason);
      } else {
        const CRef c = store(learnt, true);
        attach(c);
        bump_clause(c);
        enqueue(learnt[0], c);
      }
      var_inc_ /= opts_.var_decay;
      cla_inc_ /= opts_.clause_decay;

      if (budget.max_conflicts && stats.conflicts >= *budget.max_conflicts) return Status::Unknown;
      continue;
    }

    if (local_conflicts >= conflict_limit) {
      cancel_until(0);
      return Status::Unknown; // restart
    }
    if (static_cast<double>(learnts_.size()) - static_cast<double>(trail_.size()) >= max_learnts_) reduce_db();

    ILit next = no_lit;
    while (decision_level() < assumptions.size()) {
      const ILit a = assumptions[decision_level()];
      const int v = value(a);
      if (v > 0) {
        trail_lim_.push_back(static_cast<std::uint32_t>(trail_.size()));
      } else if (v < 0) {
        return Status::Unsat;
      } else {
        next = a;
        break;
      }
    }
    if (next == no_lit) {
      if (trail_.size() == assigns_.size()) return Status::Sat;
      while (!order_.empty()) {
        const std::uint32_t v = order_.pop();
        if (assigns_[v] == 0) {
          next = 2 * v + (phase_[v] > 0 ? 0U : 1U);
          break;
        }
      }
      if (next == no_lit) return Status::Sat;
      ++stats.decisions;
      ++total_decisions_;
    }
    trail_lim_.push_back(static_cast<std::uint32_t>(trail_.size()));
    enqueue(next, no_reason);
  }
}

SolveOutcome Solver::solve(const Cube &assumptions, const Budget &budget)
{
  const auto start = std::chrono::steady_clock::now();
  SolveOutcome out;
  const std::uint64_t propagations_before = total_propagations_;
  auto finish = [&](Status status) {
    out.status = status;
    if (status == Status::Sat) {
      out.model.resize(formula_.num_vars());
      for (std::size_t v = 0; v < out.model.size(); ++v) out.model[v] = assigns_[v] > 0;
      if (!evaluate(formula_, out.model)) throw std::logic_error("solver produced a model that fails verification");
      if (!agrees_with(assumptions, out.model)) throw std::logic_error("solver model violates assumptions");
    }
    cancel_until(0);
    out.stats.propagations = total_propagations_ - propagations_before;
    out.stats.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.stats.activity = exported_activity();
    return out;
  };

  for (std::size_t i = 0; i < assumptions.size(); ++i)
    if (assumptions.variables()[i] > formula_.num_vars())
      throw std::out_of_range("assumption on variable " + std::to_string(assumptions.variables()[i]) + " outside formula");

  if (!ok_) return finish(Status::Unsat);
  cancel_until(0);
  if (propagate() != no_reason) {
    ok_ = false;
    return finish(Status::Unsat);
  }

  std::vector<ILit> assumed;
  assumed.reserve(assumptions.size());
  for (std::size_t i = 0; i < assumptions.size(); ++i) assumed.push_back(to_ilit(assumptions.literal(i)));

  for (std::uint64_t restart = 0;; ++restart) {
    const std::uint64_t limit = luby(restart) * opts_.restart_unit;
    const Status s = search(assumed, limit, budget, start, out.stats);
    if (s == Status::Sat || s == Status::Unsat) return finish(s);
    if (stop_requested()) return finish(Status::Unknown);
    if (budget.max_conflicts && out.stats.conflicts >= *budget.max_conflicts) return finish(Status::Unknown);
    if (budget.max_seconds
        && std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= *budget.max_seconds)
      return finish(Status::Unknown);
    ++out.stats.restarts;
    max_learnts_ *= opts_.learnt_size_inc;
  }
}

Propagation Solver::propagate_only(const Cube &assumptions)
{
  if (!ok_) return Propagation::Conflict;
  cancel_until(0);
  if (propagate() != no_reason) {
    ok_ = false;
    return Propagation::Conflict;
  }
  Propagation result = Propagation::Undetermined;
  bool conflict = false;
  for (std::size_t i = 0; i < assumptions.size() && !conflict; ++i) {
    if (assumptions.variables()[i] > formula_.num_vars())
      throw std::out_of_range("assumption on variable outside formula");
    const ILit a = to_ilit(assumptions.literal(i));
    const int v = value(a);
    if (v < 0) conflict = true;
    if (v != 0) continue;
    trail_lim_.push_back(static_cast<std::uint32_t>(trail_.size()));
    enqueue(a, no_reason);
    if (propagate() != no_reason) conflict = true;
  }
  if (conflict) result = Propagation::Conflict;
  else if (all_original_satisfied()) result = Propagation::SatByPropagation;
  cancel_until(0);
  return result;
}

SolveOutcome solve(const Cnf &cnf, const Cube &assumptions, const Budget &budget, std::uint64_t seed,
  const std::atomic<bool> *stop)
{
  Solver solver(cnf, seed);
  solver.set_stop_flag(stop);
  return solver.solve(assumptions, budget);
}

Propagation propagate_only(const Cnf &cnf, const Cube &assumptions)
{
  Solver solver(cnf);
  return solver.propagate_only(assumptions);
}

} // namespace lfsrsat
