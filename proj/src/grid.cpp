#include "lfsrsat/grid.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

namespace lfsrsat {

namespace {

  using DigestCtx = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;

  DigestCtx sha256_begin()
  {
    DigestCtx ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("SHA-256 unavailable");
    return ctx;
  }

  std::string sha256_end(const DigestCtx &ctx)
  {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return hex.str();
  }

} // namespace

std::string sha256_hex(std::string_view data)
{
  const DigestCtx ctx = sha256_begin();
  EVP_DigestUpdate(ctx.get(), data.data(), data.size());
  return sha256_end(ctx);
}

std::string cnf_digest(const Cnf &cnf)
{
  const DigestCtx ctx = sha256_begin();
  std::string chunk = "p cnf " + std::to_string(cnf.num_vars()) + " " + std::to_string(cnf.num_clauses()) + "\n";
  auto flush = [&] {
    EVP_DigestUpdate(ctx.get(), chunk.data(), chunk.size());
    chunk.clear();
  };
  for (const Clause &c : cnf.clauses()) {
    for (const Lit l : c) {
      chunk += std::to_string(l.to_dimacs());
      chunk += ' ';
    }
    chunk += "0\n";
    if (chunk.size() > 1U << 16U) flush();
  }
  flush();
  return sha256_end(ctx);
}

WorkGenerator::WorkGenerator(DecompositionSet set, std::uint64_t batch, std::string digest, Budget budget)
  : set_(std::move(set)), batch_(batch), digest_(std::move(digest)), budget_(budget)
{
  if (set_.empty()) throw std::invalid_argument("decomposition set must not be empty");
  if (set_.size() > max_set_size)
    throw std::invalid_argument("decomposition set of " + std::to_string(set_.size()) + " variables exceeds the "
                                + std::to_string(max_set_size) + "-variable index space");
  if (batch_ < 1) throw std::invalid_argument("batch must be at least 1");
  cubes_ = set_.cube_count();
  units_ = cubes_ / batch_ + (cubes_ % batch_ != 0 ? 1 : 0);
}

WorkUnit WorkGenerator::unit(std::uint64_t id) const
{
  if (id >= units_) throw std::out_of_range("unit id " + std::to_string(id) + " out of range");
  WorkUnit u;
  u.id = id;
  u.first = id * batch_;
  u.count = std::min(batch_, cubes_ - u.first);
  u.cnf_digest = digest_;
  u.set = set_;
  u.budget = budget_;
  return u;
}

std::optional<WorkUnit> WorkGenerator::next(const std::set<std::uint64_t> &skip)
{
  while (next_ < units_ && skip.contains(next_)) ++next_;
  if (next_ >= units_) return std::nullopt;
  return unit(next_++);
}

std::string_view to_string(Claim claim)
{
  switch (claim) {
  case Claim::UnsatAll: return "unsat";
  case Claim::Sat: return "sat";
  case Claim::Unknown: return "unknown";
  }
  return "?";
}

std::string_view to_string(Verdict v)
{
  switch (v) {
  case Verdict::Unsat: return "unsat";
  case Verdict::Sat: return "sat";
  case Verdict::Invalid: return "invalid";
  }
  return "?";
}

std::string_view to_string(FaultMode mode)
{
  switch (mode) {
  case FaultMode::None: return "none";
  case FaultMode::CorruptModels: return "corrupt-models";
  case FaultMode::FlipUnsat: return "flip-unsat";
  case FaultMode::CrashOnce: return "crash-once";
  }
  return "?";
}

FaultMode parse_fault(std::string_view text)
{
  for (const auto m : {FaultMode::None, FaultMode::CorruptModels, FaultMode::FlipUnsat, FaultMode::CrashOnce})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown fault mode '" + std::string(text) + "'");
}

std::string_view to_string(GridStatus s)
{
  switch (s) {
  case GridStatus::Sat: return "SAT";
  case GridStatus::Unsat: return "UNSAT";
  case GridStatus::Interrupted: return "INTERRUPTED";
  }
  return "?";
}

std::string_view to_string(Mark m)
{
  switch (m) {
  case Mark::Pending: return "pending";
  case Mark::Valid: return "valid";
  case Mark::Invalid: return "invalid";
  case Mark::Discarded: return "discarded";
  }
  return "?";
}

namespace {

  std::vector<std::uint8_t> pack(const Bits &bits)
  {
    std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(1U << (i % 8));
    return out;
  }

  Bits unpack(const std::vector<std::uint8_t> &bytes, std::size_t n)
  {
    if (bytes.size() != (n + 7) / 8) throw wire::ProtocolError("model length mismatch");
    Bits out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = ((bytes[i / 8] >> (i % 8)) & 1U) != 0;
    return out;
  }

} // namespace

wire::Frame encode_assignment(const Assignment &a)
{
  wire::Writer w;
  w.u64(a.unit.id).u64(a.unit.first).u64(a.unit.count).str(a.unit.cnf_digest);
  w.u32(static_cast<std::uint32_t>(a.unit.set.size()));
  for (const Var v : a.unit.set.variables()) w.u32(v);
  w.u8(a.unit.budget.max_conflicts ? 1 : 0).u64(a.unit.budget.max_conflicts.value_or(0));
  w.u8(a.unit.budget.max_seconds ? 1 : 0).f64(a.unit.budget.max_seconds.value_or(0.0));
  w.u32(a.replica).u32(a.attempt);
  return {wire::FrameType::Assign, w.take()};
}

Assignment decode_assignment(const wire::Frame &f)
{
  if (f.type != wire::FrameType::Assign) throw wire::ProtocolError("expected an assign frame");
  wire::Reader r(f.payload);
  Assignment a;
  a.unit.id = r.u64();
  a.unit.first = r.u64();
  a.unit.count = r.u64();
  a.unit.cnf_digest = r.str();
  const std::uint32_t k = r.u32();
  if (k > WorkGenerator::max_set_size) throw wire::ProtocolError("set too large");
  std::vector<Var> vars(k);
  for (auto &v : vars) v = r.u32();
  try {
    a.unit.set = DecompositionSet(std::move(vars));
  } catch (const std::invalid_argument &e) {
    throw wire::ProtocolError(e.what());
  }
  const bool has_conflicts = r.u8() != 0;
  const std::uint64_t conflicts = r.u64();
  const bool has_seconds = r.u8() != 0;
  const double seconds = r.f64();
  if (has_conflicts) a.unit.budget.max_conflicts = conflicts;
  if (has_seconds) a.unit.budget.max_seconds = seconds;
  a.replica = r.u32();
  a.attempt = r.u32();
  r.finish();
  return a;
}

wire::Frame encode_result(const WorkResult &res)
{
  wire::Writer w;
  w.u64(res.unit).u32(res.replica).u32(res.attempt).u32(res.worker);
  w.u8(static_cast<std::uint8_t>(res.claim)).u64(res.cube);
  w.u32(static_cast<std::uint32_t>(res.model.size())).bytes(pack(res.model));
  w.u64(res.conflicts).f64(res.seconds);
  return {wire::FrameType::Result, w.take()};
}

WorkResult decode_result(const wire::Frame &f)
{
  if (f.type != wire::FrameType::Result) throw wire::ProtocolError("expected a result frame");
  wire::Reader r(f.payload);
  WorkResult res;
  res.unit = r.u64();
  res.replica = r.u32();
  res.attempt = r.u32();
  res.worker = r.u32();
  const std::uint8_t claim = r.u8();
  if (claim > 2) throw wire::ProtocolError("bad claim");
  res.claim = static_cast<Claim>(claim);
  res.cube = r.u64();
  const std::uint32_t n = r.u32();
  res.model = unpack(r.bytes(), n);
  res.conflicts = r.u64();
  res.seconds = r.f64();
  r.finish();
  return res;
}

WorkResult process_unit(const Cnf &cnf, const WorkUnit &unit, const std::atomic<bool> *stop, std::uint64_t solver_seed)
{
  unit.set.check_range(cnf.num_vars());
  const auto began = std::chrono::steady_clock::now();
  WorkResult res;
  res.unit = unit.id;
  res.claim = Claim::UnsatAll;
  Solver solver(cnf, solver_seed);
  solver.set_stop_flag(stop);
  for (std::uint64_t i = unit.first; i < unit.first + unit.count; ++i) {
    SolveOutcome o = solver.solve(unit.set.cube(i), unit.budget);
    res.conflicts += o.stats.conflicts;
    if (o.status == Status::Unsat) continue;
    res.claim = o.status == Status::Sat ? Claim::Sat : Claim::Unknown;
    res.cube = i;
    if (o.status == Status::Sat) res.model = std::move(o.model);
    break;
  }
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - began).count();
  return res;
}

bool check_certificate(const Cnf &cnf, const WorkUnit &unit, const WorkResult &r)
{
  if (r.claim != Claim::Sat) return false;
  if (r.cube < unit.first || r.cube - unit.first >= unit.count) return false;
  if (r.model.size() != cnf.num_vars()) return false;
  return agrees_with(unit.set.cube(r.cube), r.model) && evaluate(cnf, r.model);
}

Validation validate_result(const WorkResult &a, const WorkResult &b, const Cnf &cnf, const WorkUnit &unit)
{
  Validation v;
  const std::array<const WorkResult *, 2> rs{&a, &b};
  std::array<bool, 2> cert{};
  for (std::size_t i = 0; i < 2; ++i) {
    cert[i] = check_certificate(cnf, unit, *rs[i]);
    v.replica_invalid[i] = rs[i]->claim == Claim::Sat && !cert[i];
  }
  if (cert[0] || cert[1]) {
    v.verdict = Verdict::Sat;
    v.certificate = cert[0] ? 0 : 1;
    for (std::size_t i = 0; i < 2; ++i)
      if (rs[i]->claim == Claim::UnsatAll) v.replica_invalid[i] = true;
  } else if (a.claim == Claim::UnsatAll && b.claim == Claim::UnsatAll) {
    v.verdict = Verdict::Unsat;
  } else {
    v.verdict = Verdict::Invalid;
  }
  return v;
}

namespace {

  void apply_fault(FaultMode fault, WorkResult &r, const WorkUnit &unit, const Cnf &cnf, std::mt19937_64 &rng)
  {
    switch (fault) {
    case FaultMode::CorruptModels:
      if (r.claim == Claim::Sat) {
        r.model.flip();
      } else {
        r.claim = Claim::Sat;
        r.cube = unit.first;
        r.model.assign(cnf.num_vars(), false);
        for (std::size_t i = 0; i < r.model.size(); ++i) r.model[i] = (rng() & 1U) != 0;
      }
      break;
    case FaultMode::FlipUnsat:
      if (r.claim == Claim::Sat) {
        r.claim = Claim::UnsatAll;
        r.model.clear();
        r.cube = 0;
      } else if (r.claim == Claim::UnsatAll) {
        r.claim = Claim::Sat;
        r.cube = unit.first;
      }
      break;
    case FaultMode::None:
    case FaultMode::CrashOnce: break;
    }
  }

  [[noreturn]] void worker_process(int fd, const Cnf &cnf, const std::string &digest, std::uint32_t slot,
    FaultMode fault, std::uint64_t seed)
  {
    int code = 0;
    try {
      std::atomic<bool> stop{false};
      std::mutex mu;
      std::condition_variable cv;
      std::deque<Assignment> queue;
      bool closing = false;
      std::mutex write_mu;
      auto send = [&](const wire::Frame &f) {
        const std::lock_guard lock(write_mu);
        return wire::send_frame(fd, f);
      };

      std::thread reader([&] {
        try {
          for (;;) {
            pollfd p{fd, POLLIN, 0};
            const int n = ::poll(&p, 1, 1000);
            if (n < 0) {
              if (errno == EINTR) continue;
              break;
            }
            if (n == 0) {
              if (!send({wire::FrameType::Heartbeat, wire::Writer().u32(slot).take()})) break;
              continue;
            }
            const auto f = wire::receive_frame(fd);
            if (!f || f->type == wire::FrameType::Shutdown) break;
            if (f->type == wire::FrameType::Assign) {
              const std::lock_guard lock(mu);
              queue.push_back(decode_assignment(*f));
              cv.notify_all();
            } else if (f->type == wire::FrameType::Cancel) {
              stop = true;
              const std::lock_guard lock(mu);
              queue.clear();
            }
          }
        } catch (...) {
        }
        stop = true;
        const std::lock_guard lock(mu);
        closing = true;
        cv.notify_all();
      });

      std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ULL * (slot + 1)));
      for (;;) {
        Assignment a;
        {
          std::unique_lock lock(mu);
          cv.wait(lock, [&] { return closing || !queue.empty(); });
          if (queue.empty()) break;
          a = std::move(queue.front());
          queue.pop_front();
        }
        if (fault == FaultMode::CrashOnce) ::_exit(3);
        WorkResult r;
        if (a.unit.cnf_digest != digest) {
          r.unit = a.unit.id;
          r.claim = Claim::Unknown;
          r.cube = a.unit.first;
        } else {
          r = process_unit(cnf, a.unit, &stop, seed);
          if (r.claim == Claim::Unknown && stop.load()) continue; // cancelled
        }
        r.replica = a.replica;
        r.attempt = a.attempt;
        r.worker = slot;
        apply_fault(fault, r, a.unit, cnf, rng);
        if (!send(encode_result(r))) break;
      }
      stop = true;
      ::shutdown(fd, SHUT_RDWR);
      reader.join();
    } catch (...) {
      code = 2;
    }
    ::_exit(code);
  }

  struct Replica
  {
    enum State : std::uint8_t { Unsent, Sent, Done } state = Unsent;
    std::optional<std::uint32_t> worker;
    std::optional<std::size_t> record;
  };

  struct UnitState
  {
    WorkUnit unit;
    std::uint32_t attempt = 0;
    std::array<Replica, 2> rep;
    std::set<std::uint32_t> excluded; ///< slots caught lying about this unit
    std::size_t unknown_retries = 0;
    std::size_t bad_certificates = 0;
    std::vector<std::size_t> records;
  };

  struct Slot
  {
    pid_t pid = -1;
    int fd = -1;
    std::uint32_t incarnation = 0;
    std::optional<std::pair<std::uint64_t, std::uint32_t>> busy;
    std::chrono::steady_clock::time_point last_seen;
    wire::FrameReader reader;
  };

  void write_journal_header(std::ostream &out, const std::string &digest, const DecompositionSet &set,
    std::uint64_t batch, std::uint64_t units)
  {
    out << "# lfsrsat grid journal v1\n";
    out << "cnf=" << digest << " set=" << to_string(set) << " batch=" << batch << " units=" << units << "\n";
    out.flush();
  }

  class Coordinator
  {
  public:
    Coordinator(const Cnf &cnf, const DecompositionSet &set, const GridOptions &options, std::string digest,
      std::set<std::uint64_t> skip, std::ostream *journal, GridReport &report)
      : cnf_(cnf), options_(options), digest_(std::move(digest)),
        gen_(set, options.batch, digest_, options.budget), skip_(std::move(skip)), journal_(journal),
        report_(report), began_(std::chrono::steady_clock::now())
    {}

    void run()
    {
      slots_.resize(options_.workers);
      try {
        for (std::uint32_t s = 0; s < slots_.size(); ++s) spawn(s);
        loop();
      } catch (...) {
        shutdown_workers();
        throw;
      }
      shutdown_workers();
    }

  private:
    void loop()
    {
      while (!finished_) {
        if (options_.stop && options_.stop->load()) {
          interrupt("stopped");
          break;
        }
        dispatch();
        if (active_.empty() && exhausted_) {
          report_.status = GridStatus::Unsat;
          report_.reason = "all units validated unsat";
          finished_ = true;
          break;
        }
        wait_for_messages();
        check_heartbeats();
      }
    }

    void interrupt(std::string why)
    {
      report_.status = GridStatus::Interrupted;
      report_.reason = std::move(why);
      finished_ = true;
    }

    double now() const
    {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - began_).count();
    }

    void journal(const std::string &line)
    {
      if (!journal_) return;
      *journal_ << "t=" << std::fixed << std::setprecision(3) << now() << std::defaultfloat << " " << line << "\n";
      journal_->flush();
    }

    FaultMode fault_of(std::uint32_t s) const
    {
      const auto it = options_.faults.find(s);
      if (it == options_.faults.end()) return FaultMode::None;
      if (it->second == FaultMode::CrashOnce && slots_[s].incarnation > 0) return FaultMode::None;
      return it->second;
    }

    void spawn(std::uint32_t s)
    {
      int fds[2];
      if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
        throw std::runtime_error(std::string("socketpair: ") + std::strerror(errno));
      const FaultMode fault = fault_of(s);
      const pid_t pid = ::fork();
      if (pid < 0) {
        ::close(fds[0]);
        ::close(fds[1]);
        throw std::runtime_error(std::string("fork: ") + std::strerror(errno));
      }
      if (pid == 0) {
        for (const Slot &other : slots_)
          if (other.fd >= 0) ::close(other.fd);
        ::close(fds[0]);
        worker_process(fds[1], cnf_, digest_, s, fault, options_.solver_seed);
      }
      ::close(fds[1]);
      ::fcntl(fds[0], F_SETFL, ::fcntl(fds[0], F_GETFL) | O_NONBLOCK);
      Slot &slot = slots_[s];
      slot.pid = pid;
      slot.fd = fds[0];
      slot.busy.reset();
      slot.reader = wire::FrameReader();
      slot.last_seen = std::chrono::steady_clock::now();
    }

    void reap(Slot &slot)
    {
      if (slot.fd >= 0) ::close(slot.fd);
      slot.fd = -1;
      if (slot.pid > 0) {
        ::kill(slot.pid, SIGKILL);
        ::waitpid(slot.pid, nullptr, 0);
      }
      slot.pid = -1;
    }

    void crashed(std::uint32_t s)
    {
      Slot &slot = slots_[s];
      std::uint64_t unit = 0;
      if (slot.busy) {
        const auto [id, r] = *slot.busy;
        unit = id;
        if (const auto it = active_.find(id); it != active_.end() && it->second.rep[r].state == Replica::Sent
                                                && it->second.rep[r].worker == s) {
          it->second.rep[r] = Replica{};
          journal("unit=" + std::to_string(id) + " attempt=" + std::to_string(it->second.attempt)
                  + " replica=" + std::to_string(r) + " state=UNSENT reason=crash worker=" + std::to_string(s));
        }
      }
      report_.events.push_back({GridEvent::Crash, unit, s});
      reap(slot);
      ++report_.respawns;
      if (report_.respawns > 4 * slots_.size() + 16) {
        interrupt("workers keep failing");
        return;
      }
      ++slot.incarnation;
      spawn(s);
    }

    // the replica slot s should run next, if any
    std::optional<std::pair<std::uint64_t, std::uint32_t>> choose(std::uint32_t s)
    {
      // preference: a trusted slot other than the partner's, then the
      // partner's own slot, and a slot caught lying only as a last resort
      auto eligible = [&](const UnitState &u, std::uint32_t r) {
        if (u.rep[r].state != Replica::Unsent) return false;
        const Replica &other = u.rep[1 - r];
        auto partner = [&](std::uint32_t t) { return other.worker == t && other.state != Replica::Unsent; };
        auto trusted = [&](std::uint32_t t) { return !u.excluded.contains(t); };
        bool any_trusted_other = false, any_trusted = false;
        for (std::uint32_t t = 0; t < slots_.size(); ++t) {
          any_trusted_other = any_trusted_other || (trusted(t) && !partner(t));
          any_trusted = any_trusted || trusted(t);
        }
        if (trusted(s) && !partner(s)) return true;
        if (trusted(s)) return !any_trusted_other;
        if (partner(s)) return !any_trusted && slots_.size() < 2;
        return !any_trusted;
      };
      for (const auto &[id, u] : active_)
        for (std::uint32_t r = 0; r < 2; ++r)
          if (eligible(u, r)) return std::pair{id, r};
      if (exhausted_ || active_.size() >= 2 * slots_.size() + 1) return std::nullopt;
      std::optional<WorkUnit> next = gen_.next(skip_);
      if (!next) {
        exhausted_ = true;
        return std::nullopt;
      }
      const std::uint64_t id = next->id;
      active_[id].unit = std::move(*next);
      return std::pair{id, std::uint32_t{0}};
    }

    void dispatch()
    {
      for (std::uint32_t s = 0; s < slots_.size() && !finished_; ++s) {
        if (slots_[s].busy) continue;
        const auto pick = choose(s);
        if (!pick) continue;
        const auto [id, r] = *pick;
        UnitState &u = active_.at(id);
        u.rep[r].state = Replica::Sent;
        u.rep[r].worker = s;
        slots_[s].busy = pick;
        report_.events.push_back({GridEvent::Dispatch, id, s});
        journal("unit=" + std::to_string(id) + " attempt=" + std::to_string(u.attempt) + " replica=" + std::to_string(r)
                + " state=SENT worker=" + std::to_string(s));
        if (!wire::send_frame(slots_[s].fd, encode_assignment({u.unit, r, u.attempt}))) crashed(s);
      }
    }

    void wait_for_messages()
    {
      std::vector<pollfd> fds;
      for (const Slot &slot : slots_) fds.push_back({slot.fd, POLLIN, 0});
      const int n = ::poll(fds.data(), fds.size(), 200);
      if (n < 0) {
        if (errno == EINTR) return;
        throw std::runtime_error(std::string("poll: ") + std::strerror(errno));
      }
      for (std::uint32_t s = 0; s < fds.size() && !finished_; ++s) {
        if (fds[s].revents == 0) continue;
        if (!drain(s)) crashed(s);
      }
    }

    // false when the worker is gone or spoke garbage
    bool drain(std::uint32_t s)
    {
      Slot &slot = slots_[s];
      std::uint8_t buf[1 << 16];
      bool eof = false;
      for (;;) {
        const ssize_t n = ::read(slot.fd, buf, sizeof buf);
        if (n > 0) {
          slot.reader.feed(buf, static_cast<std::size_t>(n));
          continue;
        }
        if (n == 0) eof = true;
        else if (errno == EINTR) continue;
        else if (errno != EAGAIN && errno != EWOULDBLOCK) eof = true;
        break;
      }
      try {
        while (auto f = slot.reader.next()) {
          slot.last_seen = std::chrono::steady_clock::now();
          if (f->type == wire::FrameType::Result) on_result(s, decode_result(*f));
          if (finished_) return true;
        }
      } catch (const wire::ProtocolError &) {
        return false;
      }
      return !eof;
    }

    void check_heartbeats()
    {
      const auto t = std::chrono::steady_clock::now();
      for (std::uint32_t s = 0; s < slots_.size() && !finished_; ++s)
        if (std::chrono::duration<double>(t - slots_[s].last_seen).count() > options_.heartbeat_timeout) crashed(s);
    }

    std::string replica_line(const UnitState &u, const WorkResult &r) const
    {
      return "unit=" + std::to_string(u.unit.id) + " attempt=" + std::to_string(r.attempt)
             + " replica=" + std::to_string(r.replica) + " worker=" + std::to_string(r.worker);
    }

    void on_result(std::uint32_t s, WorkResult r)
    {
      Slot &slot = slots_[s];
      slot.busy.reset();
      r.worker = s;
      const FaultMode fault = fault_of(s);
      ResultRecord rec{r, Mark::Pending,
        fault == FaultMode::CorruptModels || (fault == FaultMode::FlipUnsat && r.claim != Claim::Unknown)};
      const std::size_t idx = report_.results.size();
      report_.results.push_back(std::move(rec));
      ResultRecord &record = report_.results.back();

      const auto it = active_.find(r.unit);
      if (it == active_.end() || r.replica > 1 || r.attempt != it->second.attempt
          || it->second.rep[r.replica].state != Replica::Sent || it->second.rep[r.replica].worker != s) {
        record.mark = stale_mark(r);
        return;
      }
      UnitState &u = it->second;
      Replica &rep = u.rep[r.replica];
      u.records.push_back(idx);
      rep.record = idx;

      if (r.claim == Claim::Unknown) {
        record.mark = Mark::Discarded;
        rep = Replica{};
        ++u.unknown_retries;
        ++report_.retries;
        journal(replica_line(u, r) + " state=DONE claim=unknown resume=" + std::to_string(r.cube));
        if (u.unknown_retries > options_.max_retries) {
          interrupt("unit " + std::to_string(u.unit.id) + " still unknown after " + std::to_string(options_.max_retries)
                    + " budget doublings");
          return;
        }
        u.unit.budget = u.unit.budget.scaled(2.0);
        return;
      }
      rep.state = Replica::Done;
      if (r.claim == Claim::Sat) {
        if (check_certificate(cnf_, u.unit, r)) {
          record.mark = Mark::Valid;
          journal(replica_line(u, r) + " state=DONE claim=sat");
          validated_sat(u, idx);
          return;
        }
        record.mark = Mark::Invalid;
        u.excluded.insert(s);
        journal(replica_line(u, r) + " state=INVALID claim=sat reason=bad-certificate");
        // only this replica is redone; the partner's answer stands
        rep = Replica{};
        ++report_.invalid_units;
        report_.events.push_back({GridEvent::Invalidated, u.unit.id, s});
        if (++u.bad_certificates > options_.max_invalid_rounds)
          interrupt("unit " + std::to_string(u.unit.id) + " drew " + std::to_string(u.bad_certificates)
                    + " bad certificates");
        return;
      } else {
        journal(replica_line(u, r) + " state=DONE claim=unsat");
      }
      if (u.rep[0].state == Replica::Done && u.rep[1].state == Replica::Done) settle(u);
    }

    // a late answer is still judged when it can be: SAT claims by their
    // certificate, UNSAT claims against a unit known to be satisfiable
    Mark stale_mark(const WorkResult &r) const
    {
      if (r.unit >= gen_.unit_count()) return Mark::Invalid;
      const WorkUnit unit = gen_.unit(r.unit);
      if (r.claim == Claim::Sat) return check_certificate(cnf_, unit, r) ? Mark::Discarded : Mark::Invalid;
      if (r.claim == Claim::UnsatAll && sat_units_.contains(r.unit)) return Mark::Invalid;
      return Mark::Discarded;
    }

    void settle(UnitState &u)
    {
      ResultRecord &a = report_.results[*u.rep[0].record];
      ResultRecord &b = report_.results[*u.rep[1].record];
      const Validation v = validate_result(a.result, b.result, cnf_, u.unit);
      if (v.verdict == Verdict::Unsat) {
        a.mark = b.mark = Mark::Valid;
        const std::uint64_t id = u.unit.id;
        journal("unit=" + std::to_string(id) + " validated=unsat");
        report_.events.push_back({GridEvent::Validated, id, 0});
        active_.erase(id);
        ++report_.units_validated;
        if (options_.stop_after_validated && report_.units_validated >= *options_.stop_after_validated)
          interrupt("stopped after " + std::to_string(report_.units_validated) + " validated units");
        return;
      }
      // both in, no certificate, no agreement
      for (std::size_t i = 0; i < 2; ++i) {
        ResultRecord &rec = i == 0 ? a : b;
        if (v.replica_invalid[i]) {
          rec.mark = Mark::Invalid;
          u.excluded.insert(rec.result.worker);
        } else if (rec.mark == Mark::Pending) {
          rec.mark = Mark::Discarded;
        }
      }
      ++report_.invalid_units;
      report_.events.push_back({GridEvent::Invalidated, u.unit.id, 0});
      journal("unit=" + std::to_string(u.unit.id) + " invalid attempt=" + std::to_string(u.attempt));
      ++u.attempt;
      u.rep = {};
      if (u.attempt >= options_.max_invalid_rounds)
        interrupt("unit " + std::to_string(u.unit.id) + " diverged " + std::to_string(u.attempt) + " times");
    }

    void validated_sat(UnitState &u, std::size_t idx)
    {
      const WorkResult &r = report_.results[idx].result;
      // every UNSAT claim about this unit is now refuted
      for (const std::size_t k : u.records)
        if (report_.results[k].result.claim == Claim::UnsatAll) report_.results[k].mark = Mark::Invalid;
      sat_units_.insert(u.unit.id);
      report_.status = GridStatus::Sat;
      report_.reason = "certificate for cube " + std::to_string(r.cube);
      report_.sat_cube = r.cube;
      report_.model = r.model;
      ++report_.units_validated;
      report_.events.push_back({GridEvent::Validated, u.unit.id, r.worker});
      journal("unit=" + std::to_string(u.unit.id) + " validated=sat cube=" + std::to_string(r.cube)
              + " model=" + bits_to_string(r.model));
      finished_ = true;
    }

    void shutdown_workers()
    {
      if (report_.status == GridStatus::Sat) report_.events.push_back({GridEvent::Cancel, 0, 0});
      for (Slot &slot : slots_) {
        if (slot.fd < 0) continue;
        wire::send_frame(slot.fd, {wire::FrameType::Cancel, {}});
        wire::send_frame(slot.fd, {wire::FrameType::Shutdown, {}});
        ::close(slot.fd);
        slot.fd = -1;
      }
      const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(5);
      for (Slot &slot : slots_) {
        while (slot.pid > 0) {
          if (::waitpid(slot.pid, nullptr, WNOHANG) == slot.pid) {
            slot.pid = -1;
          } else if (std::chrono::steady_clock::now() > deadline) {
            ::kill(slot.pid, SIGKILL);
            ::waitpid(slot.pid, nullptr, 0);
            slot.pid = -1;
          } else {
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
          }
        }
      }
    }

    const Cnf &cnf_;
    const GridOptions &options_;
    std::string digest_;
    WorkGenerator gen_;
    std::set<std::uint64_t> skip_;
    std::set<std::uint64_t> sat_units_;
    std::ostream *journal_;
    GridReport &report_;
    std::chrono::steady_clock::time_point began_;
    std::vector<Slot> slots_;
    std::map<std::uint64_t, UnitState> active_;
    bool exhausted_ = false;
    bool finished_ = false;
  };

  std::map<std::string, std::string> fields(const std::string &line)
  {
    std::map<std::string, std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) out[tok] = "";
      else out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
  }

} // namespace

JournalState read_journal(const std::string &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open journal " + path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  JournalState st;
  bool header = false;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  // a line without its newline was cut short by a crash and is ignored
  for (std::size_t nl; (nl = text.find('\n', pos)) != std::string::npos; pos = nl + 1) {
    ++lineno;
    const std::string line = text.substr(pos, nl - pos);
    if (line.empty() || line[0] == '#') continue;
    const auto f = fields(line);
    try {
      if (!header) {
        if (!f.contains("cnf") || !f.contains("set") || !f.contains("batch")) throw std::runtime_error("bad header");
        st.digest = f.at("cnf");
        st.set = f.at("set");
        st.batch = std::stoull(f.at("batch"));
        header = true;
        continue;
      }
      if (!f.contains("validated")) continue;
      const std::uint64_t unit = std::stoull(f.at("unit"));
      st.validated_order.push_back(unit);
      if (f.at("validated") == "unsat") {
        st.unsat_units.insert(unit);
      } else if (f.at("validated") == "sat") {
        st.sat_cube = std::stoull(f.at("cube"));
        st.sat_model = bits_from_string(f.at("model"));
      } else {
        throw std::runtime_error("bad validated value");
      }
    } catch (const std::exception &e) {
      throw std::runtime_error("journal " + path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!header) throw std::runtime_error("journal " + path + " has no header");
  return st;
}

GridReport run_grid(const Cnf &cnf, const DecompositionSet &set, const GridOptions &options)
{
  if (options.workers < 1) throw std::invalid_argument("at least one worker is required");
  set.check_range(cnf.num_vars());
  const std::string digest = cnf_digest(cnf);
  GridReport report;
  const WorkGenerator probe(set, options.batch, digest, options.budget);
  report.units_total = probe.unit_count();

  std::set<std::uint64_t> skip;
  std::ofstream journal;
  if (!options.journal.empty()) {
    std::ifstream existing(options.journal);
    const bool resume = existing && existing.peek() != std::ifstream::traits_type::eof();
    existing.close();
    if (resume) {
      const JournalState st = read_journal(options.journal);
      if (st.digest != digest || st.set != to_string(set) || st.batch != options.batch)
        throw std::runtime_error("journal " + options.journal + " belongs to a different run");
      skip = st.unsat_units;
      report.units_resumed = skip.size();
      if (st.sat_cube) {
        report.status = GridStatus::Sat;
        report.reason = "certificate for cube " + std::to_string(*st.sat_cube) + " (journal)";
        report.sat_cube = st.sat_cube;
        report.model = st.sat_model;
        return report;
      }
      journal.open(options.journal, std::ios::app);
    } else {
      journal.open(options.journal, std::ios::trunc);
      write_journal_header(journal, digest, set, options.batch, report.units_total);
    }
    if (!journal) throw std::runtime_error("cannot write journal " + options.journal);
  }
  if (skip.size() == report.units_total) {
    report.status = GridStatus::Unsat;
    report.reason = "all units validated unsat (journal)";
    return report;
  }
  Coordinator c(cnf, set, options, digest, std::move(skip), journal.is_open() ? &journal : nullptr, report);
  c.run();
  return report;
}

void write_report(std::ostream &out, const GridReport &r)
{
  std::size_t invalid = 0;
  for (const auto &rec : r.results) invalid += rec.mark == Mark::Invalid ? 1 : 0;
  out << "status " << to_string(r.status) << "\n";
  out << "reason " << r.reason << "\n";
  out << "units " << r.units_total << "\n";
  out << "units_validated " << r.units_validated << "\n";
  out << "units_resumed " << r.units_resumed << "\n";
  out << "invalid_units " << r.invalid_units << "\n";
  out << "results " << r.results.size() << " (" << invalid << " invalid)\n";
  out << "retries " << r.retries << "\n";
  out << "respawns " << r.respawns << "\n";
  if (r.sat_cube) out << "sat_cube " << *r.sat_cube << "\n";
}

} // namespace lfsrsat
