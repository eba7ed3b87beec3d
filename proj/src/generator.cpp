#include "lfsrsat/generator.hpp"

#include <algorithm>
#include <regex>
#include <sstream>
#include <stdexcept>

namespace lfsrsat {

void LfsrSpec::validate() const
{
  if (length < 1) throw std::invalid_argument("register length must be positive");
  auto check = [&](std::size_t pos, const char *what) {
    if (pos < 1 || pos > length)
      throw std::invalid_argument(std::string(what) + " tap " + std::to_string(pos) + " outside 1.."
                                  + std::to_string(length));
  };
  if (feedback_taps.empty()) throw std::invalid_argument("feedback taps must not be empty");
  for (const auto t : feedback_taps) check(t, "feedback");
  if (std::find(feedback_taps.begin(), feedback_taps.end(), length) == feedback_taps.end())
    throw std::invalid_argument("feedback taps must include the last cell");
  auto sorted = feedback_taps;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw std::invalid_argument("feedback taps must be distinct");
  check(clock_tap, "clock");
  check(output_tap, "output");
}

std::size_t GeneratorSpec::key_length() const
{
  return registers[0].length + registers[1].length + registers[2].length;
}

void GeneratorSpec::validate() const
{
  for (const auto &r : registers) r.validate();
  if (keystream_len < 1) throw std::invalid_argument("keystream length must be at least 1");
}

std::string GeneratorSpec::describe() const
{
  std::ostringstream s;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto &r = registers[i];
    s << (i ? " " : "") << "R" << i + 1 << "(len=" << r.length << " fb=";
    for (std::size_t k = 0; k < r.feedback_taps.size(); ++k) s << (k ? "," : "") << r.feedback_taps[k];
    s << " clk=" << r.clock_tap << " out=" << r.output_tap << ")";
  }
  s << " keystream=" << keystream_len;
  return s.str();
}

GeneratorSpec parse_spec(std::string_view text)
{
  static const std::regex reg(R"(R([123])\(len=(\d+) fb=([\d,]+) clk=(\d+) out=(\d+)\))");
  static const std::regex tail(R"(keystream=(\d+)\s*$)");
  const std::string s(text);
  GeneratorSpec spec;
  std::size_t seen = 0;
  for (auto it = std::sregex_iterator(s.begin(), s.end(), reg); it != std::sregex_iterator(); ++it) {
    const auto &m = *it;
    const std::size_t i = std::stoul(m[1]) - 1;
    if (i != seen) throw std::invalid_argument("generator spec lists registers out of order: " + s);
    LfsrSpec &r = spec.registers[i];
    r.length = std::stoul(m[2]);
    std::istringstream taps(m[3]);
    for (std::string t; std::getline(taps, t, ',');) {
      if (t.empty()) throw std::invalid_argument("empty feedback tap in: " + s);
      r.feedback_taps.push_back(std::stoul(t));
    }
    r.clock_tap = std::stoul(m[4]);
    r.output_tap = std::stoul(m[5]);
    ++seen;
  }
  std::smatch m;
  if (seen != 3 || !std::regex_search(s, m, tail)) throw std::invalid_argument("malformed generator spec: " + s);
  spec.keystream_len = std::stoul(m[1]);
  spec.validate();
  return spec;
}

GeneratorState GeneratorState::from_key(const GeneratorSpec &spec, const Bits &key)
{
  if (key.size() != spec.key_length())
    throw std::invalid_argument("key has " + std::to_string(key.size()) + " bits, generator expects "
                                + std::to_string(spec.key_length()));
  GeneratorState s;
  auto it = key.begin();
  for (std::size_t i = 0; i < 3; ++i) {
    const auto len = static_cast<std::ptrdiff_t>(spec.registers[i].length);
    s.cells[i].assign(it, it + len);
    it += len;
  }
  return s;
}

GeneratorSpec a51_spec()
{
  GeneratorSpec spec;
  spec.registers[0] = {19, {19, 18, 17, 14}, 0, 0};
  spec.registers[1] = {22, {22, 21}, 0, 0};
  spec.registers[2] = {23, {23, 22, 21, 8}, 0, 0};
  spec.keystream_len = 114;
  const std::array<std::size_t, 3> clock_cells{9, 30, 52};
  const std::array<std::size_t, 3> output_cells{19, 41, 64};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto [reg_c, local_c] = global_to_local(spec, clock_cells[i]);
    const auto [reg_o, local_o] = global_to_local(spec, output_cells[i]);
    if (reg_c != i || reg_o != i) throw std::logic_error("A5/1 tap table inconsistent");
    spec.registers[i].clock_tap = local_c;
    spec.registers[i].output_tap = local_o;
  }
  spec.validate();
  return spec;
}

GeneratorSpec toy_spec(std::array<std::size_t, 3> lengths, std::array<std::vector<std::size_t>, 3> feedback_taps,
  std::array<std::size_t, 3> clock_taps, std::array<std::size_t, 3> output_taps, std::size_t keystream_len)
{
  GeneratorSpec spec;
  for (std::size_t i = 0; i < 3; ++i) {
    if (lengths[i] < 3) throw std::invalid_argument("toy register length must be at least 3");
    spec.registers[i] = {lengths[i], std::move(feedback_taps[i]), clock_taps[i], output_taps[i]};
  }
  spec.keystream_len = keystream_len ? keystream_len : 2 * spec.key_length();
  spec.validate();
  return spec;
}

GeneratorSpec toy_preset() { return toy_spec({5, 6, 7}, {{{5, 3}, {6, 5}, {7, 6, 5, 2}}}, {3, 3, 4}, {5, 6, 7}); }

std::pair<std::size_t, std::size_t> global_to_local(const GeneratorSpec &spec, std::size_t global_cell)
{
  std::size_t offset = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto len = spec.registers[i].length;
    if (global_cell > offset && global_cell <= offset + len) return {i, global_cell - offset};
    offset += len;
  }
  throw std::out_of_range("cell " + std::to_string(global_cell) + " outside the generator");
}

namespace {

  bool majority(bool a, bool b, bool c) { return (a && b) || (a && c) || (b && c); }

  bool clock_bit(const GeneratorState &s, const GeneratorSpec &spec, std::size_t i)
  {
    return s.cells[i][spec.registers[i].clock_tap - 1];
  }

} // namespace

std::size_t shifting_registers(const GeneratorState &state, const GeneratorSpec &spec)
{
  const bool b0 = clock_bit(state, spec, 0);
  const bool b1 = clock_bit(state, spec, 1);
  const bool b2 = clock_bit(state, spec, 2);
  const bool maj = majority(b0, b1, b2);
  return static_cast<std::size_t>(b0 == maj) + static_cast<std::size_t>(b1 == maj) + static_cast<std::size_t>(b2 == maj);
}

bool step(GeneratorState &state, const GeneratorSpec &spec)
{
  std::array<bool, 3> b{};
  for (std::size_t i = 0; i < 3; ++i) b[i] = clock_bit(state, spec, i);
  const bool maj = majority(b[0], b[1], b[2]);
  for (std::size_t i = 0; i < 3; ++i) {
    if (b[i] != maj) continue;
    auto &cells = state.cells[i];
    bool feedback = false;
    for (const auto tap : spec.registers[i].feedback_taps) feedback = feedback != cells[tap - 1];
    std::rotate(cells.rbegin(), cells.rbegin() + 1, cells.rend());
    cells[0] = feedback;
  }
  ++state.t;
  bool out = false;
  for (std::size_t i = 0; i < 3; ++i) out = out != state.cells[i][spec.registers[i].output_tap - 1];
  return out;
}

Bits keystream(const GeneratorSpec &spec, const Bits &key)
{
  GeneratorState state = GeneratorState::from_key(spec, key);
  Bits out;
  out.reserve(spec.keystream_len);
  for (std::size_t t = 0; t < spec.keystream_len; ++t) out.push_back(step(state, spec));
  return out;
}

Circuit build_circuit(const GeneratorSpec &spec)
{
  spec.validate();
  Circuit c;
  std::array<std::vector<GateId>, 3> cells;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < spec.registers[i].length; ++k) cells[i].push_back(c.add_input());

  for (std::size_t t = 0; t < spec.keystream_len; ++t) {
    std::array<GateId, 3> b{};
    for (std::size_t i = 0; i < 3; ++i) b[i] = cells[i][spec.registers[i].clock_tap - 1];
    const GateId maj = c.add_maj3(b[0], b[1], b[2]);
    for (std::size_t i = 0; i < 3; ++i) {
      const auto &reg = spec.registers[i];
      auto &r = cells[i];
      // shift iff b_i == maj, i.e. tau = !(b_i ^ maj)
      const GateId tau = c.add_not(c.add_xor(b[i], maj));
      GateId feedback = r[reg.feedback_taps[0] - 1];
      for (std::size_t k = 1; k < reg.feedback_taps.size(); ++k) feedback = c.add_xor(feedback, r[reg.feedback_taps[k] - 1]);
      std::vector<GateId> next(r.size());
      for (std::size_t k = 0; k < r.size(); ++k) {
        // new = tau ? shifted_in : old, written as old ^ (tau & (shifted_in ^ old))
        // so that equal neighbours fix the new cell without knowing tau
        const GateId shifted_in = k == 0 ? feedback : r[k - 1];
        next[k] = c.add_xor(r[k], c.add_and(tau, c.add_xor(shifted_in, r[k])));
      }
      r = std::move(next);
    }
    GateId out = c.add_xor(cells[0][spec.registers[0].output_tap - 1], cells[1][spec.registers[1].output_tap - 1]);
    out = c.add_xor(out, cells[2][spec.registers[2].output_tap - 1]);
    c.mark_output(out);
  }
  return c;
}

Bits key_from_hex(const GeneratorSpec &spec, std::string_view hex)
{
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  const std::size_t n = spec.key_length();
  Bits raw;
  for (const char ch : hex) {
    int v = 0;
    if (ch >= '0' && ch <= '9') v = ch - '0';
    else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') v = ch - 'A' + 10;
    else throw std::invalid_argument(std::string("bad hex digit '") + ch + "'");
    for (int b = 3; b >= 0; --b) raw.push_back(((v >> b) & 1) != 0);
  }
  if (raw.size() < n) raw.insert(raw.begin(), n - raw.size(), false);
  const std::size_t excess = raw.size() - n;
  if (std::any_of(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(excess), [](bool b) { return b; }))
    throw std::invalid_argument("hex key exceeds " + std::to_string(n) + " bits");
  return {raw.begin() + static_cast<std::ptrdiff_t>(excess), raw.end()};
}

std::string key_to_hex(const Bits &key)
{
  static constexpr char digits[] = "0123456789ABCDEF";
  const std::size_t pad = (4 - key.size() % 4) % 4;
  Bits padded(pad, false);
  padded.insert(padded.end(), key.begin(), key.end());
  std::string out;
  for (std::size_t i = 0; i < padded.size(); i += 4) {
    const int v = (padded[i] ? 8 : 0) | (padded[i + 1] ? 4 : 0) | (padded[i + 2] ? 2 : 0) | (padded[i + 3] ? 1 : 0);
    out += digits[v];
  }
  return out;
}

std::uint64_t pack_bits(const Bits &bits)
{
  if (bits.size() > 64) throw std::invalid_argument("cannot pack more than 64 bits");
  std::uint64_t v = 0;
  for (const bool b : bits) v = (v << 1U) | (b ? 1U : 0U);
  return v;
}

Bits unpack_bits(std::uint64_t value, std::size_t width)
{
  Bits out(width);
  for (std::size_t i = 0; i < width; ++i) out[width - 1 - i] = ((value >> i) & 1U) != 0;
  return out;
}

} // namespace lfsrsat
