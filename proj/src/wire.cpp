#include "lfsrsat/wire.hpp"

#include <bit>
#include <cerrno>
#include <cstring>
#include <stdexcept>

#include <sys/socket.h>
#include <unistd.h>

namespace lfsrsat::wire {

std::string_view to_string(FrameType type)
{
  switch (type) {
  case FrameType::Assign: return "assign";
  case FrameType::Result: return "result";
  case FrameType::Cancel: return "cancel";
  case FrameType::Heartbeat: return "heartbeat";
  case FrameType::Shutdown: return "shutdown";
  }
  return "?";
}

namespace {

  void check_type(std::uint8_t t)
  {
    if (t < 1 || t > 5) throw ProtocolError("unknown frame type " + std::to_string(t));
  }

  std::uint32_t load_u32(const std::uint8_t *p)
  {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8U)
           | (static_cast<std::uint32_t>(p[2]) << 16U) | (static_cast<std::uint32_t>(p[3]) << 24U);
  }

  // validates a complete header and returns the payload length
  std::uint32_t parse_header(const std::uint8_t *h)
  {
    if (h[0] != magic) throw ProtocolError("bad frame magic");
    if (h[1] != version) throw ProtocolError("unsupported frame version " + std::to_string(h[1]));
    check_type(h[2]);
    const std::uint32_t len = load_u32(h + 3);
    if (len > max_payload) throw ProtocolError("frame payload too large");
    return len;
  }

} // namespace

std::vector<std::uint8_t> encode(const Frame &frame)
{
  if (frame.payload.size() > max_payload) throw ProtocolError("frame payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(header_size + frame.payload.size());
  out.push_back(magic);
  out.push_back(version);
  out.push_back(static_cast<std::uint8_t>(frame.type));
  const auto len = static_cast<std::uint32_t>(frame.payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

void FrameReader::feed(const std::uint8_t *data, std::size_t size) { buf_.insert(buf_.end(), data, data + size); }

std::optional<Frame> FrameReader::next()
{
  if (buf_.size() < header_size) return std::nullopt;
  const std::uint32_t len = parse_header(buf_.data());
  if (buf_.size() < header_size + len) return std::nullopt;
  Frame f;
  f.type = static_cast<FrameType>(buf_[2]);
  f.payload.assign(buf_.begin() + header_size, buf_.begin() + static_cast<std::ptrdiff_t>(header_size + len));
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(header_size + len));
  return f;
}

Writer &Writer::u8(std::uint8_t v)
{
  out_.push_back(v);
  return *this;
}

Writer &Writer::u32(std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Writer &Writer::u64(std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  return *this;
}

Writer &Writer::f64(double v) { return u64(std::bit_cast<std::uint64_t>(v)); }

Writer &Writer::bytes(const std::vector<std::uint8_t> &v)
{
  u32(static_cast<std::uint32_t>(v.size()));
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

Writer &Writer::str(std::string_view v)
{
  u32(static_cast<std::uint32_t>(v.size()));
  out_.insert(out_.end(), v.begin(), v.end());
  return *this;
}

const std::uint8_t *Reader::take(std::size_t n)
{
  if (data_.size() - pos_ < n) throw ProtocolError("truncated payload");
  const std::uint8_t *p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t Reader::u8() { return *take(1); }

std::uint32_t Reader::u32() { return load_u32(take(4)); }

std::uint64_t Reader::u64()
{
  const std::uint8_t *p = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8U) | p[i];
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> Reader::bytes()
{
  const std::uint32_t n = u32();
  const std::uint8_t *p = take(n);
  return {p, p + n};
}

std::string Reader::str()
{
  const std::uint32_t n = u32();
  const std::uint8_t *p = take(n);
  return {reinterpret_cast<const char *>(p), n};
}

void Reader::finish() const
{
  if (pos_ != data_.size()) throw ProtocolError("trailing bytes in payload");
}

bool send_frame(int fd, const Frame &frame)
{
  const std::vector<std::uint8_t> bytes = encode(frame);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EPIPE || errno == ECONNRESET) return false;
      throw std::runtime_error(std::string("send: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  return true;
}

namespace {

  // false on end of stream before any byte; throws on a partial read
  bool read_exact(int fd, std::uint8_t *buf, std::size_t n)
  {
    std::size_t done = 0;
    while (done < n) {
      const ssize_t r = ::read(fd, buf + done, n - done);
      if (r < 0) {
        if (errno == EINTR) continue;
        if (errno == ECONNRESET) return false;
        throw std::runtime_error(std::string("read: ") + std::strerror(errno));
      }
      if (r == 0) {
        if (done == 0) return false;
        throw ProtocolError("stream ended inside a frame");
      }
      done += static_cast<std::size_t>(r);
    }
    return true;
  }

} // namespace

std::optional<Frame> receive_frame(int fd)
{
  std::uint8_t h[header_size];
  if (!read_exact(fd, h, header_size)) return std::nullopt;
  const std::uint32_t len = parse_header(h);
  Frame f;
  f.type = static_cast<FrameType>(h[2]);
  f.payload.resize(len);
  if (len > 0 && !read_exact(fd, f.payload.data(), len)) throw ProtocolError("stream ended inside a frame");
  return f;
}

} // namespace lfsrsat::wire
