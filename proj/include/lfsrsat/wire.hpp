#ifndef LFSRSAT_WIRE_HPP
#define LFSRSAT_WIRE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lfsrsat::wire {

// Frame: magic u8 | version u8 | type u8 | payload length u32 LE | payload.
constexpr std::uint8_t magic = 0xA5;
constexpr std::uint8_t version = 1;
constexpr std::size_t header_size = 7;
constexpr std::uint32_t max_payload = 64U << 20U;

enum class FrameType : std::uint8_t { Assign = 1, Result = 2, Cancel = 3, Heartbeat = 4, Shutdown = 5 };
std::string_view to_string(FrameType type);

struct Frame
{
  FrameType type = FrameType::Heartbeat;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const Frame &, const Frame &) = default;
};

/// Malformed frame or payload.
class ProtocolError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode(const Frame &frame);

/// Accepts bytes in arbitrary chunks and yields whole frames.
class FrameReader
{
public:
  void feed(const std::uint8_t *data, std::size_t size);
  std::optional<Frame> next();
  [[nodiscard]] std::size_t buffered() const { return buf_.size(); }

private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian payload builder.
class Writer
{
public:
  Writer &u8(std::uint8_t v);
  Writer &u32(std::uint32_t v);
  Writer &u64(std::uint64_t v);
  Writer &f64(double v);
  Writer &bytes(const std::vector<std::uint8_t> &v); ///< u32 length + data
  Writer &str(std::string_view v);                    ///< u32 length + data
  [[nodiscard]] std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

/// Little-endian payload parser; throws ProtocolError on underrun.
class Reader
{
public:
  explicit Reader(const std::vector<std::uint8_t> &data) : data_(data) {}
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::vector<std::uint8_t> bytes();
  std::string str();
  void finish() const; ///< throws if bytes remain

private:
  const std::uint8_t *take(std::size_t n);
  const std::vector<std::uint8_t> &data_;
  std::size_t pos_ = 0;
};

/// Blocking whole-frame write on a stream socket. False if the peer is gone.
bool send_frame(int fd, const Frame &frame);

/// Blocking read of one frame. nullopt on orderly end of stream.
std::optional<Frame> receive_frame(int fd);

} // namespace lfsrsat::wire

#endif
