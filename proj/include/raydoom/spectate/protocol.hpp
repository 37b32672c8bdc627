#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "raydoom/scenario.hpp"

namespace raydoom::spectate {

inline constexpr std::uint32_t kProtocolVersion = 1;
// Upper bound on one framed message (tag + payload).
inline constexpr std::uint32_t kMaxMessageBytes = 64u << 20;

// Wire framing, little-endian: u32 length (tag + payload bytes) | u8 tag | payload.
enum class MessageTag : std::uint8_t {
  Hello = 1,
  Config = 2,
  Frame = 3,
  Input = 4,
  Event = 5,
  EpisodeEnd = 6,
  Error = 7,
};

std::string_view tag_name(MessageTag tag);

// u32 version | u16 len | name
struct HelloMsg {
  std::uint32_t version = kProtocolVersion;
  std::string client_name;

  friend bool operator==(const HelloMsg&, const HelloMsg&) = default;
};

// u16 width | u16 height | u8 mode | u8 has_depth | u8 n (u8 len | name)* | u8 n (u8 len | name)*
struct ConfigMsg {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  ControlMode mode = ControlMode::SyncSpectator;
  bool has_depth = false;
  std::vector<std::string> buttons;
  std::vector<std::string> variables;

  friend bool operator==(const ConfigMsg&, const ConfigMsg&) = default;
};

// u32 tick | u16 width | u16 height | u8 has_depth | rgb (w*h*3) | depth8 (w*h, if has_depth)
// | u8 n | f32 variable values
struct FrameMsg {
  std::uint32_t tick = 0;
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<std::uint8_t> depth8;  // empty without depth
  std::vector<float> variables;

  friend bool operator==(const FrameMsg&, const FrameMsg&) = default;
};

// u16 button mask (bit i = i-th declared button) | u32 client tick
struct InputMsg {
  std::uint16_t buttons = 0;
  std::uint32_t client_tick = 0;

  friend bool operator==(const InputMsg&, const InputMsg&) = default;
};

// u8 event tag | u32 tick | i32 amount
struct EventMsg {
  std::uint8_t event = 0;
  std::uint32_t tick = 0;
  std::int32_t amount = 0;

  friend bool operator==(const EventMsg&, const EventMsg&) = default;
};

// f64 total reward | f64 total score | u8 terminal cause | u32 tick
struct EpisodeEndMsg {
  double total_reward = 0.0;
  double total_score = 0.0;
  std::uint8_t cause = 0;
  std::uint32_t tick = 0;

  friend bool operator==(const EpisodeEndMsg&, const EpisodeEndMsg&) = default;
};

// u16 len | message
struct ErrorMsg {
  std::string message;

  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Message = std::variant<HelloMsg, ConfigMsg, FrameMsg, InputMsg, EventMsg, EpisodeEndMsg, ErrorMsg>;

MessageTag message_tag(const Message& msg);

// Full framed bytes, length prefix included.
std::vector<std::uint8_t> encode_message(const Message& msg);

struct Decoded {
  Message message;
  std::size_t consumed = 0;
};

// Decodes the first framed message. Throws Error(TruncatedMessage) when the
// bytes end early, Error(UnknownTag), or Error(ProtocolError) for payloads
// whose contents disagree with their length.
Decoded decode_message(std::span<const std::uint8_t> bytes);

// Incremental decoder for a byte stream.
class MessageStream {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  // Next complete message, if one is buffered.
  std::optional<Message> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  std::vector<std::uint8_t> buffer_;
  std::size_t offset_ = 0;
};

// Browser path: HTTP/1.1 upgrade, then every framed message travels as one
// binary WebSocket frame.
namespace websocket {

inline constexpr std::uint8_t kOpText = 0x1;
inline constexpr std::uint8_t kOpBinary = 0x2;
inline constexpr std::uint8_t kOpClose = 0x8;
inline constexpr std::uint8_t kOpPing = 0x9;
inline constexpr std::uint8_t kOpPong = 0xA;

// base64(SHA-1(key + RFC 6455 GUID))
std::string accept_key(std::string_view client_key);

// Returns the Sec-WebSocket-Key of a GET upgrade request. Throws
// Error(ProtocolError) for anything else.
std::string parse_upgrade_request(std::string_view request);
std::string upgrade_response(std::string_view client_key);
std::string upgrade_request(std::string_view host, std::string_view client_key);

struct Frame {
  bool fin = true;
  std::uint8_t opcode = kOpBinary;
  std::vector<std::uint8_t> payload;
};

// Clients must mask (mask_key set), servers must not.
std::vector<std::uint8_t> encode_frame(std::uint8_t opcode, std::span<const std::uint8_t> payload,
                                       std::optional<std::uint32_t> mask_key = std::nullopt);
// nullopt when more bytes are needed; `consumed` is set on success.
std::optional<Frame> decode_frame(std::span<const std::uint8_t> bytes, std::size_t& consumed);

}  // namespace websocket

}  // namespace raydoom::spectate
