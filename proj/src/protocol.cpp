#include "raydoom/spectate/protocol.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>

#include "raydoom/bytes.hpp"
#include "raydoom/error.hpp"

namespace raydoom::spectate {

std::string_view tag_name(MessageTag tag) {
  switch (tag) {
    case MessageTag::Hello: return "HELLO";
    case MessageTag::Config: return "CONFIG";
    case MessageTag::Frame: return "FRAME";
    case MessageTag::Input: return "INPUT";
    case MessageTag::Event: return "EVENT";
    case MessageTag::EpisodeEnd: return "EPISODE_END";
    case MessageTag::Error: return "ERROR";
  }
  return "UNKNOWN";
}

MessageTag message_tag(const Message& msg) { return static_cast<MessageTag>(msg.index() + 1); }

namespace {

[[noreturn]] void protocol_error(const std::string& what) { throw Error(ErrorKind::ProtocolError, what); }

void put_short_string(ByteWriter& w, const std::string& s, std::size_t limit) {
  if (s.size() > limit) protocol_error("string too long for the wire: " + s);
  if (limit == 0xFF) w.u8(static_cast<std::uint8_t>(s.size()));
  else w.u16(static_cast<std::uint16_t>(s.size()));
  w.raw(s);
}

void put_names(ByteWriter& w, const std::vector<std::string>& names) {
  if (names.size() > 0xFF) protocol_error("too many names");
  w.u8(static_cast<std::uint8_t>(names.size()));
  for (const std::string& n : names) put_short_string(w, n, 0xFF);
}

std::vector<std::string> get_names(ByteReader& r) {
  std::vector<std::string> names(r.u8());
  for (std::string& n : names) n = r.str(r.u8());
  return names;
}

void encode_payload(ByteWriter& w, const HelloMsg& m) {
  w.u32(m.version);
  put_short_string(w, m.client_name, 0xFFFF);
}

void encode_payload(ByteWriter& w, const ConfigMsg& m) {
  w.u16(m.width);
  w.u16(m.height);
  w.u8(static_cast<std::uint8_t>(m.mode));
  w.u8(m.has_depth ? 1 : 0);
  put_names(w, m.buttons);
  put_names(w, m.variables);
}

void encode_payload(ByteWriter& w, const FrameMsg& m) {
  const std::size_t pixels = static_cast<std::size_t>(m.width) * m.height;
  if (m.rgb.size() != pixels * 3) protocol_error("frame rgb size does not match its resolution");
  if (!m.depth8.empty() && m.depth8.size() != pixels) protocol_error("frame depth size does not match its resolution");
  if (m.variables.size() > 0xFF) protocol_error("too many variables");
  w.u32(m.tick);
  w.u16(m.width);
  w.u16(m.height);
  w.u8(m.depth8.empty() ? 0 : 1);
  w.raw(m.rgb);
  w.raw(m.depth8);
  w.u8(static_cast<std::uint8_t>(m.variables.size()));
  for (float v : m.variables) w.f32(v);
}

void encode_payload(ByteWriter& w, const InputMsg& m) {
  w.u16(m.buttons);
  w.u32(m.client_tick);
}

void encode_payload(ByteWriter& w, const EventMsg& m) {
  w.u8(m.event);
  w.u32(m.tick);
  w.i32(m.amount);
}

void encode_payload(ByteWriter& w, const EpisodeEndMsg& m) {
  w.f64(m.total_reward);
  w.f64(m.total_score);
  w.u8(m.cause);
  w.u32(m.tick);
}

void encode_payload(ByteWriter& w, const ErrorMsg& m) { put_short_string(w, m.message.substr(0, 0xFFFF), 0xFFFF); }

Message decode_payload(MessageTag tag, ByteReader& r) {
  switch (tag) {
    case MessageTag::Hello: {
      HelloMsg m;
      m.version = r.u32();
      m.client_name = r.str(r.u16());
      return m;
    }
    case MessageTag::Config: {
      ConfigMsg m;
      m.width = r.u16();
      m.height = r.u16();
      const std::uint8_t mode = r.u8();
      if (mode > static_cast<std::uint8_t>(ControlMode::AsyncSpectator)) protocol_error("bad control mode");
      m.mode = static_cast<ControlMode>(mode);
      m.has_depth = r.u8() != 0;
      m.buttons = get_names(r);
      m.variables = get_names(r);
      return m;
    }
    case MessageTag::Frame: {
      FrameMsg m;
      m.tick = r.u32();
      m.width = r.u16();
      m.height = r.u16();
      const bool depth = r.u8() != 0;
      const std::size_t pixels = static_cast<std::size_t>(m.width) * m.height;
      auto rgb = r.raw(pixels * 3);
      m.rgb.assign(rgb.begin(), rgb.end());
      if (depth) {
        auto d = r.raw(pixels);
        m.depth8.assign(d.begin(), d.end());
      }
      m.variables.resize(r.u8());
      for (float& v : m.variables) v = r.f32();
      return m;
    }
    case MessageTag::Input: {
      InputMsg m;
      m.buttons = r.u16();
      m.client_tick = r.u32();
      return m;
    }
    case MessageTag::Event: {
      EventMsg m;
      m.event = r.u8();
      m.tick = r.u32();
      m.amount = r.i32();
      return m;
    }
    case MessageTag::EpisodeEnd: {
      EpisodeEndMsg m;
      m.total_reward = r.f64();
      m.total_score = r.f64();
      m.cause = r.u8();
      m.tick = r.u32();
      return m;
    }
    case MessageTag::Error: {
      ErrorMsg m;
      m.message = r.str(r.u16());
      return m;
    }
  }
  throw Error(ErrorKind::UnknownTag, "unknown message tag");
}

}  // namespace

std::vector<std::uint8_t> encode_message(const Message& msg) {
  ByteWriter w;
  w.u32(0);
  w.u8(static_cast<std::uint8_t>(message_tag(msg)));
  std::visit([&](const auto& m) { encode_payload(w, m); }, msg);
  std::vector<std::uint8_t> out = w.take();
  const std::uint32_t length = static_cast<std::uint32_t>(out.size() - 4);
  for (int i = 0; i < 4; ++i) out[i] = static_cast<std::uint8_t>(length >> (8 * i));
  return out;
}

Decoded decode_message(std::span<const std::uint8_t> bytes) {
  ByteReader header(bytes, ErrorKind::TruncatedMessage);
  const std::uint32_t length = header.u32();
  if (length == 0) protocol_error("empty message");
  if (length > kMaxMessageBytes) protocol_error("message length " + std::to_string(length) + " exceeds the limit");
  if (header.remaining() < length) throw Error(ErrorKind::TruncatedMessage, "message needs " + std::to_string(length) + " bytes");
  const std::uint8_t raw_tag = header.u8();
  if (raw_tag < 1 || raw_tag > 7) throw Error(ErrorKind::UnknownTag, "unknown message tag " + std::to_string(raw_tag));
  // The payload must be consumed exactly; reading past it is a malformed payload.
  ByteReader payload(bytes.subspan(5, length - 1), ErrorKind::ProtocolError);
  Decoded d{decode_payload(static_cast<MessageTag>(raw_tag), payload), 4 + static_cast<std::size_t>(length)};
  if (payload.remaining() != 0) protocol_error(std::string(tag_name(static_cast<MessageTag>(raw_tag))) + " payload has trailing bytes");
  return d;
}

void MessageStream::feed(std::span<const std::uint8_t> bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Message> MessageStream::next() {
  const std::span<const std::uint8_t> pending(buffer_.data() + offset_, buffer_.size() - offset_);
  if (pending.size() < 4) return std::nullopt;
  const std::uint32_t length = static_cast<std::uint32_t>(pending[0]) | (static_cast<std::uint32_t>(pending[1]) << 8) |
                               (static_cast<std::uint32_t>(pending[2]) << 16) |
                               (static_cast<std::uint32_t>(pending[3]) << 24);
  if (length > kMaxMessageBytes) protocol_error("message length exceeds the limit");
  if (pending.size() < 4 + static_cast<std::size_t>(length)) return std::nullopt;
  Decoded d = decode_message(pending);
  offset_ += d.consumed;
  if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  return std::move(d.message);
}

namespace websocket {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string accept_key(std::string_view client_key) {
  const std::string joined = std::string(client_key) + std::string(kGuid);
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
  unsigned char encoded[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(encoded, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(encoded), static_cast<std::size_t>(n));
}

std::string parse_upgrade_request(std::string_view request) {
  const std::size_t line_end = request.find("\r\n");
  if (line_end == std::string_view::npos) protocol_error("incomplete HTTP request");
  const std::string_view request_line = request.substr(0, line_end);
  if (request_line.substr(0, 4) != "GET " || request_line.find(" HTTP/1.1") == std::string_view::npos)
    protocol_error("expected a GET ... HTTP/1.1 upgrade request");
  std::string key;
  bool upgrade = false;
  std::size_t pos = line_end + 2;
  while (pos < request.size()) {
    const std::size_t end = request.find("\r\n", pos);
    if (end == std::string_view::npos || end == pos) break;
    const std::string_view line = request.substr(pos, end - pos);
    pos = end + 2;
    const std::size_t colon = line.find(':');
    if (colon == std::string_view::npos) protocol_error("malformed header line");
    const std::string name = lower(trim(line.substr(0, colon)));
    const std::string_view value = trim(line.substr(colon + 1));
    if (name == "sec-websocket-key") key = std::string(value);
    else if (name == "upgrade" && lower(value) == "websocket") upgrade = true;
  }
  if (!upgrade) protocol_error("missing Upgrade: websocket header");
  if (key.empty()) protocol_error("missing Sec-WebSocket-Key header");
  return key;
}

std::string upgrade_response(std::string_view client_key) {
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: " +
         accept_key(client_key) + "\r\n\r\n";
}

std::string upgrade_request(std::string_view host, std::string_view client_key) {
  return "GET / HTTP/1.1\r\n"
         "Host: " +
         std::string(host) +
         "\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Key: " +
         std::string(client_key) +
         "\r\n"
         "Sec-WebSocket-Version: 13\r\n\r\n";
}

std::vector<std::uint8_t> encode_frame(std::uint8_t opcode, std::span<const std::uint8_t> payload,
                                       std::optional<std::uint32_t> mask_key) {
  std::vector<std::uint8_t> out;
  out.push_back(static_cast<std::uint8_t>(0x80 | (opcode & 0x0F)));
  const std::uint8_t mask_bit = mask_key ? 0x80 : 0x00;
  const std::size_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<std::uint8_t>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(mask_bit | 126);
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
  } else {
    out.push_back(mask_bit | 127);
    for (int i = 7; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(n) >> (8 * i)));
  }
  std::uint8_t mask[4] = {0, 0, 0, 0};
  if (mask_key) {
    for (int i = 0; i < 4; ++i) mask[i] = static_cast<std::uint8_t>(*mask_key >> (8 * (3 - i)));
    out.insert(out.end(), mask, mask + 4);
  }
  const std::size_t start = out.size();
  out.insert(out.end(), payload.begin(), payload.end());
  if (mask_key)
    for (std::size_t i = 0; i < n; ++i) out[start + i] ^= mask[i % 4];
  return out;
}

std::optional<Frame> decode_frame(std::span<const std::uint8_t> bytes, std::size_t& consumed) {
  if (bytes.size() < 2) return std::nullopt;
  Frame f;
  f.fin = (bytes[0] & 0x80) != 0;
  if (bytes[0] & 0x70) protocol_error("websocket extension bits set");
  f.opcode = bytes[0] & 0x0F;
  const bool masked = (bytes[1] & 0x80) != 0;
  std::uint64_t n = bytes[1] & 0x7F;
  std::size_t pos = 2;
  if (n == 126) {
    if (bytes.size() < 4) return std::nullopt;
    n = (static_cast<std::uint64_t>(bytes[2]) << 8) | bytes[3];
    pos = 4;
  } else if (n == 127) {
    if (bytes.size() < 10) return std::nullopt;
    n = 0;
    for (int i = 0; i < 8; ++i) n = (n << 8) | bytes[2 + i];
    pos = 10;
  }
  if (n > kMaxMessageBytes + 16) protocol_error("websocket frame too large");
  std::uint8_t mask[4] = {0, 0, 0, 0};
  if (masked) {
    if (bytes.size() < pos + 4) return std::nullopt;
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(pos), 4, mask);
    pos += 4;
  }
  if (bytes.size() < pos + n) return std::nullopt;
  f.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (masked)
    for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] ^= mask[i % 4];
  consumed = pos + static_cast<std::size_t>(n);
  return f;
}

}  // namespace websocket

}  // namespace raydoom::spectate
