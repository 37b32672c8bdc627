#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "raydoom/env.hpp"
#include "raydoom/recording.hpp"
#include "raydoom/spectate/protocol.hpp"

namespace raydoom::spectate {

// One peer over TCP, either raw framing or binary WebSocket frames. Once
// connected, transport failures surface as Error(ClientDisconnected); a
// failed connect is Error(IoError).
class Connection {
 public:
  ~Connection();
  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  // Client side. With `websocket` the HTTP upgrade is performed first and
  // outgoing frames are masked.
  static std::unique_ptr<Connection> connect(const std::string& host, std::uint16_t port, bool websocket = false);

  void send(const Message& msg);
  // nullopt on timeout; no timeout blocks.
  std::optional<Message> receive(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
  // Raw bytes, bypassing the message framing (tests use it to inject garbage).
  void send_raw(std::span<const std::uint8_t> bytes);

  bool is_websocket() const { return websocket_; }
  bool is_open() const { return fd_ >= 0; }
  void close();

 private:
  friend class Listener;
  Connection(int fd, bool websocket, bool client_side);
  // Reads whatever is available (blocking up to `timeout`); false on timeout.
  bool fill(std::optional<std::chrono::milliseconds> timeout);
  void write_all(std::span<const std::uint8_t> bytes);

  int fd_ = -1;
  bool websocket_ = false;
  bool client_side_ = false;
  std::uint32_t mask_counter_ = 0x9E3779B9u;
  std::vector<std::uint8_t> wire_;  // undecoded websocket bytes
  MessageStream stream_;
  std::mutex send_mutex_;
};

class Listener {
 public:
  // Port 0 picks an ephemeral port. Throws Error(IoError).
  Listener(const std::string& address, std::uint16_t port);
  ~Listener();
  Listener(const Listener&) = delete;
  Listener& operator=(const Listener&) = delete;

  std::uint16_t port() const { return port_; }
  // Accepts one client and detects its transport ("GET " starts the
  // WebSocket upgrade). nullopt on timeout.
  std::unique_ptr<Connection> accept(std::optional<std::chrono::milliseconds> timeout = std::nullopt);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

struct ServerOptions {
  EnvConfig config;  // mode must be a spectator mode
  ScenarioDef scenario;
  std::string bind_address = "127.0.0.1";
  std::uint16_t port = 0;
  // Episode i > 0 is written next to it as <stem>.<i><ext>. Empty: no recording.
  std::filesystem::path record_path;
  int episodes = 1;
  // Episode seeds are derive_seed(seed, i); without it the config seed stream is used.
  std::optional<std::uint64_t> seed;
  // Give up waiting for a client after this long (0: wait forever).
  std::chrono::milliseconds accept_timeout{0};
};

struct ServerReport {
  std::vector<EpisodeEndMsg> episodes;
  std::vector<std::filesystem::path> recordings;
  int reconnects = 0;
};

FrameMsg frame_message(const Frame& frame, std::uint32_t tick, const std::vector<GameVariable>& variables);
ConfigMsg config_message(const EnvConfig& config, const ScenarioDef& scenario);
std::filesystem::path episode_recording_path(const std::filesystem::path& first, int episode);

// Serves one client at a time: HELLO -> CONFIG, then per decision point a
// FRAME and (SYNC) a blocking wait for INPUT or (ASYNC) the latest latched
// INPUT, EVENTs as they happen, EPISODE_END per episode.
class SpectateServer {
 public:
  // Binds immediately. Throws Error(ModeMismatch) for player modes.
  explicit SpectateServer(ServerOptions options);
  ~SpectateServer();

  std::uint16_t port() const { return listener_.port(); }
  ServerReport run();
  void stop() { stop_ = true; }

 private:
  class SyncProvider;
  class AsyncProvider;

  // Accepts and handshakes a client; false when stopped or timed out.
  bool attach_client();
  void run_sync_episode(Environment& env, int episode, ServerReport& report);
  void run_async_episode(Environment& env, int episode, ServerReport& report);
  void send_or_drop(const Message& msg);
  void finish_episode(Environment& env, const Recording& rec, int episode, ServerReport& report);

  ServerOptions options_;
  Listener listener_;
  std::unique_ptr<Connection> client_;
  std::atomic<bool> stop_{false};
  int reconnects_ = 0;
};

}  // namespace raydoom::spectate
