#include "raydoom/spectate/server.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <thread>

#include "raydoom/error.hpp"
#include "raydoom/recording.hpp"

namespace raydoom::spectate {

namespace {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

constexpr milliseconds kHandshakeTimeout{5000};
constexpr milliseconds kPollSlice{50};
constexpr std::size_t kMaxHttpHeader = 8192;
constexpr std::string_view kClientKey = "cmF5ZG9vbS1zcGVjdGF0ZQ==";

[[noreturn]] void disconnected(const std::string& what) { throw Error(ErrorKind::ClientDisconnected, what); }

// Waits for readability; false on timeout.
bool wait_readable(int fd, std::optional<milliseconds> timeout) {
  pollfd p{fd, POLLIN, 0};
  for (;;) {
    const int rc = ::poll(&p, 1, timeout ? static_cast<int>(timeout->count()) : -1);
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) disconnected(std::string("poll failed: ") + std::strerror(errno));
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

struct Stopped {};

}  // namespace

Connection::Connection(int fd, bool websocket, bool client_side) : fd_(fd), websocket_(websocket), client_side_(client_side) {
  set_nodelay(fd_);
}

Connection::~Connection() { close(); }

void Connection::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

std::unique_ptr<Connection> Connection::connect(const std::string& host, std::uint16_t port, bool websocket) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || !res)
    throw Error(ErrorKind::IoError, "cannot resolve " + host);
  int fd = -1;
  for (addrinfo* a = res; a; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw Error(ErrorKind::IoError, "cannot connect to " + host + ":" + service);
  std::unique_ptr<Connection> conn(new Connection(fd, false, true));
  if (websocket) {
    const std::string request = websocket::upgrade_request(host, kClientKey);
    conn->write_all({reinterpret_cast<const std::uint8_t*>(request.data()), request.size()});
    std::string response;
    while (response.find("\r\n\r\n") == std::string::npos) {
      if (response.size() > kMaxHttpHeader) throw Error(ErrorKind::ProtocolError, "oversized upgrade response");
      if (!wait_readable(fd, kHandshakeTimeout)) throw Error(ErrorKind::ProtocolError, "upgrade response timed out");
      char buf[512];
      const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
      if (n <= 0) disconnected("server closed during the upgrade");
      response.append(buf, static_cast<std::size_t>(n));
    }
    const std::size_t end = response.find("\r\n\r\n") + 4;
    if (response.rfind("HTTP/1.1 101", 0) != 0) throw Error(ErrorKind::ProtocolError, "upgrade refused");
    if (response.find("Sec-WebSocket-Accept: " + websocket::accept_key(kClientKey) + "\r\n") == std::string::npos)
      throw Error(ErrorKind::ProtocolError, "bad Sec-WebSocket-Accept");
    conn->websocket_ = true;
    conn->wire_.assign(response.begin() + static_cast<std::ptrdiff_t>(end), response.end());
  }
  return conn;
}

void Connection::write_all(std::span<const std::uint8_t> bytes) {
  if (fd_ < 0) disconnected("connection closed");
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) disconnected(std::string("send failed: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(n);
  }
}

void Connection::send_raw(std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(send_mutex_);
  if (!websocket_) {
    write_all(bytes);
    return;
  }
  std::optional<std::uint32_t> mask;
  if (client_side_) mask = mask_counter_ = mask_counter_ * 1664525u + 1013904223u;
  write_all(websocket::encode_frame(websocket::kOpBinary, bytes, mask));
}

void Connection::send(const Message& msg) { send_raw(encode_message(msg)); }

bool Connection::fill(std::optional<milliseconds> timeout) {
  if (fd_ < 0) disconnected("connection closed");
  if (!websocket_ || wire_.empty()) {
    if (!wait_readable(fd_, timeout)) return false;
    std::uint8_t buf[65536];
    ssize_t n;
    do {
      n = ::recv(fd_, buf, sizeof(buf), 0);
    } while (n < 0 && errno == EINTR);
    if (n <= 0) {
      close();
      disconnected("peer closed the connection");
    }
    if (!websocket_) {
      stream_.feed({buf, static_cast<std::size_t>(n)});
      return true;
    }
    wire_.insert(wire_.end(), buf, buf + n);
  }
  std::size_t consumed = 0;
  while (auto frame = websocket::decode_frame(wire_, consumed)) {
    wire_.erase(wire_.begin(), wire_.begin() + static_cast<std::ptrdiff_t>(consumed));
    switch (frame->opcode) {
      case 0x0:
      case websocket::kOpBinary: stream_.feed(frame->payload); break;
      case websocket::kOpPing: {
        std::lock_guard lock(send_mutex_);
        std::optional<std::uint32_t> mask;
        if (client_side_) mask = mask_counter_ = mask_counter_ * 1664525u + 1013904223u;
        write_all(websocket::encode_frame(websocket::kOpPong, frame->payload, mask));
        break;
      }
      case websocket::kOpPong: break;
      case websocket::kOpClose: close(); disconnected("peer sent a close frame");
      default: throw Error(ErrorKind::ProtocolError, "unsupported websocket opcode " + std::to_string(frame->opcode));
    }
  }
  return true;
}

std::optional<Message> Connection::receive(std::optional<milliseconds> timeout) {
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  for (;;) {
    if (auto m = stream_.next()) return m;
    std::optional<milliseconds> left;
    if (deadline) {
      left = std::chrono::duration_cast<milliseconds>(*deadline - Clock::now());
      if (left->count() < 0) return std::nullopt;
    }
    if (!fill(left)) return std::nullopt;
  }
}

Listener::Listener(const std::string& address, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(ErrorKind::IoError, "socket() failed");
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw Error(ErrorKind::IoError, "bad bind address " + address);
  }
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(fd_, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    throw Error(ErrorKind::IoError, "cannot listen on " + address + ":" + std::to_string(port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

Listener::~Listener() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<Connection> Listener::accept(std::optional<milliseconds> timeout) {
  const auto deadline = timeout ? std::optional(Clock::now() + *timeout) : std::nullopt;
  for (;;) {
    std::optional<milliseconds> left;
    if (deadline) {
      left = std::chrono::duration_cast<milliseconds>(*deadline - Clock::now());
      if (left->count() < 0) return nullptr;
    }
    if (!wait_readable(fd_, left)) return nullptr;
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::unique_ptr<Connection> conn(new Connection(fd, false, false));
    try {
      // Sniff the first bytes: "GET " is a browser upgrading to WebSocket.
      std::string head;
      while (head.size() < 4 || (head.rfind("GET ", 0) == 0 && head.find("\r\n\r\n") == std::string::npos)) {
        if (head.size() > kMaxHttpHeader) throw Error(ErrorKind::ProtocolError, "oversized HTTP header");
        if (!wait_readable(fd, kHandshakeTimeout)) throw Error(ErrorKind::ProtocolError, "client sent nothing");
        char buf[1024];
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) disconnected("client left during the handshake");
        head.append(buf, static_cast<std::size_t>(n));
        if (head.size() >= 4 && head.rfind("GET ", 0) != 0) break;
      }
      if (head.rfind("GET ", 0) == 0) {
        const std::size_t end = head.find("\r\n\r\n") + 4;
        const std::string key = websocket::parse_upgrade_request(head.substr(0, end));
        const std::string response = websocket::upgrade_response(key);
        conn->write_all({reinterpret_cast<const std::uint8_t*>(response.data()), response.size()});
        conn->websocket_ = true;
        conn->wire_.assign(head.begin() + static_cast<std::ptrdiff_t>(end), head.end());
      } else {
        conn->stream_.feed({reinterpret_cast<const std::uint8_t*>(head.data()), head.size()});
      }
      return conn;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ProtocolError) {
        const std::string reply = "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\n\r\n";
        try {
          conn->write_all({reinterpret_cast<const std::uint8_t*>(reply.data()), reply.size()});
        } catch (const Error&) {
        }
      }
    }
  }
}

FrameMsg frame_message(const Frame& frame, std::uint32_t tick, const std::vector<GameVariable>& variables) {
  FrameMsg m;
  m.tick = tick;
  m.width = static_cast<std::uint16_t>(frame.width);
  m.height = static_cast<std::uint16_t>(frame.height);
  m.rgb = frame.rgb;
  m.depth8 = frame.depth8();
  for (const GameVariable& v : variables) m.variables.push_back(static_cast<float>(v.value));
  return m;
}

ConfigMsg config_message(const EnvConfig& config, const ScenarioDef& scenario) {
  ConfigMsg m;
  m.width = static_cast<std::uint16_t>(config.width);
  m.height = static_cast<std::uint16_t>(config.height);
  m.mode = config.mode;
  m.has_depth = config.compute_depth;
  for (Button b : scenario.buttons) m.buttons.emplace_back(button_name(b));
  m.variables = scenario.variables;
  return m;
}

std::filesystem::path episode_recording_path(const std::filesystem::path& first, int episode) {
  if (episode == 0) return first;
  std::filesystem::path p = first;
  p.replace_filename(first.stem().string() + "." + std::to_string(episode) + first.extension().string());
  return p;
}

namespace {

EventMsg event_message(const GameEvent& e) {
  return {static_cast<std::uint8_t>(e.tag), e.tick, static_cast<std::int32_t>(e.amount)};
}

bool is_protocol_violation(ErrorKind k) {
  return k == ErrorKind::ProtocolError || k == ErrorKind::UnknownTag || k == ErrorKind::TruncatedMessage;
}

}  // namespace

class SpectateServer::SyncProvider final : public ActionProvider {
 public:
  explicit SyncProvider(SpectateServer& server) : server_(server) {}

  ButtonSet wait_action(const GameState& state) override {
    const std::size_t n = server_.options_.scenario.buttons.size();
    for (;;) {
      if (!server_.client_) {
        if (!server_.attach_client()) throw Stopped{};
        ++server_.reconnects_;
      }
      try {
        server_.client_->send(frame_message(state.frame, state.tick, state.game_variables));
        for (;;) {
          if (server_.stop_) throw Stopped{};
          std::optional<Message> m = server_.client_->receive(kPollSlice);
          if (!m) continue;
          if (const auto* in = std::get_if<InputMsg>(&*m)) {
            if (in->buttons >> n) throw Error(ErrorKind::ProtocolError, "INPUT sets undeclared buttons");
            return ButtonSet(n, in->buttons);
          }
          throw Error(ErrorKind::ProtocolError, "expected INPUT, got " + std::string(tag_name(message_tag(*m))));
        }
      } catch (const Error& e) {
        if (is_protocol_violation(e.kind())) {
          try {
            server_.client_->send(ErrorMsg{e.what()});
          } catch (const Error&) {
          }
        } else if (e.kind() != ErrorKind::ClientDisconnected) {
          throw;
        }
        // SYNC pauses: the world does not advance until a client is back.
        server_.client_.reset();
      }
    }
  }

  ButtonSet latest_action() override { return ButtonSet(server_.options_.scenario.buttons.size(), 0); }

 private:
  SpectateServer& server_;
};

class SpectateServer::AsyncProvider final : public ActionProvider {
 public:
  explicit AsyncProvider(std::size_t buttons) : buttons_(buttons) {}

  ButtonSet wait_action(const GameState&) override { return latest_action(); }
  ButtonSet latest_action() override { return ButtonSet(buttons_, latched_.load()); }
  void latch(std::uint16_t mask) { latched_ = mask; }

 private:
  std::size_t buttons_;
  std::atomic<std::uint16_t> latched_{0};
};

SpectateServer::SpectateServer(ServerOptions options)
    : options_(std::move(options)), listener_(options_.bind_address, options_.port) {
  if (!is_spectator(options_.config.mode))
    throw Error(ErrorKind::ModeMismatch, "spectate needs sync_spectator or async_spectator, not " +
                                             std::string(mode_name(options_.config.mode)));
  if (options_.episodes < 1) throw Error(ErrorKind::InvalidArgument, "episodes must be at least 1");
}

SpectateServer::~SpectateServer() = default;

bool SpectateServer::attach_client() {
  const auto deadline = options_.accept_timeout.count() > 0 ? std::optional(Clock::now() + options_.accept_timeout)
                                                            : std::nullopt;
  while (!stop_) {
    if (deadline && Clock::now() > *deadline) return false;
    std::unique_ptr<Connection> conn = listener_.accept(milliseconds(100));
    if (!conn) continue;
    try {
      std::optional<Message> first = conn->receive(kHandshakeTimeout);
      if (!first) throw Error(ErrorKind::ProtocolError, "no HELLO within the handshake timeout");
      const auto* hello = std::get_if<HelloMsg>(&*first);
      if (!hello) throw Error(ErrorKind::ProtocolError, "expected HELLO, got " + std::string(tag_name(message_tag(*first))));
      if (hello->version != kProtocolVersion)
        throw Error(ErrorKind::ProtocolError, "protocol version " + std::to_string(hello->version) + " is not supported");
      conn->send(config_message(options_.config, options_.scenario));
      client_ = std::move(conn);
      return true;
    } catch (const Error& e) {
      if (is_protocol_violation(e.kind())) {
        try {
          conn->send(ErrorMsg{e.what()});
        } catch (const Error&) {
        }
      } else if (e.kind() != ErrorKind::ClientDisconnected) {
        throw;
      }
    }
  }
  return false;
}

void SpectateServer::send_or_drop(const Message& msg) {
  if (!client_) return;
  try {
    client_->send(msg);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ClientDisconnected) throw;
    client_.reset();
  }
}

void SpectateServer::finish_episode(Environment& env, const Recording& rec, int episode, ServerReport& report) {
  EpisodeEndMsg end;
  end.total_reward = env.get_total_reward();
  end.total_score = env.get_total_score();
  end.cause = static_cast<std::uint8_t>(env.terminal_status().cause);
  end.tick = env.tick();
  send_or_drop(end);
  report.episodes.push_back(end);
  if (!options_.record_path.empty()) {
    const auto path = episode_recording_path(options_.record_path, episode);
    save_recording(path, rec);
    report.recordings.push_back(path);
  }
}

void SpectateServer::run_sync_episode(Environment& env, int episode, ServerReport& report) {
  std::vector<GameEvent> events;
  EpisodeRecorder recorder(env, false, [&](const WorldState& world, std::uint16_t, double) {
    events.insert(events.end(), world.pending_events.begin(), world.pending_events.end());
  });
  env.record_action_provider(std::make_shared<SyncProvider>(*this));
  env.new_episode(options_.seed ? std::optional(derive_seed(*options_.seed, static_cast<std::uint64_t>(episode)))
                                : std::nullopt);
  recorder.begin();
  const int skip = options_.config.default_skipcount;
  while (!env.is_episode_finished()) {
    events.clear();
    const SpectatorStep step = env.advance_spectator(skip);
    recorder.note_decision(step.state.tick, skip, step.action.mask(), step.reward);
    for (const GameEvent& e : events) send_or_drop(event_message(e));
  }
  finish_episode(env, recorder.snapshot(), episode, report);
}

void SpectateServer::run_async_episode(Environment& env, int episode, ServerReport& report) {
  std::mutex queue_mutex;
  std::condition_variable queue_cv;
  std::deque<Message> outbox;
  const ScenarioDef& scenario = options_.scenario;
  EpisodeRecorder recorder(env, true, [&](const WorldState& world, std::uint16_t, double) {
    FrameMsg frame = frame_message(env.render_world(world), world.tick, game_variables(world, scenario));
    std::lock_guard lock(queue_mutex);
    for (const GameEvent& e : world.pending_events)
      if (world.tick > 0) outbox.emplace_back(event_message(e));
    outbox.emplace_back(std::move(frame));
    queue_cv.notify_one();
  });
  auto provider = std::make_shared<AsyncProvider>(scenario.buttons.size());
  env.record_action_provider(provider);

  Connection* conn = client_.get();
  std::atomic<bool> alive{conn != nullptr};
  std::atomic<bool> reading{true};
  std::thread reader([&] {
    while (reading && alive) {
      try {
        std::optional<Message> m = conn->receive(kPollSlice);
        if (!m) continue;
        const auto* in = std::get_if<InputMsg>(&*m);
        if (!in) throw Error(ErrorKind::ProtocolError, "expected INPUT, got " + std::string(tag_name(message_tag(*m))));
        if (in->buttons >> scenario.buttons.size()) throw Error(ErrorKind::ProtocolError, "INPUT sets undeclared buttons");
        provider->latch(in->buttons);
      } catch (const Error& e) {
        if (is_protocol_violation(e.kind())) {
          try {
            conn->send(ErrorMsg{e.what()});
          } catch (const Error&) {
          }
        }
        // ASYNC keeps running with every button released.
        provider->latch(0);
        alive = false;
      }
    }
  });

  env.new_episode(options_.seed ? std::optional(derive_seed(*options_.seed, static_cast<std::uint64_t>(episode)))
                                : std::nullopt);
  recorder.begin();
  for (;;) {
    std::deque<Message> batch;
    {
      std::unique_lock lock(queue_mutex);
      queue_cv.wait_for(lock, kPollSlice, [&] { return !outbox.empty(); });
      batch.swap(outbox);
    }
    for (const Message& m : batch) {
      if (!alive) break;
      try {
        conn->send(m);
      } catch (const Error&) {
        provider->latch(0);
        alive = false;
      }
    }
    if (stop_) break;
    if (env.is_episode_finished()) {
      std::lock_guard lock(queue_mutex);
      if (outbox.empty()) break;
    }
  }
  reading = false;
  reader.join();
  if (!alive) client_.reset();
  if (stop_ && !env.is_episode_finished()) throw Stopped{};
  finish_episode(env, recorder.snapshot(), episode, report);
}

ServerReport SpectateServer::run() {
  Environment env(options_.config, options_.scenario);
  ServerReport report;
  try {
    for (int episode = 0; episode < options_.episodes && !stop_; ++episode) {
      if (!client_ && !attach_client()) break;
      if (is_async(options_.config.mode)) run_async_episode(env, episode, report);
      else run_sync_episode(env, episode, report);
    }
  } catch (const Stopped&) {
  }
  report.reconnects = reconnects_;
  env.set_tic_observer(nullptr);
  client_.reset();
  return report;
}

}  // namespace raydoom::spectate
