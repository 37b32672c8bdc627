#include "raydoom/env.hpp"

#include <chrono>

#include "raydoom/error.hpp"
#include "raydoom/rng.hpp"

namespace raydoom {

namespace {

constexpr int kMaxSkip = 1000;

}  // namespace

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((77u * r + 150u * g + 29u * b + 128u) >> 8);
}

std::vector<GameVariable> game_variables(const WorldState& world, const ScenarioDef& scenario) {
  std::vector<GameVariable> out;
  for (const std::string& name : scenario.variables) {
    double v = 0.0;
    if (name == "HEALTH") v = world.player.health;
    else if (name == "AMMO") v = world.player.ammo;
    else if (name == "TICK") v = world.tick;
    out.push_back({name, v});
  }
  return out;
}

Environment::Environment(EnvConfig config, ScenarioDef scenario)
    : config_(std::move(config)), scenario_(std::move(scenario)) {
  validate_config();
}

Environment::Environment(EnvConfig config) : config_(std::move(config)) {
  if (config_.scenario_path.empty()) throw Error(ErrorKind::ScenarioLoadError, "config names no scenario");
  try {
    scenario_ = load_scenario(config_.scenario_path);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ScenarioLoadError) throw;
    throw Error(ErrorKind::ScenarioLoadError, config_.scenario_path + ": " + e.what());
  }
  validate_config();
}

Environment::~Environment() { stop_clock(); }

void Environment::validate_config() const {
  if (config_.width < 4 || config_.height < 4 || config_.width > 1024 || config_.height > 1024)
    throw Error(ErrorKind::InvalidConfig, "resolution out of range");
  if (config_.default_skipcount < 0 || config_.default_skipcount > 100)
    throw Error(ErrorKind::InvalidConfig, "skipcount out of range");
  if (!(config_.fov_degrees > 0.0 && config_.fov_degrees < 180.0)) throw Error(ErrorKind::InvalidConfig, "fov out of range");
  if (scenario_.buttons.empty() || scenario_.buttons.size() > 8)
    throw Error(ErrorKind::InvalidConfig, "scenario must declare 1..8 buttons");
}

RenderOptions Environment::render_options() const {
  RenderOptions opts;
  opts.width = config_.width;
  opts.height = config_.height;
  opts.compute_depth = config_.compute_depth;
  return opts;
}

Frame Environment::render_world(const WorldState& world) const {
  return render_frame(world, camera_for(world.player, config_.fov_degrees * kPi / 180.0), render_options());
}

void Environment::stop_clock() {
  {
    std::lock_guard lock(mutex_);
    stop_requested_ = true;
  }
  tic_cv_.notify_all();
  if (clock_.joinable()) clock_.join();
  stop_requested_ = false;
}

GameState Environment::new_episode(std::optional<std::uint64_t> seed) {
  stop_clock();
  std::unique_lock lock(mutex_);
  const std::uint64_t index = episodes_started_++;
  episode_seed_ = seed ? *seed : derive_seed(config_.seed.value_or(0), index);
  world_ = make_world(scenario_, episode_seed_);
  episode_live_ = true;
  status_ = {};
  total_reward_ = 0.0;
  total_score_ = 0.0;
  pending_reward_ = 0.0;
  decisions_ = 0;
  latched_mask_ = 0;
  cache_valid_ = false;
  GameState initial = build_state_locked();
  if (observer_) observer_(world_, 0, 0.0);
  lock.unlock();
  if (is_async(config_.mode)) clock_ = std::thread([this] { clock_loop(); });
  return initial;
}

void Environment::clock_loop() {
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::nanoseconds(1'000'000'000LL / kTicRate);
  auto next = clock::now();
  std::vector<GameEvent> scratch;
  for (;;) {
    next += period;
    std::this_thread::sleep_until(next);
    std::lock_guard lock(mutex_);
    if (stop_requested_ || !episode_live_) break;
    std::uint16_t mask = latched_mask_;
    if (config_.mode == ControlMode::AsyncSpectator) mask = provider_ ? provider_->latest_action().mask() : 0;
    scratch.clear();
    run_tic(mask, true, scratch);
    tic_cv_.notify_all();
  }
  tic_cv_.notify_all();
}

double Environment::run_tic(std::uint16_t mask, bool living_counted, std::vector<GameEvent>& decision_events) {
  const ButtonSet buttons(scenario_.buttons.size(), mask);
  const std::vector<GameEvent> events = tic(world_, buttons.intent(scenario_.buttons));
  const RewardDelta delta = score_events_unchecked(events, living_counted ? 1 : 0, scenario_.rewards);
  total_reward_ += delta.training;
  total_score_ += delta.reported;
  pending_reward_ += delta.training;
  const TerminalStatus status = check_terminal(world_, events, scenario_);
  if (status.done) {
    status_ = status;
    episode_live_ = false;
  }
  cache_valid_ = false;
  decision_events.insert(decision_events.end(), events.begin(), events.end());
  if (observer_) observer_(world_, mask, delta.training);
  return delta.training;
}

double Environment::make_action(const ButtonSet& buttons, std::optional<int> skip) {
  if (is_spectator(config_.mode)) throw Error(ErrorKind::ModeMismatch, "make_action is not available in spectator modes");
  const int n = skip.value_or(config_.default_skipcount);
  if (n < 0 || n > kMaxSkip) throw Error(ErrorKind::InvalidArgument, "skipcount out of range");
  if (buttons.size() != scenario_.buttons.size())
    throw Error(ErrorKind::InvalidArgument, "button vector length does not match the scenario");

  std::unique_lock lock(mutex_);
  if (!episode_live_) throw Error(ErrorKind::EpisodeFinished, "episode is finished");

  if (is_async(config_.mode)) {
    latched_mask_ = buttons.mask();
    const std::uint32_t target = world_.tick + static_cast<std::uint32_t>(n) + 1;
    tic_cv_.wait(lock, [&] { return world_.tick >= target || !episode_live_ || stop_requested_; });
    const double reward = pending_reward_;
    pending_reward_ = 0.0;
    ++decisions_;
    cache_valid_ = false;
    return reward;
  }

  std::vector<GameEvent> events;
  const bool per_tic = config_.living_reward_unit == LivingRewardUnit::PerTic;
  double reward = 0.0;
  for (int i = 0; i <= n; ++i) {
    reward += run_tic(buttons.mask(), per_tic || i == 0, events);
    if (!episode_live_) break;
  }
  pending_reward_ = 0.0;
  ++decisions_;
  return reward;
}

double Environment::make_action(std::span<const bool> buttons, std::optional<int> skip) {
  return make_action(ButtonSet::from_bools(buttons), skip);
}

GameState Environment::build_state_locked() {
  if (cache_valid_) return cached_state_;
  GameState& s = cached_state_;
  s.number = decisions_ + 1;
  s.tick = world_.tick;
  render_frame_into(s.frame, world_, camera_for(world_.player, config_.fov_degrees * kPi / 180.0), render_options());
  if (config_.channels == Channels::RGB) {
    s.channels = 3;
    s.screen.clear();
  } else {
    s.channels = 1;
    const std::size_t pixels = static_cast<std::size_t>(s.frame.width) * s.frame.height;
    s.screen.resize(pixels);
    const std::uint8_t* rgb = s.frame.rgb.data();
    for (std::size_t i = 0; i < pixels; ++i) s.screen[i] = luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  }
  s.game_variables = game_variables(world_, scenario_);
  cache_valid_ = true;
  return s;
}

GameState Environment::get_state() {
  std::lock_guard lock(mutex_);
  if (!episode_live_) throw Error(ErrorKind::EpisodeFinished, "episode is finished");
  return build_state_locked();
}

GameState Environment::peek_state() {
  std::lock_guard lock(mutex_);
  return build_state_locked();
}

bool Environment::is_episode_finished() const {
  std::lock_guard lock(mutex_);
  return !episode_live_;
}

double Environment::get_total_reward() const {
  std::lock_guard lock(mutex_);
  return total_reward_;
}

double Environment::get_total_score() const {
  std::lock_guard lock(mutex_);
  return total_score_;
}

TerminalStatus Environment::terminal_status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

std::uint32_t Environment::tick() const {
  std::lock_guard lock(mutex_);
  return world_.tick;
}

std::uint64_t Environment::episode_seed() const {
  std::lock_guard lock(mutex_);
  return episode_seed_;
}

WorldState Environment::world_snapshot() const {
  std::lock_guard lock(mutex_);
  return world_;
}

void Environment::record_action_provider(std::shared_ptr<ActionProvider> provider) {
  if (!is_spectator(config_.mode))
    throw Error(ErrorKind::ModeMismatch, std::string("action providers need a spectator mode, not ") +
                                             std::string(mode_name(config_.mode)));
  std::lock_guard lock(mutex_);
  provider_ = std::move(provider);
}

SpectatorStep Environment::advance_spectator(std::optional<int> skip) {
  if (config_.mode != ControlMode::SyncSpectator)
    throw Error(ErrorKind::ModeMismatch, "advance_spectator needs sync_spectator mode");
  std::shared_ptr<ActionProvider> provider;
  {
    std::lock_guard lock(mutex_);
    provider = provider_;
  }
  if (!provider) throw Error(ErrorKind::ModeMismatch, "no action provider registered");
  SpectatorStep step;
  step.state = get_state();
  step.action = provider->wait_action(step.state);
  if (step.action.size() != scenario_.buttons.size())
    throw Error(ErrorKind::InvalidArgument, "provider returned a button vector of the wrong length");

  const int n = skip.value_or(config_.default_skipcount);
  std::lock_guard lock(mutex_);
  if (!episode_live_) throw Error(ErrorKind::EpisodeFinished, "episode is finished");
  std::vector<GameEvent> events;
  const bool per_tic = config_.living_reward_unit == LivingRewardUnit::PerTic;
  for (int i = 0; i <= n; ++i) {
    step.reward += run_tic(step.action.mask(), per_tic || i == 0, events);
    if (!episode_live_) break;
  }
  pending_reward_ = 0.0;
  ++decisions_;
  return step;
}

void Environment::set_tic_observer(TicObserver observer) {
  std::lock_guard lock(mutex_);
  observer_ = std::move(observer);
}

}  // namespace raydoom
