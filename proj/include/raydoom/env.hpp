#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "raydoom/engine.hpp"
#include "raydoom/render.hpp"
#include "raydoom/scenario.hpp"

namespace raydoom {

struct GameVariable {
  std::string name;
  double value = 0.0;

  friend bool operator==(const GameVariable&, const GameVariable&) = default;
};

struct GameState {
  std::uint64_t number = 0;  // 1 for the initial state, +1 per decision
  std::uint32_t tick = 0;
  Frame frame;                       // RGB, plus depth when enabled
  std::vector<std::uint8_t> screen;  // GRAY only: luma, row-major; RGB images live in frame.rgb
  int channels = 3;
  std::vector<GameVariable> game_variables;

  // Image buffer in the configured channels, row-major HWC.
  std::span<const std::uint8_t> image() const { return channels == 3 ? std::span(frame.rgb) : std::span(screen); }

  friend bool operator==(const GameState&, const GameState&) = default;
};

// Source of human input for the spectator modes.
class ActionProvider {
 public:
  virtual ~ActionProvider() = default;
  // SYNC_SPECTATOR: blocks until a decision for `state` is available.
  virtual ButtonSet wait_action(const GameState& state) = 0;
  // ASYNC_SPECTATOR: most recent latched input; must not block.
  virtual ButtonSet latest_action() = 0;
};

struct SpectatorStep {
  GameState state;  // what the human saw
  ButtonSet action;
  double reward = 0.0;
};

// Called after every engine tic with the post-tic world, the declared-button
// mask that drove it, and the tic's training reward; new_episode also calls it
// once with the tick-0 world (mask 0, reward 0). Runs on the thread that
// advances the world (the clock thread in ASYNC modes) with the environment
// locked, so it must not call back into the Environment.
using TicObserver = std::function<void(const WorldState&, std::uint16_t mask, double reward)>;

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Values of the scenario's declared variables (HEALTH, AMMO, TICK) in `world`.
std::vector<GameVariable> game_variables(const WorldState& world, const ScenarioDef& scenario);

// Episode lifecycle facade. SYNC modes advance only inside make_action; ASYNC
// modes run a 35 Hz clock thread that repeats the latched buttons whenever the
// caller misses a tic.
class Environment {
 public:
  // Throws Error(InvalidConfig) for unusable combinations.
  Environment(EnvConfig config, ScenarioDef scenario);
  // Loads config.scenario_path; throws Error(ScenarioLoadError).
  explicit Environment(EnvConfig config);
  ~Environment();

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const EnvConfig& config() const { return config_; }
  const ScenarioDef& scenario() const { return scenario_; }
  std::size_t button_count() const { return scenario_.buttons.size(); }
  std::size_t action_count() const { return scenario_.action_count(); }

  GameState new_episode(std::optional<std::uint64_t> seed = std::nullopt);

  // Runs skip+1 tics with the same buttons (fewer if the episode ends) and
  // returns the summed training reward. Throws Error(EpisodeFinished).
  double make_action(const ButtonSet& buttons, std::optional<int> skip = std::nullopt);
  double make_action(std::span<const bool> buttons, std::optional<int> skip = std::nullopt);

  // Throws Error(EpisodeFinished) once the episode has ended.
  GameState get_state();
  // Current state regardless of the episode status (terminal frame included).
  GameState peek_state();

  bool is_episode_finished() const;
  double get_total_reward() const;
  double get_total_score() const;
  TerminalStatus terminal_status() const;
  std::uint32_t tick() const;
  std::uint64_t episode_seed() const;
  std::uint64_t episodes_started() const { return episodes_started_; }

  // Spectator wiring; throws Error(ModeMismatch) outside spectator modes.
  void record_action_provider(std::shared_ptr<ActionProvider> provider);
  // SYNC_SPECTATOR decision point: pulls buttons from the provider (blocking)
  // and applies them. Throws Error(ModeMismatch) in other modes.
  SpectatorStep advance_spectator(std::optional<int> skip = std::nullopt);

  void set_tic_observer(TicObserver observer);

  RenderOptions render_options() const;
  Frame render_world(const WorldState& world) const;
  // Snapshot copy of the simulation state (safe in ASYNC modes).
  WorldState world_snapshot() const;

 private:
  void validate_config() const;
  void stop_clock();
  void clock_loop();
  double run_tic(std::uint16_t mask, bool living_counted, std::vector<GameEvent>& decision_events);
  GameState build_state_locked();

  EnvConfig config_;
  ScenarioDef scenario_;
  WorldState world_;
  bool episode_live_ = false;
  TerminalStatus status_{true, TerminalCause::None};
  double total_reward_ = 0.0;
  double total_score_ = 0.0;
  double pending_reward_ = 0.0;  // ASYNC: reward since the last make_action return
  std::uint64_t decisions_ = 0;
  std::uint64_t episode_seed_ = 0;
  std::uint64_t episodes_started_ = 0;
  GameState cached_state_;  // storage reused across tics
  bool cache_valid_ = false;
  std::shared_ptr<ActionProvider> provider_;
  TicObserver observer_;

  mutable std::mutex mutex_;
  std::condition_variable tic_cv_;
  std::uint16_t latched_mask_ = 0;
  bool stop_requested_ = false;
  std::thread clock_;
};

}  // namespace raydoom
