#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raydoom/engine.hpp"

namespace raydoom {

enum class Channels : std::uint8_t { RGB, GRAY };
enum class ControlMode : std::uint8_t { SyncPlayer, SyncSpectator, AsyncPlayer, AsyncSpectator };
enum class LivingRewardUnit : std::uint8_t { PerTic, PerDecision };

std::string_view mode_name(ControlMode mode);
inline bool is_async(ControlMode m) { return m == ControlMode::AsyncPlayer || m == ControlMode::AsyncSpectator; }
inline bool is_spectator(ControlMode m) { return m == ControlMode::SyncSpectator || m == ControlMode::AsyncSpectator; }

// Environment configuration (.cfg). Grammar: one `key = value` per line, `#`
// starts a comment, keys and enumerated values are case-insensitive.
//
//   scenario    path to a .scn file (relative to the .cfg when loaded from disk)
//   resolution  WxH, each in [4, 1024]              default 320x240
//   channels    rgb | gray                           default rgb
//   depth       true | false                         default false
//   mode        sync_player | sync_spectator | async_player | async_spectator
//   skipcount   integer in [0, 100]                  default 0
//   seed        unsigned 64-bit integer              default unset
//   fov         horizontal field of view, degrees in (0, 180), default 90
//   living_reward_unit  tic | decision               default tic
struct EnvConfig {
  std::string scenario_path;
  int width = 320;
  int height = 240;
  Channels channels = Channels::RGB;
  bool compute_depth = false;
  ControlMode mode = ControlMode::SyncPlayer;
  int default_skipcount = 0;
  std::optional<std::uint64_t> seed;
  double fov_degrees = 90.0;
  LivingRewardUnit living_reward_unit = LivingRewardUnit::PerTic;

  friend bool operator==(const EnvConfig&, const EnvConfig&) = default;
};

EnvConfig parse_config(std::string_view text);
// Reads and parses a .cfg file; a relative scenario path is resolved against
// the file's directory. Throws Error(ScenarioLoadError) when unreadable.
EnvConfig load_config(const std::filesystem::path& path);

enum class RewardKind : std::uint8_t { Living, Kill, Miss, Death, Medikit, Vial };
inline constexpr std::size_t kRewardKinds = 6;
std::string_view reward_key(RewardKind kind);

struct RewardEntry {
  double value = 0.0;
  bool shaping = false;  // counted in training reward, excluded from the reported score

  friend bool operator==(const RewardEntry&, const RewardEntry&) = default;
};

struct RewardRules {
  std::array<RewardEntry, kRewardKinds> entries{};

  RewardEntry& operator[](RewardKind k) { return entries[static_cast<std::size_t>(k)]; }
  const RewardEntry& operator[](RewardKind k) const { return entries[static_cast<std::size_t>(k)]; }

  friend bool operator==(const RewardRules&, const RewardRules&) = default;
};

enum class SpawnRule : std::uint8_t { Fixed, RandomFreeCell };

struct ScenarioDef {
  std::string name;
  std::vector<std::string> map_rows;  // ASCII source, one string per row
  GridMap map;
  SpawnRule player_spawn = SpawnRule::Fixed;
  Vec2 player_pos;                       // Fixed spawn: centre of the `P` cell
  double player_angle_degrees = 0.0;
  int player_health = 100;
  int ammo = 0;
  std::vector<Vec2> monster_zone;        // centres of `M` cells
  int monsters = 0;
  double monster_radius = 0.4;
  int items_initial = 0;
  std::vector<Button> buttons;
  std::vector<std::string> variables;    // HEALTH, AMMO, TICK
  int timeout = 0;                       // tics
  bool kill_terminal = false;
  bool uses_acid = false;
  RewardRules rewards;
  WorldRules world;

  std::size_t action_count() const { return std::size_t{1} << buttons.size(); }

  friend bool operator==(const ScenarioDef&, const ScenarioDef&) = default;
};

// Scenario (.scn) text: a `[map]` section of ASCII rows and a `[rules]`
// section of `key = value` entries (see README for the full key list).
ScenarioDef parse_scenario(std::string_view text);
std::string serialize_scenario(const ScenarioDef& def);
ScenarioDef load_scenario(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

struct RewardDelta {
  double training = 0.0;
  double reported = 0.0;

  friend bool operator==(const RewardDelta&, const RewardDelta&) = default;
};

// living * elapsed_tics + every event's reward; shaping entries only reach
// the training side. elapsed_tics must be >= 1.
RewardDelta score_events(std::span<const GameEvent> events, int elapsed_tics, const RewardRules& rules);
// Same accounting with elapsed_tics >= 0 (used for per-decision living reward).
RewardDelta score_events_unchecked(std::span<const GameEvent> events, int elapsed_tics, const RewardRules& rules);

enum class TerminalCause : std::uint8_t { None, MonsterKilled, Timeout, PlayerDied };
std::string_view cause_name(TerminalCause cause);

struct TerminalStatus {
  bool done = false;
  TerminalCause cause = TerminalCause::None;

  friend bool operator==(const TerminalStatus&, const TerminalStatus&) = default;
};

// Priority: PlayerDied > MonsterKilled > Timeout.
TerminalStatus check_terminal(const WorldState& world, std::span<const GameEvent> events, const ScenarioDef& def);

// Fresh world for an episode. RNG draw order: player spawn (cell, angle) if
// random, each monster's zone cell, then each initial item (cell, kind).
WorldState make_world(const ScenarioDef& def, std::uint64_t seed);

// Bundled scenario texts.
std::string_view bundled_basic_scenario();
std::string_view bundled_health_gathering_scenario();

}  // namespace raydoom
