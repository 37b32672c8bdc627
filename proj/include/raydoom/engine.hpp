#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "raydoom/rng.hpp"

namespace raydoom {

inline constexpr int kTicRate = 35;
inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class CellKind : std::uint8_t { Floor, Acid, Wall };

struct Cell {
  CellKind kind = CellKind::Floor;
  std::uint8_t texture = 0;  // walls only

  friend bool operator==(const Cell&, const Cell&) = default;
};

// Square-cell map, 1.0 world unit per cell. x grows with the column index and
// y with the row index; cell (cx, cy) covers [cx, cx+1) x [cy, cy+1).
class GridMap {
 public:
  GridMap() = default;
  // Throws Error(InvalidArgument) when smaller than 3x3 or not bordered by walls.
  GridMap(int width, int height, std::vector<Cell> cells);

  int width() const { return width_; }
  int height() const { return height_; }

  const Cell& at(int cx, int cy) const { return cells_[static_cast<std::size_t>(cy) * width_ + cx]; }
  bool is_wall(int cx, int cy) const {
    if (cx < 0 || cy < 0 || cx >= width_ || cy >= height_) return true;
    return at(cx, cy).kind == CellKind::Wall;
  }
  bool is_acid(int cx, int cy) const { return !is_wall(cx, cy) && at(cx, cy).kind == CellKind::Acid; }
  std::span<const Cell> cells() const { return cells_; }

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Cell> cells_;
};

bool circle_overlaps_wall(const GridMap& map, Vec2 center, double radius);

enum class WallSide : std::uint8_t { North, South, East, West };

struct WallTrace {
  double distance = 0.0;  // euclidean, along the unit ray
  int cell_x = 0;
  int cell_y = 0;
  WallSide side = WallSide::North;
  double wall_x = 0.0;  // hit position along the wall face, [0, 1)
};

// Integer-grid DDA from `origin` (inside a non-wall cell) along `angle`.
WallTrace trace_wall(const GridMap& map, Vec2 origin, double angle);

enum class Button : std::uint8_t {
  MoveLeft,
  MoveRight,
  Attack,
  MoveForward,
  MoveBackward,
  TurnLeft,
  TurnRight,
};
inline constexpr int kButtonKinds = 7;

std::string_view button_name(Button button);
std::optional<Button> parse_button(std::string_view name);

// Engine-level intent: bit (1 << Button) set for every held button.
using Intent = std::uint16_t;
constexpr Intent intent_bit(Button b) { return static_cast<Intent>(1u << static_cast<unsigned>(b)); }

// Boolean vector over a scenario's declared buttons. Bit i of mask() is the
// i-th declared button; the action index reads the vector as a big-endian
// binary number, so the first button is the most significant bit.
class ButtonSet {
 public:
  ButtonSet() = default;
  ButtonSet(std::size_t count, std::uint16_t mask);

  static ButtonSet from_action(std::size_t count, int action_index);
  static ButtonSet from_bools(std::span<const bool> pressed);

  std::size_t size() const { return count_; }
  std::uint16_t mask() const { return mask_; }
  bool operator[](std::size_t i) const { return (mask_ >> i) & 1u; }
  int action_index() const;
  Intent intent(std::span<const Button> declared) const;

  friend bool operator==(const ButtonSet&, const ButtonSet&) = default;

 private:
  std::size_t count_ = 0;
  std::uint16_t mask_ = 0;
};

enum class ActorKind : std::uint8_t { Player, Monster };

struct Actor {
  ActorKind kind = ActorKind::Player;
  Vec2 pos;
  double angle = 0.0;  // radians; facing (cos, sin)
  double radius = 0.3;
  int health = 100;
  int ammo = 0;
  bool alive = true;
  int attack_cooldown = 0;

  friend bool operator==(const Actor&, const Actor&) = default;
};

enum class ItemKind : std::uint8_t { Medikit, PoisonVial };

struct Item {
  ItemKind kind = ItemKind::Medikit;
  Vec2 pos;
  double radius = 0.2;
  bool active = true;

  friend bool operator==(const Item&, const Item&) = default;
};

enum class EventTag : std::uint8_t {
  MonsterKilled,
  ShotFired,
  ShotMissed,
  MedikitTaken,
  VialTaken,
  PlayerDied,
  PlayerDamaged,
};
std::string_view event_name(EventTag tag);

struct GameEvent {
  EventTag tag = EventTag::ShotFired;
  std::uint32_t tick = 0;
  int amount = 0;  // PlayerDamaged only

  friend bool operator==(const GameEvent&, const GameEvent&) = default;
};

// Per-world mechanics constants. Defaults are the bundled-scenario values.
struct WorldRules {
  double move_speed = 0.10;                 // units per tic, forward and strafe
  double turn_speed_degrees = 3.0;          // per tic
  int attack_cooldown = 8;
  int max_health = 100;
  int acid_damage = 6;
  int acid_period = 17;
  int acid_first = 12;
  int medikit_heal = 25;
  int vial_damage = 30;
  int item_period = 0;  // 0 disables periodic spawning
  int item_cap = 0;
  double medikit_probability = 0.5;
  double item_radius = 0.2;

  friend bool operator==(const WorldRules&, const WorldRules&) = default;
};

struct WorldState {
  GridMap map;
  WorldRules rules;
  Actor player;
  std::vector<Actor> monsters;
  std::vector<Item> items;
  std::uint32_t tick = 0;
  SplitMix64 rng;
  std::vector<GameEvent> pending_events;  // events of the most recent tic
};

// Advances the world by exactly one tic and returns the events it produced
// (also stored in world.pending_events). Precondition: player alive.
std::vector<GameEvent> tic(WorldState& world, Intent intent);

// Axis-separated wall sliding: dx is applied first, then dy; an axis move is
// dropped when the resulting circle would overlap a wall cell or one of the
// live `blockers`.
Actor move_actor(const GridMap& map, const Actor& actor, Vec2 displacement,
                 std::span<const Actor> blockers = {});

struct HitResult {
  enum class Kind : std::uint8_t { Wall, Monster };
  Kind kind = Kind::Wall;
  std::size_t monster = 0;  // index into WorldState::monsters
  double distance = 0.0;
};

HitResult hitscan(const WorldState& world, Vec2 origin, double angle);

// Distance along the unit ray from `origin` to the first intersection with
// the circle, if any (0 when the origin lies inside it).
std::optional<double> ray_circle_distance(Vec2 origin, double angle, Vec2 center, double radius);

// Places a new item at a uniformly drawn free floor cell. Draw order: cell,
// then kind. Returns false when no free cell exists.
bool spawn_item(WorldState& world);

std::size_t active_item_count(const WorldState& world);

// Stable digest of every simulation field, for determinism checks.
std::uint64_t world_hash(const WorldState& world);

}  // namespace raydoom
