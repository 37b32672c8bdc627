#include "raydoom/engine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "raydoom/error.hpp"
#include "raydoom/hash.hpp"

namespace raydoom {

GridMap::GridMap(int width, int height, std::vector<Cell> cells)
    : width_(width), height_(height), cells_(std::move(cells)) {
  if (width < 3 || height < 3) throw Error(ErrorKind::InvalidArgument, "map must be at least 3x3");
  if (cells_.size() != static_cast<std::size_t>(width) * height)
    throw Error(ErrorKind::InvalidArgument, "cell count does not match map size");
  for (int x = 0; x < width; ++x)
    if (at(x, 0).kind != CellKind::Wall || at(x, height - 1).kind != CellKind::Wall)
      throw Error(ErrorKind::InvalidArgument, "map border must be walls");
  for (int y = 0; y < height; ++y)
    if (at(0, y).kind != CellKind::Wall || at(width - 1, y).kind != CellKind::Wall)
      throw Error(ErrorKind::InvalidArgument, "map border must be walls");
}

bool circle_overlaps_wall(const GridMap& map, Vec2 center, double radius) {
  const int x0 = static_cast<int>(std::floor(center.x - radius));
  const int x1 = static_cast<int>(std::floor(center.x + radius));
  const int y0 = static_cast<int>(std::floor(center.y - radius));
  const int y1 = static_cast<int>(std::floor(center.y + radius));
  const double r2 = radius * radius;
  for (int cy = y0; cy <= y1; ++cy) {
    for (int cx = x0; cx <= x1; ++cx) {
      if (!map.is_wall(cx, cy)) continue;
      const double nx = std::clamp(center.x, static_cast<double>(cx), static_cast<double>(cx + 1));
      const double ny = std::clamp(center.y, static_cast<double>(cy), static_cast<double>(cy + 1));
      const double ddx = center.x - nx;
      const double ddy = center.y - ny;
      if (ddx * ddx + ddy * ddy < r2) return true;
    }
  }
  return false;
}

WallTrace trace_wall(const GridMap& map, Vec2 origin, double angle) {
  constexpr double kFar = 1e30;
  const double dir_x = std::cos(angle);
  const double dir_y = std::sin(angle);
  int cx = static_cast<int>(std::floor(origin.x));
  int cy = static_cast<int>(std::floor(origin.y));

  const double delta_x = dir_x == 0.0 ? kFar : std::abs(1.0 / dir_x);
  const double delta_y = dir_y == 0.0 ? kFar : std::abs(1.0 / dir_y);
  int step_x = 0;
  int step_y = 0;
  double side_x = kFar;
  double side_y = kFar;
  if (dir_x < 0.0) {
    step_x = -1;
    side_x = (origin.x - cx) * delta_x;
  } else if (dir_x > 0.0) {
    step_x = 1;
    side_x = (cx + 1.0 - origin.x) * delta_x;
  }
  if (dir_y < 0.0) {
    step_y = -1;
    side_y = (origin.y - cy) * delta_y;
  } else if (dir_y > 0.0) {
    step_y = 1;
    side_y = (cy + 1.0 - origin.y) * delta_y;
  }

  WallTrace out;
  for (;;) {
    bool crossed_x;
    if (side_x < side_y) {
      out.distance = side_x;
      side_x += delta_x;
      cx += step_x;
      crossed_x = true;
    } else {
      out.distance = side_y;
      side_y += delta_y;
      cy += step_y;
      crossed_x = false;
    }
    if (!map.is_wall(cx, cy)) continue;
    out.cell_x = cx;
    out.cell_y = cy;
    if (crossed_x) {
      out.side = step_x > 0 ? WallSide::West : WallSide::East;
      const double hit = origin.y + out.distance * dir_y;
      out.wall_x = hit - std::floor(hit);
    } else {
      out.side = step_y > 0 ? WallSide::North : WallSide::South;
      const double hit = origin.x + out.distance * dir_x;
      out.wall_x = hit - std::floor(hit);
    }
    return out;
  }
}

namespace {

constexpr std::array<std::string_view, kButtonKinds> kButtonNames = {
    "MOVE_LEFT", "MOVE_RIGHT", "ATTACK", "MOVE_FORWARD", "MOVE_BACKWARD", "TURN_LEFT", "TURN_RIGHT",
};

double wrap_angle(double a) {
  constexpr double kTwoPi = 2.0 * kPi;
  while (a < 0.0) a += kTwoPi;
  while (a >= kTwoPi) a -= kTwoPi;
  return a;
}

bool overlaps_actor(const Actor& self, Vec2 pos, std::span<const Actor> others) {
  for (const Actor& other : others) {
    if (!other.alive || &other == &self) continue;
    const double dx = pos.x - other.pos.x;
    const double dy = pos.y - other.pos.y;
    const double r = self.radius + other.radius;
    if (dx * dx + dy * dy < r * r) return true;
  }
  return false;
}

int player_cell_index(const WorldState& w) {
  return static_cast<int>(std::floor(w.player.pos.y)) * w.map.width() +
         static_cast<int>(std::floor(w.player.pos.x));
}

void damage_player(WorldState& w, int amount, std::vector<GameEvent>& events) {
  w.player.health = std::max(0, w.player.health - amount);
  events.push_back({EventTag::PlayerDamaged, w.tick, amount});
}

}  // namespace

std::string_view button_name(Button button) { return kButtonNames[static_cast<std::size_t>(button)]; }

std::optional<Button> parse_button(std::string_view name) {
  for (std::size_t i = 0; i < kButtonNames.size(); ++i)
    if (kButtonNames[i] == name) return static_cast<Button>(i);
  if (name == "FORWARD") return Button::MoveForward;
  if (name == "BACKWARD") return Button::MoveBackward;
  return std::nullopt;
}

std::string_view event_name(EventTag tag) {
  switch (tag) {
    case EventTag::MonsterKilled: return "MONSTER_KILLED";
    case EventTag::ShotFired: return "SHOT_FIRED";
    case EventTag::ShotMissed: return "SHOT_MISSED";
    case EventTag::MedikitTaken: return "MEDIKIT_TAKEN";
    case EventTag::VialTaken: return "VIAL_TAKEN";
    case EventTag::PlayerDied: return "PLAYER_DIED";
    case EventTag::PlayerDamaged: return "PLAYER_DAMAGED";
  }
  return "?";
}

ButtonSet::ButtonSet(std::size_t count, std::uint16_t mask) : count_(count), mask_(mask) {
  if (count > 16) throw Error(ErrorKind::InvalidArgument, "at most 16 buttons");
  if (count < 16 && (mask >> count) != 0) throw Error(ErrorKind::InvalidArgument, "mask uses undeclared buttons");
}

ButtonSet ButtonSet::from_action(std::size_t count, int action_index) {
  if (action_index < 0 || action_index >= (1 << count))
    throw Error(ErrorKind::InvalidArgument, "action index out of range");
  std::uint16_t mask = 0;
  for (std::size_t i = 0; i < count; ++i)
    if ((action_index >> (count - 1 - i)) & 1) mask |= static_cast<std::uint16_t>(1u << i);
  return ButtonSet(count, mask);
}

ButtonSet ButtonSet::from_bools(std::span<const bool> pressed) {
  std::uint16_t mask = 0;
  for (std::size_t i = 0; i < pressed.size(); ++i)
    if (pressed[i]) mask |= static_cast<std::uint16_t>(1u << i);
  return ButtonSet(pressed.size(), mask);
}

int ButtonSet::action_index() const {
  int index = 0;
  for (std::size_t i = 0; i < count_; ++i) index = (index << 1) | ((mask_ >> i) & 1);
  return index;
}

Intent ButtonSet::intent(std::span<const Button> declared) const {
  Intent out = 0;
  for (std::size_t i = 0; i < count_ && i < declared.size(); ++i)
    if ((*this)[i]) out |= intent_bit(declared[i]);
  return out;
}

Actor move_actor(const GridMap& map, const Actor& actor, Vec2 displacement, std::span<const Actor> blockers) {
  Actor out = actor;
  if (displacement.x != 0.0) {
    const Vec2 next{out.pos.x + displacement.x, out.pos.y};
    if (!circle_overlaps_wall(map, next, out.radius) && !overlaps_actor(actor, next, blockers)) out.pos = next;
  }
  if (displacement.y != 0.0) {
    const Vec2 next{out.pos.x, out.pos.y + displacement.y};
    if (!circle_overlaps_wall(map, next, out.radius) && !overlaps_actor(actor, next, blockers)) out.pos = next;
  }
  return out;
}

std::optional<double> ray_circle_distance(Vec2 origin, double angle, Vec2 center, double radius) {
  const double dx = std::cos(angle);
  const double dy = std::sin(angle);
  const double mx = center.x - origin.x;
  const double my = center.y - origin.y;
  const double c = mx * mx + my * my - radius * radius;
  if (c <= 0.0) return 0.0;
  const double b = mx * dx + my * dy;
  if (b <= 0.0) return std::nullopt;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  return b - std::sqrt(disc);
}

HitResult hitscan(const WorldState& world, Vec2 origin, double angle) {
  HitResult out;
  out.distance = trace_wall(world.map, origin, angle).distance;
  for (std::size_t i = 0; i < world.monsters.size(); ++i) {
    const Actor& m = world.monsters[i];
    if (!m.alive) continue;
    const auto d = ray_circle_distance(origin, angle, m.pos, m.radius);
    if (d && *d < out.distance) {
      out.kind = HitResult::Kind::Monster;
      out.monster = i;
      out.distance = *d;
    }
  }
  return out;
}

std::size_t active_item_count(const WorldState& world) {
  return static_cast<std::size_t>(
      std::count_if(world.items.begin(), world.items.end(), [](const Item& i) { return i.active; }));
}

bool spawn_item(WorldState& world) {
  const GridMap& map = world.map;
  std::vector<char> taken(static_cast<std::size_t>(map.width()) * map.height(), 0);
  for (const Item& item : world.items) {
    if (!item.active) continue;
    taken[static_cast<std::size_t>(std::floor(item.pos.y)) * map.width() +
          static_cast<std::size_t>(std::floor(item.pos.x))] = 1;
  }
  taken[static_cast<std::size_t>(player_cell_index(world))] = 1;
  std::vector<int> free_cells;
  for (int cy = 0; cy < map.height(); ++cy)
    for (int cx = 0; cx < map.width(); ++cx)
      if (!map.is_wall(cx, cy) && !taken[static_cast<std::size_t>(cy) * map.width() + cx])
        free_cells.push_back(cy * map.width() + cx);
  if (free_cells.empty()) return false;
  const int cell = free_cells[world.rng.below(free_cells.size())];
  Item item;
  item.kind = world.rng.uniform() < world.rules.medikit_probability ? ItemKind::Medikit : ItemKind::PoisonVial;
  item.pos = {cell % map.width() + 0.5, cell / map.width() + 0.5};
  item.radius = world.rules.item_radius;
  world.items.push_back(item);
  return true;
}

std::vector<GameEvent> tic(WorldState& world, Intent intent) {
  std::vector<GameEvent> events;
  const WorldRules& rules = world.rules;
  Actor& player = world.player;
  ++world.tick;
  const auto held = [intent](Button b) { return (intent & intent_bit(b)) != 0; };

  if (player.attack_cooldown > 0) --player.attack_cooldown;

  const double turn = rules.turn_speed_degrees * (kPi / 180.0);
  if (held(Button::TurnLeft)) player.angle = wrap_angle(player.angle - turn);
  if (held(Button::TurnRight)) player.angle = wrap_angle(player.angle + turn);

  const int forward = (held(Button::MoveForward) ? 1 : 0) - (held(Button::MoveBackward) ? 1 : 0);
  const int strafe = (held(Button::MoveRight) ? 1 : 0) - (held(Button::MoveLeft) ? 1 : 0);
  if (forward != 0 || strafe != 0) {
    const double c = std::cos(player.angle);
    const double s = std::sin(player.angle);
    const double f = forward * rules.move_speed;
    const double r = strafe * rules.move_speed;
    player = move_actor(world.map, player, {f * c - r * s, f * s + r * c}, world.monsters);
  }

  if (held(Button::Attack) && player.attack_cooldown == 0 && player.ammo > 0) {
    --player.ammo;
    player.attack_cooldown = rules.attack_cooldown;
    events.push_back({EventTag::ShotFired, world.tick, 0});
    const HitResult hit = hitscan(world, player.pos, player.angle);
    if (hit.kind == HitResult::Kind::Monster) {
      Actor& monster = world.monsters[hit.monster];
      monster.health = 0;
      monster.alive = false;
      events.push_back({EventTag::MonsterKilled, world.tick, 0});
    } else {
      events.push_back({EventTag::ShotMissed, world.tick, 0});
    }
  }

  const int pcx = static_cast<int>(std::floor(player.pos.x));
  const int pcy = static_cast<int>(std::floor(player.pos.y));
  if (rules.acid_period > 0 && world.map.is_acid(pcx, pcy) && world.tick >= static_cast<std::uint32_t>(rules.acid_first) &&
      (world.tick - static_cast<std::uint32_t>(rules.acid_first)) % static_cast<std::uint32_t>(rules.acid_period) == 0)
    damage_player(world, rules.acid_damage, events);

  for (Item& item : world.items) {
    if (!item.active) continue;
    const double dx = item.pos.x - player.pos.x;
    const double dy = item.pos.y - player.pos.y;
    const double reach = item.radius + player.radius;
    if (dx * dx + dy * dy >= reach * reach) continue;
    item.active = false;
    if (item.kind == ItemKind::Medikit) {
      player.health = std::min(rules.max_health, player.health + rules.medikit_heal);
      events.push_back({EventTag::MedikitTaken, world.tick, 0});
    } else {
      events.push_back({EventTag::VialTaken, world.tick, 0});
      damage_player(world, rules.vial_damage, events);
    }
  }

  if (rules.item_period > 0 && world.tick % static_cast<std::uint32_t>(rules.item_period) == 0 &&
      active_item_count(world) < static_cast<std::size_t>(rules.item_cap))
    spawn_item(world);

  if (player.health <= 0 && player.alive) {
    player.health = 0;
    player.alive = false;
    events.push_back({EventTag::PlayerDied, world.tick, 0});
  }

  world.pending_events = events;
  return events;
}

std::uint64_t world_hash(const WorldState& world) {
  Fnv1a h;
  h.pod(world.map.width()).pod(world.map.height());
  for (const Cell& c : world.map.cells()) h.pod(c.kind).pod(c.texture);
  const auto actor = [&h](const Actor& a) {
    h.pod(a.kind).pod(a.pos.x).pod(a.pos.y).pod(a.angle).pod(a.radius).pod(a.health).pod(a.ammo).pod(a.alive).pod(
        a.attack_cooldown);
  };
  actor(world.player);
  h.pod(world.monsters.size());
  for (const Actor& m : world.monsters) actor(m);
  h.pod(world.items.size());
  for (const Item& i : world.items) h.pod(i.kind).pod(i.pos.x).pod(i.pos.y).pod(i.radius).pod(i.active);
  h.pod(world.tick).pod(world.rng.state());
  return h.value();
}

}  // namespace raydoom
