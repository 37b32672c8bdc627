#pragma once

#include <string>
#include <vector>

#include "raydoom/error.hpp"
#include "raydoom/scenario.hpp"

namespace corpus {

struct Malformed {
  std::string file;  // under tests/fixtures/scenarios, without .scn
  raydoom::ErrorKind kind;
  int line;  // 0: whole-file problem
};

inline const std::vector<Malformed>& malformed() {
  using raydoom::ErrorKind;
  static const std::vector<Malformed> table = {
      {"missing_map", ErrorKind::SyntaxError, 0},
      {"missing_rules", ErrorKind::SyntaxError, 0},
      {"ragged_rows", ErrorKind::NonRectangularMap, 4},
      {"open_border", ErrorKind::UnenclosedMap, 5},
      {"no_spawn", ErrorKind::NoPlayerSpawn, 1},
      {"two_spawns", ErrorKind::SyntaxError, 1},
      {"bad_map_char", ErrorKind::SyntaxError, 4},
      {"unknown_key", ErrorKind::UnknownKey, 13},
      {"timeout_not_number", ErrorKind::SyntaxError, 11},
      {"timeout_zero", ErrorKind::ValueOutOfRange, 11},
      {"no_buttons", ErrorKind::ValueOutOfRange, 0},
      {"unknown_button", ErrorKind::ValueOutOfRange, 10},
      {"nine_buttons", ErrorKind::ValueOutOfRange, 10},
      {"unknown_variable", ErrorKind::ValueOutOfRange, 13},
      {"bad_boolean", ErrorKind::SyntaxError, 13},
      {"angle_out_of_range", ErrorKind::ValueOutOfRange, 13},
      {"unknown_shaping_key", ErrorKind::UnknownKey, 14},
      {"duplicate_map", ErrorKind::SyntaxError, 13},
      {"missing_equals", ErrorKind::SyntaxError, 13},
      {"monsters_without_zone", ErrorKind::ValueOutOfRange, 0},
  };
  return table;
}

// Grid built straight from the ASCII rows: '#' plain wall, digits textured
// walls, '~' acid, everything else floor.
inline raydoom::GridMap grid_from_rows(const std::vector<std::string>& rows) {
  using namespace raydoom;
  std::vector<Cell> cells;
  for (const std::string& r : rows)
    for (char ch : r) {
      if (ch == '#') cells.push_back({CellKind::Wall, 0});
      else if (ch >= '1' && ch <= '7') cells.push_back({CellKind::Wall, static_cast<std::uint8_t>(ch - '0')});
      else if (ch == '~') cells.push_back({CellKind::Acid, 0});
      else cells.push_back({CellKind::Floor, 0});
    }
  return GridMap(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()), std::move(cells));
}

inline raydoom::ScenarioDef expected_basic() {
  using namespace raydoom;
  ScenarioDef d;
  d.name = "basic";
  d.map_rows = {
      "###########", "#MMMMMMMMM#", "#.........#", "#.........#", "#.........#", "#....P....#", "###########",
  };
  d.map = grid_from_rows(d.map_rows);
  d.player_spawn = SpawnRule::Fixed;
  d.player_pos = {5.5, 5.5};
  d.player_angle_degrees = 270.0;
  d.player_health = 100;
  d.ammo = 50;
  for (int x = 1; x <= 9; ++x) d.monster_zone.push_back({x + 0.5, 1.5});
  d.monsters = 1;
  d.monster_radius = 0.4;
  d.buttons = {Button::MoveLeft, Button::MoveRight, Button::Attack};
  d.variables = {"AMMO"};
  d.timeout = 300;
  d.kill_terminal = true;
  d.uses_acid = false;
  d.rewards[RewardKind::Living] = {-1.0, false};
  d.rewards[RewardKind::Kill] = {101.0, false};
  d.rewards[RewardKind::Miss] = {-5.0, false};
  return d;
}

inline raydoom::ScenarioDef expected_health_gathering() {
  using namespace raydoom;
  ScenarioDef d;
  d.name = "health_gathering";
  d.map_rows = {
      "###############", "#~~~~~~~~~~~~~#", "#~~~~~~~~~~~~~#", "#~~###~~~###~~#", "#~~~~#~~~#~~~~#",
      "#~~~~#~~~#~~~~#", "#~~~~~~~~~~~~~#", "#~~~~~~2~~~~~~#", "#~~~~~~~~~~~~~#", "#~~~~#~~~#~~~~#",
      "#~~~~#~~~#~~~~#", "#~~###~~~###~~#", "#~~~~~~~~~~~~~#", "#~~~~~~~~~~~~~#", "###############",
  };
  d.map = grid_from_rows(d.map_rows);
  d.player_spawn = SpawnRule::RandomFreeCell;
  d.player_health = 100;
  d.items_initial = 20;
  d.buttons = {Button::MoveForward, Button::MoveBackward, Button::TurnLeft, Button::TurnRight};
  d.variables = {"HEALTH", "TICK"};
  d.timeout = 2100;
  d.kill_terminal = false;
  d.uses_acid = true;
  d.rewards[RewardKind::Living] = {1.0, false};
  d.rewards[RewardKind::Death] = {-100.0, true};
  d.rewards[RewardKind::Medikit] = {100.0, true};
  d.rewards[RewardKind::Vial] = {-100.0, true};
  d.world.item_period = 35;
  d.world.item_cap = 40;
  d.world.medikit_probability = 0.5;
  d.world.acid_damage = 6;
  d.world.acid_period = 17;
  d.world.acid_first = 12;
  d.world.medikit_heal = 25;
  d.world.vial_damage = 30;
  return d;
}

}  // namespace corpus
