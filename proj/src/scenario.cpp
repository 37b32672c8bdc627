#include "raydoom/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "raydoom/error.hpp"

namespace raydoom {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::toupper(c); });
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::string_view strip_comment(std::string_view line) {
  const auto pos = line.find('#');
  return pos == std::string_view::npos ? line : line.substr(0, pos);
}

struct KeyValue {
  std::string key;  // lower-cased
  std::string_view value;
};

KeyValue split_key_value(std::string_view line, int line_no) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw Error(ErrorKind::SyntaxError, "expected `key = value`", line_no);
  const std::string_view key = trim(line.substr(0, eq));
  if (key.empty()) throw Error(ErrorKind::SyntaxError, "empty key", line_no);
  return {lower(key), trim(line.substr(eq + 1))};
}

template <typename T>
T parse_number(std::string_view s, int line_no) {
  T value{};
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw Error(ErrorKind::SyntaxError, "not a number: '" + std::string(s) + "'", line_no);
  return value;
}

bool parse_bool(std::string_view s, int line_no) {
  const std::string v = lower(s);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error(ErrorKind::SyntaxError, "not a boolean: '" + std::string(s) + "'", line_no);
}

void require_range(bool ok, const std::string& key, int line_no) {
  if (!ok) throw Error(ErrorKind::ValueOutOfRange, key, line_no);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find(',', start);
    if (end == std::string_view::npos) end = s.size();
    const std::string_view item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(item);
    start = end + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

constexpr std::array<std::string_view, kRewardKinds> kRewardKeys = {
    "living_reward", "kill_reward", "miss_penalty", "death_penalty", "medikit_reward", "vial_reward",
};

constexpr double kDegToRad = kPi / 180.0;

}  // namespace

std::string_view mode_name(ControlMode mode) {
  switch (mode) {
    case ControlMode::SyncPlayer: return "sync_player";
    case ControlMode::SyncSpectator: return "sync_spectator";
    case ControlMode::AsyncPlayer: return "async_player";
    case ControlMode::AsyncSpectator: return "async_spectator";
  }
  return "?";
}

std::string_view reward_key(RewardKind kind) { return kRewardKeys[static_cast<std::size_t>(kind)]; }

std::string_view cause_name(TerminalCause cause) {
  switch (cause) {
    case TerminalCause::None: return "NONE";
    case TerminalCause::MonsterKilled: return "MONSTER_KILLED";
    case TerminalCause::Timeout: return "TIMEOUT";
    case TerminalCause::PlayerDied: return "PLAYER_DIED";
  }
  return "?";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::ScenarioLoadError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

EnvConfig parse_config(std::string_view text) {
  EnvConfig cfg;
  int line_no = 0;
  for (std::string_view raw : split_lines(text)) {
    ++line_no;
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const auto [key, value] = split_key_value(line, line_no);
    if (key == "scenario") {
      cfg.scenario_path = std::string(value);
    } else if (key == "resolution") {
      const std::string v = lower(value);
      const auto x = v.find('x');
      if (x == std::string::npos) throw Error(ErrorKind::SyntaxError, "resolution must be WxH", line_no);
      const int w = parse_number<int>(std::string_view(v).substr(0, x), line_no);
      const int h = parse_number<int>(std::string_view(v).substr(x + 1), line_no);
      require_range(w >= 4 && w <= 1024 && h >= 4 && h <= 1024, key, line_no);
      cfg.width = w;
      cfg.height = h;
    } else if (key == "channels") {
      const std::string v = lower(value);
      if (v == "rgb") cfg.channels = Channels::RGB;
      else if (v == "gray" || v == "grey") cfg.channels = Channels::GRAY;
      else throw Error(ErrorKind::ValueOutOfRange, key, line_no);
    } else if (key == "depth") {
      cfg.compute_depth = parse_bool(value, line_no);
    } else if (key == "mode") {
      const std::string v = lower(value);
      if (v == "sync_player") cfg.mode = ControlMode::SyncPlayer;
      else if (v == "sync_spectator") cfg.mode = ControlMode::SyncSpectator;
      else if (v == "async_player") cfg.mode = ControlMode::AsyncPlayer;
      else if (v == "async_spectator") cfg.mode = ControlMode::AsyncSpectator;
      else throw Error(ErrorKind::ValueOutOfRange, key, line_no);
    } else if (key == "skipcount") {
      const long long n = parse_number<long long>(value, line_no);
      require_range(n >= 0 && n <= 100, key, line_no);
      cfg.default_skipcount = static_cast<int>(n);
    } else if (key == "seed") {
      if (!value.empty() && value.front() == '-') throw Error(ErrorKind::ValueOutOfRange, key, line_no);
      cfg.seed = parse_number<std::uint64_t>(value, line_no);
    } else if (key == "fov") {
      const double fov = parse_number<double>(value, line_no);
      require_range(fov > 0.0 && fov < 180.0, key, line_no);
      cfg.fov_degrees = fov;
    } else if (key == "living_reward_unit") {
      const std::string v = lower(value);
      if (v == "tic") cfg.living_reward_unit = LivingRewardUnit::PerTic;
      else if (v == "decision") cfg.living_reward_unit = LivingRewardUnit::PerDecision;
      else throw Error(ErrorKind::ValueOutOfRange, key, line_no);
    } else {
      throw Error(ErrorKind::UnknownKey, key, line_no);
    }
  }
  return cfg;
}

EnvConfig load_config(const std::filesystem::path& path) {
  EnvConfig cfg = parse_config(read_text_file(path));
  if (!cfg.scenario_path.empty()) {
    std::filesystem::path scn(cfg.scenario_path);
    if (scn.is_relative()) scn = path.parent_path() / scn;
    cfg.scenario_path = scn.lexically_normal().string();
  }
  return cfg;
}

namespace {

void build_map(ScenarioDef& def, int map_line, const std::vector<int>& row_lines) {
  const auto& rows = def.map_rows;
  if (rows.empty()) throw Error(ErrorKind::SyntaxError, "empty [map] section", map_line);
  const std::size_t width = rows.front().size();
  for (std::size_t y = 0; y < rows.size(); ++y)
    if (rows[y].size() != width) throw Error(ErrorKind::NonRectangularMap, "map rows differ in length", row_lines[y]);
  if (width < 3 || rows.size() < 3) throw Error(ErrorKind::SyntaxError, "map must be at least 3x3", map_line);

  std::vector<Cell> cells;
  cells.reserve(width * rows.size());
  int spawns = 0;
  def.monster_zone.clear();
  def.uses_acid = false;
  for (std::size_t y = 0; y < rows.size(); ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const char ch = rows[y][x];
      Cell cell;
      if (ch == '#') {
        cell = {CellKind::Wall, 0};
      } else if (ch >= '1' && ch <= '7') {
        cell = {CellKind::Wall, static_cast<std::uint8_t>(ch - '0')};
      } else if (ch == '.') {
        cell = {CellKind::Floor, 0};
      } else if (ch == '~') {
        cell = {CellKind::Acid, 0};
        def.uses_acid = true;
      } else if (ch == 'P') {
        cell = {CellKind::Floor, 0};
        def.player_pos = {x + 0.5, y + 0.5};
        ++spawns;
      } else if (ch == 'M') {
        cell = {CellKind::Floor, 0};
        def.monster_zone.push_back({x + 0.5, y + 0.5});
      } else {
        throw Error(ErrorKind::SyntaxError, std::string("unknown map character '") + ch + "'", row_lines[y]);
      }
      cells.push_back(cell);
    }
  }
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const bool border = x == 0 || y == 0 || x + 1 == width || y + 1 == rows.size();
      if (border && cells[y * width + x].kind != CellKind::Wall)
        throw Error(ErrorKind::UnenclosedMap, "map border must be walls", row_lines[y]);
    }
  if (spawns > 1) throw Error(ErrorKind::SyntaxError, "more than one player spawn", map_line);
  if (spawns == 0 && def.player_spawn == SpawnRule::Fixed)
    throw Error(ErrorKind::NoPlayerSpawn, "fixed player spawn needs a `P` cell", map_line);
  def.map = GridMap(static_cast<int>(width), static_cast<int>(rows.size()), std::move(cells));
}

void apply_rule(ScenarioDef& def, const std::string& key, std::string_view value, int line_no) {
  const auto integer = [&](int lo, int hi) {
    const long long n = parse_number<long long>(value, line_no);
    require_range(n >= lo && n <= hi, key, line_no);
    return static_cast<int>(n);
  };
  const auto real = [&]() { return parse_number<double>(value, line_no); };

  for (std::size_t i = 0; i < kRewardKinds; ++i) {
    if (key == kRewardKeys[i]) {
      def.rewards.entries[i].value = real();
      return;
    }
  }
  if (key == "name") {
    def.name = std::string(value);
  } else if (key == "buttons") {
    def.buttons.clear();
    for (std::string_view item : split_list(value)) {
      const auto b = parse_button(upper(item));
      if (!b) throw Error(ErrorKind::ValueOutOfRange, key + ": unknown button " + std::string(item), line_no);
      def.buttons.push_back(*b);
    }
    require_range(!def.buttons.empty() && def.buttons.size() <= 8, key, line_no);
  } else if (key == "variables") {
    def.variables.clear();
    for (std::string_view item : split_list(value)) {
      const std::string v = upper(item);
      if (v != "HEALTH" && v != "AMMO" && v != "TICK")
        throw Error(ErrorKind::ValueOutOfRange, key + ": unknown variable " + std::string(item), line_no);
      def.variables.push_back(v);
    }
  } else if (key == "timeout") {
    def.timeout = integer(1, 1'000'000);
  } else if (key == "shaping") {
    for (auto& e : def.rewards.entries) e.shaping = false;
    for (std::string_view item : split_list(value)) {
      const std::string k = lower(item);
      const auto it = std::find(kRewardKeys.begin(), kRewardKeys.end(), k);
      if (it == kRewardKeys.end()) throw Error(ErrorKind::UnknownKey, k, line_no);
      def.rewards.entries[static_cast<std::size_t>(it - kRewardKeys.begin())].shaping = true;
    }
  } else if (key == "kill_terminal") {
    def.kill_terminal = parse_bool(value, line_no);
  } else if (key == "player_spawn") {
    const std::string v = lower(value);
    if (v == "fixed") def.player_spawn = SpawnRule::Fixed;
    else if (v == "random") def.player_spawn = SpawnRule::RandomFreeCell;
    else throw Error(ErrorKind::ValueOutOfRange, key, line_no);
  } else if (key == "player_angle") {
    def.player_angle_degrees = real();
    require_range(def.player_angle_degrees >= 0.0 && def.player_angle_degrees < 360.0, key, line_no);
  } else if (key == "player_health") {
    def.player_health = integer(1, 100);
  } else if (key == "ammo") {
    def.ammo = integer(0, 100000);
  } else if (key == "monsters") {
    def.monsters = integer(0, 64);
  } else if (key == "monster_radius") {
    def.monster_radius = real();
    require_range(def.monster_radius > 0.0 && def.monster_radius < 0.5, key, line_no);
  } else if (key == "items_initial") {
    def.items_initial = integer(0, 10000);
  } else if (key == "item_period") {
    def.world.item_period = integer(0, 1'000'000);
  } else if (key == "item_cap") {
    def.world.item_cap = integer(0, 10000);
  } else if (key == "medikit_probability") {
    def.world.medikit_probability = real();
    require_range(def.world.medikit_probability >= 0.0 && def.world.medikit_probability <= 1.0, key, line_no);
  } else if (key == "move_speed") {
    def.world.move_speed = real();
    require_range(def.world.move_speed >= 0.0 && def.world.move_speed <= 0.5, key, line_no);
  } else if (key == "turn_speed") {
    const double deg = real();
    require_range(deg >= 0.0 && deg <= 90.0, key, line_no);
    def.world.turn_speed_degrees = deg;
  } else if (key == "attack_cooldown") {
    def.world.attack_cooldown = integer(0, 10000);
  } else if (key == "acid_damage") {
    def.world.acid_damage = integer(0, 100);
  } else if (key == "acid_period") {
    def.world.acid_period = integer(0, 100000);
  } else if (key == "acid_first") {
    def.world.acid_first = integer(0, 100000);
  } else if (key == "medikit_heal") {
    def.world.medikit_heal = integer(0, 100);
  } else if (key == "vial_damage") {
    def.world.vial_damage = integer(0, 100);
  } else {
    throw Error(ErrorKind::UnknownKey, key, line_no);
  }
}

}  // namespace

ScenarioDef parse_scenario(std::string_view text) {
  ScenarioDef def;
  enum class Section { None, Map, Rules } section = Section::None;
  bool saw_map = false;
  bool saw_rules = false;
  int map_line = 0;
  std::vector<int> row_lines;
  int line_no = 0;
  for (std::string_view raw : split_lines(text)) {
    ++line_no;
    const std::string_view t = trim(raw);
    if (t == "[map]") {
      if (saw_map) throw Error(ErrorKind::SyntaxError, "duplicate [map] section", line_no);
      section = Section::Map;
      saw_map = true;
      map_line = line_no;
      continue;
    }
    if (t == "[rules]") {
      if (saw_rules) throw Error(ErrorKind::SyntaxError, "duplicate [rules] section", line_no);
      section = Section::Rules;
      saw_rules = true;
      continue;
    }
    if (!t.empty() && t.front() == '[') throw Error(ErrorKind::SyntaxError, "unknown section " + std::string(t), line_no);
    if (section == Section::Map) {
      if (t.empty()) continue;
      def.map_rows.emplace_back(t);
      row_lines.push_back(line_no);
      continue;
    }
    const std::string_view line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (section == Section::None) throw Error(ErrorKind::SyntaxError, "content outside a section", line_no);
    const auto [key, value] = split_key_value(line, line_no);
    apply_rule(def, key, value, line_no);
  }
  // Whole-file problems carry line 0.
  if (!saw_map) throw Error(ErrorKind::SyntaxError, "missing [map] section");
  if (!saw_rules) throw Error(ErrorKind::SyntaxError, "missing [rules] section");
  if (def.buttons.empty()) throw Error(ErrorKind::ValueOutOfRange, "buttons: none declared");
  if (def.timeout <= 0) throw Error(ErrorKind::ValueOutOfRange, "timeout: not set");
  build_map(def, map_line, row_lines);
  if (def.monsters > 0 && def.monster_zone.empty())
    throw Error(ErrorKind::ValueOutOfRange, "monsters: no `M` spawn cells");
  return def;
}

std::string serialize_scenario(const ScenarioDef& def) {
  std::ostringstream out;
  out << "[map]\n";
  for (const auto& row : def.map_rows) out << row << '\n';
  out << "\n[rules]\n";
  out << "name = " << def.name << '\n';
  out << "buttons = ";
  for (std::size_t i = 0; i < def.buttons.size(); ++i) out << (i ? ", " : "") << button_name(def.buttons[i]);
  out << '\n';
  if (!def.variables.empty()) {
    out << "variables = ";
    for (std::size_t i = 0; i < def.variables.size(); ++i) out << (i ? ", " : "") << def.variables[i];
    out << '\n';
  }
  out << "timeout = " << def.timeout << '\n';
  out << "player_spawn = " << (def.player_spawn == SpawnRule::Fixed ? "fixed" : "random") << '\n';
  out << "player_angle = " << format_double(def.player_angle_degrees) << '\n';
  out << "player_health = " << def.player_health << '\n';
  out << "ammo = " << def.ammo << '\n';
  out << "monsters = " << def.monsters << '\n';
  out << "monster_radius = " << format_double(def.monster_radius) << '\n';
  out << "kill_terminal = " << (def.kill_terminal ? "true" : "false") << '\n';
  std::string shaping;
  for (std::size_t i = 0; i < kRewardKinds; ++i) {
    out << kRewardKeys[i] << " = " << format_double(def.rewards.entries[i].value) << '\n';
    if (def.rewards.entries[i].shaping) shaping += (shaping.empty() ? "" : ", ") + std::string(kRewardKeys[i]);
  }
  if (!shaping.empty()) out << "shaping = " << shaping << '\n';
  out << "items_initial = " << def.items_initial << '\n';
  out << "item_period = " << def.world.item_period << '\n';
  out << "item_cap = " << def.world.item_cap << '\n';
  out << "medikit_probability = " << format_double(def.world.medikit_probability) << '\n';
  out << "move_speed = " << format_double(def.world.move_speed) << '\n';
  out << "turn_speed = " << format_double(def.world.turn_speed_degrees) << '\n';
  out << "attack_cooldown = " << def.world.attack_cooldown << '\n';
  out << "acid_damage = " << def.world.acid_damage << '\n';
  out << "acid_period = " << def.world.acid_period << '\n';
  out << "acid_first = " << def.world.acid_first << '\n';
  out << "medikit_heal = " << def.world.medikit_heal << '\n';
  out << "vial_damage = " << def.world.vial_damage << '\n';
  return out.str();
}

ScenarioDef load_scenario(const std::filesystem::path& path) {
  return parse_scenario(read_text_file(path));
}

RewardDelta score_events_unchecked(std::span<const GameEvent> events, int elapsed_tics, const RewardRules& rules) {
  RewardDelta out;
  const auto add = [&out](const RewardEntry& e, double times) {
    out.training += e.value * times;
    if (!e.shaping) out.reported += e.value * times;
  };
  add(rules[RewardKind::Living], static_cast<double>(elapsed_tics));
  for (const GameEvent& ev : events) {
    switch (ev.tag) {
      case EventTag::MonsterKilled: add(rules[RewardKind::Kill], 1.0); break;
      case EventTag::ShotMissed: add(rules[RewardKind::Miss], 1.0); break;
      case EventTag::PlayerDied: add(rules[RewardKind::Death], 1.0); break;
      case EventTag::MedikitTaken: add(rules[RewardKind::Medikit], 1.0); break;
      case EventTag::VialTaken: add(rules[RewardKind::Vial], 1.0); break;
      case EventTag::ShotFired:
      case EventTag::PlayerDamaged: break;
    }
  }
  return out;
}

RewardDelta score_events(std::span<const GameEvent> events, int elapsed_tics, const RewardRules& rules) {
  if (elapsed_tics < 1) throw Error(ErrorKind::InvalidArgument, "elapsed_tics must be >= 1");
  return score_events_unchecked(events, elapsed_tics, rules);
}

TerminalStatus check_terminal(const WorldState& world, std::span<const GameEvent> events, const ScenarioDef& def) {
  const bool died = !world.player.alive || world.player.health <= 0 ||
                    std::any_of(events.begin(), events.end(), [](const GameEvent& e) { return e.tag == EventTag::PlayerDied; });
  if (died) return {true, TerminalCause::PlayerDied};
  if (def.kill_terminal) {
    const bool killed = std::any_of(events.begin(), events.end(),
                                    [](const GameEvent& e) { return e.tag == EventTag::MonsterKilled; });
    const bool all_dead = !world.monsters.empty() &&
                          std::none_of(world.monsters.begin(), world.monsters.end(), [](const Actor& m) { return m.alive; });
    if (killed || all_dead) return {true, TerminalCause::MonsterKilled};
  }
  if (world.tick >= static_cast<std::uint32_t>(def.timeout)) return {true, TerminalCause::Timeout};
  return {};
}

WorldState make_world(const ScenarioDef& def, std::uint64_t seed) {
  WorldState w;
  w.map = def.map;
  w.rules = def.world;
  w.rules.max_health = 100;
  w.rng = SplitMix64(seed);
  w.player.kind = ActorKind::Player;
  w.player.health = def.player_health;
  w.player.ammo = def.ammo;
  if (def.player_spawn == SpawnRule::Fixed) {
    w.player.pos = def.player_pos;
    w.player.angle = def.player_angle_degrees * kDegToRad;
  } else {
    std::vector<Vec2> cells;
    for (int cy = 0; cy < w.map.height(); ++cy)
      for (int cx = 0; cx < w.map.width(); ++cx)
        if (!w.map.is_wall(cx, cy)) cells.push_back({cx + 0.5, cy + 0.5});
    w.player.pos = cells[w.rng.below(cells.size())];
    w.player.angle = w.rng.uniform(0.0, 2.0 * kPi);
  }
  for (int i = 0; i < def.monsters; ++i) {
    Actor m;
    m.kind = ActorKind::Monster;
    m.pos = def.monster_zone[w.rng.below(def.monster_zone.size())];
    m.angle = std::atan2(w.player.pos.y - m.pos.y, w.player.pos.x - m.pos.x);
    m.radius = def.monster_radius;
    m.health = 1;
    w.monsters.push_back(m);
  }
  for (int i = 0; i < def.items_initial; ++i)
    if (!spawn_item(w)) break;
  return w;
}

}  // namespace raydoom
