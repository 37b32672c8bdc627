#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

using namespace raydoom;

GridMap random_map(SplitMix64& rng, int width, int height, double wall_density) {
  std::vector<Cell> cells(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
      const bool wall = border || ((x != 1 || y != 1) && rng.uniform() < wall_density);
      Cell& c = cells[static_cast<std::size_t>(y) * width + x];
      if (wall) c = {CellKind::Wall, static_cast<std::uint8_t>(rng.below(8))};
    }
  return GridMap(width, height, std::move(cells));
}

Vec2 random_floor_point(SplitMix64& rng, const GridMap& map) {
  for (;;) {
    const int cx = static_cast<int>(rng.below(static_cast<std::uint64_t>(map.width())));
    const int cy = static_cast<int>(rng.below(static_cast<std::uint64_t>(map.height())));
    if (map.is_wall(cx, cy)) continue;
    return {cx + rng.uniform(0.01, 0.99), cy + rng.uniform(0.01, 0.99)};
  }
}

namespace {

bool wall_at(const GridMap& map, double x, double y) {
  return map.is_wall(static_cast<int>(std::floor(x)), static_cast<int>(std::floor(y)));
}

// Shrinks (lo, hi] around the first parameter where `inside` turns true.
template <typename Inside>
double bisect(double lo, double hi, const Inside& inside) {
  for (int i = 0; i < 60 && hi - lo > 1e-12; ++i) {
    const double mid = 0.5 * (lo + hi);
    (inside(mid) ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

double march_wall(const GridMap& map, Vec2 origin, double angle) {
  constexpr double kStep = 1e-4;
  constexpr double kFine = 1e-8;
  const double dx = std::cos(angle), dy = std::sin(angle);
  const auto inside = [&](double t) { return wall_at(map, origin.x + t * dx, origin.y + t * dy); };
  int cx = static_cast<int>(std::floor(origin.x)), cy = static_cast<int>(std::floor(origin.y));
  for (long i = 1;; ++i) {
    const double t = i * kStep;
    const int nx = static_cast<int>(std::floor(origin.x + t * dx));
    const int ny = static_cast<int>(std::floor(origin.y + t * dy));
    if (nx != cx && ny != cy) {
      for (double s = t - kStep + kFine; s < t; s += kFine)
        if (inside(s)) return bisect(s - kFine, s, inside);
    }
    if (inside(t)) return bisect(t - kStep, t, inside);
    cx = nx;
    cy = ny;
  }
}

MarchHit march_hitscan(const WorldState& world, Vec2 origin, double angle) {
  const double dx = std::cos(angle), dy = std::sin(angle);
  const auto in_monster = [&](double t) -> std::optional<std::size_t> {
    const double px = origin.x + t * dx, py = origin.y + t * dy;
    for (std::size_t i = 0; i < world.monsters.size(); ++i) {
      const Actor& m = world.monsters[i];
      if (m.alive && std::hypot(px - m.pos.x, py - m.pos.y) <= m.radius) return i;
    }
    return std::nullopt;
  };
  if (auto i = in_monster(0.0)) return {true, *i, 0.0};
  const double wall = march_wall(world.map, origin, angle);
  constexpr double kStep = 1e-4;
  for (double t = kStep; t < wall; t += kStep) {
    if (auto i = in_monster(t)) {
      const double d = bisect(t - kStep, t, [&](double s) { return in_monster(s).has_value(); });
      return {true, *i, d};
    }
  }
  return {false, 0, wall};
}

std::array<std::array<double, 2>, 5> chain_q_star(double gamma) {
  std::array<std::array<double, 2>, 5> q{};
  for (int sweep = 0; sweep < 10000; ++sweep) {
    auto next = q;
    for (int s = 0; s < 5; ++s) {
      next[s][0] = s == 0 ? 1.0 : -1.0 + gamma * std::max(q[s - 1][0], q[s - 1][1]);
      next[s][1] = s == 4 ? 10.0 : -1.0 + gamma * std::max(q[s + 1][0], q[s + 1][1]);
    }
    q = next;
  }
  return q;
}

BasicEpisode play_basic(Environment& env, std::uint64_t seed, int misses, int idle_before) {
  constexpr std::uint16_t kLeft = 1, kRight = 2, kAttack = 4;
  BasicEpisode out;
  env.set_tic_observer([&](const WorldState& w, std::uint16_t, double) {
    for (const GameEvent& e : w.pending_events) {
      if (e.tag == EventTag::ShotMissed) ++out.misses;
      if (e.tag == EventTag::MonsterKilled) out.kill_tick = e.tick;
    }
  });
  env.new_episode(seed);
  int fired = 0;
  for (int i = 0; !env.is_episode_finished(); ++i) {
    const WorldState w = env.world_snapshot();
    const Actor& p = w.player;
    const Actor& m = w.monsters.at(0);
    // The straight-ahead ray is the aiming line; a disc hit is a kill.
    const double lateral = m.pos.x - p.pos.x;
    const bool aligned = std::abs(lateral) < m.radius + 0.05;
    const bool ready = p.attack_cooldown == 0;
    std::uint16_t mask = 0;
    if (i < idle_before) {
      mask = 0;
    } else if (fired < misses) {
      if (aligned) mask = lateral > 0 ? kLeft : kRight;
      else if (ready) {
        mask = kAttack;
        ++fired;
      }
    } else if (std::abs(lateral) < m.radius * 0.5) {
      mask = ready ? kAttack : 0;
    } else {
      mask = lateral > 0 ? kRight : kLeft;
    }
    env.make_action(ButtonSet(env.button_count(), mask), 0);
  }
  env.set_tic_observer(nullptr);
  out.score = env.get_total_score();
  out.reward = env.get_total_reward();
  return out;
}

std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                     std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace oracle
