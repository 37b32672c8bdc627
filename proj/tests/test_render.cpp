#include <gtest/gtest.h>
#include <zlib.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "corpus.hpp"
#include "oracles.hpp"
#include "raydoom/render.hpp"
#include "raydoom/scenario.hpp"

using namespace raydoom;

namespace {

WorldState room(int w, int h) {
  std::vector<std::string> rows;
  for (int y = 0; y < h; ++y) {
    std::string r(static_cast<std::size_t>(w), '.');
    if (y == 0 || y == h - 1) r.assign(static_cast<std::size_t>(w), '#');
    r.front() = r.back() = '#';
    rows.push_back(r);
  }
  WorldState world;
  world.map = corpus::grid_from_rows(rows);
  return world;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), {}};
}

std::uint32_t be32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) << 24 | static_cast<std::uint32_t>(p[1]) << 16 |
         static_cast<std::uint32_t>(p[2]) << 8 | p[3];
}

const float& depth_at(const Frame& f, int x, int y) { return f.depth[static_cast<std::size_t>(y) * f.width + x]; }

}  // namespace

TEST(Render, ColumnOffsetsSymmetric) {
  for (int w : {4, 7, 60, 320}) {
    for (int x = 0; x < w; ++x)
      EXPECT_NEAR(column_angle_offset(x, w, kPi / 2), -column_angle_offset(w - 1 - x, w, kPi / 2), 1e-15);
    EXPECT_LT(std::abs(column_angle_offset(0, w, kPi / 2)), kPi / 4);
  }
}

TEST(Render, PerpDistanceMatchesMarchOracle) {
  SplitMix64 rng(11);
  for (int i = 0; i < 60; ++i) {
    const GridMap m = oracle::random_map(rng, 10, 14, 0.25);
    const Vec2 o = oracle::random_floor_point(rng, m);
    const double cam = rng.uniform(0.0, 2 * kPi);
    const double off = rng.uniform(-kPi / 4, kPi / 4);
    const double want = oracle::march_wall(m, o, cam + off) * std::cos(off);
    EXPECT_NEAR(cast_wall_ray(m, o, cam + off, cam).perp_distance, want, 1e-3) << i;
  }
}

TEST(Render, FacingFlatWallHasConstantDepth) {
  const WorldState w = room(9, 9);
  RenderOptions o;
  o.width = 64;
  o.height = 48;
  o.render_sprites = false;
  const Frame f = render_frame(w, Camera{{4.5, 4.5}, 0.0}, o);
  // Perpendicular distance to the east wall is 3.5 for every column that sees it.
  for (int x = 20; x < 44; ++x) EXPECT_NEAR(depth_at(f, x, 24), 3.5f, 1e-5f) << x;
}

TEST(Render, DepthSymmetricAboutTheHorizon) {
  SplitMix64 rng(3);
  WorldState w;
  w.map = oracle::random_map(rng, 12, 12, 0.2);
  RenderOptions o;
  o.width = 80;
  o.height = 61;
  o.render_sprites = false;
  const Frame f = render_frame(w, Camera{oracle::random_floor_point(rng, w.map), 1.0}, o);
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) ASSERT_EQ(depth_at(f, x, y), depth_at(f, x, o.height - 1 - y));
}

TEST(Render, LeftRightMirrorInSymmetricRoom) {
  const WorldState w = room(9, 9);
  RenderOptions o;
  o.width = 64;
  o.height = 48;
  const Frame f = render_frame(w, Camera{{4.5, 4.5}, 0.0}, o);
  for (int y = 0; y < o.height; ++y)
    for (int x = 0; x < o.width; ++x) EXPECT_NEAR(depth_at(f, x, y), depth_at(f, o.width - 1 - x, y), 1e-4);
}

TEST(Render, DepthToggleLeavesPixelsAlone) {
  const WorldState w = make_world(parse_scenario(bundled_basic_scenario()), 2);
  RenderOptions on;
  on.width = 60;
  on.height = 45;
  RenderOptions off = on;
  off.compute_depth = false;
  const Frame a = render_frame(w, camera_for(w.player), on);
  const Frame b = render_frame(w, camera_for(w.player), off);
  EXPECT_TRUE(a.has_depth());
  EXPECT_FALSE(b.has_depth());
  EXPECT_EQ(a.rgb, b.rgb);
  EXPECT_TRUE(b.depth8().empty());
}

TEST(Render, MonsterSpriteOccupiesCentreWithItsDepth) {
  WorldState w = room(9, 9);
  Actor m;
  m.kind = ActorKind::Monster;
  m.pos = {6.5, 4.5};
  m.radius = 0.4;
  w.monsters.push_back(m);
  RenderOptions o;
  o.width = 64;
  o.height = 48;
  const Frame f = render_frame(w, Camera{{2.5, 4.5}, 0.0}, o);
  EXPECT_FLOAT_EQ(depth_at(f, 32, 26), 4.0f);
  const std::uint8_t* px = &f.rgb[(26 * 64 + 32) * 3];
  EXPECT_EQ(px[0], 250);
  EXPECT_EQ(px[1], 200);
  EXPECT_EQ(px[2], 60);

  w.monsters[0].alive = false;
  const Frame g = render_frame(w, Camera{{2.5, 4.5}, 0.0}, o);
  EXPECT_FLOAT_EQ(depth_at(g, 32, 26), 5.5f);
}

TEST(Render, SpriteBehindWallIsHidden) {
  WorldState w = make_world(parse_scenario(bundled_health_gathering_scenario()), 1);
  w.items.clear();
  RenderOptions o;
  o.width = 40;
  o.height = 30;
  // Looking down +y straight into the wall block of row 3; the item sits behind it.
  w.player.pos = {4.5, 2.5};
  const Frame bare = render_frame(w, Camera{{4.5, 2.5}, kPi / 2}, o);
  Item it;
  it.pos = {4.5, 5.5};
  w.items.push_back(it);
  const Frame with = render_frame(w, Camera{{4.5, 2.5}, kPi / 2}, o);
  EXPECT_EQ(bare, with);
}

TEST(Render, Deterministic) {
  const WorldState w = make_world(parse_scenario(bundled_health_gathering_scenario()), 8);
  RenderOptions o;
  o.width = 120;
  o.height = 45;
  const Frame a = render_frame(w, camera_for(w.player), o);
  Frame b;
  render_frame_into(b, w, camera_for(w.player), o);
  EXPECT_EQ(a, b);
  EXPECT_EQ(frame_hash(a), frame_hash(b));
  b.rgb[5] ^= 1;
  EXPECT_NE(frame_hash(a), frame_hash(b));
}

TEST(Render, OddWidthsFillEveryPixel) {
  const WorldState w = make_world(parse_scenario(bundled_basic_scenario()), 2);
  for (int width : {4, 5, 6, 7, 9, 33}) {
    RenderOptions o;
    o.width = width;
    o.height = 5;
    o.render_sprites = false;
    Frame f;
    f.rgb.assign(static_cast<std::size_t>(width) * 5 * 3, 0xEE);
    render_frame_into(f, w, camera_for(w.player), o);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < width; ++x) {
        const std::uint8_t* p = &f.rgb[(static_cast<std::size_t>(y) * width + x) * 3];
        EXPECT_FALSE(p[0] == 0xEE && p[1] == 0xEE && p[2] == 0xEE) << width << " " << x << "," << y;
      }
  }
}

TEST(Render, RejectsBadOptions) {
  const WorldState w = room(5, 5);
  RenderOptions o;
  o.width = 3;
  EXPECT_THROW(render_frame(w, Camera{{2.5, 2.5}, 0.0}, o), Error);
  EXPECT_THROW(render_frame(w, Camera{{2.5, 2.5}, 0.0, kPi}, RenderOptions{}), Error);
}

TEST(Render, QuantizeDepth) {
  EXPECT_EQ(quantize_depth(0.0f), 0);
  EXPECT_EQ(quantize_depth(1.0f), 8);
  EXPECT_EQ(quantize_depth(1.06f), 8);
  EXPECT_EQ(quantize_depth(1.07f), 9);
  EXPECT_EQ(quantize_depth(100.0f), 255);
  EXPECT_EQ(quantize_depth(-3.0f), 0);
}

TEST(Render, PngDecodesToPixels) {
  const WorldState w = make_world(parse_scenario(bundled_basic_scenario()), 2);
  RenderOptions o;
  o.width = 31;
  o.height = 17;
  const Frame f = render_frame(w, camera_for(w.player), o);
  const auto path = std::filesystem::temp_directory_path() / "raydoom_render_test.png";
  write_png(path, f);
  const auto bytes = slurp(path);
  const std::uint8_t sig[] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  ASSERT_GT(bytes.size(), 8u);
  ASSERT_TRUE(std::equal(sig, sig + 8, bytes.begin()));
  std::vector<std::uint8_t> idat;
  std::size_t at = 8;
  bool saw_end = false;
  while (at + 12 <= bytes.size()) {
    const std::uint32_t len = be32(&bytes[at]);
    const std::string type(bytes.begin() + at + 4, bytes.begin() + at + 8);
    const std::uint8_t* data = &bytes[at + 8];
    EXPECT_EQ(crc32(0L, &bytes[at + 4], len + 4), be32(data + len)) << type;
    if (type == "IHDR") {
      EXPECT_EQ(be32(data), 31u);
      EXPECT_EQ(be32(data + 4), 17u);
      EXPECT_EQ(data[8], 8);
      EXPECT_EQ(data[9], 2);
    }
    if (type == "IDAT") idat.insert(idat.end(), data, data + len);
    if (type == "IEND") saw_end = true;
    at += 12 + len;
  }
  EXPECT_TRUE(saw_end);
  std::vector<std::uint8_t> raw(static_cast<std::size_t>(31 * 3 + 1) * 17);
  uLongf raw_size = raw.size();
  ASSERT_EQ(uncompress(raw.data(), &raw_size, idat.data(), idat.size()), Z_OK);
  ASSERT_EQ(raw_size, raw.size());
  for (int y = 0; y < 17; ++y) {
    EXPECT_EQ(raw[y * (31 * 3 + 1)], 0);
    EXPECT_TRUE(std::equal(f.rgb.begin() + y * 93, f.rgb.begin() + (y + 1) * 93, raw.begin() + y * 94 + 1));
  }
  std::filesystem::remove(path);
}

TEST(Render, PgmHoldsQuantizedDepth) {
  const WorldState w = make_world(parse_scenario(bundled_basic_scenario()), 2);
  RenderOptions o;
  o.width = 12;
  o.height = 9;
  const Frame f = render_frame(w, camera_for(w.player), o);
  const auto path = std::filesystem::temp_directory_path() / "raydoom_render_test.pgm";
  write_pgm(path, f);
  const auto bytes = slurp(path);
  const std::string header = "P5\n12 9\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 108);
  EXPECT_TRUE(std::equal(header.begin(), header.end(), bytes.begin()));
  for (std::size_t i = 0; i < 108; ++i) {
    const double q = std::clamp(std::round(static_cast<double>(f.depth[i]) * 8.0), 0.0, 255.0);
    EXPECT_EQ(bytes[header.size() + i], static_cast<std::uint8_t>(q));
  }
  std::filesystem::remove(path);
  Frame flat = f;
  flat.depth.clear();
  EXPECT_THROW(write_pgm(path, flat), Error);
}

TEST(Render, MeasureFpsRequiresOneSecond) {
  const WorldState w = room(5, 5);
  EXPECT_THROW(measure_fps(w, Camera{{2.5, 2.5}, 0.0}, RenderOptions{}, 0.5), Error);
}
