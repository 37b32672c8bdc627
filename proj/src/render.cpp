#include "raydoom/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "raydoom/error.hpp"
#include "raydoom/hash.hpp"

namespace raydoom {

namespace {

struct Rgb {
  std::uint8_t r, g, b;
};

constexpr std::array<Rgb, 8> kWallPalette = {{
    {128, 116, 100},
    {96, 104, 136},
    {140, 92, 80},
    {84, 128, 84},
    {136, 128, 72},
    {104, 88, 128},
    {72, 120, 128},
    {150, 150, 150},
}};

constexpr Rgb kMonsterColor{250, 200, 60};
constexpr Rgb kMedikitColor{240, 240, 240};
constexpr Rgb kVialColor{30, 60, 230};
constexpr Rgb kCeilingColor{48, 48, 56};
constexpr Rgb kFloorColor{84, 80, 76};
constexpr Rgb kAcidFloorColor{60, 100, 44};

Rgb scale(Rgb c, double f) {
  return {static_cast<std::uint8_t>(c.r * f), static_cast<std::uint8_t>(c.g * f), static_cast<std::uint8_t>(c.b * f)};
}

// Panel pattern: mirror-symmetric inside each cell in both directions.
constexpr double kPanelLo = 0.125;
constexpr double kPanelHi = 0.875;

// Rows y with |y + 0.5 - center| < half form [first, height - first).
int band_first_row(int height, double half) {
  const double center = height * 0.5;
  double k = center - half - 0.5;
  if (k < -1.0) return 0;
  int first = static_cast<int>(std::floor(k)) + 1;
  first = std::clamp(first, 0, height / 2 + (height % 2));
  while (first > 0 && std::abs(first - 1 + 0.5 - center) < half) --first;
  while (first < height && !(std::abs(first + 0.5 - center) < half)) ++first;
  return std::min(first, (height + 1) / 2);
}

typedef std::uint8_t Bytes16 __attribute__((vector_size(16)));
constexpr Bytes16 kPackRgb = {0, 1, 2, 4, 5, 6, 8, 9, 10, 12, 13, 14, 3, 7, 11, 15};

struct SpriteRef {
  double depth;
  std::size_t order;
  Vec2 pos;
  double size;
  Rgb color;
};

}  // namespace

std::uint8_t quantize_depth(float depth) {
  const double q = std::round(static_cast<double>(depth) * 8.0);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

std::vector<std::uint8_t> Frame::depth8() const {
  std::vector<std::uint8_t> out(depth.size());
  std::transform(depth.begin(), depth.end(), out.begin(), quantize_depth);
  return out;
}

Camera camera_for(const Actor& actor, double fov) { return Camera{actor.pos, actor.angle, fov}; }

WallRay cast_wall_ray(const GridMap& map, Vec2 origin, double ray_angle, double camera_angle) {
  const WallTrace t = trace_wall(map, origin, ray_angle);
  WallRay out;
  out.perp_distance = t.distance * std::cos(ray_angle - camera_angle);
  out.texture = map.at(t.cell_x, t.cell_y).texture;
  out.side = t.side;
  out.wall_x = t.wall_x;
  return out;
}

double column_angle_offset(int column, int width, double fov) {
  const double camera_x = static_cast<double>(2 * column + 1 - width) / static_cast<double>(width);
  return std::atan(camera_x * std::tan(fov * 0.5));
}

Frame render_frame(const WorldState& world, const Camera& camera, const RenderOptions& opts) {
  Frame frame;
  render_frame_into(frame, world, camera, opts);
  return frame;
}

void render_frame_into(Frame& frame, const WorldState& world, const Camera& camera, const RenderOptions& opts) {
  const int w = opts.width;
  const int h = opts.height;
  if (w < 4 || h < 4) throw Error(ErrorKind::InvalidArgument, "resolution must be at least 4x4");
  if (!(camera.fov > 0.0 && camera.fov < kPi)) throw Error(ErrorKind::InvalidArgument, "fov must be in (0, pi)");
  frame.width = w;
  frame.height = h;
  frame.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  if (opts.compute_depth)
    frame.depth.resize(static_cast<std::size_t>(w) * h);
  else
    frame.depth.clear();

  // Distance from the eye to the projection plane, in pixels.
  const double proj = (w * 0.5) / std::tan(camera.fov * 0.5);
  const double center = h * 0.5;

  thread_local std::vector<double> zbuf;
  thread_local std::vector<int> wall_top, inner_top;
  thread_local std::vector<Rgb> panel_color, mortar_color;
  zbuf.resize(w);
  wall_top.resize(w);
  inner_top.resize(w);
  panel_color.resize(w);
  mortar_color.resize(w);

  for (int x = 0; x < w; ++x) {
    const double ray = camera.angle + column_angle_offset(x, w, camera.fov);
    const WallRay wr = cast_wall_ray(world.map, camera.pos, ray, camera.angle);
    zbuf[x] = wr.perp_distance;
    const double half = 0.5 * proj / wr.perp_distance;
    wall_top[x] = band_first_row(h, half);
    const bool u_inner = wr.wall_x >= kPanelLo && wr.wall_x < kPanelHi;
    inner_top[x] = u_inner ? band_first_row(h, half * (kPanelHi - kPanelLo)) : h;
    Rgb base = kWallPalette[wr.texture % kWallPalette.size()];
    if (wr.side == WallSide::North || wr.side == WallSide::South) base = scale(base, 0.75);
    panel_color[x] = base;
    mortar_color[x] = scale(base, 0.6);
  }

  bool acid = false;
  for (const Cell& c : world.map.cells()) acid = acid || c.kind == CellKind::Acid;
  const Rgb floor_base = acid ? kAcidFloorColor : kFloorColor;

  static_assert(std::endian::native == std::endian::little);
  // Packed 0x00BBGGRR per column; a row is a select between three colors.
  thread_local std::vector<std::uint32_t> panel_packed, mortar_packed, row_buf;
  panel_packed.resize(w);
  mortar_packed.resize(w);
  row_buf.resize(w);
  const auto pack = [](Rgb c) {
    return static_cast<std::uint32_t>(c.r) | static_cast<std::uint32_t>(c.g) << 8 | static_cast<std::uint32_t>(c.b) << 16;
  };
  for (int x = 0; x < w; ++x) {
    panel_packed[x] = pack(panel_color[x]);
    mortar_packed[x] = pack(mortar_color[x]);
  }
  thread_local std::vector<float> zbuf_f;
  zbuf_f.resize(w);
  for (int x = 0; x < w; ++x) zbuf_f[x] = static_cast<float>(zbuf[x]);

  std::uint8_t* rgb = frame.rgb.data();
  float* depth = opts.compute_depth ? frame.depth.data() : nullptr;
  const int* wt = wall_top.data();
  const int* it = inner_top.data();
  const std::uint32_t* pp = panel_packed.data();
  const std::uint32_t* mp = mortar_packed.data();
  std::uint32_t* rb = row_buf.data();
  for (int y = 0; y < h; ++y) {
    const double t = std::abs(y + 0.5 - center);
    const double plane_dist = t > 0.0 ? 0.5 * proj / t : 1e6;
    Rgb flat = y < center ? kCeilingColor : floor_base;
    if (opts.floor_ceiling_shading) flat = scale(flat, 1.0 / (1.0 + 0.08 * plane_dist));
    const std::uint32_t flat_packed = pack(flat);
    const float flat_depth = static_cast<float>(plane_dist);
    const int mirror = h - 1 - y;
    const int row_key = std::min(y, mirror);  // band membership is symmetric about the middle
    for (int x = 0; x < w; ++x) {
      const std::uint32_t wall = row_key >= it[x] ? pp[x] : mp[x];
      rb[x] = row_key < wt[x] ? flat_packed : wall;
    }
    std::uint8_t* row = rgb + static_cast<std::size_t>(y) * w * 3;
    // Four packed pixels become 12 bytes via a byte shuffle; the 16-byte
    // store spills 4 junk bytes that the next group overwrites.
    int x = 0;
    for (; x + 6 <= w; x += 4) {
      Bytes16 v;
      std::memcpy(&v, rb + x, 16);
      v = __builtin_shuffle(v, kPackRgb);
      std::memcpy(row + 3 * x, &v, 16);
    }
    for (; x < w; ++x) {
      row[3 * x + 0] = static_cast<std::uint8_t>(rb[x]);
      row[3 * x + 1] = static_cast<std::uint8_t>(rb[x] >> 8);
      row[3 * x + 2] = static_cast<std::uint8_t>(rb[x] >> 16);
    }
    if (depth) {
      float* drow = depth + static_cast<std::size_t>(y) * w;
      const float* zf = zbuf_f.data();
      for (int x = 0; x < w; ++x) drow[x] = row_key < wt[x] ? flat_depth : zf[x];
    }
  }

  if (!opts.render_sprites) return;

  const double dir_x = std::cos(camera.angle);
  const double dir_y = std::sin(camera.angle);
  std::vector<SpriteRef> sprites;
  sprites.reserve(world.monsters.size() + world.items.size());
  const auto add = [&](Vec2 pos, double size, Rgb color) {
    const double rx = pos.x - camera.pos.x;
    const double ry = pos.y - camera.pos.y;
    const double d = rx * dir_x + ry * dir_y;
    if (d <= 0.05) return;
    sprites.push_back({d, sprites.size(), pos, size, color});
  };
  for (const Actor& m : world.monsters)
    if (m.alive) add(m.pos, kMonsterSpriteSize, kMonsterColor);
  for (const Item& it : world.items)
    if (it.active) add(it.pos, kItemSpriteSize, it.kind == ItemKind::Medikit ? kMedikitColor : kVialColor);
  std::stable_sort(sprites.begin(), sprites.end(), [](const SpriteRef& a, const SpriteRef& b) { return a.depth > b.depth; });

  for (const SpriteRef& s : sprites) {
    const double rx = s.pos.x - camera.pos.x;
    const double ry = s.pos.y - camera.pos.y;
    const double lateral = -rx * dir_y + ry * dir_x;
    const double sx = w * 0.5 + lateral / s.depth * proj;
    const double half_w = 0.5 * s.size / s.depth * proj;
    const double y_top = center - (s.size - 0.5) * proj / s.depth;
    const double y_bot = center + 0.5 * proj / s.depth;
    const int x0 = std::max(0, static_cast<int>(std::floor(sx - half_w - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(sx + half_w - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(y_top - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(y_bot - 0.5)));
    const float sd = static_cast<float>(s.depth);
    for (int x = x0; x <= x1; ++x) {
      if (!(std::abs(x + 0.5 - sx) < half_w)) continue;
      if (!(s.depth < zbuf[x])) continue;
      for (int y = y0; y <= y1; ++y) {
        const double py = y + 0.5;
        if (py < y_top || py >= y_bot) continue;
        std::uint8_t* px = rgb + (static_cast<std::size_t>(y) * w + x) * 3;
        px[0] = s.color.r;
        px[1] = s.color.g;
        px[2] = s.color.b;
        if (depth) depth[static_cast<std::size_t>(y) * w + x] = sd;
      }
    }
  }
}

FpsSample measure_fps(const WorldState& world, const Camera& camera, const RenderOptions& opts, double duration_s) {
  if (!(duration_s >= 1.0)) throw Error(ErrorKind::InvalidArgument, "benchmark duration must be at least 1 s");
  using clock = std::chrono::steady_clock;
  Frame frame;
  render_frame_into(frame, world, camera, opts);
  FpsSample out{opts.width, opts.height, opts.compute_depth, 0.0, 0, 0.0};
  const auto start = clock::now();
  double elapsed = 0.0;
  do {
    render_frame_into(frame, world, camera, opts);
    ++out.frames;
    elapsed = std::chrono::duration<double>(clock::now() - start).count();
  } while (elapsed < duration_s);
  out.seconds = elapsed;
  out.fps = static_cast<double>(out.frames) / elapsed;
  return out;
}

std::uint64_t frame_hash(const Frame& frame) {
  Fnv1a h;
  h.pod(frame.width).pod(frame.height).bytes(frame.rgb);
  if (frame.has_depth()) h.bytes(frame.depth.data(), frame.depth.size() * sizeof(float));
  return h.value();
}

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void png_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
  put_be32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + data.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t size) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw Error(ErrorKind::IoError, "write failed: " + path.string());
}

}  // namespace

void write_png(const std::filesystem::path& path, const Frame& frame) {
  const std::size_t stride = static_cast<std::size_t>(frame.width) * 3;
  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * frame.height);
  for (int y = 0; y < frame.height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), frame.rgb.begin() + y * stride, frame.rgb.begin() + (y + 1) * stride);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw Error(ErrorKind::IoError, "deflate failed");
  packed.resize(packed_size);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(frame.width));
  put_be32(ihdr, static_cast<std::uint32_t>(frame.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});  // 8-bit RGB
  png_chunk(out, "IHDR", ihdr);
  png_chunk(out, "IDAT", packed);
  png_chunk(out, "IEND", {});
  write_file(path, out.data(), out.size());
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
  if (!frame.has_depth()) throw Error(ErrorKind::InvalidArgument, "frame has no depth buffer");
  const std::string header = "P5\n" + std::to_string(frame.width) + " " + std::to_string(frame.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const auto d8 = frame.depth8();
  out.insert(out.end(), d8.begin(), d8.end());
  write_file(path, out.data(), out.size());
}

}  // namespace raydoom
