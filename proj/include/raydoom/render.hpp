#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "raydoom/engine.hpp"

namespace raydoom {

// Rendered observation. rgb is row-major with interleaved R,G,B; depth holds
// the perpendicular distance (world units) of the surface seen by each pixel
// and is empty when depth was not requested.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
  std::vector<float> depth;

  bool has_depth() const { return !depth.empty(); }
  // clamp(round(depth * 8), 0, 255) per pixel; empty without depth.
  std::vector<std::uint8_t> depth8() const;

  friend bool operator==(const Frame&, const Frame&) = default;
};

std::uint8_t quantize_depth(float depth);

struct Camera {
  Vec2 pos;
  double angle = 0.0;
  double fov = kPi / 2.0;  // horizontal, radians
};

Camera camera_for(const Actor& actor, double fov = kPi / 2.0);

struct RenderOptions {
  int width = 320;
  int height = 240;
  bool compute_depth = true;
  bool render_sprites = true;
  bool floor_ceiling_shading = true;
};

struct WallRay {
  double perp_distance = 0.0;
  std::uint8_t texture = 0;
  WallSide side = WallSide::North;
  double wall_x = 0.0;
};

// Euclidean DDA distance scaled by cos(ray_angle - camera_angle).
WallRay cast_wall_ray(const GridMap& map, Vec2 origin, double ray_angle, double camera_angle);

// Angle of screen column `column` relative to the view axis.
double column_angle_offset(int column, int width, double fov);

// Sprite billboard sizes in world units (square).
inline constexpr double kMonsterSpriteSize = 0.8;
inline constexpr double kItemSpriteSize = 0.4;

Frame render_frame(const WorldState& world, const Camera& camera, const RenderOptions& opts);

// Same as render_frame but reuses `frame`'s storage.
void render_frame_into(Frame& frame, const WorldState& world, const Camera& camera, const RenderOptions& opts);

struct FpsSample {
  int width = 0;
  int height = 0;
  bool depth = false;
  double fps = 0.0;
  long frames = 0;
  double seconds = 0.0;
};

// Single-threaded render loop for at least `duration_s` (>= 1) seconds.
FpsSample measure_fps(const WorldState& world, const Camera& camera, const RenderOptions& opts, double duration_s);

std::uint64_t frame_hash(const Frame& frame);

void write_png(const std::filesystem::path& path, const Frame& frame);
void write_pgm(const std::filesystem::path& path, const Frame& frame);

}  // namespace raydoom
