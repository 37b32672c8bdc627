#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "raydoom/env.hpp"

namespace raydoom {

// Binary episode recording, little-endian:
//
//   "RDRC" | u32 version | u64 config_hash | u64 seed
//   u32 decision_count | decision_count x (u32 tick, u16 skip, u16 buttons, f32 reward)
//   u32 hash_count     | hash_count x u64 tic hash (tick 0 first, then one per tic)
//   u64 FNV-1a checksum of every preceding byte
struct DecisionRecord {
  std::uint32_t tick = 0;     // world tick before the decision
  std::uint16_t skip = 0;
  std::uint16_t buttons = 0;  // bit i = i-th declared button
  float reward = 0.0f;

  friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

struct Recording {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<DecisionRecord> decisions;
  std::vector<std::uint64_t> tic_hashes;

  friend bool operator==(const Recording&, const Recording&) = default;
};

struct DecodedRecording {
  Recording recording;
  bool checksum_ok = false;
};

std::vector<std::uint8_t> encode_recording(const Recording& rec);
// Throws Error(CorruptRecording) on bad magic, version, or truncation.
DecodedRecording decode_recording(std::span<const std::uint8_t> bytes);

void save_recording(const std::filesystem::path& path, const Recording& rec);
DecodedRecording load_recording(const std::filesystem::path& path);

// Digest of everything that defines the rendered episode: scenario plus the
// observation settings (resolution, depth, fov, living-reward unit).
std::uint64_t config_hash(const EnvConfig& config, const ScenarioDef& scenario);

// Per-tic hash: tick, the button mask applied on that tic, and the frame.
std::uint64_t tic_hash(std::uint32_t tick, std::uint16_t buttons, const Frame& frame);

// Records one episode driven through it. In per-tic mode (used for ASYNC
// spectating) every engine tic becomes its own skip-0 decision.
class EpisodeRecorder {
 public:
  // `also` is called after the recorder's own bookkeeping on every tic.
  EpisodeRecorder(Environment& env, bool per_tic_decisions = false, TicObserver also = {});
  ~EpisodeRecorder();

  EpisodeRecorder(const EpisodeRecorder&) = delete;
  EpisodeRecorder& operator=(const EpisodeRecorder&) = delete;

  // Call after env.new_episode(seed); the recorder must be attached before
  // the episode starts because the tick-0 hash is taken inside new_episode.
  void begin();
  // Wrap a decision that was just applied: tick before it, skip, mask, reward.
  void note_decision(std::uint32_t tick_before, int skip, std::uint16_t mask, double reward);

  GameState new_episode(std::optional<std::uint64_t> seed = std::nullopt);
  double make_action(const ButtonSet& buttons, std::optional<int> skip = std::nullopt);

  Recording snapshot() const;

 private:
  Environment& env_;
  bool per_tic_;
  mutable std::mutex mutex_;
  Recording rec_;
};

struct ReplayReport {
  bool hashes_match = false;
  bool reward_match = false;
  bool checksum_ok = false;
  std::size_t decisions = 0;
  std::size_t tics_checked = 0;
  std::optional<std::uint32_t> first_mismatch_tick;
  double recorded_total = 0.0;
  double replayed_total = 0.0;

  bool ok() const { return hashes_match && reward_match && checksum_ok; }
};

// Re-executes the recorded decisions in SYNC_PLAYER mode and compares every
// tic hash and reward. Never throws for divergence; see the report.
ReplayReport replay_recording(const DecodedRecording& decoded, const EnvConfig& config, const ScenarioDef& scenario);

}  // namespace raydoom
