#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "raydoom/deepq/train.hpp"
#include "raydoom/env.hpp"

namespace raydoom::cli {

// Exit codes of the raydoom tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitHashMismatch = 3;

// Parses argv (argv[0] is the program name) and runs one subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

enum class Profile : std::uint8_t { Desk, Paper };

// RAYDOOM_PROFILE: "desk" (default when unset) or "paper". Throws Error(InvalidArgument).
Profile profile_from_environment();
// "desk_basic", "paper_basic", "paper_health". Throws Error(InvalidArgument).
deepq::TrainConfig preset_config(std::string_view name);
std::string_view default_preset(Profile profile);

// --config / --scenario resolution shared by every subcommand. Without a
// config the defaults of EnvConfig apply; without either, the bundled basic
// scenario is used.
struct Setup {
  EnvConfig config;
  ScenarioDef scenario;
};
Setup load_setup(const std::optional<std::filesystem::path>& config_path,
                 const std::optional<std::filesystem::path>& scenario_path);

// ---- bench

enum class DepthSelection : std::uint8_t { Off, On, Both };

struct Resolution {
  int width = 0;
  int height = 0;
};

// "160x120,320x240". Throws Error(InvalidArgument).
std::vector<Resolution> parse_resolutions(std::string_view list);

struct BenchRow {
  int width = 0;
  int height = 0;
  bool depth = false;
  double fps = 0.0;
  long frames = 0;
};

// Single-threaded SYNC_PLAYER loop: one idle tic plus one rendered state per
// frame, episodes restarted as they end. Rows ordered by resolution, depth
// off before on.
std::vector<BenchRow> run_benchmark(const Setup& setup, std::span<const Resolution> resolutions, DepthSelection depth,
                                    double seconds_per_cell);
void write_benchmark_csv(std::ostream& out, std::span<const BenchRow> rows);

// ---- train / eval

struct TrainJob {
  Setup setup;
  deepq::TrainConfig train;
  std::string preset;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
};

struct TrainOutcome {
  deepq::TrainResult result;
  std::filesystem::path checkpoint;
  std::filesystem::path curve;
  std::filesystem::path metadata;
};

// Writes checkpoint.rdqn, curve.csv and metadata.json into out_dir.
TrainOutcome run_train(const TrainJob& job, const deepq::TrainProgress& progress = {});

// What eval needs to rebuild the observation pipeline of a checkpoint; stored
// as metadata.json next to it.
struct CheckpointMeta {
  std::string preset;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  int skipcount = 0;
  int width = 0;
  int height = 0;
  Channels channels = Channels::RGB;
  int frame_stack = 1;
  bool use_aux = false;
  long steps = 0;
  long episodes = 0;
  double minutes = 0.0;
};

void write_metadata(const std::filesystem::path& path, const CheckpointMeta& meta);
// Throws Error(IoError) when missing, Error(CorruptCheckpoint) when malformed.
CheckpointMeta read_metadata(const std::filesystem::path& path);

struct EvalJob {
  Setup setup;
  std::filesystem::path checkpoint;
  int episodes = 100;
  std::optional<int> skipcount;  // checkpoint's own when unset
  std::uint64_t seed = 0x7E57;
  // Records the first evaluation episode.
  std::optional<std::filesystem::path> record_path;
};

struct EvalRow {
  int skipcount = 0;
  deepq::ScoreStats stats;
};

EvalRow run_eval(const EvalJob& job);
void write_eval_csv_header(std::ostream& out);
void write_eval_csv_row(std::ostream& out, const std::filesystem::path& checkpoint, const EvalRow& row);

// ---- skipgrid

struct ExperimentSpec {
  Setup setup;
  deepq::TrainConfig train;
  std::string preset;
  std::vector<int> skipcounts;
  std::vector<std::uint64_t> seeds;
  int eval_episodes = 100;
  std::filesystem::path out_dir;
};

struct SkipGridRow {
  int skipcount = 0;
  std::uint64_t seed = 0;
  double native = 0.0;
  double skip0 = 0.0;
  double skip10 = 0.0;
  long episodes = 0;
  double minutes = 0.0;  // whole run including the test episodes
};

// One agent per (skipcount, seed), in skipcount-major order. Throws
// Error(InvalidArgument) for empty lists.
std::vector<SkipGridRow> run_skipgrid(const ExperimentSpec& spec, std::ostream* log = nullptr);
void write_skipgrid_csv(std::ostream& out, std::span<const SkipGridRow> rows);

// Comma-separated integers. Throws Error(InvalidArgument).
std::vector<long long> parse_int_list(std::string_view list);

}  // namespace raydoom::cli
