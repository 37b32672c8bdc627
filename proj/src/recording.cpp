#include "raydoom/recording.hpp"

#include <fstream>
#include <iterator>

#include "raydoom/bytes.hpp"
#include "raydoom/error.hpp"
#include "raydoom/hash.hpp"

namespace raydoom {

namespace {

constexpr std::string_view kMagic = "RDRC";

}  // namespace

std::vector<std::uint8_t> encode_recording(const Recording& rec) {
  ByteWriter w;
  w.raw(kMagic);
  w.u32(rec.version);
  w.u64(rec.config_hash);
  w.u64(rec.seed);
  w.u32(static_cast<std::uint32_t>(rec.decisions.size()));
  for (const DecisionRecord& d : rec.decisions) {
    w.u32(d.tick);
    w.u16(d.skip);
    w.u16(d.buttons);
    w.f32(d.reward);
  }
  w.u32(static_cast<std::uint32_t>(rec.tic_hashes.size()));
  for (std::uint64_t h : rec.tic_hashes) w.u64(h);
  const std::uint64_t checksum = Fnv1a{}.bytes(w.bytes()).value();
  w.u64(checksum);
  return w.take();
}

DecodedRecording decode_recording(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes, ErrorKind::CorruptRecording);
  DecodedRecording out;
  Recording& rec = out.recording;
  if (r.str(4) != kMagic) throw Error(ErrorKind::CorruptRecording, "bad magic");
  rec.version = r.u32();
  if (rec.version != Recording::kVersion)
    throw Error(ErrorKind::CorruptRecording, "unsupported version " + std::to_string(rec.version));
  rec.config_hash = r.u64();
  rec.seed = r.u64();
  const std::uint32_t decisions = r.u32();
  if (static_cast<std::size_t>(decisions) * 12 > r.remaining()) throw Error(ErrorKind::CorruptRecording, "truncated decisions");
  rec.decisions.resize(decisions);
  for (DecisionRecord& d : rec.decisions) {
    d.tick = r.u32();
    d.skip = r.u16();
    d.buttons = r.u16();
    d.reward = r.f32();
  }
  const std::uint32_t hashes = r.u32();
  if (static_cast<std::size_t>(hashes) * 8 > r.remaining()) throw Error(ErrorKind::CorruptRecording, "truncated hashes");
  rec.tic_hashes.resize(hashes);
  for (std::uint64_t& h : rec.tic_hashes) h = r.u64();
  const std::size_t body = r.position();
  const std::uint64_t checksum = r.u64();
  if (r.remaining() != 0) throw Error(ErrorKind::CorruptRecording, "trailing bytes");
  out.checksum_ok = Fnv1a{}.bytes(bytes.data(), body).value() == checksum;
  return out;
}

void save_recording(const std::filesystem::path& path, const Recording& rec) {
  const auto bytes = encode_recording(rec);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

DecodedRecording load_recording(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_recording(bytes);
}

std::uint64_t config_hash(const EnvConfig& config, const ScenarioDef& scenario) {
  Fnv1a h;
  h.str(serialize_scenario(scenario));
  h.pod(config.width).pod(config.height).pod(config.compute_depth).pod(config.fov_degrees).pod(config.living_reward_unit);
  return h.value();
}

std::uint64_t tic_hash(std::uint32_t tick, std::uint16_t buttons, const Frame& frame) {
  Fnv1a h;
  h.pod(tick).pod(buttons).pod(frame.width).pod(frame.height).bytes(frame.rgb);
  if (frame.has_depth()) h.bytes(frame.depth.data(), frame.depth.size() * sizeof(float));
  return h.value();
}

EpisodeRecorder::EpisodeRecorder(Environment& env, bool per_tic_decisions, TicObserver also)
    : env_(env), per_tic_(per_tic_decisions) {
  rec_.config_hash = config_hash(env.config(), env.scenario());
  env_.set_tic_observer([this, also = std::move(also)](const WorldState& world, std::uint16_t mask, double reward) {
    const std::uint64_t h = tic_hash(world.tick, mask, env_.render_world(world));
    {
      std::lock_guard lock(mutex_);
      if (world.tick == 0) {
        rec_.decisions.clear();
        rec_.tic_hashes.clear();
      } else if (per_tic_) {
        rec_.decisions.push_back({world.tick - 1, 0, mask, static_cast<float>(reward)});
      }
      rec_.tic_hashes.push_back(h);
    }
    if (also) also(world, mask, reward);
  });
}

EpisodeRecorder::~EpisodeRecorder() { env_.set_tic_observer(nullptr); }

void EpisodeRecorder::begin() {
  const std::uint64_t seed = env_.episode_seed();
  std::lock_guard lock(mutex_);
  rec_.seed = seed;
}

void EpisodeRecorder::note_decision(std::uint32_t tick_before, int skip, std::uint16_t mask, double reward) {
  if (per_tic_) return;
  std::lock_guard lock(mutex_);
  rec_.decisions.push_back({tick_before, static_cast<std::uint16_t>(skip), mask, static_cast<float>(reward)});
}

GameState EpisodeRecorder::new_episode(std::optional<std::uint64_t> seed) {
  GameState s = env_.new_episode(seed);
  begin();
  return s;
}

double EpisodeRecorder::make_action(const ButtonSet& buttons, std::optional<int> skip) {
  const int n = skip.value_or(env_.config().default_skipcount);
  const std::uint32_t before = env_.tick();
  const double reward = env_.make_action(buttons, n);
  note_decision(before, n, buttons.mask(), reward);
  return reward;
}

Recording EpisodeRecorder::snapshot() const {
  std::lock_guard lock(mutex_);
  return rec_;
}

ReplayReport replay_recording(const DecodedRecording& decoded, const EnvConfig& config, const ScenarioDef& scenario) {
  const Recording& rec = decoded.recording;
  ReplayReport report;
  report.checksum_ok = decoded.checksum_ok;
  report.decisions = rec.decisions.size();
  for (const DecisionRecord& d : rec.decisions) report.recorded_total += d.reward;

  EnvConfig cfg = config;
  cfg.mode = ControlMode::SyncPlayer;
  Environment env(cfg, scenario);
  std::vector<std::uint64_t> hashes;
  env.set_tic_observer([&](const WorldState& world, std::uint16_t mask, double) {
    hashes.push_back(tic_hash(world.tick, mask, env.render_world(world)));
  });

  const auto mismatch = [&](std::uint32_t tick) {
    if (!report.first_mismatch_tick) report.first_mismatch_tick = tick;
  };

  env.new_episode(rec.seed);
  bool diverged = false;
  bool rewards_equal = true;
  const auto compare_new_hashes = [&](std::size_t from) {
    for (std::size_t i = from; i < hashes.size(); ++i) {
      if (i >= rec.tic_hashes.size() || hashes[i] != rec.tic_hashes[i]) {
        mismatch(static_cast<std::uint32_t>(i));
        return false;
      }
    }
    report.tics_checked = hashes.size();
    return true;
  };

  if (config_hash(config, scenario) != rec.config_hash) {
    mismatch(0);
    diverged = true;
  }
  if (!diverged) diverged = !compare_new_hashes(0);

  for (const DecisionRecord& d : rec.decisions) {
    if (diverged) break;
    if (env.is_episode_finished() || d.tick != env.tick() || (d.buttons >> env.button_count()) != 0) {
      mismatch(env.tick());
      diverged = true;
      break;
    }
    const std::size_t before = hashes.size();
    const double r = env.make_action(ButtonSet(env.button_count(), d.buttons), d.skip);
    report.replayed_total += static_cast<float>(r);
    if (static_cast<float>(r) != d.reward) {
      rewards_equal = false;
      mismatch(env.tick());
      diverged = true;
    }
    if (!compare_new_hashes(before)) diverged = true;
  }
  if (!diverged && hashes.size() != rec.tic_hashes.size()) {
    mismatch(static_cast<std::uint32_t>(std::min(hashes.size(), rec.tic_hashes.size())));
    diverged = true;
  }
  report.hashes_match = !diverged;
  report.reward_match = rewards_equal && !diverged && report.replayed_total == report.recorded_total;
  env.set_tic_observer(nullptr);
  return report;
}

}  // namespace raydoom
