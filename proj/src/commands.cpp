#include "raydoom/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "raydoom/error.hpp"
#include "raydoom/recording.hpp"
#include "raydoom/spectate/server.hpp"

namespace raydoom::cli {

namespace fs = std::filesystem;
using namespace raydoom::deepq;

Profile profile_from_environment() {
  const char* v = std::getenv("RAYDOOM_PROFILE");
  if (!v || std::string_view(v).empty() || std::string_view(v) == "desk") return Profile::Desk;
  if (std::string_view(v) == "paper") return Profile::Paper;
  throw Error(ErrorKind::InvalidArgument, std::string("RAYDOOM_PROFILE must be desk or paper, not ") + v);
}

std::string_view default_preset(Profile profile) { return profile == Profile::Paper ? "paper_basic" : "desk_basic"; }

TrainConfig preset_config(std::string_view name) {
  if (name == "desk_basic") return TrainConfig::desk_basic();
  if (name == "paper_basic") return TrainConfig::paper_basic();
  if (name == "paper_health") return TrainConfig::paper_health();
  throw Error(ErrorKind::InvalidArgument, "unknown preset " + std::string(name));
}

Setup load_setup(const std::optional<fs::path>& config_path, const std::optional<fs::path>& scenario_path) {
  Setup s;
  if (config_path) s.config = load_config(*config_path);
  if (scenario_path) {
    s.config.scenario_path = scenario_path->string();
    s.scenario = load_scenario(*scenario_path);
  } else if (!s.config.scenario_path.empty()) {
    s.scenario = load_scenario(s.config.scenario_path);
  } else {
    s.scenario = parse_scenario(bundled_basic_scenario());
  }
  return s;
}

std::vector<long long> parse_int_list(std::string_view list) {
  std::vector<long long> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string item(list.substr(pos, comma - pos));
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw Error(ErrorKind::InvalidArgument, "bad integer list: " + std::string(list));
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

std::vector<Resolution> parse_resolutions(std::string_view list) {
  std::vector<Resolution> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string item(list.substr(pos, comma - pos));
    Resolution r;
    char x = 0, extra = 0;
    if (std::sscanf(item.c_str(), "%d%c%d%c", &r.width, &x, &r.height, &extra) != 3 || x != 'x' || r.width < 1 ||
        r.height < 1)
      throw Error(ErrorKind::InvalidArgument, "bad resolution " + item + " (want WxH)");
    out.push_back(r);
    pos = comma + 1;
  }
  return out;
}

// ---- bench

std::vector<BenchRow> run_benchmark(const Setup& setup, std::span<const Resolution> resolutions, DepthSelection depth,
                                    double seconds_per_cell) {
  if (!(seconds_per_cell > 0.0)) throw Error(ErrorKind::InvalidArgument, "seconds per cell must be positive");
  std::vector<bool> flags;
  if (depth != DepthSelection::On) flags.push_back(false);
  if (depth != DepthSelection::Off) flags.push_back(true);
  std::vector<BenchRow> rows;
  for (const Resolution& r : resolutions) {
    for (bool d : flags) {
      EnvConfig cfg = setup.config;
      cfg.width = r.width;
      cfg.height = r.height;
      cfg.channels = Channels::RGB;
      cfg.compute_depth = d;
      cfg.mode = ControlMode::SyncPlayer;
      Environment env(cfg, setup.scenario);
      const ButtonSet idle(env.button_count(), 0);
      std::uint64_t episode = 0;
      env.new_episode(episode);
      BenchRow row{r.width, r.height, d, 0.0, 0};
      using clock = std::chrono::steady_clock;
      const auto start = clock::now();
      double elapsed = 0.0;
      do {
        if (env.is_episode_finished()) env.new_episode(++episode);
        env.make_action(idle, 0);
        if (!env.is_episode_finished()) {
          const GameState s = env.get_state();
          if (s.frame.rgb.empty()) throw Error(ErrorKind::InvalidArgument, "empty frame");
        }
        ++row.frames;
        if ((row.frames & 63) == 0) elapsed = std::chrono::duration<double>(clock::now() - start).count();
      } while (elapsed < seconds_per_cell);
      elapsed = std::chrono::duration<double>(clock::now() - start).count();
      row.fps = static_cast<double>(row.frames) / elapsed;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_benchmark_csv(std::ostream& out, std::span<const BenchRow> rows) {
  out << "width,height,depth,fps\n";
  for (const BenchRow& r : rows)
    out << r.width << ',' << r.height << ',' << (r.depth ? 1 : 0) << ',' << std::fixed << std::setprecision(1) << r.fps
        << '\n';
  out << std::defaultfloat;
}

// ---- train / eval

namespace {

std::string channels_name(Channels c) { return c == Channels::GRAY ? "gray" : "rgb"; }

Channels parse_channels_name(const std::string& s) {
  if (s == "gray") return Channels::GRAY;
  if (s == "rgb") return Channels::RGB;
  throw Error(ErrorKind::CorruptCheckpoint, "unknown channels " + s);
}

double minutes_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
}

void write_curve(const fs::path& path, std::span<const CurvePoint> curve) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  f << "step,mean,sd,min,max,episodes\n";
  for (const CurvePoint& p : curve)
    f << p.step << ',' << p.stats.mean << ',' << p.stats.sd << ',' << p.stats.min << ',' << p.stats.max << ','
      << p.stats.episodes << '\n';
}

EnvProcess make_process(const Setup& setup, const TrainConfig& cfg, int skip) {
  return EnvProcess(training_env_config(setup.config, cfg), setup.scenario, skip, cfg.frame_stack, cfg.use_aux);
}

}  // namespace

void write_metadata(const fs::path& path, const CheckpointMeta& m) {
  nlohmann::json j = {
      {"preset", m.preset},
      {"seed", m.seed},
      {"config_hash", m.config_hash},
      {"skipcount", m.skipcount},
      {"width", m.width},
      {"height", m.height},
      {"channels", channels_name(m.channels)},
      {"frame_stack", m.frame_stack},
      {"use_aux", m.use_aux},
      {"steps", m.steps},
      {"episodes", m.episodes},
      {"minutes", m.minutes},
  };
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  f << j.dump(2) << '\n';
}

CheckpointMeta read_metadata(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  try {
    const nlohmann::json j = nlohmann::json::parse(f);
    CheckpointMeta m;
    m.preset = j.at("preset").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::uint64_t>();
    m.skipcount = j.at("skipcount").get<int>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.channels = parse_channels_name(j.at("channels").get<std::string>());
    m.frame_stack = j.at("frame_stack").get<int>();
    m.use_aux = j.at("use_aux").get<bool>();
    m.steps = j.at("steps").get<long>();
    m.episodes = j.at("episodes").get<long>();
    m.minutes = j.at("minutes").get<double>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::CorruptCheckpoint, path.string() + ": " + e.what());
  }
}

TrainOutcome run_train(const TrainJob& job, const TrainProgress& progress) {
  const auto t0 = std::chrono::steady_clock::now();
  job.train.validate();
  fs::create_directories(job.out_dir);
  EnvProcess proc = make_process(job.setup, job.train, job.train.skipcount);
  EnvProcess eval_proc = make_process(job.setup, job.train, job.train.skipcount);
  TrainOutcome o{train(proc, &eval_proc, job.train, job.seed, progress), job.out_dir / "checkpoint.rdqn",
                 job.out_dir / "curve.csv", job.out_dir / "metadata.json"};
  save_checkpoint(o.checkpoint, o.result.net);
  write_curve(o.curve, o.result.curve);
  CheckpointMeta m;
  m.preset = job.preset;
  m.seed = job.seed;
  m.config_hash = config_hash(training_env_config(job.setup.config, job.train), job.setup.scenario);
  m.skipcount = job.train.skipcount;
  m.width = job.train.width;
  m.height = job.train.height;
  m.channels = job.train.channels;
  m.frame_stack = job.train.frame_stack;
  m.use_aux = job.train.use_aux;
  m.steps = job.train.total_steps;
  m.episodes = o.result.episodes;
  m.minutes = minutes_since(t0);
  write_metadata(o.metadata, m);
  return o;
}

EvalRow run_eval(const EvalJob& job) {
  if (job.episodes < 1) throw Error(ErrorKind::InvalidArgument, "episodes must be at least 1");
  if (!fs::exists(job.checkpoint)) throw Error(ErrorKind::IoError, "no checkpoint at " + job.checkpoint.string());
  Network<float> net = load_checkpoint(job.checkpoint);
  const CheckpointMeta meta = read_metadata(job.checkpoint.parent_path() / "metadata.json");
  TrainConfig cfg;
  cfg.width = meta.width;
  cfg.height = meta.height;
  cfg.channels = meta.channels;
  cfg.frame_stack = meta.frame_stack;
  cfg.use_aux = meta.use_aux;
  cfg.skipcount = job.skipcount.value_or(meta.skipcount);
  EnvProcess proc = make_process(job.setup, cfg, cfg.skipcount);
  const ObsSpec spec = proc.spec();
  if (!(spec.input() == net.input()) || spec.actions != net.output_size())
    throw Error(ErrorKind::ShapeMismatch, "checkpoint does not fit the scenario's observations");

  EvalRow row{cfg.skipcount, evaluate(net, proc, job.episodes, job.seed)};
  if (job.record_path) {
    // Rerun episode 0 under the recorder; evaluation is deterministic, so it
    // is the same episode that was scored.
    EpisodeRecorder recorder(proc.environment());
    Observation obs = proc.reset(derive_seed(job.seed, 0));
    recorder.begin();
    const std::size_t buttons = proc.environment().button_count();
    for (;;) {
      const int a = greedy_action(net, obs, spec);
      const std::uint32_t before = proc.environment().tick();
      DecisionProcess::Step s = proc.step(a);
      recorder.note_decision(before, cfg.skipcount, ButtonSet::from_action(buttons, a).mask(), s.reward);
      if (s.terminal) break;
      obs = std::move(s.next);
    }
    save_recording(*job.record_path, recorder.snapshot());
  }
  return row;
}

void write_eval_csv_header(std::ostream& out) { out << "checkpoint,skipcount,episodes,mean,sd,min,max\n"; }

void write_eval_csv_row(std::ostream& out, const fs::path& checkpoint, const EvalRow& r) {
  out << checkpoint.string() << ',' << r.skipcount << ',' << r.stats.episodes << ',' << r.stats.mean << ','
      << r.stats.sd << ',' << r.stats.min << ',' << r.stats.max << '\n';
}

// ---- skipgrid

std::vector<SkipGridRow> run_skipgrid(const ExperimentSpec& spec, std::ostream* log) {
  if (spec.skipcounts.empty()) throw Error(ErrorKind::InvalidArgument, "skipgrid needs at least one skipcount");
  if (spec.seeds.empty()) throw Error(ErrorKind::InvalidArgument, "skipgrid needs at least one seed");
  std::vector<SkipGridRow> rows;
  for (int skip : spec.skipcounts) {
    for (std::uint64_t seed : spec.seeds) {
      const auto t0 = std::chrono::steady_clock::now();
      TrainConfig cfg = spec.train;
      cfg.skipcount = skip;
      EnvProcess proc = make_process(spec.setup, cfg, skip);
      EnvProcess eval_proc = make_process(spec.setup, cfg, skip);
      TrainResult r = train(proc, &eval_proc, cfg, seed);
      SkipGridRow row;
      row.skipcount = skip;
      row.seed = seed;
      row.episodes = r.episodes;
      row.native = evaluate(r.net, eval_proc, spec.eval_episodes, cfg.eval_seed).mean;
      EnvProcess p0 = make_process(spec.setup, cfg, 0);
      row.skip0 = evaluate(r.net, p0, spec.eval_episodes, cfg.eval_seed).mean;
      EnvProcess p10 = make_process(spec.setup, cfg, 10);
      row.skip10 = evaluate(r.net, p10, spec.eval_episodes, cfg.eval_seed).mean;
      row.minutes = minutes_since(t0);
      if (!spec.out_dir.empty()) {
        const fs::path dir = spec.out_dir / ("skip" + std::to_string(skip) + "_seed" + std::to_string(seed));
        fs::create_directories(dir);
        save_checkpoint(dir / "checkpoint.rdqn", r.net);
        write_curve(dir / "curve.csv", r.curve);
        CheckpointMeta m{spec.preset, seed, config_hash(training_env_config(spec.setup.config, cfg), spec.setup.scenario),
                         skip, cfg.width, cfg.height, cfg.channels, cfg.frame_stack, cfg.use_aux, cfg.total_steps,
                         r.episodes, row.minutes};
        write_metadata(dir / "metadata.json", m);
      }
      if (log)
        *log << "skip " << skip << " seed " << seed << ": native " << row.native << ", skip0 " << row.skip0
             << ", skip10 " << row.skip10 << ", " << row.episodes << " episodes, " << row.minutes << " min\n";
      rows.push_back(row);
    }
  }
  return rows;
}

void write_skipgrid_csv(std::ostream& out, std::span<const SkipGridRow> rows) {
  out << "skipcount,seed,native,skip0,skip10,episodes,minutes\n";
  for (const SkipGridRow& r : rows)
    out << r.skipcount << ',' << r.seed << ',' << r.native << ',' << r.skip0 << ',' << r.skip10 << ',' << r.episodes
        << ',' << r.minutes << '\n';
}

// ---- argument parsing

namespace {

struct Common {
  std::optional<fs::path> config;
  std::optional<fs::path> scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> skip;
  std::optional<long> steps;
  std::optional<fs::path> out;

  void add_to(CLI::App* app, bool with_skip_steps) {
    app->add_option("--config", config, "Environment .cfg file");
    app->add_option("--scenario", scenario, "Scenario .scn file (overrides the config's)");
    app->add_option("--seed", seed, "Master seed");
    if (with_skip_steps) {
      app->add_option("--skip", skip, "Skipcount")->check(CLI::Range(0, 100));
      app->add_option("--steps", steps, "Training steps")->check(CLI::PositiveNumber);
    }
    app->add_option("--out", out, "Output path");
  }
  Setup setup() const { return load_setup(config, scenario); }
};

TrainConfig resolve_preset(const std::optional<std::string>& preset, std::string& name) {
  name = preset ? *preset : std::string(default_preset(profile_from_environment()));
  return preset_config(name);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  return f;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"raydoom: raycast shooter research platform"};
  app.require_subcommand(1);

  // bench
  Common bench_c;
  std::string bench_res = "160x120,320x240,640x480";
  std::string bench_depth = "both";
  double bench_seconds = 2.0;
  CLI::App* bench = app.add_subcommand("bench", "Frames per second by resolution and depth");
  bench_c.add_to(bench, false);
  bench->add_option("--resolutions", bench_res, "Comma-separated WxH list");
  bench->add_option("--depth", bench_depth, "off, on or both")->check(CLI::IsMember({"off", "on", "both"}));
  bench->add_option("--seconds", bench_seconds, "Seconds per cell")->check(CLI::PositiveNumber);

  // train
  Common train_c;
  std::optional<std::string> train_preset;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a Q-network; writes checkpoint, curve and metadata");
  train_c.add_to(train_cmd, true);
  train_cmd->add_option("--preset", train_preset, "desk_basic, paper_basic or paper_health");

  // eval
  Common eval_c;
  fs::path eval_ckpt;
  int eval_episodes = 100;
  std::optional<fs::path> eval_record;
  CLI::App* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval_c.add_to(eval, true);
  eval->add_option("checkpoint", eval_ckpt, "checkpoint.rdqn (metadata.json must sit next to it)")->required();
  eval->add_option("--episodes", eval_episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--record", eval_record, "Record the first episode here");

  // skipgrid
  Common grid_c;
  std::optional<std::string> grid_preset;
  std::string grid_skips = "0,4,10";
  std::string grid_seeds = "1";
  int grid_episodes = 100;
  CLI::App* grid = app.add_subcommand("skipgrid", "Train one agent per (skipcount, seed) and cross-evaluate");
  grid_c.add_to(grid, true);
  grid->add_option("--preset", grid_preset, "desk_basic, paper_basic or paper_health");
  grid->add_option("--skips", grid_skips, "Comma-separated skipcounts");
  grid->add_option("--seeds", grid_seeds, "Comma-separated seeds");
  grid->add_option("--episodes", grid_episodes, "Evaluation episodes per column")->check(CLI::PositiveNumber);

  // replay
  Common replay_c;
  fs::path replay_file;
  CLI::App* replay = app.add_subcommand("replay", "Re-execute a recording and verify every frame hash");
  replay_c.add_to(replay, false);
  replay->add_option("recording", replay_file, "Recording (.rdrc)")->required();

  // export-frame
  Common export_c;
  int export_tics = 0;
  CLI::App* exportf = app.add_subcommand("export-frame", "Write one frame as PNG (rgb) and PGM (depth)");
  export_c.add_to(exportf, false);
  exportf->add_option("--tics", export_tics, "Idle tics before the capture")->check(CLI::NonNegativeNumber);

  // spectate
  Common spec_c;
  std::uint16_t spec_port = 7777;
  std::string spec_bind = "127.0.0.1";
  std::optional<fs::path> spec_record;
  int spec_episodes = 1;
  CLI::App* spectate = app.add_subcommand("spectate", "Serve a spectator mode to one client");
  spec_c.add_to(spectate, false);
  spectate->add_option("--port", spec_port, "TCP port (0 picks one)");
  spectate->add_option("--bind", spec_bind, "Bind address");
  spectate->add_option("--record", spec_record, "Recording path for the first episode");
  spectate->add_option("--episodes", spec_episodes, "Episodes to serve")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*bench) {
      const Setup s = bench_c.setup();
      const auto res = parse_resolutions(bench_res);
      const DepthSelection d =
          bench_depth == "off" ? DepthSelection::Off : bench_depth == "on" ? DepthSelection::On : DepthSelection::Both;
      const auto rows = run_benchmark(s, res, d, bench_seconds);
      write_benchmark_csv(out, rows);
      if (bench_c.out) {
        std::ofstream f = open_out(*bench_c.out);
        write_benchmark_csv(f, rows);
      }
      return kExitOk;
    }

    if (*train_cmd) {
      TrainJob job;
      job.setup = train_c.setup();
      job.train = resolve_preset(train_preset, job.preset);
      if (train_c.skip) job.train.skipcount = *train_c.skip;
      if (train_c.steps) job.train.total_steps = *train_c.steps;
      job.seed = train_c.seed.value_or(1);
      job.out_dir = train_c.out.value_or("train_out");
      out << "train preset " << job.preset << " seed " << job.seed << " config hash " << std::hex
          << config_hash(training_env_config(job.setup.config, job.train), job.setup.scenario) << std::dec << '\n';
      const TrainOutcome o = run_train(job, [&](const CurvePoint& p) {
        out << "step " << p.step << " mean " << p.stats.mean << " sd " << p.stats.sd << '\n' << std::flush;
      });
      out << "episodes " << o.result.episodes << " seconds " << o.result.seconds << '\n'
          << "wrote " << o.checkpoint.string() << ", " << o.curve.string() << ", " << o.metadata.string() << '\n';
      return kExitOk;
    }

    if (*eval) {
      EvalJob job;
      job.setup = eval_c.setup();
      job.checkpoint = eval_ckpt;
      job.episodes = eval_episodes;
      job.skipcount = eval_c.skip;
      if (eval_c.seed) job.seed = *eval_c.seed;
      job.record_path = eval_record;
      const EvalRow row = run_eval(job);
      out << "skip " << row.skipcount << " episodes " << row.stats.episodes << " mean " << row.stats.mean << " sd "
          << row.stats.sd << " min " << row.stats.min << " max " << row.stats.max << '\n';
      if (eval_c.out) {
        const bool fresh = !fs::exists(*eval_c.out) || fs::file_size(*eval_c.out) == 0;
        if (eval_c.out->has_parent_path()) fs::create_directories(eval_c.out->parent_path());
        std::ofstream f(*eval_c.out, std::ios::app);
        if (!f) throw Error(ErrorKind::IoError, "cannot write " + eval_c.out->string());
        if (fresh) write_eval_csv_header(f);
        write_eval_csv_row(f, eval_ckpt, row);
      }
      return kExitOk;
    }

    if (*grid) {
      ExperimentSpec spec;
      spec.setup = grid_c.setup();
      spec.train = resolve_preset(grid_preset, spec.preset);
      if (grid_c.steps) spec.train.total_steps = *grid_c.steps;
      for (long long v : parse_int_list(grid_skips)) {
        if (v < 0 || v > 100) throw Error(ErrorKind::InvalidArgument, "skipcount out of range");
        spec.skipcounts.push_back(static_cast<int>(v));
      }
      for (long long v : parse_int_list(grid_seeds)) spec.seeds.push_back(static_cast<std::uint64_t>(v));
      spec.eval_episodes = grid_episodes;
      spec.out_dir = grid_c.out.value_or("skipgrid_out");
      const auto rows = run_skipgrid(spec, &out);
      write_skipgrid_csv(out, rows);
      std::ofstream f = open_out(spec.out_dir / "skipgrid.csv");
      write_skipgrid_csv(f, rows);
      return kExitOk;
    }

    if (*replay) {
      const Setup s = replay_c.setup();
      const DecodedRecording d = load_recording(replay_file);
      const ReplayReport r = replay_recording(d, s.config, s.scenario);
      out << "decisions " << r.decisions << " tics checked " << r.tics_checked << " checksum "
          << (r.checksum_ok ? "ok" : "BAD") << " hashes " << (r.hashes_match ? "match" : "MISMATCH") << " reward "
          << (r.reward_match ? "match" : "MISMATCH") << " (recorded " << r.recorded_total << ", replayed "
          << r.replayed_total << ")\n";
      if (r.ok()) return kExitOk;
      err << "error: " << error_kind_name(ErrorKind::HashMismatch) << ": first divergent tick "
          << (r.first_mismatch_tick ? std::to_string(*r.first_mismatch_tick) : std::string("none")) << '\n';
      return kExitHashMismatch;
    }

    if (*exportf) {
      Setup s = export_c.setup();
      s.config.mode = ControlMode::SyncPlayer;
      s.config.compute_depth = true;
      Environment env(s.config, s.scenario);
      env.new_episode(export_c.seed);
      const ButtonSet idle(env.button_count(), 0);
      for (int i = 0; i < export_tics && !env.is_episode_finished(); ++i) env.make_action(idle, 0);
      const Frame frame = env.render_world(env.world_snapshot());
      const fs::path stem = export_c.out.value_or("frame");
      if (stem.has_parent_path()) fs::create_directories(stem.parent_path());
      fs::path png = stem, pgm = stem;
      png += ".png";
      pgm += ".pgm";
      write_png(png, frame);
      write_pgm(pgm, frame);
      out << "wrote " << png.string() << " and " << pgm.string() << '\n';
      return kExitOk;
    }

    if (*spectate) {
      spectate::ServerOptions opts;
      const Setup s = spec_c.setup();
      opts.config = s.config;
      opts.scenario = s.scenario;
      opts.bind_address = spec_bind;
      opts.port = spec_port;
      opts.record_path = spec_record.value_or(fs::path{});
      opts.episodes = spec_episodes;
      opts.seed = spec_c.seed;
      spectate::SpectateServer server(opts);
      out << "listening on " << spec_bind << ':' << server.port() << " (" << mode_name(opts.config.mode) << ")\n"
          << std::flush;
      const spectate::ServerReport report = server.run();
      for (std::size_t i = 0; i < report.episodes.size(); ++i)
        out << "episode " << i << " reward " << report.episodes[i].total_reward << " score "
            << report.episodes[i].total_score << " tick " << report.episodes[i].tick << '\n';
      for (const fs::path& p : report.recordings) out << "recorded " << p.string() << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << error_kind_name(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::InvalidArgument ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace raydoom::cli
