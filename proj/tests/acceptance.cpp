// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"
#include "oracles.hpp"
#include "raydoom/commands.hpp"
#include "raydoom/deepq/train.hpp"
#include "raydoom/error.hpp"
#include "raydoom/recording.hpp"
#include "raydoom/render.hpp"

using namespace raydoom;
using namespace raydoom::deepq;
namespace fs = std::filesystem;

namespace {

// Pinned limits.
constexpr double kDeterminismSeconds = 120.0;
constexpr int kDeterminismEpisodes = 100;  // per scenario
constexpr int kOracleCases = 1000;
constexpr double kOracleTolerance = 1e-3;
constexpr double kOracleSeconds = 60.0;
constexpr double kGradientTolerance = 1e-6;
constexpr double kGradientSeconds = 60.0;
constexpr double kChainTolerance = 1e-2;
constexpr long kChainUpdates = 50000;
constexpr double kChainSeconds = 300.0;
constexpr int kDeskTestEpisodes = 300;
constexpr double kDeskMinMean = 40.0;
constexpr double kDeskMinMargin = 50.0;
constexpr long kSkipTrendSteps = 50000;
constexpr int kSkipTrendEpisodes = 100;
constexpr double kMinFps = 7000.0;
constexpr double kFpsSlack = 0.05;
constexpr double kBenchSeconds = 2.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---- 1

struct Ledger {
  std::vector<std::uint64_t> hashes;
  std::vector<float> rewards;
  bool operator==(const Ledger&) const = default;
};

Ledger scripted_episode(Environment& env, std::uint64_t seed) {
  EpisodeRecorder recorder(env, true);
  recorder.new_episode(seed);
  SplitMix64 script(derive_seed(seed, 99));
  const auto actions = static_cast<std::uint64_t>(env.action_count());
  while (!env.is_episode_finished()) {
    const auto a = static_cast<int>(script.below(actions));
    const int skip = static_cast<int>(script.below(5));
    recorder.make_action(ButtonSet::from_action(env.button_count(), a), skip);
  }
  const Recording rec = recorder.snapshot();
  Ledger l;
  l.hashes = rec.tic_hashes;
  for (const DecisionRecord& d : rec.decisions) l.rewards.push_back(d.reward);
  return l;
}

Outcome determinism() {
  const auto start = Clock::now();
  EnvConfig c;
  c.width = 160;
  c.height = 120;
  SplitMix64 seeds(2024);
  long tics = 0;
  int mismatched = 0;
  for (std::string_view text : {bundled_basic_scenario(), bundled_health_gathering_scenario()}) {
    const ScenarioDef s = parse_scenario(text);
    Environment first(c, s), second(c, s);
    for (int i = 0; i < kDeterminismEpisodes; ++i) {
      const std::uint64_t seed = seeds.next();
      const Ledger a = scripted_episode(first, seed);
      const Ledger b = scripted_episode(second, seed);
      tics += static_cast<long>(a.hashes.size());
      if (!(a == b)) ++mismatched;
    }
  }
  const double secs = seconds_since(start);
  return {mismatched == 0 && secs < kDeterminismSeconds,
          fmt("%d episodes x 2 runs, %ld tics, %d mismatched, %.1f s (limit %.0f s)", 2 * kDeterminismEpisodes, tics,
              mismatched, secs, kDeterminismSeconds)};
}

// ---- 2

Outcome renderer_oracle() {
  const auto start = Clock::now();
  SplitMix64 rng(7);
  double worst = 0.0;
  int class_mismatch = 0;
  for (int i = 0; i < kOracleCases; ++i) {
    WorldState w;
    w.map = oracle::random_map(rng, 6 + static_cast<int>(rng.below(12)), 6 + static_cast<int>(rng.below(12)), 0.2);
    const int monsters = static_cast<int>(rng.below(4));
    for (int k = 0; k < monsters; ++k) {
      Actor m;
      m.kind = ActorKind::Monster;
      m.pos = oracle::random_floor_point(rng, w.map);
      m.radius = 0.4;
      w.monsters.push_back(m);
    }
    const Vec2 o = oracle::random_floor_point(rng, w.map);
    const double cam = rng.uniform(0.0, 2 * kPi);
    const double off = rng.uniform(-kPi / 4, kPi / 4);
    const double want = oracle::march_wall(w.map, o, cam + off) * std::cos(off);
    worst = std::max(worst, std::abs(cast_wall_ray(w.map, o, cam + off, cam).perp_distance - want));

    const HitResult got = hitscan(w, o, cam);
    const oracle::MarchHit ref = oracle::march_hitscan(w, o, cam);
    const bool same = (got.kind == HitResult::Kind::Monster) == ref.monster && (!ref.monster || got.monster == ref.index);
    if (!same) ++class_mismatch;
  }
  const double secs = seconds_since(start);
  return {worst <= kOracleTolerance && class_mismatch == 0 && secs < kOracleSeconds,
          fmt("%d cases, max perp error %.2e (tol %.0e), %d hitscan mismatches, %.1f s", kOracleCases, worst,
              kOracleTolerance, class_mismatch, secs)};
}

// ---- 3

Outcome closed_forms() {
  EnvConfig c;
  c.width = 32;
  c.height = 24;
  Environment basic(c, parse_scenario(bundled_basic_scenario()));
  int checked = 0, wrong = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed)
    for (int misses : {0, 1, 2, 4})
      for (int idle : {0, 7}) {
        const oracle::BasicEpisode ep = oracle::play_basic(basic, seed, misses, idle);
        ++checked;
        if (ep.kill_tick == 0 || ep.misses != misses || ep.score != 101.0 - ep.kill_tick - 5.0 * misses) ++wrong;
      }
  Environment health(c, parse_scenario(bundled_health_gathering_scenario()));
  int idle_wrong = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    health.new_episode(seed);
    while (!health.is_episode_finished()) health.make_action(ButtonSet(health.button_count(), 0), 0);
    if (health.get_total_score() != 284.0) ++idle_wrong;
  }
  return {wrong == 0 && idle_wrong == 0,
          fmt("basic 101-k-5m: %d/%d exact; health idle 284: %d/20 exact", checked - wrong, checked, 20 - idle_wrong)};
}

// ---- 4

double weighted(Network<double>& net, const Tensor<double>& x, const Tensor<double>* aux, const std::vector<double>& c) {
  const Tensor<double>& q = net.forward(x, aux);
  double s = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) s += c[i] * q.data[i];
  return s;
}

double worst_gradient_error(const InputSpec& in, const std::vector<LayerSpec>& layers, std::uint64_t seed) {
  constexpr double kStep = 1e-5;
  Network<double> net(in, layers);
  net.init(seed);
  SplitMix64 rng(seed + 1);
  for (std::size_t l = 0; l < net.layer_count(); ++l)
    for (double& p : net.layer(l).params()) p += rng.uniform(-0.1, 0.1);
  Tensor<double> x({2, in.channels, in.height, in.width}), aux;
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  if (in.aux > 0) {
    aux = Tensor<double>({2, in.aux});
    for (double& v : aux.data) v = rng.uniform(-1.0, 1.0);
  }
  const Tensor<double>* ap = in.aux > 0 ? &aux : nullptr;
  std::vector<double> c(2 * static_cast<std::size_t>(net.output_size()));
  for (double& v : c) v = rng.uniform(-1.0, 1.0);
  Tensor<double> upstream({2, net.output_size()});
  upstream.data = c;

  weighted(net, x, ap, c);
  net.backward(upstream, true);
  double worst = 0.0;
  const auto compare = [&](const std::vector<double>& analytic, const std::vector<double>& numeric) {
    for (std::size_t i = 0; i < analytic.size(); ++i) worst = std::max(worst, oracle::relative_error(analytic[i], numeric[i]));
  };
  std::vector<double> dx(net.input_grad().data.begin(), net.input_grad().data.end());
  std::vector<double> da(in.aux > 0 ? net.aux_grad().data : std::vector<double>{});
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto params = net.layer(l).params();
    const std::vector<double> analytic(net.layer(l).grads().begin(), net.layer(l).grads().end());
    const std::vector<double> start(params.begin(), params.end());
    compare(analytic, oracle::numeric_gradient(
                          [&](const std::vector<double>& p) {
                            std::copy(p.begin(), p.end(), params.begin());
                            return weighted(net, x, ap, c);
                          },
                          start, kStep));
    std::copy(start.begin(), start.end(), params.begin());
  }
  compare(dx, oracle::numeric_gradient(
                  [&](const std::vector<double>& v) {
                    Tensor<double> xx = x;
                    xx.data = v;
                    return weighted(net, xx, ap, c);
                  },
                  x.data, kStep));
  if (in.aux > 0)
    compare(da, oracle::numeric_gradient(
                    [&](const std::vector<double>& v) {
                      Tensor<double> aa = aux;
                      aa.data = v;
                      return weighted(net, x, &aa, c);
                    },
                    aux.data, kStep));
  return worst;
}

Outcome gradients() {
  using L = LayerSpec;
  const auto start = Clock::now();
  struct Case {
    const char* name;
    InputSpec in;
    std::vector<LayerSpec> layers;
  };
  const std::vector<Case> cases = {
      {"conv", {2, 7, 6, 0}, {L::conv(3, 3), L::linear_out(3)}},
      {"maxpool", {1, 8, 8, 0}, {L::conv(2, 3), L::maxpool(2), L::linear_out(2)}},
      {"dense", {1, 1, 11, 0}, {L::dense(6), L::linear_out(3)}},
      {"leaky", {2, 5, 5, 0}, {L::conv(3, 2), L::leaky(), L::dense(4), L::leaky(0.3), L::linear_out(2)}},
      {"aux-concat", {1, 6, 7, 3}, {L::conv(2, 3), L::concat_aux(), L::dense(5), L::leaky(), L::linear_out(4)}},
  };
  double worst = 0.0;
  std::string detail;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const double e = worst_gradient_error(cases[i].in, cases[i].layers, 31 + i);
    worst = std::max(worst, e);
    detail += fmt("%s %.1e ", cases[i].name, e);
  }
  const double secs = seconds_since(start);
  return {worst < kGradientTolerance && secs < kGradientSeconds,
          detail + fmt("(tol %.0e), %.1f s", kGradientTolerance, secs)};
}

// ---- 5

Outcome chain() {
  const auto start = Clock::now();
  ChainMdp mdp;
  TrainConfig c;
  c.gamma = 0.9;
  c.learning_rate = 0.05;
  c.replay_capacity = 1000;
  c.batch_size = 16;
  c.eps_start = 1.0;
  c.eps_end = 1.0;
  c.eps_decay_start = 0;
  c.eps_decay_end = 1;
  c.test_every_steps = 0;
  c.total_steps = kChainUpdates + c.batch_size - 1;
  const TrainResult r = train(Network<float>(mdp.spec().input(), {LayerSpec::linear_out(2)}), mdp, nullptr, c, 2);
  Network<float> net = r.net;
  const auto q_star = oracle::chain_q_star(c.gamma);
  double worst = 0.0;
  for (int s = 0; s < ChainMdp::kStates; ++s) {
    const Observation o = ChainMdp::encode(s);
    const Observation* one[] = {&o};
    Tensor<float> x, aux;
    observations_to_tensor(one, mdp.spec(), x, aux);
    const Tensor<float>& q = net.forward(x);
    for (int a = 0; a < 2; ++a) worst = std::max(worst, std::abs(q.row(0)[a] - q_star[s][a]));
  }
  const double secs = seconds_since(start);
  return {r.optimizer_steps == kChainUpdates && worst <= kChainTolerance && secs < kChainSeconds,
          fmt("%ld updates, max |Q - Q*| %.2e (tol %.0e), %.1f s", r.optimizer_steps, worst, kChainTolerance, secs)};
}

// ---- 6, 7

struct DeskRun {
  ScoreStats trained;
  long episodes = 0;
  double seconds = 0.0;
};

DeskRun desk_run(int skip, long steps, std::uint64_t seed, int test_episodes) {
  TrainConfig cfg = TrainConfig::desk_basic();
  cfg.skipcount = skip;
  cfg.total_steps = steps;
  cfg.test_every_steps = 0;
  const EnvConfig env = training_env_config(EnvConfig{}, cfg);
  const ScenarioDef s = parse_scenario(bundled_basic_scenario());
  EnvProcess proc(env, s, skip);
  const TrainResult r = train(proc, nullptr, cfg, seed);
  EnvProcess eval(env, s, skip);
  Network<float> net = r.net;
  return {evaluate(net, eval, test_episodes, cfg.eval_seed), r.episodes, r.seconds};
}

Outcome desk_learning() {
  const auto start = Clock::now();
  const DeskRun run = desk_run(4, TrainConfig::desk_basic().total_steps, 1, kDeskTestEpisodes);
  const TrainConfig cfg = TrainConfig::desk_basic();
  EnvProcess eval(training_env_config(EnvConfig{}, cfg), parse_scenario(bundled_basic_scenario()), 4);
  const ScoreStats random = evaluate_random(eval, kDeskTestEpisodes, cfg.eval_seed, 5);
  const bool pass = run.trained.mean >= kDeskMinMean && run.trained.mean >= random.mean + kDeskMinMargin;
  return {pass, fmt("trained %.1f +- %.1f vs random %.1f over %d episodes (need >= %.0f and margin >= %.0f), %.0f s",
                    run.trained.mean, run.trained.sd, random.mean, kDeskTestEpisodes, kDeskMinMean, kDeskMinMargin,
                    seconds_since(start))};
}

Outcome skip_trend() {
  const auto start = Clock::now();
  int wins = 0;
  bool episodes_increase = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const DeskRun s0 = desk_run(0, kSkipTrendSteps, seed, kSkipTrendEpisodes);
    const DeskRun s4 = desk_run(4, kSkipTrendSteps, seed, kSkipTrendEpisodes);
    if (s4.trained.mean >= s0.trained.mean) ++wins;
    if (!(s4.episodes > s0.episodes)) episodes_increase = false;
    detail += fmt("seed %d: skip0 %.1f (%ld ep), skip4 %.1f (%ld ep); ", static_cast<int>(seed), s0.trained.mean,
                  s0.episodes, s4.trained.mean, s4.episodes);
  }
  return {wins >= 2 && episodes_increase,
          detail + fmt("skip4 >= skip0 in %d/3, %.0f s", wins, seconds_since(start))};
}

// ---- 8

Outcome throughput() {
  const cli::Setup setup = cli::load_setup(std::nullopt, std::nullopt);
  const std::vector<cli::Resolution> res = {{160, 120}, {320, 240}, {640, 480}};
  const auto rows = cli::run_benchmark(setup, res, cli::DepthSelection::Both, kBenchSeconds);
  double fps320 = 0.0;
  bool depth_ok = true, monotone = true;
  std::string detail;
  for (std::size_t i = 0; i < res.size(); ++i) {
    const cli::BenchRow& off = rows[2 * i];
    const cli::BenchRow& on = rows[2 * i + 1];
    if (off.width == 320 && off.height == 240) fps320 = off.fps;
    if (on.fps > off.fps) depth_ok = false;
    if (i > 0) {
      if (off.fps > rows[2 * (i - 1)].fps * (1.0 + kFpsSlack)) monotone = false;
      if (on.fps > rows[2 * (i - 1) + 1].fps * (1.0 + kFpsSlack)) monotone = false;
    }
    detail += fmt("%dx%d %.0f/%.0f ", off.width, off.height, off.fps, on.fps);
  }
  return {fps320 >= kMinFps && depth_ok && monotone,
          detail + fmt("fps off/on; 320x240 needs >= %.0f; depth<=plain %s; monotone %s", kMinFps,
                       depth_ok ? "yes" : "no", monotone ? "yes" : "no")};
}

// ---- 9

Outcome parser_corpus() {
  int ok = 0, total = 0;
  std::string failures;
  const auto check = [&](bool good, const std::string& what) {
    ++total;
    if (good) ++ok;
    else failures += " " + what;
  };
  const fs::path data(RAYDOOM_DATA_DIR);
  check(load_scenario(data / "scenarios" / "basic.scn") == corpus::expected_basic(), "basic.scn");
  check(load_scenario(data / "scenarios" / "health_gathering.scn") == corpus::expected_health_gathering(),
        "health_gathering.scn");
  check(parse_scenario(bundled_basic_scenario()) == corpus::expected_basic(), "bundled basic");
  check(parse_scenario(bundled_health_gathering_scenario()) == corpus::expected_health_gathering(), "bundled health");
  for (const corpus::Malformed& m : corpus::malformed()) {
    const fs::path p = fs::path(RAYDOOM_FIXTURES) / "scenarios" / (m.file + ".scn");
    bool good = false;
    try {
      std::ifstream f(p, std::ios::binary);
      if (!f) throw Error(ErrorKind::IoError, "missing fixture");
      std::stringstream ss;
      ss << f.rdbuf();
      parse_scenario(ss.str());
    } catch (const Error& e) {
      good = e.kind() == m.kind && e.line() == m.line;
    }
    check(good, m.file);
  }
  return {ok == total && corpus::malformed().size() == 20,
          fmt("%d/%d exact (%zu malformed fixtures)", ok, total, corpus::malformed().size()) + failures};
}

// ---- 10

int cli_replay(const fs::path& rec, const std::string& cfg) {
  const std::string a0 = "raydoom", a1 = "replay", a2 = rec.string(), a3 = "--config";
  const char* argv[] = {a0.c_str(), a1.c_str(), a2.c_str(), a3.c_str(), cfg.c_str()};
  std::ostringstream out, err;
  return cli::run(5, argv, out, err);
}

Outcome replay_integrity() {
  const fs::path dir = fs::temp_directory_path() / "raydoom_acceptance_replay";
  fs::create_directories(dir);
  struct Job {
    std::string cfg;
    std::uint64_t seed;
    int skip;
  };
  const fs::path data(RAYDOOM_DATA_DIR);
  const std::vector<Job> jobs = {{(data / "config" / "basic.cfg").string(), 11, 4},
                                 {(data / "config" / "health_gathering.cfg").string(), 12, 2}};
  int verified = 0;
  std::size_t tampers = 0, detected = 0;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const cli::Setup s = cli::load_setup(fs::path(jobs[j].cfg), std::nullopt);
    Environment env(s.config, s.scenario);
    EpisodeRecorder recorder(env);
    recorder.new_episode(jobs[j].seed);
    SplitMix64 script(jobs[j].seed);
    while (!env.is_episode_finished())
      recorder.make_action(ButtonSet::from_action(env.button_count(), static_cast<int>(script.below(env.action_count()))),
                           jobs[j].skip);
    const fs::path rec = dir / ("ep" + std::to_string(j) + ".rdrc");
    save_recording(rec, recorder.snapshot());
    if (cli_replay(rec, jobs[j].cfg) == cli::kExitOk) ++verified;
  }

  // Every single-byte tamper of a small recording, each replayed by the command.
  const fs::path small_cfg = dir / "small.cfg";
  {
    std::ofstream f(small_cfg);
    f << "resolution = 16x12\nskipcount = 4\n";
  }
  const cli::Setup s = cli::load_setup(small_cfg, std::nullopt);
  Environment env(s.config, s.scenario);
  EpisodeRecorder recorder(env);
  recorder.new_episode(13);
  SplitMix64 script(13);
  // Strafing without ATTACK runs to the timeout.
  while (!env.is_episode_finished()) recorder.make_action(ButtonSet(3, static_cast<std::uint16_t>(script.below(3))), 4);
  const std::vector<std::uint8_t> bytes = encode_recording(recorder.snapshot());
  const fs::path tampered = dir / "tampered.rdrc";
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::vector<std::uint8_t> t = bytes;
    t[i] ^= static_cast<std::uint8_t>(1u << (i % 8));
    {
      std::ofstream f(tampered, std::ios::binary);
      f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size()));
    }
    ++tampers;
    if (cli_replay(tampered, small_cfg.string()) != cli::kExitOk) ++detected;
  }
  fs::remove_all(dir);
  return {verified == static_cast<int>(jobs.size()) && detected == tampers,
          fmt("%d/%zu recordings verified; %zu/%zu single-byte tampers detected", verified, jobs.size(), detected,
              tampers)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"determinism", determinism},       {"renderer oracle", renderer_oracle}, {"reward closed forms", closed_forms},
      {"gradient checks", gradients},     {"tabular oracle", chain},            {"desk-scale learning", desk_learning},
      {"skip trend", skip_trend},         {"throughput", throughput},          {"parser corpus", parser_corpus},
      {"replay integrity", replay_integrity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
