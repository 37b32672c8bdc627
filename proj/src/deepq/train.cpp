#include "raydoom/deepq/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_set>

#include "raydoom/error.hpp"

namespace raydoom::deepq {

std::string_view architecture_name(Architecture arch) {
  switch (arch) {
    case Architecture::Exp1: return "exp1";
    case Architecture::Exp2: return "exp2";
    case Architecture::Desk: return "desk";
  }
  return "unknown";
}

std::vector<LayerSpec> architecture_layers(Architecture arch, int n_actions) {
  switch (arch) {
    case Architecture::Exp1: return exp1_architecture(n_actions);
    case Architecture::Exp2: return exp2_architecture(n_actions);
    case Architecture::Desk: return desk_architecture(n_actions);
  }
  return {};
}

TrainConfig TrainConfig::paper_basic() {
  TrainConfig c;
  // Unscaled rewards of order 100 diverge under plain SGD at lr 0.01.
  c.reward_scale = 0.01;
  return c;
}

TrainConfig TrainConfig::paper_health() {
  TrainConfig c;
  c.gamma = 1.0;
  c.learning_rate = 0.00001;
  c.batch_size = 64;
  c.eps_decay_start = 4000;
  c.eps_decay_end = 104000;
  c.total_steps = 1000000;
  c.test_episodes = 200;
  c.optimizer = OptimizerKind::RmsProp;
  c.skipcount = 10;
  c.frame_stack = 4;
  c.use_aux = true;
  c.width = 120;
  c.height = 45;
  c.arch = Architecture::Exp2;
  return c;
}

TrainConfig TrainConfig::desk_basic() {
  TrainConfig c;
  c.batch_size = 32;
  c.eps_decay_start = 20000;
  c.eps_decay_end = 40000;
  c.total_steps = 100000;
  c.test_episodes = 100;
  c.width = 30;
  c.height = 23;
  c.channels = Channels::GRAY;
  c.arch = Architecture::Desk;
  c.reward_scale = 0.01;
  return c;
}

void TrainConfig::validate() const {
  const auto bad = [](const std::string& what) { throw Error(ErrorKind::InvalidConfig, what); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) bad("gamma must be in [0, 1]");
  if (!(learning_rate > 0.0)) bad("learning rate must be positive");
  if (replay_capacity < 1) bad("replay capacity must be positive");
  if (batch_size < 1 || batch_size > replay_capacity) bad("batch size must be in [1, replay capacity]");
  if (!(eps_end <= eps_start) || eps_end < 0.0 || eps_start > 1.0) bad("epsilon endpoints out of order");
  if (eps_decay_start < 0 || eps_decay_start >= eps_decay_end) bad("epsilon decay must start before it ends");
  if (total_steps < 0) bad("total steps must be non-negative");
  if (test_every_steps < 0 || (test_every_steps > 0 && test_episodes < 1)) bad("bad test schedule");
  if (!(rms_decay >= 0.0 && rms_decay < 1.0) || !(rms_epsilon > 0.0)) bad("bad RMSProp constants");
  if (skipcount < 0) bad("skipcount must be non-negative");
  if (frame_stack < 1) bad("frame stack must be at least 1");
  if (width < 4 || height < 4) bad("input resolution too small");
  if (!(reward_scale > 0.0)) bad("reward scale must be positive");
}

double epsilon(const TrainConfig& cfg, long step) {
  if (step <= cfg.eps_decay_start) return cfg.eps_start;
  if (step >= cfg.eps_decay_end) return cfg.eps_end;
  const double t = static_cast<double>(step - cfg.eps_decay_start) / static_cast<double>(cfg.eps_decay_end - cfg.eps_decay_start);
  return cfg.eps_start + t * (cfg.eps_end - cfg.eps_start);
}

void observations_to_tensor(std::span<const Observation* const> obs, const ObsSpec& spec, Tensor<float>& x,
                            Tensor<float>& aux) {
  const int n = static_cast<int>(obs.size());
  const int c = spec.channels, h = spec.height, w = spec.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  x.resize({n, c * spec.stack, h, w});
  if (spec.aux > 0) aux.resize({n, spec.aux});
  else aux.resize({});
  constexpr float kScale = 1.0f / 255.0f;
  for (int b = 0; b < n; ++b) {
    const Observation& o = *obs[b];
    if (static_cast<int>(o.frames.size()) != spec.stack || static_cast<int>(o.aux.size()) != spec.aux)
      throw Error(ErrorKind::ShapeMismatch, "observation does not match the process spec");
    float* dst = x.row(b);
    for (int s = 0; s < spec.stack; ++s) {
      const std::vector<std::uint8_t>& f = *o.frames[s];
      if (f.size() != plane * c) throw Error(ErrorKind::ShapeMismatch, "frame size does not match the process spec");
      for (int ch = 0; ch < c; ++ch) {
        float* out = dst + (static_cast<std::size_t>(s) * c + ch) * plane;
        for (std::size_t p = 0; p < plane; ++p) out[p] = f[p * c + ch] * kScale;
      }
    }
    if (spec.aux > 0) std::copy(o.aux.begin(), o.aux.end(), aux.row(b));
  }
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorKind::InvalidArgument, "replay capacity must be positive");
  items_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Transition t) {
  ++pushes_;
  if (items_.size() < capacity_) {
    items_.push_back(std::move(t));
    return;
  }
  items_[cursor_] = std::move(t);
  cursor_ = (cursor_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw Error(ErrorKind::InvalidArgument, "replay index out of range");
  return items_[items_.size() < capacity_ ? i : (cursor_ + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, SplitMix64& rng) const {
  if (n > items_.size()) throw Error(ErrorKind::InvalidArgument, "sample larger than the buffer");
  // Floyd's algorithm: n distinct values from [0, size).
  const std::size_t size = items_.size();
  std::vector<std::size_t> out;
  out.reserve(n);
  std::unordered_set<std::size_t> seen;
  for (std::size_t j = size - n; j < size; ++j) {
    const std::size_t t = rng.below(j + 1);
    const std::size_t pick = seen.count(t) ? j : t;
    seen.insert(pick);
    out.push_back(pick);
  }
  return out;
}

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr) {
  const T a = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= a * grads[i];
}

template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grads, std::span<T> state, double lr, double rho,
                  double eps) {
  const T a = static_cast<T>(lr), r = static_cast<T>(rho), e = static_cast<T>(eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state[i] = r * state[i] + (T(1) - r) * g * g;
    params[i] -= a * g / std::sqrt(state[i] + e);
  }
}

template <typename T>
void Optimizer<T>::step(Network<T>& net) {
  state_.resize(net.layer_count());
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    Layer<T>& layer = net.layer(i);
    auto p = layer.params();
    if (p.empty()) continue;
    std::span<const T> g = layer.grads();
    if (kind_ == OptimizerKind::Sgd) {
      sgd_step(p, g, lr_);
    } else {
      if (state_[i].size() != p.size()) state_[i].assign(p.size(), T(0));
      rmsprop_step(p, g, std::span<T>(state_[i]), lr_, rho_, eps_);
    }
  }
}

template void sgd_step<float>(std::span<float>, std::span<const float>, double);
template void sgd_step<double>(std::span<double>, std::span<const double>, double);
template void rmsprop_step<float>(std::span<float>, std::span<const float>, std::span<float>, double, double, double);
template void rmsprop_step<double>(std::span<double>, std::span<const double>, std::span<double>, double, double,
                                   double);
template class Optimizer<float>;
template class Optimizer<double>;

namespace {

EnvConfig sync_player(EnvConfig config) {
  config.mode = ControlMode::SyncPlayer;
  return config;
}

}  // namespace

EnvProcess::EnvProcess(EnvConfig config, ScenarioDef scenario, int skipcount, int frame_stack, bool use_aux)
    : env_(sync_player(std::move(config)), std::move(scenario)), skip_(skipcount), stack_(frame_stack), use_aux_(use_aux) {
  if (skip_ < 0 || stack_ < 1) throw Error(ErrorKind::InvalidArgument, "bad skipcount or frame stack");
}

ObsSpec EnvProcess::spec() const {
  ObsSpec s;
  s.channels = env_.config().channels == Channels::RGB ? 3 : 1;
  s.height = env_.config().height;
  s.width = env_.config().width;
  s.stack = stack_;
  s.aux = use_aux_ ? static_cast<int>(env_.scenario().variables.size()) : 0;
  s.actions = static_cast<int>(env_.action_count());
  return s;
}

Observation EnvProcess::observe(bool fresh_episode) {
  GameState state = env_.get_state();
  auto frame = std::make_shared<const std::vector<std::uint8_t>>(
      std::move(state.channels == 3 ? state.frame.rgb : state.screen));
  if (fresh_episode || recent_.size() != static_cast<std::size_t>(stack_)) {
    recent_.assign(stack_, frame);
  } else {
    std::rotate(recent_.begin(), recent_.begin() + 1, recent_.end());
    recent_.back() = frame;
  }
  Observation obs;
  obs.frames = recent_;
  if (use_aux_) {
    for (const GameVariable& v : state.game_variables) {
      double scale = 1.0;
      if (v.name == "HEALTH" || v.name == "AMMO") scale = 1.0 / 100.0;
      else if (v.name == "TICK") scale = 1.0 / env_.scenario().timeout;
      obs.aux.push_back(static_cast<float>(v.value * scale));
    }
  }
  return obs;
}

Observation EnvProcess::reset(std::uint64_t seed) {
  env_.new_episode(seed);
  return observe(true);
}

DecisionProcess::Step EnvProcess::step(int action) {
  Step s;
  s.reward = env_.make_action(ButtonSet::from_action(env_.button_count(), action), skip_);
  s.terminal = env_.is_episode_finished();
  if (!s.terminal) s.next = observe(false);
  return s;
}

EnvConfig training_env_config(const EnvConfig& base, const TrainConfig& cfg) {
  EnvConfig c = base;
  c.width = cfg.width;
  c.height = cfg.height;
  c.channels = cfg.channels;
  c.compute_depth = false;
  c.mode = ControlMode::SyncPlayer;
  c.default_skipcount = std::min(cfg.skipcount, 100);
  return c;
}

Observation ChainMdp::encode(int state) {
  std::vector<std::uint8_t> bytes(kStates, 0);
  bytes[state] = 255;
  Observation o;
  o.frames.push_back(std::make_shared<const std::vector<std::uint8_t>>(std::move(bytes)));
  return o;
}

Observation ChainMdp::reset(std::uint64_t seed) {
  SplitMix64 rng(seed);
  state_ = static_cast<int>(rng.below(kStates));
  score_ = 0.0;
  return encode(state_);
}

DecisionProcess::Step ChainMdp::step(int action) {
  Step s;
  if (action == 0) {
    if (state_ == 0) {
      s.reward = 1.0;
      s.terminal = true;
    } else {
      --state_;
      s.reward = -1.0;
    }
  } else {
    if (state_ == kStates - 1) {
      s.reward = 10.0;
      s.terminal = true;
    } else {
      ++state_;
      s.reward = -1.0;
    }
  }
  score_ += s.reward;
  if (!s.terminal) s.next = encode(state_);
  return s;
}

std::vector<float> q_targets(std::span<const Transition* const> batch, Network<float>& net, double gamma,
                             const ObsSpec& spec) {
  std::vector<float> y(batch.size());
  std::vector<const Observation*> next;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    y[i] = batch[i]->reward;
    if (!batch[i]->terminal) {
      next.push_back(&batch[i]->next);
      rows.push_back(i);
    }
  }
  if (next.empty()) return y;
  Tensor<float> x, aux;
  observations_to_tensor(next, spec, x, aux);
  const Tensor<float>& q = net.forward(x, spec.aux > 0 ? &aux : nullptr);
  const int actions = q.dim(1);
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const float* row = q.row(static_cast<int>(j));
    const float best = *std::max_element(row, row + actions);
    y[rows[j]] = static_cast<float>(batch[rows[j]]->reward + gamma * best);
  }
  return y;
}

double train_batch(std::span<const Transition* const> batch, Network<float>& net, Optimizer<float>& opt,
                   double gamma, const ObsSpec& spec) {
  const std::vector<float> y = q_targets(batch, net, gamma, spec);
  std::vector<const Observation*> states;
  states.reserve(batch.size());
  for (const Transition* t : batch) states.push_back(&t->state);
  Tensor<float> x, aux;
  observations_to_tensor(states, spec, x, aux);
  const Tensor<float>& q = net.forward(x, spec.aux > 0 ? &aux : nullptr);
  Tensor<float> dq(q.shape);
  const int n = static_cast<int>(batch.size());
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    const int a = batch[i]->action;
    const float diff = q.row(i)[a] - y[i];
    loss += static_cast<double>(diff) * diff;
    dq.row(i)[a] = 2.0f * diff / static_cast<float>(n);
  }
  net.backward(dq);
  opt.step(net);
  return loss / n;
}

int greedy_action(Network<float>& net, const Observation& obs, const ObsSpec& spec) {
  const Observation* one[] = {&obs};
  Tensor<float> x, aux;
  observations_to_tensor(one, spec, x, aux);
  const Tensor<float>& q = net.forward(x, spec.aux > 0 ? &aux : nullptr);
  const float* row = q.row(0);
  return static_cast<int>(std::max_element(row, row + q.dim(1)) - row);
}

ScoreStats score_stats(std::span<const double> scores) {
  ScoreStats s;
  s.episodes = static_cast<long>(scores.size());
  if (scores.empty()) return s;
  double sum = 0.0;
  s.min = scores[0];
  s.max = scores[0];
  for (double v : scores) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  s.mean = sum / scores.size();
  double var = 0.0;
  for (double v : scores) var += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(var / scores.size());
  return s;
}

namespace {

// Guards policies that never reach a terminal state in processes without a timeout.
constexpr long kMaxEpisodeDecisions = 100000;

template <typename Policy>
ScoreStats run_episodes(DecisionProcess& proc, int episodes, std::uint64_t seed, Policy&& policy) {
  if (episodes < 1) throw Error(ErrorKind::InvalidArgument, "episodes must be at least 1");
  std::vector<double> scores;
  scores.reserve(episodes);
  for (int i = 0; i < episodes; ++i) {
    Observation obs = proc.reset(derive_seed(seed, static_cast<std::uint64_t>(i)));
    for (long d = 0; d < kMaxEpisodeDecisions; ++d) {
      DecisionProcess::Step s = proc.step(policy(obs));
      if (s.terminal) break;
      obs = std::move(s.next);
    }
    scores.push_back(proc.episode_score());
  }
  return score_stats(scores);
}

}  // namespace

ScoreStats evaluate(Network<float>& net, DecisionProcess& proc, int episodes, std::uint64_t seed) {
  const ObsSpec spec = proc.spec();
  return run_episodes(proc, episodes, seed, [&](const Observation& o) { return greedy_action(net, o, spec); });
}

ScoreStats evaluate_random(DecisionProcess& proc, int episodes, std::uint64_t seed, std::uint64_t policy_seed) {
  SplitMix64 rng(policy_seed);
  const auto actions = static_cast<std::uint64_t>(proc.spec().actions);
  return run_episodes(proc, episodes, seed, [&](const Observation&) { return static_cast<int>(rng.below(actions)); });
}

TrainResult train(DecisionProcess& proc, DecisionProcess* eval_proc, const TrainConfig& cfg, std::uint64_t seed,
                  const TrainProgress& progress) {
  const ObsSpec spec = proc.spec();
  Network<float> net(spec.input(), architecture_layers(cfg.arch, spec.actions));
  net.init(derive_seed(seed, 1));
  return train(std::move(net), proc, eval_proc, cfg, seed, progress);
}

TrainResult train(Network<float> net, DecisionProcess& proc, DecisionProcess* eval_proc, const TrainConfig& cfg,
                  std::uint64_t seed, const TrainProgress& progress) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const ObsSpec spec = proc.spec();
  if (net.output_size() != spec.actions)
    throw Error(ErrorKind::ShapeMismatch, "network outputs " + std::to_string(net.output_size()) + " values for " +
                                              std::to_string(spec.actions) + " actions");
  TrainResult result;
  Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, cfg.rms_decay, cfg.rms_epsilon);
  ReplayBuffer replay(static_cast<std::size_t>(cfg.replay_capacity));
  SplitMix64 rng(derive_seed(seed, 3));
  const std::uint64_t episode_stream = derive_seed(seed, 2);
  std::uint64_t episode_index = 0;
  std::vector<const Transition*> batch;

  Observation obs = proc.reset(derive_seed(episode_stream, episode_index++));
  for (long step = 0; step < cfg.total_steps; ++step) {
    const double eps = epsilon(cfg, step);
    int action;
    if (rng.uniform() < eps) action = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.actions)));
    else action = greedy_action(net, obs, spec);

    DecisionProcess::Step s = proc.step(action);
    Transition t;
    t.state = obs;
    t.action = action;
    t.reward = static_cast<float>(s.reward * cfg.reward_scale);
    t.terminal = s.terminal;
    if (!s.terminal) t.next = s.next;
    replay.push(std::move(t));

    if (replay.size() >= static_cast<std::size_t>(cfg.batch_size)) {
      batch.clear();
      for (std::size_t slot : replay.sample(static_cast<std::size_t>(cfg.batch_size), rng)) batch.push_back(&replay.slot(slot));
      result.final_loss = train_batch(batch, net, opt, cfg.gamma, spec);
      ++result.optimizer_steps;
    }

    if (s.terminal) {
      ++result.episodes;
      obs = proc.reset(derive_seed(episode_stream, episode_index++));
    } else {
      obs = std::move(s.next);
    }

    if (eval_proc && cfg.test_every_steps > 0 && (step + 1) % cfg.test_every_steps == 0) {
      CurvePoint point{step + 1, evaluate(net, *eval_proc, cfg.test_episodes, cfg.eval_seed)};
      result.curve.push_back(point);
      if (progress) progress(point);
    }
  }
  result.net = std::move(net);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace raydoom::deepq
