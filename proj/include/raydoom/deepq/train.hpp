#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "raydoom/deepq/network.hpp"
#include "raydoom/env.hpp"

namespace raydoom::deepq {

enum class OptimizerKind : std::uint8_t { Sgd, RmsProp };
enum class Architecture : std::uint8_t { Exp1, Exp2, Desk };

std::string_view architecture_name(Architecture arch);
std::vector<LayerSpec> architecture_layers(Architecture arch, int n_actions);

struct TrainConfig {
  double gamma = 0.99;
  double learning_rate = 0.01;
  int replay_capacity = 10000;
  int batch_size = 40;
  double eps_start = 1.0;
  double eps_end = 0.1;
  long eps_decay_start = 100000;
  long eps_decay_end = 200000;
  long total_steps = 600000;
  long test_every_steps = 5000;  // 0 disables periodic tests
  int test_episodes = 1000;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double rms_decay = 0.95;
  double rms_epsilon = 1e-8;
  int skipcount = 4;
  int frame_stack = 1;
  bool use_aux = false;
  int width = 60;
  int height = 45;
  Channels channels = Channels::RGB;
  Architecture arch = Architecture::Exp1;
  // Training rewards are multiplied by this before entering the replay buffer.
  double reward_scale = 1.0;
  std::uint64_t eval_seed = 0x7E57;

  // Experiment 1 (basic, SGD).
  static TrainConfig paper_basic();
  // Experiment 2 (health gathering, RMSProp, 4-frame stack, aux inputs).
  static TrainConfig paper_health();
  // Single-core budget for basic.
  static TrainConfig desk_basic();

  // Throws Error(InvalidConfig).
  void validate() const;
};

// Linear decay from eps_start to eps_end between the two decay steps.
double epsilon(const TrainConfig& cfg, long step);

struct ObsSpec {
  int channels = 1;  // per frame
  int height = 1;
  int width = 1;
  int stack = 1;
  int aux = 0;
  int actions = 2;

  InputSpec input() const { return {channels * stack, height, width, aux}; }
};

using FramePtr = std::shared_ptr<const std::vector<std::uint8_t>>;

// Stacked observation: `stack` HWC byte frames (oldest first) plus aux scalars.
// Consecutive observations share frame storage.
struct Observation {
  std::vector<FramePtr> frames;
  std::vector<float> aux;
};

struct Transition {
  Observation state;
  int action = 0;
  float reward = 0.0f;
  Observation next;  // empty when terminal
  bool terminal = false;
};

// Bytes scaled to [0, 1], frames concatenated along channels (oldest first).
void observations_to_tensor(std::span<const Observation* const> obs, const ObsSpec& spec, Tensor<float>& x,
                            Tensor<float>& aux);

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t pushes() const { return pushes_; }
  // i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  // n distinct slots, uniformly drawn (n <= size).
  std::vector<std::size_t> sample(std::size_t n, SplitMix64& rng) const;
  const Transition& slot(std::size_t s) const { return items_[s]; }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::uint64_t pushes_ = 0;
  std::vector<Transition> items_;
};

template <typename T>
void sgd_step(std::span<T> params, std::span<const T> grads, double lr);
// s <- rho*s + (1-rho)*g^2;  p <- p - lr*g/sqrt(s + eps)
template <typename T>
void rmsprop_step(std::span<T> params, std::span<const T> grads, std::span<T> state, double lr, double rho,
                  double eps);

template <typename T>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double rho = 0.95, double eps = 1e-8) : kind_(kind), lr_(lr), rho_(rho), eps_(eps) {}
  void step(Network<T>& net);

 private:
  OptimizerKind kind_;
  double lr_, rho_, eps_;
  std::vector<std::vector<T>> state_;
};

// Environment or toy MDP seen as a sequence of decisions.
class DecisionProcess {
 public:
  struct Step {
    Observation next;
    double reward = 0.0;  // training reward of the decision
    bool terminal = false;
  };

  virtual ~DecisionProcess() = default;
  virtual ObsSpec spec() const = 0;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual Step step(int action) = 0;
  // Reported (non-shaping) score of the current episode so far.
  virtual double episode_score() const = 0;
};

// Wraps a SYNC_PLAYER Environment. Aux scalars are the scenario's game
// variables: HEALTH / 100, AMMO / 100, TICK / timeout.
class EnvProcess final : public DecisionProcess {
 public:
  EnvProcess(EnvConfig config, ScenarioDef scenario, int skipcount, int frame_stack = 1, bool use_aux = false);

  ObsSpec spec() const override;
  Observation reset(std::uint64_t seed) override;
  Step step(int action) override;
  double episode_score() const override { return env_.get_total_score(); }

  Environment& environment() { return env_; }
  int skipcount() const { return skip_; }

 private:
  Observation observe(bool fresh_episode);

  Environment env_;
  int skip_;
  int stack_;
  bool use_aux_;
  std::vector<FramePtr> recent_;
};

// Builds the environment for a training config: resolution and channels are
// taken from the TrainConfig, the rest from `base`.
EnvConfig training_env_config(const EnvConfig& base, const TrainConfig& cfg);

// Five states in a row with a one-hot 1x1x5 observation and two actions
// (left, right). Stepping left from state 0 pays 1 and ends the episode,
// stepping right from state 4 pays 10 and ends it, every other move pays -1.
// Episodes start in a uniformly drawn state.
class ChainMdp final : public DecisionProcess {
 public:
  static constexpr int kStates = 5;

  ObsSpec spec() const override { return {1, 1, kStates, 1, 0, 2}; }
  Observation reset(std::uint64_t seed) override;
  Step step(int action) override;
  double episode_score() const override { return score_; }
  int state() const { return state_; }

  static Observation encode(int state);

 private:
  int state_ = 0;
  double score_ = 0.0;
};

// y_i = r_i for terminal transitions, else r_i + gamma * max_a Q(next_i, a)
// with Q from `net` itself.
std::vector<float> q_targets(std::span<const Transition* const> batch, Network<float>& net, double gamma,
                             const ObsSpec& spec);

// One minibatch update: loss = mean over the batch of (Q(s,a) - y)^2 on the
// taken actions only. Returns the loss.
double train_batch(std::span<const Transition* const> batch, Network<float>& net, Optimizer<float>& opt,
                   double gamma, const ObsSpec& spec);

int greedy_action(Network<float>& net, const Observation& obs, const ObsSpec& spec);

struct ScoreStats {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
  double min = 0.0;
  double max = 0.0;
  long episodes = 0;
};

ScoreStats score_stats(std::span<const double> scores);

// Greedy episodes with seeds derive_seed(seed, i). Reports the non-shaping score.
ScoreStats evaluate(Network<float>& net, DecisionProcess& proc, int episodes, std::uint64_t seed);
// Uniform-random policy on the same seeds.
ScoreStats evaluate_random(DecisionProcess& proc, int episodes, std::uint64_t seed, std::uint64_t policy_seed);

struct CurvePoint {
  long step = 0;
  ScoreStats stats;
};

struct TrainResult {
  Network<float> net;
  std::vector<CurvePoint> curve;
  long episodes = 0;  // finished training episodes
  long optimizer_steps = 0;
  double seconds = 0.0;
  double final_loss = 0.0;
};

using TrainProgress = std::function<void(const CurvePoint&)>;

// Single-threaded, fully determined by `seed`. `eval_proc` (may be null) runs
// the periodic greedy tests.
TrainResult train(DecisionProcess& proc, DecisionProcess* eval_proc, const TrainConfig& cfg, std::uint64_t seed,
                  const TrainProgress& progress = {});

// Same loop on a caller-provided network.
TrainResult train(Network<float> net, DecisionProcess& proc, DecisionProcess* eval_proc, const TrainConfig& cfg,
                  std::uint64_t seed, const TrainProgress& progress = {});

}  // namespace raydoom::deepq
