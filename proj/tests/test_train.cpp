#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "raydoom/deepq/train.hpp"
#include "raydoom/error.hpp"

using namespace raydoom;
using namespace raydoom::deepq;

namespace {

Network<float> chain_net(std::uint64_t seed = 0) {
  Network<float> net(ChainMdp{}.spec().input(), {LayerSpec::linear_out(2)});
  net.init(seed);
  return net;
}

Transition chain_transition(int state, int action, float reward, std::optional<int> next) {
  Transition t;
  t.state = ChainMdp::encode(state);
  t.action = action;
  t.reward = reward;
  t.terminal = !next.has_value();
  if (next) t.next = ChainMdp::encode(*next);
  return t;
}

TrainConfig chain_config() {
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
  return c;
}

}  // namespace

TEST(Epsilon, PaperSchedule) {
  const TrainConfig c = TrainConfig::paper_basic();
  EXPECT_EQ(epsilon(c, 0), 1.0);
  EXPECT_EQ(epsilon(c, 100000), 1.0);
  EXPECT_NEAR(epsilon(c, 150000), 0.55, 1e-12);
  EXPECT_NEAR(epsilon(c, 200000), 0.1, 1e-12);
  EXPECT_EQ(epsilon(c, 600000), 0.1);
}

TEST(Epsilon, ContinuousAndNonIncreasing) {
  const TrainConfig c = TrainConfig::paper_health();
  double prev = epsilon(c, 0);
  for (long s = 1; s < 120000; s += 7) {
    const double e = epsilon(c, s);
    EXPECT_LE(e, prev);
    EXPECT_LE(prev - e, 0.9 * 7 / 100000.0 + 1e-12);
    prev = e;
  }
  EXPECT_NEAR(epsilon(c, 104000), 0.1, 1e-12);
}

TEST(TrainConfig, Presets) {
  const TrainConfig b = TrainConfig::paper_basic();
  EXPECT_EQ(b.gamma, 0.99);
  EXPECT_EQ(b.learning_rate, 0.01);
  EXPECT_EQ(b.replay_capacity, 10000);
  EXPECT_EQ(b.batch_size, 40);
  EXPECT_EQ(b.total_steps, 600000);
  EXPECT_EQ(b.test_every_steps, 5000);
  EXPECT_EQ(b.test_episodes, 1000);
  EXPECT_EQ(b.skipcount, 4);
  EXPECT_EQ(b.width, 60);
  EXPECT_EQ(b.height, 45);
  const TrainConfig h = TrainConfig::paper_health();
  EXPECT_EQ(h.gamma, 1.0);
  EXPECT_EQ(h.learning_rate, 0.00001);
  EXPECT_EQ(h.batch_size, 64);
  EXPECT_EQ(h.optimizer, OptimizerKind::RmsProp);
  EXPECT_EQ(h.frame_stack, 4);
  EXPECT_EQ(h.skipcount, 10);
  const TrainConfig d = TrainConfig::desk_basic();
  EXPECT_EQ(d.batch_size, 32);
  EXPECT_EQ(d.eps_decay_start, 20000);
  EXPECT_EQ(d.eps_decay_end, 40000);
  EXPECT_EQ(d.total_steps, 100000);
  EXPECT_EQ(d.channels, Channels::GRAY);
  EXPECT_NO_THROW(b.validate());
  EXPECT_NO_THROW(h.validate());
  EXPECT_NO_THROW(d.validate());
}

TEST(TrainConfig, ValidateRejects) {
  TrainConfig c;
  c.batch_size = c.replay_capacity + 1;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.eps_end = 1.0;
  c.eps_start = 0.5;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), Error);
}

TEST(QTargets, TerminalAndBootstrap) {
  Network<float> net = chain_net();
  net.fill_parameters(0.0f);
  net.layer(0).params()[10 + 1] = 50.0f;  // bias of action 1
  const Transition term = chain_transition(4, 1, 101.0f, std::nullopt);
  const Transition boot = chain_transition(2, 0, -1.0f, 1);
  const Transition* batch[] = {&term, &boot};
  const ObsSpec spec = ChainMdp{}.spec();
  const auto y = q_targets(batch, net, 0.99, spec);
  EXPECT_EQ(y[0], 101.0f);
  EXPECT_FLOAT_EQ(y[1], 48.5f);
  EXPECT_FLOAT_EQ(q_targets(batch, net, 1.0, spec)[1], 49.0f);
}

TEST(QTargets, AllTerminalGradientIgnoresGamma) {
  Network<float> a = chain_net();
  a.init(3);
  Network<float> b = a;
  const Transition t1 = chain_transition(0, 0, 1.0f, std::nullopt), t2 = chain_transition(4, 1, 10.0f, std::nullopt);
  const Transition* batch[] = {&t1, &t2};
  Optimizer<float> oa(OptimizerKind::Sgd, 0.1), ob(OptimizerKind::Sgd, 0.1);
  train_batch(batch, a, oa, 0.0, ChainMdp{}.spec());
  train_batch(batch, b, ob, 0.99, ChainMdp{}.spec());
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(TrainBatch, OnlyTakenActionMoves) {
  Network<float> net = chain_net();
  net.fill_parameters(0.0f);
  const Transition t = chain_transition(2, 1, 4.0f, std::nullopt);
  const Transition* batch[] = {&t};
  Optimizer<float> opt(OptimizerKind::Sgd, 0.1);
  const double loss = train_batch(batch, net, opt, 0.9, ChainMdp{}.spec());
  EXPECT_DOUBLE_EQ(loss, 16.0);
  const auto p = net.layer(0).params();
  // dL/dq = 2 (0 - 4) = -8, so the weight from input 2 and the bias of action 1 gain 0.8.
  for (int i = 0; i < 12; ++i) {
    const bool touched = i == 2 * 2 + 1 || i == 10 + 1;  // weights are [in][out]
    EXPECT_FLOAT_EQ(p[i], touched ? 0.8f : 0.0f) << i;
  }
}

TEST(Optimizer, SgdAndZeroGradient) {
  std::vector<double> p = {1.0, -2.0}, g = {1.0, 0.0};
  sgd_step<double>(p, g, 0.01);
  EXPECT_DOUBLE_EQ(p[0], 0.99);
  EXPECT_EQ(p[1], -2.0);
  std::vector<double> s = {0.0, 0.0};
  rmsprop_step<double>(p, g, s, 0.01, 0.95, 1e-8);
  EXPECT_EQ(p[1], -2.0);
}

TEST(Optimizer, RmsPropStepTendsToLearningRate) {
  std::vector<double> p = {0.0, 0.0}, g = {3.0, -0.5}, s = {0.0, 0.0};
  std::vector<double> before = p;
  for (int i = 0; i < 2000; ++i) {
    before = p;
    rmsprop_step<double>(p, g, s, 0.01, 0.95, 1e-8);
  }
  EXPECT_NEAR(before[0] - p[0], 0.01, 1e-8);
  EXPECT_NEAR(before[1] - p[1], -0.01, 1e-7);
  // Closed form of the state recurrence after n steps from zero.
  EXPECT_NEAR(s[0], 9.0 * (1.0 - std::pow(0.95, 2000)), 1e-9);
}

TEST(Replay, RingKeepsNewest) {
  ReplayBuffer buf(5);
  for (int i = 0; i < 8; ++i) buf.push(chain_transition(0, 0, static_cast<float>(i), std::nullopt));
  EXPECT_EQ(buf.size(), 5u);
  EXPECT_EQ(buf.pushes(), 8u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(buf.at(i).reward, static_cast<float>(3 + i));
  SplitMix64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const auto slots = buf.sample(4, rng);
    std::set<std::size_t> distinct(slots.begin(), slots.end());
    EXPECT_EQ(distinct.size(), 4u);
    for (std::size_t s : slots) EXPECT_GE(buf.slot(s).reward, 3.0f);
  }
  EXPECT_THROW(buf.sample(6, rng), Error);
  EXPECT_THROW(buf.at(5), Error);
}

TEST(Replay, SamplingIsUniform) {
  ReplayBuffer buf(10);
  for (int i = 0; i < 10; ++i) buf.push(chain_transition(0, 0, 0.0f, std::nullopt));
  SplitMix64 rng(2);
  std::vector<int> counts(10, 0);
  for (int trial = 0; trial < 20000; ++trial)
    for (std::size_t s : buf.sample(3, rng)) ++counts[s];
  for (int c : counts) EXPECT_NEAR(c, 6000, 300);
}

TEST(Observation, TensorIsChannelsFirstScaled) {
  ObsSpec spec{3, 1, 2, 2, 1, 4};
  Observation o;
  o.frames.push_back(std::make_shared<const std::vector<std::uint8_t>>(std::vector<std::uint8_t>{255, 0, 51, 0, 102, 0}));
  o.frames.push_back(std::make_shared<const std::vector<std::uint8_t>>(std::vector<std::uint8_t>{0, 0, 0, 255, 255, 255}));
  o.aux = {0.25f};
  const Observation* batch[] = {&o};
  Tensor<float> x, aux;
  observations_to_tensor(batch, spec, x, aux);
  EXPECT_EQ(x.shape, (std::vector<int>{1, 6, 1, 2}));
  const std::vector<float> want = {1.0f, 0.0f, 0.0f, 0.4f, 0.2f, 0.0f, 0.0f, 1.0f, 0.0f, 1.0f, 0.0f, 1.0f};
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_FLOAT_EQ(x.data[i], want[i]) << i;
  EXPECT_EQ(aux.data, (std::vector<float>{0.25f}));
  o.aux.clear();
  EXPECT_THROW(observations_to_tensor(batch, spec, x, aux), Error);
}

TEST(EnvProcess, FrameStackRepeatsFirstFrame) {
  EnvConfig c;
  c.width = 12;
  c.height = 8;
  c.channels = Channels::GRAY;
  EnvProcess proc(c, parse_scenario(bundled_health_gathering_scenario()), 2, 4, true);
  const ObsSpec spec = proc.spec();
  EXPECT_EQ(spec.input(), (InputSpec{4, 8, 12, 2}));
  EXPECT_EQ(spec.actions, 16);
  const Observation first = proc.reset(5);
  for (const FramePtr& f : first.frames) EXPECT_EQ(f, first.frames[0]);
  EXPECT_EQ(first.aux, (std::vector<float>{1.0f, 0.0f}));
  const auto s1 = proc.step(8);  // forward
  ASSERT_FALSE(s1.terminal);
  EXPECT_EQ(s1.next.frames[0], first.frames[0]);
  EXPECT_EQ(s1.next.frames[2], first.frames[0]);
  EXPECT_NE(s1.next.frames[3], first.frames[0]);
  EXPECT_FLOAT_EQ(s1.next.aux[1], 3.0f / 2100.0f);
  const auto s2 = proc.step(0);
  EXPECT_EQ(s2.next.frames[2], s1.next.frames[3]);
  EXPECT_EQ(proc.environment().tick(), 6u);
}

TEST(ScoreStats, PopulationSd) {
  const std::vector<double> v = {1, 2, 3, 4};
  const ScoreStats s = score_stats(v);
  EXPECT_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.sd, std::sqrt(1.25));
  EXPECT_EQ(s.min, 1);
  EXPECT_EQ(s.max, 4);
  EXPECT_EQ(s.episodes, 4);
}

TEST(Train, WarmUpBeforeFirstUpdate) {
  ChainMdp mdp;
  TrainConfig c = chain_config();
  c.replay_capacity = 10000;
  c.batch_size = 40;
  c.total_steps = 10;
  EXPECT_EQ(train(chain_net(), mdp, nullptr, c, 1).optimizer_steps, 0);
  c.total_steps = 45;
  EXPECT_EQ(train(chain_net(), mdp, nullptr, c, 1).optimizer_steps, 6);
}

TEST(Train, SameSeedSameResult) {
  ChainMdp a, b, ea, eb;
  TrainConfig c = chain_config();
  c.total_steps = 3000;
  c.test_every_steps = 1000;
  c.test_episodes = 5;
  const TrainResult ra = train(chain_net(9), a, &ea, c, 9), rb = train(chain_net(9), b, &eb, c, 9);
  EXPECT_EQ(encode_checkpoint(ra.net), encode_checkpoint(rb.net));
  ASSERT_EQ(ra.curve.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(ra.curve[i].step, rb.curve[i].step);
    EXPECT_EQ(ra.curve[i].stats.mean, rb.curve[i].stats.mean);
  }
  EXPECT_EQ(ra.episodes, rb.episodes);
}

TEST(Train, ChainConvergesToValueIteration) {
  ChainMdp mdp;
  TrainConfig c = chain_config();
  c.total_steps = 50000 + c.batch_size - 1;
  const TrainResult r = train(chain_net(), mdp, nullptr, c, 4);
  ASSERT_EQ(r.optimizer_steps, 50000);
  const auto q_star = oracle::chain_q_star(c.gamma);
  Network<float> net = r.net;
  for (int s = 0; s < ChainMdp::kStates; ++s) {
    const Observation o = ChainMdp::encode(s);
    const Observation* one[] = {&o};
    Tensor<float> x, aux;
    observations_to_tensor(one, mdp.spec(), x, aux);
    const Tensor<float>& q = net.forward(x);
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(q.row(0)[a], q_star[s][a], 1e-2) << s << "," << a;
  }
}

TEST(Train, RejectsMismatchedNetwork) {
  ChainMdp mdp;
  Network<float> wrong(mdp.spec().input(), {LayerSpec::linear_out(3)});
  EXPECT_THROW(train(wrong, mdp, nullptr, chain_config(), 1), Error);
}

TEST(Evaluate, DeterministicAndRandomNetIsWeak) {
  EnvConfig base;
  const TrainConfig cfg = TrainConfig::desk_basic();
  EnvProcess proc(training_env_config(base, cfg), parse_scenario(bundled_basic_scenario()), 4);
  Network<float> net(proc.spec().input(), desk_architecture(8));
  net.init(77);
  const ScoreStats a = evaluate(net, proc, 100, 5);
  const ScoreStats b = evaluate(net, proc, 100, 5);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sd, b.sd);
  EXPECT_EQ(a.episodes, 100);
  EXPECT_LT(a.mean, 50.0);
  const ScoreStats r = evaluate_random(proc, 100, 5, 1);
  EXPECT_LT(r.mean, 50.0);
  EXPECT_GE(r.min, -300.0 - 5.0 * 50);
}

TEST(ChainMdp, Dynamics) {
  ChainMdp m;
  m.reset(0);
  const int s0 = m.state();
  const auto st = m.step(1);
  if (s0 == 4) {
    EXPECT_TRUE(st.terminal);
    EXPECT_EQ(st.reward, 10.0);
  } else {
    EXPECT_EQ(m.state(), s0 + 1);
    EXPECT_EQ(st.reward, -1.0);
  }
  const auto q = oracle::chain_q_star(0.9);
  EXPECT_DOUBLE_EQ(q[4][1], 10.0);
  EXPECT_DOUBLE_EQ(q[3][1], 8.0);
  EXPECT_DOUBLE_EQ(q[0][0], 1.0);
}
