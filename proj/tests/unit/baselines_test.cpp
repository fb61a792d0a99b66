#include "pdef/baselines.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace pdef {
namespace {

// Central differences on L = sum_k c_k * out_k.
double numeric_grad(Mlp net, std::size_t i, const std::vector<double>& x, const std::vector<double>& c) {
    const double h = 1e-5;
    auto loss = [&](const Mlp& m) {
        const auto y = m.forward(x);
        return std::inner_product(y.begin(), y.end(), c.begin(), 0.0);
    };
    const double p = net.params[i];
    net.params[i] = p + h;
    const double up = loss(net);
    net.params[i] = p - h;
    const double down = loss(net);
    return (up - down) / (2 * h);
}

TEST(Mlp, BackwardMatchesFiniteDifferences) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int in = 1 + static_cast<int>(rng.index(6)), out = 1 + static_cast<int>(rng.index(4));
        const int hidden = 1 + static_cast<int>(rng.index(16));
        Mlp net(in, out, hidden);
        net.init(rng);
        for (auto& p : net.params) p += 0.1 * (rng.uniform() - 0.5);  // non-zero biases too
        std::vector<double> x(in), c(out);
        for (auto& v : x) v = 2 * rng.uniform() - 1;
        for (auto& v : c) v = 2 * rng.uniform() - 1;
        Mlp::Cache cache;
        net.forward(x, &cache);
        std::vector<double> grad(net.params.size(), 0.0);
        net.backward(cache, c, grad);
        for (std::size_t i = 0; i < net.params.size(); ++i) {
            const double num = numeric_grad(net, i, x, c);
            EXPECT_NEAR(grad[i], num, 1e-6 * std::max(1.0, std::abs(num))) << "param " << i;
        }
    }
}

TEST(Mlp, ParamLayoutAndErrors) {
    EXPECT_EQ(Mlp::param_count(6, 256, 10), 6u * 256 + 256 + 10 * 256 + 10);
    Mlp net(6, 10);
    EXPECT_EQ(net.params.size(), Mlp::param_count(6, kHiddenUnits, 10));
    EXPECT_THROW(net.forward(std::vector<double>(5, 0.0)), DomainError);
}

TEST(Mlp, JsonRoundTrip) {
    Rng rng(1);
    Mlp net(6, 3, 8);
    net.init(rng);
    const auto back = Mlp::from_json(net.to_json());
    EXPECT_EQ(back.params, net.params);
    EXPECT_EQ(back.hidden_dim(), 8);
}

TEST(Softmax, SumsToOneAndIsStable) {
    const std::vector<double> big = {1000, 1001, 999};
    const auto p = softmax(big);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
    for (double v : p) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GT(p[1], p[0]);
    const auto shifted = softmax(std::vector<double>{0, 1, -1});
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], shifted[i], 1e-12);
}

TEST(Adam, MinimizesAQuadratic) {
    Adam opt(0.05);
    std::vector<double> x = {3.0, -2.0};
    for (int i = 0; i < 2000; ++i) opt.step(x, {2 * (x[0] - 1), 2 * (x[1] + 0.5)});
    EXPECT_NEAR(x[0], 1.0, 1e-3);
    EXPECT_NEAR(x[1], -0.5, 1e-3);
}

TEST(DqnTarget, Examples) {
    const std::vector<double> q = {0.5, 2.0, -1.0};
    EXPECT_DOUBLE_EQ(dqn_target(1.0, 0.0, q, false), 1.0);
    EXPECT_DOUBLE_EQ(dqn_target(1.0, 0.9, q, true), 1.0);
    EXPECT_DOUBLE_EQ(dqn_target(1.0, 0.5, q, false), 2.0);
}

TEST(PpoSurrogate, ClipsBothWays) {
    EXPECT_DOUBLE_EQ(ppo_surrogate(1.5, 1.0, 0.2), 1.2);
    EXPECT_DOUBLE_EQ(ppo_surrogate(1.1, 1.0, 0.2), 1.1);
    EXPECT_DOUBLE_EQ(ppo_surrogate(0.5, -1.0, 0.2), -0.8);
    EXPECT_DOUBLE_EQ(ppo_surrogate(0.5, 1.0, 0.2), 0.5);
    Rng rng(6);
    for (int i = 0; i < 1000; ++i) {
        const double r = 3 * rng.uniform(), a = 2 * rng.uniform() - 1;
        const double s = ppo_surrogate(r, a, 0.2);
        EXPECT_LE(s, r * a + 1e-15);
        EXPECT_LE(s, std::clamp(r, 0.8, 1.2) * a + 1e-15);
    }
}

TEST(DiscountedReturns, Backwards) {
    const std::vector<double> r = {1, 1, 1};
    const auto g = discounted_returns(r, 0.5);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_DOUBLE_EQ(g[0], 1.75);
    EXPECT_DOUBLE_EQ(g[1], 1.5);
    EXPECT_DOUBLE_EQ(g[2], 1.0);
    EXPECT_TRUE(discounted_returns(std::vector<double>{}, 0.9).empty());
}

TrainConfig small_config() {
    TrainConfig c;
    c.batch_size = 4;
    return c;
}

TEST(DqnAgent, SingleTransitionRegressesTowardReward) {
    Rng rng(9);
    auto cfg = small_config();
    cfg.gamma = 0.0;
    DqnAgent agent(cfg, rng);
    Transition t;
    t.obs = {0.5, 0.1, 0.2, 0.0, 1.0, 0.3};
    t.action = 3;
    t.reward = 2.0;
    t.next = {1, 1, 1, 1, 1, 1};
    t.done = false;  // only gamma = 0 cuts the bootstrap
    const std::vector<Transition> batch(4, t);
    auto q = [&] { return agent.online.forward(t.obs)[3]; };
    double err = std::abs(q() - t.reward);
    const double first = err;
    for (int i = 0; i < 300; ++i) {
        agent.update(batch);
        const double e = std::abs(q() - t.reward);
        if (i < 20) {
            EXPECT_LT(e, err + 1e-12) << "update " << i;
        }
        err = e;
    }
    EXPECT_LT(err, 0.05 * first + 1e-3);
}

TEST(DqnAgent, TargetNetworkCopiesOnSchedule) {
    Rng rng(2);
    auto cfg = small_config();
    cfg.target_copy_every = 5;
    DqnAgent agent(cfg, rng);
    Transition t;
    t.reward = 1;
    const std::vector<Transition> batch(4, t);
    for (int i = 0; i < 4; ++i) agent.update(batch);
    EXPECT_NE(agent.online.params, agent.target.params);
    agent.update(batch);
    EXPECT_EQ(agent.target_copies, 1);
    EXPECT_EQ(agent.online.params, agent.target.params);
}

TEST(DqnAgent, NonFiniteLossIsATrainingError) {
    Rng rng(2);
    DqnAgent agent(small_config(), rng);
    Transition t;
    t.reward = std::numeric_limits<double>::infinity();
    const std::vector<Transition> batch(4, t);
    EXPECT_THROW(agent.update(batch), TrainingError);
}

TEST(DqnAgent, ReplayIsBounded) {
    Rng rng(2);
    auto cfg = small_config();
    cfg.replay_capacity = 10;
    DqnAgent agent(cfg, rng);
    for (int i = 0; i < 50; ++i) agent.observe(Transition{}, rng);
    EXPECT_EQ(agent.replay.size(), 10u);
}

TEST(PolicyAgent, BufferClearedAfterEpisode) {
    for (auto kind : {AgentKind::ac, AgentKind::ppo}) {
        Rng rng(4);
        PolicyAgent agent(kind, small_config(), rng);
        for (int i = 0; i < 6; ++i) {
            Observation6 o{};
            o[0] = 0.1 * i;
            Transition t;
            t.obs = o;
            t.action = agent.act(o, rng, false);
            t.reward = 1.0;
            t.done = i == 5;
            agent.observe(t, rng);
        }
        agent.end_episode(1, rng);
        EXPECT_TRUE(agent.buffer.empty());
        EXPECT_TRUE(agent.behaviour_probs.empty());
    }
}

TEST(PolicyAgent, ActionsAlwaysInRange) {
    Rng rng(5);
    PolicyAgent agent(AgentKind::ac, small_config(), rng);
    RandomAgent random;
    for (int i = 0; i < 500; ++i) {
        Observation6 o{};
        for (auto& v : o) v = rng.uniform();
        const int a = agent.act(o, rng, i % 2 == 0);
        EXPECT_GE(a, 0);
        EXPECT_LT(a, kRlActionCount);
        const int b = random.act(o, rng, true);
        EXPECT_GE(b, 0);
        EXPECT_LT(b, kRlActionCount);
    }
}

TEST(TrainConfig, Validation) {
    TrainConfig c;
    EXPECT_NO_THROW(c.validate());
    c.gamma = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c.gamma = 0.0;
    EXPECT_NO_THROW(c.validate());
    c = TrainConfig{};
    c.eval_explore = -0.1;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RlEnv, DeterministicForASeed) {
    TrainConfig cfg;
    RlEnv a(test::scenario(AttackKind::syn_flood), cfg), b(test::scenario(AttackKind::syn_flood), cfg);
    EXPECT_EQ(a.reset(7), b.reset(7));
    for (int i = 0; i < 5; ++i) {
        const auto x = a.step(i % kRlActionCount), y = b.step(i % kRlActionCount);
        EXPECT_EQ(x.obs, y.obs);
        EXPECT_DOUBLE_EQ(x.reward, y.reward);
    }
}

TEST(RlEnv, RewardBoundedPerRound) {
    TrainConfig cfg;
    RlEnv env(test::scenario(AttackKind::slow_http), cfg);
    Rng rng(1);
    env.reset(3);
    for (int i = 0; i < 30; ++i) {
        const auto s = env.step(static_cast<int>(rng.index(kRlActionCount)));
        // At most one point per step before the terminal bonus.
        const double bonus = s.verdict == Verdict::success ? (cfg.max_rounds - env.rounds()) * 4.0 : 0.0;
        EXPECT_LE(s.reward - bonus, 4.0 + 1e-12);
        EXPECT_GE(s.reward, -cfg.resource_penalty * 4.0 - 1e-12);
        for (double v : s.obs) EXPECT_TRUE(std::isfinite(v));
        if (s.done) break;
    }
    EXPECT_THROW(env.step(kRlActionCount), DomainError);
}

TEST(RlEnv, OffenderActionsNeedOffenders) {
    TrainConfig cfg;
    RlEnv env(test::scenario(AttackKind::none), cfg);
    env.reset(1);
    EXPECT_FALSE(env.step(1).action_valid);
    EXPECT_TRUE(env.step(0).action_valid);
}

TEST(SaveLoad, AgentsActIdenticallyAfterReload) {
    test::TempDir dir("agents");
    TrainConfig cfg;
    for (auto kind : {AgentKind::dqn, AgentKind::ac, AgentKind::ppo, AgentKind::random}) {
        Rng rng(11);
        auto agent = make_agent(kind, cfg, rng);
        const auto path = dir.file(std::string(to_string(kind)) + ".json");
        save_agent(*agent, path);
        auto back = load_agent(path, cfg);
        EXPECT_EQ(back->kind(), kind);
        EXPECT_EQ(back->to_json(), agent->to_json());
        if (kind == AgentKind::random) continue;
        Rng r1(5), r2(5);
        for (int i = 0; i < 50; ++i) {
            Observation6 o{};
            for (auto& v : o) v = 0.02 * i;
            EXPECT_EQ(agent->act(o, r1, true), back->act(o, r2, true));
        }
    }
}

TEST(Train, CurveHasOnePointPerEpisodeAndIsSeeded) {
    TrainConfig cfg;
    cfg.episodes = 3;
    cfg.max_rounds = 8;
    const auto a = train(AgentKind::ac, test::scenario(AttackKind::syn_flood), cfg, 4);
    const auto b = train(AgentKind::ac, test::scenario(AttackKind::syn_flood), cfg, 4);
    ASSERT_EQ(a.curve.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(a.curve[i].episode, static_cast<int>(i) + 1);
        EXPECT_DOUBLE_EQ(a.curve[i].reward, b.curve[i].reward);
        EXPECT_LE(a.curve[i].rounds, 8);
    }
    EXPECT_NE(curve_csv(a.curve).find("episode"), std::string::npos);
}

TEST(EvaluatePolicy, RandomAgentProducesBoundedMetrics) {
    TrainConfig cfg;
    cfg.max_rounds = 10;
    RandomAgent agent;
    const auto ev = evaluate_policy(agent, test::scenario(AttackKind::syn_flood), cfg, 5, 1);
    EXPECT_EQ(ev.episodes, 5);
    EXPECT_GE(ev.efficacy, 0.0);
    EXPECT_LE(ev.efficacy, 1.0);
    EXPECT_GE(ev.surviving_rate, 0.0);
    EXPECT_LE(ev.surviving_rate, 1.0);
    EXPECT_GE(ev.mean_latency_s, 0.0);
}

}  // namespace
}  // namespace pdef
