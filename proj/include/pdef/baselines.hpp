#pragma once

#include "pdef/analyzer.hpp"
#include "pdef/nn.hpp"

#include <array>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pdef {

enum class AgentKind { dqn, ac, ppo, random };
std::string_view to_string(AgentKind k);
AgentKind agent_kind_from_string(std::string_view name);

struct TrainConfig {
    double gamma = 0.98;
    double lr_policy = 1e-3;  // DQN Q-network and the AC/PPO actors
    double lr_value = 1e-2;   // AC/PPO critics
    std::size_t replay_capacity = 10000;
    std::size_t batch_size = 64;
    int target_copy_every = 100;  // DQN updates between target copies
    double ppo_clip = 0.2;
    int ppo_epochs = 4;
    double entropy_coef = 0.01;
    int episodes = 200;
    double explore_start = 1.0;  // DQN epsilon-greedy schedule, linear over
    double explore_end = 0.05;   // the first explore_fraction of episodes
    double explore_fraction = 0.5;
    double eval_explore = 0.05;  // DQN epsilon when acting greedily after training
    double resource_penalty = 0.1;
    double grad_clip = 10.0;       // global L2 norm
    int max_rounds = 50;
    double cost_per_cpu_second = 1e-4;  // prices agent compute for the cost column

    // Throws ConfigError.
    void validate() const;
};

inline constexpr int kObservationSize = 6;
inline constexpr int kRlActionCount = 10;
using Observation6 = std::array<double, kObservationSize>;

// Discrete actions resolved against the latest telemetry: offenders and
// contenders come from the agent's own collector and analyzer pass.
std::string_view rl_action_name(int action);

struct RlStep {
    Observation6 obs{};
    double reward = 0.0;
    bool done = false;
    Verdict verdict = Verdict::undecided;
    bool action_valid = true;
};

// One decision per round, like the pipeline: the chosen action is applied
// (when it validates), the environment advances a round of steps and the
// reward is protected steps minus the resource penalty.
class RlEnv {
public:
    RlEnv(ScenarioConfig scenario, const TrainConfig& config);

    Observation6 reset(std::uint64_t seed);
    RlStep step(int action);

    const EnvState& env() const { return env_; }
    int rounds() const { return static_cast<int>(labels_.size()); }
    // Survived flags of the round the last step() simulated.
    const std::vector<bool>& last_survived() const { return survived_; }

private:
    Observation6 observe_round();

    ScenarioConfig scenario_;
    double resource_penalty_;
    int max_rounds_;
    EnvState env_;
    AnalyzerHistory history_;
    RiskAssessment last_;
    std::vector<StepOutcome> window_;
    std::vector<RoundLabel> labels_;
    std::vector<bool> survived_;
};

struct Transition {
    Observation6 obs{};
    int action = 0;
    double reward = 0.0;
    Observation6 next{};
    bool done = false;
};

struct Losses {
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
};

// r + gamma * max_a' Q(s', a'), or r alone at a terminal transition.
double dqn_target(double reward, double gamma, std::span<const double> next_q, bool done);
// min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv).
double ppo_surrogate(double ratio, double advantage, double clip);
// Discounted returns of one episode, computed backwards.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

class Agent {
public:
    virtual ~Agent() = default;
    virtual AgentKind kind() const = 0;
    virtual int act(const Observation6& obs, Rng& rng, bool greedy) = 0;
    // Training hooks; the random agent ignores them.
    virtual void observe(const Transition& t, Rng& rng) { (void)t, (void)rng; }
    virtual void end_episode(int episode, Rng& rng) { (void)episode, (void)rng; }
    virtual Json to_json() const = 0;

    Losses last{};  // losses of the most recent update
};

class DqnAgent : public Agent {
public:
    DqnAgent(const TrainConfig& config, Rng& rng);
    AgentKind kind() const override { return AgentKind::dqn; }
    int act(const Observation6& obs, Rng& rng, bool greedy) override;
    void observe(const Transition& t, Rng& rng) override;
    void end_episode(int episode, Rng& rng) override;
    Json to_json() const override;

    // One gradient step on a batch; throws TrainingError on a non-finite loss.
    Losses update(std::span<const Transition> batch);

    Mlp online;
    Mlp target;
    double explore = 1.0;
    int updates = 0;
    int target_copies = 0;
    std::deque<Transition> replay;

private:
    TrainConfig config_;
    Adam opt_;
};

// Shared by AC and PPO: softmax actor plus state-value critic.
class PolicyAgent : public Agent {
public:
    PolicyAgent(AgentKind kind, const TrainConfig& config, Rng& rng);
    AgentKind kind() const override { return kind_; }
    int act(const Observation6& obs, Rng& rng, bool greedy) override;
    void observe(const Transition& t, Rng& rng) override;
    void end_episode(int episode, Rng& rng) override;
    Json to_json() const override;

    // Advantage-weighted policy gradient plus value regression.
    Losses ac_update(std::span<const Transition> rollout);
    // Clipped surrogate over ppo_epochs passes; `old_probs` are the behaviour
    // probabilities of the taken actions.
    Losses ppo_update(std::span<const Transition> rollout, std::span<const double> old_probs);

    Mlp actor;
    Mlp critic;
    std::vector<Transition> buffer;  // on-policy, cleared after each update
    std::vector<double> behaviour_probs;

private:
    AgentKind kind_;
    TrainConfig config_;
    double last_prob_ = 0.0;
    Adam actor_opt_;
    Adam critic_opt_;
};

class RandomAgent : public Agent {
public:
    AgentKind kind() const override { return AgentKind::random; }
    int act(const Observation6&, Rng& rng, bool) override;
    Json to_json() const override { return {{"kind", "random"}}; }
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const TrainConfig& config, Rng& rng);

struct CurvePoint {
    int episode = 0;
    double reward = 0.0;
    bool success = false;
    int rounds = 0;
    double policy_loss = 0.0;
    double value_loss = 0.0;
};

struct TrainResult {
    std::unique_ptr<Agent> agent;
    std::vector<CurvePoint> curve;
};

TrainResult train(AgentKind kind, const ScenarioConfig& scenario, const TrainConfig& config, std::uint64_t seed);

struct PolicyEvaluation {
    double efficacy = 0.0;         // fraction of episodes ending in success
    double mean_latency_s = 0.0;   // wall clock of one action decision
    double mean_cost = 0.0;        // per episode, compute time priced per CPU second
    double surviving_rate = 0.0;
    int episodes = 0;
};

// Greedy rollouts of a trained agent (sampling for the random agent). The
// DQN keeps eval_explore so a deterministic argmax cannot cycle forever.
PolicyEvaluation evaluate_policy(Agent& agent, const ScenarioConfig& scenario, const TrainConfig& config, int episodes,
                                 std::uint64_t seed);

std::string curve_csv(std::span<const CurvePoint> curve);

// Versioned JSON with every network's parameters.
void save_agent(const Agent& agent, const std::string& path);
std::unique_ptr<Agent> load_agent(const std::string& path, const TrainConfig& config);

}  // namespace pdef
