#include "pdef/baselines.hpp"

#include "pdef/io.hpp"
#include "pdef/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

namespace pdef {

std::string_view to_string(AgentKind k) {
    switch (k) {
        case AgentKind::dqn: return "dqn";
        case AgentKind::ac: return "ac";
        case AgentKind::ppo: return "ppo";
        case AgentKind::random: return "random";
    }
    return "random";
}

AgentKind agent_kind_from_string(std::string_view name) {
    if (name == "dqn") return AgentKind::dqn;
    if (name == "ac") return AgentKind::ac;
    if (name == "ppo") return AgentKind::ppo;
    if (name == "random") return AgentKind::random;
    throw ConfigError("unknown agent '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    // 0 is allowed: a myopic DQN must regress onto the immediate reward.
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0,1)");
    if (!(lr_policy > 0.0) || !(lr_value > 0.0)) throw ConfigError("learning rates must be positive");
    if (replay_capacity < 1 || batch_size < 1) throw ConfigError("replay capacity and batch size must be positive");
    if (target_copy_every < 1) throw ConfigError("target copy interval must be positive");
    if (!(ppo_clip > 0.0) || ppo_epochs < 1) throw ConfigError("ppo clip and epochs must be positive");
    if (episodes < 0 || max_rounds < 1) throw ConfigError("episode counts must be positive");
    if (!(eval_explore >= 0.0 && eval_explore <= 1.0)) throw ConfigError("eval_explore must lie in [0,1]");
}

std::string_view rl_action_name(int action) {
    static constexpr std::array<std::string_view, kRlActionCount> names = {
        "noop",          "block_top_offender", "rate_limit_top_offender", "recycle_half_open", "scale_out",
        "scale_in",      "shuffle_address",    "migrate_victim",          "isolate_top_contender",
        "throttle_top_contender"};
    if (action < 0 || action >= kRlActionCount) throw DomainError("action index out of range");
    return names[static_cast<std::size_t>(action)];
}

RlEnv::RlEnv(ScenarioConfig scenario, const TrainConfig& config)
    : scenario_(std::move(scenario)),
      resource_penalty_(config.resource_penalty),
      max_rounds_(config.max_rounds),
      env_(init_env(scenario_)) {}

Observation6 RlEnv::reset(std::uint64_t seed) {
    scenario_.seed = seed;
    env_ = init_env(scenario_);
    history_ = AnalyzerHistory();
    labels_.clear();
    window_.clear();
    for (int i = 0; i < scenario_.steps_per_round; ++i) window_.push_back(step_env(env_));
    return observe_round();
}

Observation6 RlEnv::observe_round() {
    std::vector<RawEvent> raw;
    for (const auto& o : window_) raw.insert(raw.end(), o.raw_events.begin(), o.raw_events.end());
    const auto record = collect(std::span<const RawEvent>(raw), static_cast<int>(labels_.size()) + 1);
    last_ = assess(record, history_, EnvCaps::from(scenario_));
    history_.push(observe(record), last_.hypothesis != AttackKind::none);

    double availability = 1.0;
    for (const auto& o : window_) availability = std::min(availability, o.availability);
    const double cap = std::max(1, env_.capacity());
    const auto& svc = env_.service;
    return {availability,
            env_.free_slots() / cap,
            (svc.half_open() + svc.slow()) / cap,
            static_cast<double>(svc.active_replicas) / scenario_.max_replicas,
            std::clamp(last_.victim_contention / scenario_.mem_cap, 0.0, 1.0),
            last_.risk_score / 10.0};
}

RlStep RlEnv::step(int action) {
    std::optional<Action> a;
    auto make = [](ActionKind k, Json params) { return Action{k, std::move(params), "", "", ""}; };
    switch (action) {
        case 0: break;
        case 1:
            if (!last_.offenders.empty()) a = make(ActionKind::block_source, {{"ip", last_.offenders.front()}});
            break;
        case 2:
            if (!last_.offenders.empty()) {
                a = make(ActionKind::rate_limit, {{"ip", last_.offenders.front()}, {"limit", 100}});
            }
            break;
        case 3: a = make(ActionKind::recycle_half_open, {{"min_age", 0}}); break;
        case 4: a = make(ActionKind::scale_replicas, {{"delta", 2}}); break;
        case 5: a = make(ActionKind::scale_replicas, {{"delta", -1}}); break;
        case 6: a = make(ActionKind::shuffle_address, Json::object()); break;
        case 7:
            if (const auto targets = migration_targets(env_, 1); !targets.empty()) {
                a = make(ActionKind::migrate_vm, {{"vm", env_.cluster.victim().id}, {"target_machine", targets.front()}});
            }
            break;
        case 8:
            if (!last_.contenders.empty()) a = make(ActionKind::isolate_vm, {{"vm", last_.contenders.front()}});
            break;
        case 9:
            if (!last_.contenders.empty()) {
                a = make(ActionKind::throttle_vm, {{"vm", last_.contenders.front()}, {"cap", 2}});
            }
            break;
        default: throw DomainError("action index out of range");
    }
    RlStep out;
    out.action_valid = action == 0 || a.has_value();
    if (a) {
        if (validate_action(*a, last_.constraints, env_).empty()) {
            apply_action(env_, *a);
        } else {
            out.action_valid = false;
        }
    }
    window_.clear();
    const bool flooding = is_flooding(scenario_.attack);
    for (int i = 0; i < scenario_.steps_per_round; ++i) {
        window_.push_back(step_env(env_));
        const auto& o = window_.back();
        if (o.survived && (!flooding || o.hostile_admitted == 0)) out.reward += 1.0;
        out.reward -= resource_penalty_ * env_.service.active_pods() / scenario_.pod_pool;
    }
    labels_.push_back(label_round(window_, scenario_));
    out.verdict = endpoint_check(labels_, scenario_.stable_rounds);
    out.done = out.verdict != Verdict::undecided || static_cast<int>(labels_.size()) >= max_rounds_;
    if (out.done && out.verdict == Verdict::undecided) out.verdict = Verdict::failure;
    // A secured service stays protected for the rest of the horizon; without
    // this, dragging out a contested episode outearns ending it.
    if (out.verdict == Verdict::success) {
        out.reward += static_cast<double>(max_rounds_ - static_cast<int>(labels_.size())) * scenario_.steps_per_round;
    }
    out.obs = observe_round();
    survived_.clear();
    for (const auto& o : window_) survived_.push_back(o.survived);
    return out;
}

double dqn_target(double reward, double gamma, std::span<const double> next_q, bool done) {
    if (done || next_q.empty()) return reward;
    return reward + gamma * *std::max_element(next_q.begin(), next_q.end());
}

double ppo_surrogate(double ratio, double advantage, double clip) {
    return std::min(ratio * advantage, std::clamp(ratio, 1.0 - clip, 1.0 + clip) * advantage);
}

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
        g[i] = acc;
    }
    return g;
}

namespace {

void clip_norm(std::vector<double>& g, double max_norm) {
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double n = std::sqrt(sq);
    if (n > max_norm && n > 0.0) {
        for (auto& v : g) v *= max_norm / n;
    }
}

void require_finite(double loss, const char* what, int update) {
    if (!std::isfinite(loss)) {
        std::ostringstream s;
        s << "non-finite " << what << " loss (" << loss << ") at update " << update;
        throw TrainingError(s.str());
    }
}

std::size_t argmax(const std::vector<double>& v) {
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

DqnAgent::DqnAgent(const TrainConfig& config, Rng& rng)
    : online(kObservationSize, kRlActionCount),
      target(kObservationSize, kRlActionCount),
      explore(config.explore_start),
      config_(config),
      opt_(config.lr_policy) {
    config.validate();
    online.init(rng);
    target = online;
}

int DqnAgent::act(const Observation6& obs, Rng& rng, bool greedy) {
    const double eps = greedy ? config_.eval_explore : explore;
    if (eps > 0.0 && rng.uniform() < eps) return static_cast<int>(rng.index(kRlActionCount));
    return static_cast<int>(argmax(online.forward(obs)));
}

void DqnAgent::observe(const Transition& t, Rng& rng) {
    replay.push_back(t);
    while (replay.size() > config_.replay_capacity) replay.pop_front();
    if (replay.size() < config_.batch_size) return;
    std::vector<Transition> batch;
    batch.reserve(config_.batch_size);
    for (std::size_t i = 0; i < config_.batch_size; ++i) batch.push_back(replay[rng.index(replay.size())]);
    last = update(batch);
}

Losses DqnAgent::update(std::span<const Transition> batch) {
    if (batch.empty()) return {};
    std::vector<double> grad(online.params.size(), 0.0);
    double loss = 0.0;
    const double n = static_cast<double>(batch.size());
    for (const auto& t : batch) {
        Mlp::Cache cache;
        const auto q = online.forward(t.obs, &cache);
        const auto next_q = target.forward(t.next);
        const double y = dqn_target(t.reward, config_.gamma, next_q, t.done);
        const double td = q[static_cast<std::size_t>(t.action)] - y;
        // Huber with delta 1: quadratic near the target, linear beyond it.
        const double a = std::abs(td);
        loss += (a <= 1.0 ? 0.5 * td * td : a - 0.5) / n;
        std::vector<double> dout(kRlActionCount, 0.0);
        dout[static_cast<std::size_t>(t.action)] = std::clamp(td, -1.0, 1.0) / n;
        online.backward(cache, dout, grad);
    }
    require_finite(loss, "DQN", updates);
    clip_norm(grad, config_.grad_clip);
    opt_.step(online.params, grad);
    if (++updates % config_.target_copy_every == 0) {
        target = online;
        ++target_copies;
    }
    return Losses{0.0, loss, 0.0};
}

void DqnAgent::end_episode(int episode, Rng&) {
    const double span = std::max(1.0, config_.explore_fraction * config_.episodes);
    const double f = std::min(1.0, (episode + 1) / span);
    explore = config_.explore_start + f * (config_.explore_end - config_.explore_start);
}

Json DqnAgent::to_json() const {
    return {{"kind", "dqn"}, {"networks", {{"online", online.to_json()}, {"target", target.to_json()}}}};
}

PolicyAgent::PolicyAgent(AgentKind kind, const TrainConfig& config, Rng& rng)
    : actor(kObservationSize, kRlActionCount),
      critic(kObservationSize, 1),
      kind_(kind),
      config_(config),
      actor_opt_(config.lr_policy),
      critic_opt_(config.lr_value) {
    config.validate();
    actor.init(rng);
    critic.init(rng);
}

int PolicyAgent::act(const Observation6& obs, Rng& rng, bool greedy) {
    const auto p = softmax(actor.forward(obs));
    std::size_t a = argmax(p);
    if (!greedy) {
        const double u = rng.uniform();
        double acc = 0.0;
        a = p.size() - 1;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) {
                a = i;
                break;
            }
        }
    }
    last_prob_ = p[a];
    return static_cast<int>(a);
}

void PolicyAgent::observe(const Transition& t, Rng&) {
    buffer.push_back(t);
    behaviour_probs.push_back(last_prob_);
}

void PolicyAgent::end_episode(int, Rng&) {
    if (buffer.empty()) return;
    last = kind_ == AgentKind::ppo ? ppo_update(buffer, behaviour_probs) : ac_update(buffer);
    buffer.clear();
    behaviour_probs.clear();
}

namespace {

// Gradient of -adv * log p[a] - beta * H(p) with respect to the logits.
std::vector<double> policy_logit_grad(const std::vector<double>& p, int a, double adv_scale, double beta, double& entropy) {
    entropy = 0.0;
    for (double v : p) entropy -= v > 0 ? v * std::log(v) : 0.0;
    std::vector<double> d(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double onehot = static_cast<int>(k) == a ? 1.0 : 0.0;
        const double logp = p[k] > 0 ? std::log(p[k]) : 0.0;
        d[k] = adv_scale * (p[k] - onehot) + beta * p[k] * (logp + entropy);
    }
    return d;
}

}  // namespace

Losses PolicyAgent::ac_update(std::span<const Transition> rollout) {
    Losses out;
    if (rollout.empty()) return out;
    const double n = static_cast<double>(rollout.size());
    std::vector<double> ga(actor.params.size(), 0.0);
    std::vector<double> gc(critic.params.size(), 0.0);
    // The critic regresses on discounted returns; one-step TD targets never
    // carried the rare success bonus back far enough for the actor to see it.
    std::vector<double> rewards;
    for (const auto& t : rollout) rewards.push_back(t.reward);
    std::vector<double> targets = discounted_returns(rewards, config_.gamma);
    if (!rollout.back().done) {
        const double tail = critic.forward(rollout.back().next)[0];
        double k = config_.gamma;
        for (std::size_t i = targets.size(); i-- > 0; k *= config_.gamma) targets[i] += k * tail;
    }
    std::vector<double> advs;
    for (std::size_t i = 0; i < rollout.size(); ++i) advs.push_back(targets[i] - critic.forward(rollout[i].obs)[0]);
    const double mean = std::accumulate(advs.begin(), advs.end(), 0.0) / n;
    double var = 0.0;
    for (double a : advs) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n) + 1e-8;
    for (std::size_t i = 0; i < rollout.size(); ++i) {
        const auto& t = rollout[i];
        Mlp::Cache cc;
        const double v = critic.forward(t.obs, &cc)[0];
        const double td_target = targets[i];
        const double adv = rollout.size() > 1 ? (advs[i] - mean) / sd : advs[i];
        const double dv = (v - td_target) / n;
        critic.backward(cc, std::span<const double>(&dv, 1), gc);
        out.value += 0.5 * (v - td_target) * (v - td_target) / n;

        Mlp::Cache ca;
        const auto p = softmax(actor.forward(t.obs, &ca));
        double h = 0.0;
        const auto dz = policy_logit_grad(p, t.action, adv / n, config_.entropy_coef / n, h);
        actor.backward(ca, dz, ga);
        out.policy -= adv * std::log(std::max(p[static_cast<std::size_t>(t.action)], 1e-12)) / n;
        out.entropy += h / n;
    }
    require_finite(out.policy + out.value, "actor-critic", 0);
    clip_norm(ga, config_.grad_clip);
    clip_norm(gc, config_.grad_clip);
    actor_opt_.step(actor.params, ga);
    critic_opt_.step(critic.params, gc);
    return out;
}

Losses PolicyAgent::ppo_update(std::span<const Transition> rollout, std::span<const double> old_probs) {
    Losses out;
    if (rollout.empty()) return out;
    if (old_probs.size() != rollout.size()) throw DomainError("one behaviour probability per transition is required");
    std::vector<double> rewards;
    for (const auto& t : rollout) rewards.push_back(t.reward);
    const auto returns = discounted_returns(rewards, config_.gamma);
    const double n = static_cast<double>(rollout.size());

    std::vector<double> adv(rollout.size());
    for (std::size_t i = 0; i < rollout.size(); ++i) adv[i] = returns[i] - critic.forward(rollout[i].obs)[0];
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / n;
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / n) + 1e-8;
    for (auto& a : adv) a = (a - mean) / sd;

    for (int epoch = 0; epoch < config_.ppo_epochs; ++epoch) {
        out = {};
        std::vector<double> ga(actor.params.size(), 0.0);
        std::vector<double> gc(critic.params.size(), 0.0);
        for (std::size_t i = 0; i < rollout.size(); ++i) {
            const auto& t = rollout[i];
            Mlp::Cache ca;
            const auto p = softmax(actor.forward(t.obs, &ca));
            const double pa = p[static_cast<std::size_t>(t.action)];
            const double ratio = pa / std::max(old_probs[i], 1e-12);
            out.policy -= ppo_surrogate(ratio, adv[i], config_.ppo_clip) / n;
            // The clipped branch is flat in the logits.
            const bool clipped = (adv[i] > 0 && ratio > 1.0 + config_.ppo_clip) ||
                                 (adv[i] < 0 && ratio < 1.0 - config_.ppo_clip);
            double h = 0.0;
            auto dz = policy_logit_grad(p, t.action, clipped ? 0.0 : ratio * adv[i] / n, config_.entropy_coef / n, h);
            actor.backward(ca, dz, ga);
            out.entropy += h / n;

            Mlp::Cache cc;
            const double v = critic.forward(t.obs, &cc)[0];
            const double dv = (v - returns[i]) / n;
            critic.backward(cc, std::span<const double>(&dv, 1), gc);
            out.value += 0.5 * (v - returns[i]) * (v - returns[i]) / n;
        }
        require_finite(out.policy + out.value, "PPO", epoch);
        clip_norm(ga, config_.grad_clip);
        clip_norm(gc, config_.grad_clip);
        actor_opt_.step(actor.params, ga);
        critic_opt_.step(critic.params, gc);
    }
    return out;
}

Json PolicyAgent::to_json() const {
    return {{"kind", to_string(kind_)}, {"networks", {{"actor", actor.to_json()}, {"critic", critic.to_json()}}}};
}

int RandomAgent::act(const Observation6&, Rng& rng, bool) { return static_cast<int>(rng.index(kRlActionCount)); }

std::unique_ptr<Agent> make_agent(AgentKind kind, const TrainConfig& config, Rng& rng) {
    switch (kind) {
        case AgentKind::dqn: return std::make_unique<DqnAgent>(config, rng);
        case AgentKind::ac:
        case AgentKind::ppo: return std::make_unique<PolicyAgent>(kind, config, rng);
        case AgentKind::random: return std::make_unique<RandomAgent>();
    }
    throw ConfigError("unknown agent kind");
}

TrainResult train(AgentKind kind, const ScenarioConfig& scenario, const TrainConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(mix_seed(seed, 0x7A11ULL));
    TrainResult result;
    result.agent = make_agent(kind, config, rng);
    RlEnv env(scenario, config);
    for (int ep = 0; ep < config.episodes; ++ep) {
        auto obs = env.reset(mix_seed(seed, static_cast<std::uint64_t>(ep) + 1));
        CurvePoint point;
        point.episode = ep + 1;
        for (bool done = false; !done;) {
            const int a = result.agent->act(obs, rng, false);
            const auto st = env.step(a);
            result.agent->observe(Transition{obs, a, st.reward, st.obs, st.done}, rng);
            point.reward += st.reward;
            obs = st.obs;
            done = st.done;
            point.success = st.verdict == Verdict::success;
        }
        result.agent->end_episode(ep, rng);
        point.rounds = env.rounds();
        point.policy_loss = result.agent->last.policy;
        point.value_loss = result.agent->last.value;
        result.curve.push_back(point);
    }
    return result;
}

PolicyEvaluation evaluate_policy(Agent& agent, const ScenarioConfig& scenario, const TrainConfig& config, int episodes,
                                 std::uint64_t seed) {
    PolicyEvaluation ev;
    ev.episodes = episodes;
    if (episodes <= 0) return ev;
    Rng rng(mix_seed(seed, 0xE7A1ULL));
    RlEnv env(scenario, config);
    int successes = 0;
    long actions = 0;
    double latency = 0.0;
    double cost = 0.0;
    long survived = 0;
    long steps = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        auto obs = env.reset(mix_seed(seed, 0x10000ULL + static_cast<std::uint64_t>(ep)));
        double episode_seconds = 0.0;
        for (bool done = false; !done;) {
            const auto start = std::chrono::steady_clock::now();
            const int a = agent.act(obs, rng, agent.kind() != AgentKind::random);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            episode_seconds += secs;
            latency += secs;
            ++actions;
            const auto st = env.step(a);
            for (bool s : env.last_survived()) {
                survived += s ? 1 : 0;
                ++steps;
            }
            obs = st.obs;
            done = st.done;
            if (done && st.verdict == Verdict::success) ++successes;
        }
        cost += episode_seconds * config.cost_per_cpu_second;
    }
    ev.efficacy = static_cast<double>(successes) / episodes;
    ev.mean_latency_s = actions > 0 ? latency / static_cast<double>(actions) : 0.0;
    ev.mean_cost = cost / episodes;
    ev.surviving_rate = steps > 0 ? static_cast<double>(survived) / static_cast<double>(steps) : 0.0;
    return ev;
}

std::string curve_csv(std::span<const CurvePoint> curve) {
    std::ostringstream s;
    s << "episode,reward,success,rounds,policy_loss,value_loss\n";
    for (const auto& p : curve) {
        s << p.episode << ',' << p.reward << ',' << (p.success ? 1 : 0) << ',' << p.rounds << ',' << p.policy_loss << ','
          << p.value_loss << '\n';
    }
    return s.str();
}

void save_agent(const Agent& agent, const std::string& path) {
    Json j = agent.to_json();
    j["format"] = "pdef-agent";
    j["version"] = 1;
    j["observation_size"] = kObservationSize;
    j["actions"] = kRlActionCount;
    write_file_atomic(path, j.dump() + "\n");
}

std::unique_ptr<Agent> load_agent(const std::string& path, const TrainConfig& config) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("agent file " + path + " is not JSON: " + ex.what());
    }
    if (j.value("format", std::string{}) != "pdef-agent" || j.value("version", 0) != 1) {
        throw IoError("agent file " + path + " has an unknown format or version");
    }
    try {
        const auto kind = agent_kind_from_string(j.at("kind").get<std::string>());
        Rng rng(0);
        auto agent = make_agent(kind, config, rng);
        const auto& nets = j.value("networks", Json::object());
        if (auto* dqn = dynamic_cast<DqnAgent*>(agent.get())) {
            dqn->online = Mlp::from_json(nets.at("online"));
            dqn->target = Mlp::from_json(nets.at("target"));
        } else if (auto* pol = dynamic_cast<PolicyAgent*>(agent.get())) {
            pol->actor = Mlp::from_json(nets.at("actor"));
            pol->critic = Mlp::from_json(nets.at("critic"));
        }
        return agent;
    } catch (const nlohmann::json::exception& ex) {
        throw IoError("agent file " + path + " is malformed: " + ex.what());
    }
}

}  // namespace pdef
