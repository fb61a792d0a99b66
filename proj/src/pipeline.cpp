#include "pdef/pipeline.hpp"

#include "pdef/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace pdef {

void PipelineConfig::validate() const {
    scenario.validate();
    weights.validate();
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("epsilon must lie in [0,1]");
    if (!(epsilon_decay > 0.0 && epsilon_decay <= 1.0)) throw ConfigError("epsilon decay must lie in (0,1]");
    if (memory_window < 1) throw ConfigError("memory window must be >= 1");
    if (!(cost_ref > 0.0)) throw ConfigError("cost reference must be positive");
    if (!(analyzer.k > 0.0)) throw ConfigError("risk k must be positive");
}

std::vector<bool> EpisodeResult::survived() const {
    std::vector<bool> out;
    for (const auto& r : round_results) out.insert(out.end(), r.survived.begin(), r.survived.end());
    return out;
}

std::vector<double> EpisodeResult::action_latencies() const {
    std::vector<double> out;
    for (const auto& r : round_results) out.insert(out.end(), r.action_latency_s.begin(), r.action_latency_s.end());
    return out;
}

std::vector<int> migration_targets(const EnvState& env, std::size_t limit) {
    const auto& cl = env.cluster;
    const int home = cl.victim().host;
    std::vector<std::pair<double, int>> free;
    for (int m = 0; m < cl.machines(); ++m) {
        if (m == home || cl.vms_on(m) >= cl.vms_per_machine_cap) continue;
        free.emplace_back(cl.machine_contention(m), m);
    }
    std::sort(free.begin(), free.end());
    std::vector<int> out;
    for (std::size_t i = 0; i < free.size() && i < limit; ++i) out.push_back(free[i].second);
    return out;
}

TruthAssessment truth_assessment(std::span<const StepOutcome> outcomes, const EnvState& env, int attack_streak) {
    TruthAssessment t;
    const auto& svc = env.service;
    const auto& cl = env.cluster;
    const auto& victim = cl.victim();
    bool attacked = false;
    double affected = svc.active_pods() > 0 ? static_cast<double>(svc.affected_pods()) / svc.active_pods() : 0.0;
    double attacker_contention = 0.0;
    for (const auto& vm : cl.vms) {
        if (vm.role == VmRole::attacker && !vm.isolated && vm.host == victim.host) attacker_contention += vm.contention_emitted;
    }
    switch (env.config.attack) {
        case AttackKind::syn_flood: attacked = svc.half_open() > 0; break;
        case AttackKind::slow_http: attacked = svc.slow() > 0; break;
        case AttackKind::memory_dos: attacked = attacker_contention >= AnalyzerConfig{}.scope_contention; break;
        case AttackKind::none: break;
    }
    if (cl.contention_seen_by(victim) >= AnalyzerConfig{}.scope_contention) affected = 1.0;
    double worst = 1.0;
    for (const auto& o : outcomes) worst = std::min({worst, o.service_availability, o.progress_gain});
    t.hypothesis = attacked ? env.config.attack : AttackKind::none;
    t.risk = score_risk(scope_subscore(affected), impact_subscore(1.0 - worst),
                        duration_subscore(attacked ? attack_streak + 1 : 0));
    return t;
}

namespace {

Json status_payload(const SecurityRecord& r) {
    const auto& s = r.status_summary;
    Json alerts = Json::array();
    for (const auto& a : r.alerts) {
        if (alerts.size() >= 12) break;
        alerts.push_back({{"kind", a.kind}, {"source", a.source}, {"count", a.count}});
    }
    return {{"cpu_util", s.cpu_util},
            {"memory_util", s.memory_util},
            {"connections", s.total_connections},
            {"half_open", s.half_open_connections},
            {"slow", s.slow_connections},
            {"capacity", s.capacity},
            {"active_replicas", s.active_replicas},
            {"affected_pods", s.affected_pods},
            {"active_pods", s.active_pods},
            {"min_availability", s.min_availability},
            {"victim_contention", s.victim_contention.value_or(0.0)},
            {"alerts", std::move(alerts)}};
}

std::vector<CandidatePlan> parse_candidates(const Json& reply) {
    std::vector<CandidatePlan> out;
    for (const auto& cj : reply.value("candidates", Json::array())) {
        CandidatePlan c;
        c.name = cj.value("name", std::string{});
        c.rationale = cj.value("rationale", std::string{});
        c.estimates = norms_from_json(cj.value("estimates", Json::object()));
        try {
            for (const auto& aj : cj.at("actions")) c.actions.push_back(action_from_json(aj));
        } catch (const std::exception&) {
            continue;  // an unreadable action disqualifies the whole candidate
        }
        out.push_back(std::move(c));
    }
    return out;
}

Json memory_hint(const PlanMemoryView& v) {
    Json realized = Json::object();
    for (const auto& [sig, n] : v.realized) realized[sig] = norms_to_json(n);
    return {{"failed", v.failed}, {"realized", std::move(realized)}};
}

Flag truth_flag(RoundLabel label) { return label == RoundLabel::secure ? Flag::success : Flag::failure; }

}  // namespace

EpisodeRunner::EpisodeRunner(PipelineConfig config, Reasoner& reasoner, std::uint64_t seed)
    : config_(std::move(config)),
      reasoner_(reasoner),
      seed_(seed),
      memory_(config_.memory_window, config_.memory_enabled),
      library_(DefenseLibrary::seeded()),
      rng_(mix_seed(seed, 0x5e1ec7ULL)),
      epsilon_(config_.epsilon) {
    config_.validate();
    if (!config_.memory_path.empty()) {
        memory_ = EpisodeMemory::load(config_.memory_path, config_.memory_window, config_.memory_enabled);
    }
}

EpisodeResult EpisodeRunner::run_episode() {
    ++episode_;
    EpisodeResult result;
    result.episode = episode_;
    result.epsilon = epsilon_;
    const auto billed_at_start = reasoner_.total_usage();

    ScenarioConfig sc = config_.scenario;
    sc.seed = mix_seed(seed_, static_cast<std::uint64_t>(episode_));
    EnvState env = init_env(sc);
    env.clock.episode = episode_;
    const EnvCaps caps = EnvCaps::from(sc);
    AnalyzerHistory history(config_.analyzer.window);
    std::vector<RoundLabel> labels;
    int truth_streak = 0;

    std::string trace;
    auto trace_line = [&](const Json& j) {
        if (config_.trace_path.empty()) return;
        if (!trace.empty()) trace += '\n';
        trace += j.dump();
    };
    auto flush_trace = [&] {
        if (config_.trace_path.empty() || trace.empty()) return;
        append_line(config_.trace_path, trace);
        trace.clear();
    };

    // Undefended warm-up: the first round's telemetry comes from these steps.
    std::vector<StepOutcome> window;
    for (int i = 0; i < sc.steps_per_round; ++i) window.push_back(step_env(env));

    Verdict verdict = Verdict::undecided;
    while (verdict == Verdict::undecided && static_cast<int>(labels.size()) < sc.max_rounds) {
        RoundResult rr;
        rr.round = env.clock.round;
        const auto billed_at_round = reasoner_.total_usage();
        std::vector<RawEvent> raw;
        for (const auto& o : window) {
            for (const auto& e : o.raw_events) {
                raw.push_back(e);
                trace_line({{"type", "event"}, {"episode", episode_}, {"round", rr.round}, {"step", o.step},
                            {"data", to_json(e, true)}});
            }
        }

        // Collector.
        RelevanceTable table = RelevanceTable::defaults();
        bool reasoner_ok = true;
        {
            std::set<std::string> names;
            for (const auto& e : raw) names.insert(e.event);
            try {
                const auto reply = reasoner_.complete(Stage::collector, {{"round", rr.round}, {"event_names", names}});
                for (const auto& [name, cls] : reply.response.at("classes").items()) {
                    if (const auto r = relevance_from_string(cls.get<std::string>())) table.set(name, *r);
                }
            } catch (const TransportError&) {
                throw;
            } catch (const ReasonerError& ex) {
                reasoner_ok = false;
                rr.stage_errors.push_back(std::string("collector: ") + ex.what());
            }
        }
        const SecurityRecord record = collect(std::span<const RawEvent>(raw), rr.round, table);
        rr.stage_ok[0] = reasoner_ok && validate_record(record).empty() &&
                         conserves(record, tally_by_truth(std::span<const RawEvent>(raw)));
        env.clock.complete_stage(Stage::collector);

        // Analyzer.
        const RiskAssessment proposal = assess(record, history, caps, config_.analyzer);
        RiskAssessment assessment = proposal;
        reasoner_ok = true;
        try {
            const Json payload = {{"round", rr.round},
                                  {"proposal",
                                   {{"scope_sub", proposal.scope_sub},
                                    {"impact_sub", proposal.impact_sub},
                                    {"duration_sub", proposal.duration_sub},
                                    {"attack_hypothesis", hypothesis_name(proposal.hypothesis)}}},
                                  {"rationale", proposal.rationale},
                                  {"status", status_payload(record)}};
            const auto reply = reasoner_.complete(Stage::analyzer, payload).response;
            const int scope = reply.at("scope_sub").get<int>();
            const int impact = reply.at("impact_sub").get<int>();
            const int duration = reply.at("duration_sub").get<int>();
            assessment.risk_score = score_risk(scope, impact, duration);
            assessment.scope_sub = scope;
            assessment.impact_sub = impact;
            assessment.duration_sub = duration;
            assessment.hypothesis = hypothesis_from_string(reply.at("attack_hypothesis").get<std::string>());
            assessment.rationale = reply.value("rationale", proposal.rationale);
        } catch (const TransportError&) {
            throw;
        } catch (const Error& ex) {
            assessment = proposal;
            reasoner_ok = false;
            rr.stage_errors.push_back(std::string("analyzer: ") + ex.what());
        } catch (const nlohmann::json::exception& ex) {
            assessment = proposal;
            reasoner_ok = false;
            rr.stage_errors.push_back(std::string("analyzer: ") + ex.what());
        }
        history.push(observe(record), assessment.hypothesis != AttackKind::none);
        const auto truth = truth_assessment(window, env, truth_streak);
        truth_streak = truth.hypothesis != AttackKind::none ? truth_streak + 1 : 0;
        rr.risk_score = assessment.risk_score;
        rr.hypothesis = assessment.hypothesis;
        rr.truth_risk = truth.risk;
        rr.truth_hypothesis = truth.hypothesis;
        rr.stage_ok[1] = reasoner_ok && std::abs(assessment.risk_score - truth.risk) <= 2.0 &&
                         assessment.hypothesis == truth.hypothesis;
        env.clock.complete_stage(Stage::analyzer);

        // Decision.
        const PlanContext context = context_of(assessment);
        rr.context = context.key();
        DefensePlan plan;
        std::vector<Subtask> subtasks;
        reasoner_ok = true;
        try {
            subtasks = decompose(assessment);
        } catch (const PlanningError& ex) {
            subtasks = {Subtask{"restore_availability", "restore_availability", priority_class(assessment.risk_score), {},
                                assessment.constraints}};
            rr.stage_errors.push_back(std::string("decision: ") + ex.what());
        }
        if (!subtasks.empty()) {
            const PlanMemoryView view = config_.memory_enabled ? memory_.view(context.key()) : PlanMemoryView{};
            Json tasks = Json::array();
            for (const auto& s : subtasks) {
                tasks.push_back({{"id", s.id}, {"objective", s.objective}, {"priority", s.priority}, {"depends_on", s.depends_on}});
            }
            Json kinds = Json::array();
            for (int k = 0; k <= static_cast<int>(ActionKind::noop); ++k) kinds.push_back(schema_signature(static_cast<ActionKind>(k)));
            const Json payload = {{"round", rr.round},
                                  {"hypothesis", hypothesis_name(assessment.hypothesis)},
                                  {"risk_score", assessment.risk_score},
                                  {"bucket", to_string(assessment.bucket())},
                                  {"subtasks", std::move(tasks)},
                                  {"max_new_replicas", assessment.constraints.max_new_replicas},
                                  {"offenders", assessment.offenders},
                                  {"contenders", assessment.contenders},
                                  {"victim_vm", assessment.victim_vm.value_or("")},
                                  {"migration_targets", migration_targets(env)},
                                  {"action_kinds", std::move(kinds)},
                                  {"memory", memory_hint(view)}};
            try {
                const auto reply = reasoner_.complete(Stage::decision, payload).response;
                const auto projected = project_candidates(parse_candidates(reply), subtasks);
                const auto filtered = filter_valid(projected, assessment.constraints, env);
                if (!filtered.valid.empty()) {
                    plan = select_plan(filtered.valid, config_.weights, epsilon_, view, rng_);
                } else {
                    rr.stage_errors.push_back("decision: no candidate passed validation");
                }
            } catch (const TransportError&) {
                throw;
            } catch (const ReasonerError& ex) {
                reasoner_ok = false;
                rr.stage_errors.push_back(std::string("decision: ") + ex.what());
            }
        }
        rr.plan = plan.empty() ? "empty" : plan.signature;
        rr.explored = plan.explored;
        rr.stage_ok[2] = reasoner_ok && (assessment.risk_score < config_.plan_risk_threshold ||
                                         (!plan.empty() && respects_order(plan, subtasks)));
        env.clock.complete_stage(Stage::decision);

        // Deployer.
        const EnvState before = snapshot(env);
        const auto deployed =
            deploy_plan(plan.actions, env, assessment.constraints, library_, reasoner_, config_.audit_log);
        std::vector<ExecutionRecord> executions;
        for (const auto& s : deployed.steps) {
            executions.push_back(s.record);
            rr.action_latency_s.push_back(s.record.latency_s);
            if (!s.record.error.empty()) rr.stage_errors.push_back("deployer: " + s.record.error);
        }
        rr.stage_ok[3] = deployed.all_deployable && deployed.all_executed;
        env.clock.complete_stage(Stage::deployer);

        // The environment runs until the next round's collection.
        window.clear();
        for (int i = 0; i < sc.steps_per_round; ++i) {
            window.push_back(step_env(env));
            rr.survived.push_back(window.back().survived);
        }
        rr.label = label_round(window, sc);
        labels.push_back(rr.label);

        // Feedback. Reasoner spend of this round's earlier stages is billed to it.
        auto billed = executions;
        const double stage_cost = usage_since(billed_at_round, reasoner_.total_usage()).cost;
        double deploy_cost = 0.0;
        for (const auto& e : executions) deploy_cost += e.cost;
        billed.push_back(ExecutionRecord{"reasoning", "", 0.0, stage_cost - deploy_cost, 0, false, ""});
        rr.evaluation = evaluate(before, env, window, billed, config_.weights, config_.cost_ref);
        rr.flag = truth_flag(rr.label);
        reasoner_ok = true;
        try {
            const Json payload = {{"round", rr.round},
                                  {"label", to_string(rr.label)},
                                  {"plan", rr.plan},
                                  {"survived_steps", std::count(rr.survived.begin(), rr.survived.end(), true)},
                                  {"steps", rr.survived.size()},
                                  {"evaluation", to_json(rr.evaluation)}};
            const auto reply = reasoner_.complete(Stage::feedback, payload).response;
            rr.flag = reply.at("round_flag").get<std::string>() == "success" ? Flag::success : Flag::failure;
        } catch (const TransportError&) {
            throw;
        } catch (const ReasonerError& ex) {
            reasoner_ok = false;
            rr.stage_errors.push_back(std::string("feedback: ") + ex.what());
        }
        IntraEntry entry;
        entry.round = rr.round;
        entry.context = rr.context;
        entry.signature = rr.plan;
        entry.plan = to_json(plan);
        entry.validated = deployed.all_deployable;
        entry.executions = executions;
        entry.evaluation = rr.evaluation;
        entry.label = rr.label;
        entry.flag = rr.flag;
        memory_.record(std::move(entry));
        for (const auto& s : deployed.steps) {
            if (s.generated && s.record.executed) library_.archive(s.program, rr.evaluation.weighted_score);
        }
        verdict = endpoint_check(labels, sc.stable_rounds);
        rr.stage_ok[4] = reasoner_ok && memory_.check_invariants().empty() && rr.flag == truth_flag(rr.label);
        env.clock.complete_stage(Stage::feedback);
        rr.cost = usage_since(billed_at_round, reasoner_.total_usage()).cost;

        Json summary = {{"type", "round"},        {"episode", episode_},        {"round", rr.round},
                        {"label", to_string(rr.label)}, {"risk", rr.risk_score},  {"truth_risk", rr.truth_risk},
                        {"hypothesis", hypothesis_name(rr.hypothesis)}, {"context", rr.context},
                        {"plan", rr.plan},          {"explored", rr.explored},  {"stage_ok", rr.stage_ok},
                        {"errors", rr.stage_errors}};
        trace_line(summary);
        flush_trace();
        result.round_results.push_back(std::move(rr));
    }

    result.verdict = verdict == Verdict::success ? Verdict::success : Verdict::failure;
    result.rounds = static_cast<int>(labels.size());
    result.steps_to_success = result.verdict == Verdict::success ? result.rounds : sc.max_rounds;
    memory_.finalize(episode_, result.verdict);
    if (!config_.memory_path.empty()) memory_.save(config_.memory_path);
    epsilon_ *= config_.epsilon_decay;
    result.usage = usage_since(billed_at_start, reasoner_.total_usage());
    return result;
}

}  // namespace pdef
