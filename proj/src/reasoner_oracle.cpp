#include "pdef/collector.hpp"
#include "pdef/json_schema.hpp"
#include "pdef/reasoner.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

namespace pdef {

namespace {

Json estimates(double security, double recovery, double resource, double financial, double qos) {
    return {{"security", security}, {"recovery", recovery}, {"resource", resource}, {"financial", financial}, {"qos", qos}};
}

Json act(const char* kind, Json params, const std::string& subtask, std::string target, std::string effect) {
    return {{"kind", kind},
            {"parameters", std::move(params)},
            {"subtask", subtask},
            {"target", std::move(target)},
            {"expected_effect", std::move(effect)}};
}

Json collector_rules(const Json& payload) {
    const auto table = RelevanceTable::defaults();
    Json classes = Json::object();
    for (const auto& name : payload.value("event_names", Json::array())) {
        if (name.is_string()) classes[name.get<std::string>()] = to_string(table.classify(name.get<std::string>()));
    }
    return {{"classes", std::move(classes)}};
}

Json analyzer_rules(const Json& payload) {
    const auto& p = payload.at("proposal");
    return {{"scope_sub", p.at("scope_sub")},
            {"impact_sub", p.at("impact_sub")},
            {"duration_sub", p.at("duration_sub")},
            {"attack_hypothesis", p.at("attack_hypothesis")},
            {"rationale", payload.value("rationale", std::string("rule table"))}};
}

Json decision_rules(const Json& payload) {
    const std::string hypothesis = payload.value("hypothesis", std::string("unknown"));
    const int max_new = payload.value("max_new_replicas", 0);
    std::vector<std::string> subtasks;
    for (const auto& s : payload.value("subtasks", Json::array())) subtasks.push_back(s.value("id", std::string{}));
    auto has = [&](const char* id) { return std::find(subtasks.begin(), subtasks.end(), id) != subtasks.end(); };
    std::vector<std::string> offenders = payload.value("offenders", std::vector<std::string>{});
    if (offenders.size() > 2) offenders.resize(2);
    const auto contenders = payload.value("contenders", std::vector<std::string>{});
    const auto victim = payload.value("victim_vm", std::string{});
    const auto targets = payload.value("migration_targets", std::vector<int>{});

    Json candidates = Json::array();
    std::string recommended;
    if (hypothesis == "syn_flood" || hypothesis == "slow_http") {
        const int grow = std::min(2, max_new);
        const bool scaling = has("scale_out") && grow > 0;
        Json a = Json::array();
        for (const auto& ip : offenders) a.push_back(act("block_source", {{"ip", ip}}, "block_sources", ip, "no new connections from " + ip));
        a.push_back(act("recycle_half_open", {{"min_age", 0}}, "recycle_half_open", "service", "held slots released"));
        if (scaling) a.push_back(act("scale_replicas", {{"delta", grow}}, "scale_out", "service", "capacity headroom"));
        candidates.push_back({{"name", "block_recycle_scale"},
                              {"actions", std::move(a)},
                              {"estimates", estimates(0.9, 0.5, scaling ? 1.0 - 0.1 * grow : 1.0, 1.0, 0.95)},
                              {"rationale", "cut the sources, free what they hold, add headroom"}});

        Json b = Json::array();
        b.push_back(act("shuffle_address", Json::object(), "block_sources", "service", "attackers lose the endpoint"));
        b.push_back(act("recycle_half_open", {{"min_age", 0}}, "recycle_half_open", "service", "held slots released"));
        candidates.push_back({{"name", "shuffle_recycle"},
                              {"actions", std::move(b)},
                              {"estimates", estimates(0.95, 0.5, 1.0, 1.0, 0.95)},
                              {"rationale", "move the endpoint without touching client traffic"}});

        Json c = Json::array();
        for (const auto& ip : offenders) {
            c.push_back(act("rate_limit", {{"ip", ip}, {"limit", 100}}, "block_sources", ip, "source capped at 100/step"));
        }
        c.push_back(act("recycle_half_open", {{"min_age", 0}}, "recycle_half_open", "service", "held slots released"));
        candidates.push_back({{"name", "rate_limit_recycle"},
                              {"actions", std::move(c)},
                              {"estimates", estimates(0.6, 0.5, 1.0, 1.0, 0.95)},
                              {"rationale", "throttle rather than cut, in case a source is shared"}});

        Json d = Json::array();
        d.push_back(act("recycle_half_open", {{"min_age", 0}}, "recycle_half_open", "service", "held slots released"));
        if (has("scale_out") && max_new > 0) {
            d.push_back(act("scale_replicas", {{"delta", max_new}}, "scale_out", "service", "absorb the flood"));
        }
        candidates.push_back({{"name", "recycle_scale"},
                              {"actions", std::move(d)},
                              {"estimates", estimates(0.6, 0.5, has("scale_out") ? 1.0 - 0.1 * max_new : 1.0, 1.0, 0.95)},
                              {"rationale", "outgrow the attack"}});
        recommended = "block_recycle_scale";
    } else if (hypothesis == "memory_dos") {
        if (!contenders.empty()) {
            Json a = Json::array();
            for (const auto& vm : contenders) a.push_back(act("isolate_vm", {{"vm", vm}}, "evict_contender", vm, "contention removed"));
            candidates.push_back({{"name", "isolate_contenders"},
                                  {"actions", std::move(a)},
                                  {"estimates", estimates(0.9, 0.5, 1.0, 1.0, 0.9)},
                                  {"rationale", "cut the noisy neighbours off the shared host"}});
        }
        if (!victim.empty() && !targets.empty()) {
            Json b = Json::array();
            b.push_back(act("migrate_vm", {{"vm", victim}, {"target_machine", targets.front()}}, "evict_contender", victim,
                            "victim runs on a quiet host"));
            candidates.push_back({{"name", "migrate_victim"},
                                  {"actions", std::move(b)},
                                  {"estimates", estimates(0.95, 0.6, 1.0, 1.0, 0.95)},
                                  {"rationale", "leave the contended host"}});
        }
        if (!contenders.empty()) {
            Json c = Json::array();
            for (const auto& vm : contenders) {
                c.push_back(act("throttle_vm", {{"vm", vm}, {"cap", 2}}, "evict_contender", vm, "contention capped at 2"));
            }
            candidates.push_back({{"name", "throttle_contenders"},
                                  {"actions", std::move(c)},
                                  {"estimates", estimates(0.6, 0.5, 1.0, 1.0, 0.8)},
                                  {"rationale", "keep the neighbours running at reduced share"}});
        }
        recommended = contenders.empty() ? "migrate_victim" : "isolate_contenders";
    }
    if (candidates.empty()) {
        if (max_new > 0) {
            candidates.push_back({{"name", "scale_one"},
                                  {"actions", Json::array({act("scale_replicas", {{"delta", 1}}, "restore_availability",
                                                               "service", "one more replica")})},
                                  {"estimates", estimates(0.5, 0.5, 0.9, 1.0, 0.9)},
                                  {"rationale", "cheap capacity while the cause is unclear"}});
        }
        candidates.push_back({{"name", "recycle_stale"},
                              {"actions", Json::array({act("recycle_half_open", {{"min_age", 2}}, "restore_availability",
                                                           "service", "stale slots released")})},
                              {"estimates", estimates(0.5, 0.5, 1.0, 1.0, 0.9)},
                              {"rationale", "release connections that stopped progressing"}});
        candidates.push_back({{"name", "hold"},
                              {"actions", Json::array({act("noop", Json::object(), "restore_availability", "service", "observe")})},
                              {"estimates", estimates(0.3, 0.5, 1.0, 1.0, 0.8)},
                              {"rationale", "wait for a clearer signal"}});
        recommended = "recycle_stale";
    }
    return {{"candidates", std::move(candidates)},
            {"recommended", recommended},
            {"rationale", "rule table for " + hypothesis}};
}

// Keyword rules for free-text objectives.
Json program_from_objective(const std::string& objective) {
    std::string text = objective;
    std::transform(text.begin(), text.end(), text.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    static const std::regex ip_re(R"((\d{1,3}\.\d{1,3}\.\d{1,3}\.\d{1,3}))");
    static const std::regex num_re(R"((-?\d+))");
    std::smatch m;
    const bool has_ip = std::regex_search(text, m, ip_re);
    const std::string ip = has_ip ? m[1].str() : "";
    auto first_number = [&](const std::string& s) {
        std::smatch n;
        std::string rest = has_ip ? std::regex_replace(s, ip_re, "") : s;
        return std::regex_search(rest, n, num_re) ? std::stoi(n[1].str()) : 0;
    };
    auto contains = [&](const char* w) { return text.find(w) != std::string::npos; };
    if (has_ip && (contains("rate") || contains("limit"))) {
        return {{"kind", "rate_limit"}, {"parameters", {{"ip", ip}, {"limit", std::max(0, first_number(text))}}}};
    }
    if (has_ip && (contains("block") || contains("drop") || contains("deny"))) {
        return {{"kind", "block_source"}, {"parameters", {{"ip", ip}}}};
    }
    if (contains("recycle") || contains("half-open") || contains("half_open")) {
        return {{"kind", "recycle_half_open"}, {"parameters", {{"min_age", std::max(0, first_number(text))}}}};
    }
    if (contains("shuffle") || contains("address")) return {{"kind", "shuffle_address"}, {"parameters", Json::object()}};
    if (contains("scale")) {
        const int n = first_number(text);
        return {{"kind", "scale_replicas"}, {"parameters", {{"delta", n == 0 ? 1 : n}}}};
    }
    return {{"kind", "noop"}, {"parameters", Json::object()}};
}

Json deployer_rules(const Json& payload) {
    Json program;
    const auto action = payload.find("action");
    if (action != payload.end() && action->is_object() && action->contains("kind")) {
        program = {{"kind", action->at("kind")}, {"parameters", action->value("parameters", Json::object())}};
    } else {
        program = program_from_objective(payload.value("objective", std::string{}));
    }
    const std::string objective = payload.value("objective", std::string{});
    program["purpose"] = objective.empty() ? std::string("defense step ") + program["kind"].get<std::string>() : objective;
    return {{"program", std::move(program)}};
}

Json feedback_rules(const Json& payload) {
    const bool secure = payload.value("label", std::string{}) == "secure";
    return {{"round_flag", secure ? "success" : "failure"},
            {"summary", secure ? "service stayed protected; keep the plan for this context"
                               : "protection lapsed during the interval; prefer another plan here"}};
}

}  // namespace

ReasonerReply OracleReasoner::complete(Stage stage, const Json& payload) {
    ReasonerReply reply;
    try {
        switch (stage) {
            case Stage::collector: reply.response = collector_rules(payload); break;
            case Stage::analyzer: reply.response = analyzer_rules(payload); break;
            case Stage::decision: reply.response = decision_rules(payload); break;
            case Stage::deployer: reply.response = deployer_rules(payload); break;
            case Stage::feedback: reply.response = feedback_rules(payload); break;
        }
    } catch (const nlohmann::json::exception& ex) {
        throw ReasonerError(std::string("oracle cannot read the ") + std::string(to_string(stage)) + " payload: " + ex.what());
    }
    const auto problems = validate_schema(stage_schema(stage), reply.response);
    if (!problems.empty()) throw ReasonerError("oracle produced an invalid reply: " + problems.front());
    return reply;
}

}  // namespace pdef
