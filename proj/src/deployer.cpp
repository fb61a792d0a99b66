#include "pdef/deployer.hpp"

#include "pdef/io.hpp"

#include <chrono>
#include <sstream>

namespace pdef {

DefenseLibrary::DefenseLibrary(const DefenseLibrary& o) {
    std::lock_guard lock(o.mu_);
    entries_ = o.entries_;
}

DefenseLibrary& DefenseLibrary::operator=(const DefenseLibrary& o) {
    if (this != &o) {
        std::scoped_lock lock(mu_, o.mu_);
        entries_ = o.entries_;
    }
    return *this;
}

DefenseLibrary DefenseLibrary::seeded() {
    DefenseLibrary lib;
    const std::pair<ActionKind, const char*> seeds[] = {
        {ActionKind::block_source, "drop all traffic from one source address"},
        {ActionKind::rate_limit, "cap the connections one source may open per step"},
        {ActionKind::scale_replicas, "change the number of active replicas"},
        {ActionKind::noop, "take no action this round"},
    };
    for (const auto& [kind, purpose] : seeds) {
        lib.entries_[schema_signature(kind)] =
            Entry{std::string(to_string(kind)), "library", ProgramMetadata{purpose, "any", {}, format_iso8601(kTimelineOrigin)}};
    }
    return lib;
}

LibraryMatch DefenseLibrary::match(const std::string& kind_name, const Json& parameters) const {
    LibraryMatch m;
    const auto kind = action_kind_from_string(kind_name);
    if (!kind) {
        m.reason = "unknown action kind '" + kind_name + "'";
        return m;
    }
    const auto key = schema_signature(*kind);
    std::lock_guard lock(mu_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        m.reason = "no stored program for " + key;
        return m;
    }
    Action a;
    a.kind = *kind;
    a.params = parameters.is_object() ? parameters : Json::object();
    const auto violations = check_schema(a);
    if (!violations.empty() || !parameters.is_object()) {
        m.reason = "parameters do not fit " + key + (violations.empty() ? "" : ": " + violations.front().message);
        return m;
    }
    ActionProgram p;
    p.action = a;
    p.origin = "library";
    p.metadata = it->second.metadata;
    p.script = render_script(a);
    m.program = std::move(p);
    return m;
}

void DefenseLibrary::archive(const ActionProgram& program, std::optional<double> effectiveness) {
    const auto key = schema_signature(program.action.kind);
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) {
        Entry e{std::string(to_string(program.action.kind)), "generated", program.metadata};
        e.metadata.effectiveness.clear();
        it = entries_.emplace(key, std::move(e)).first;
    }
    if (effectiveness) it->second.metadata.effectiveness.push_back(*effectiveness);
}

std::size_t DefenseLibrary::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

std::optional<ProgramMetadata> DefenseLibrary::metadata(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second.metadata;
}

std::vector<std::string> DefenseLibrary::keys() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [k, e] : entries_) out.push_back(k);
    return out;
}

Json DefenseLibrary::to_json() const {
    std::lock_guard lock(mu_);
    Json entries = Json::array();
    for (const auto& [key, e] : entries_) {
        entries.push_back({{"key", key},
                           {"kind", e.kind},
                           {"origin", e.origin},
                           {"metadata",
                            {{"purpose", e.metadata.purpose},
                             {"environment", e.metadata.environment},
                             {"effectiveness", e.metadata.effectiveness},
                             {"created_at", e.metadata.created_at}}}});
    }
    return {{"format", "pdef-library"}, {"version", 1}, {"entries", std::move(entries)}};
}

DefenseLibrary DefenseLibrary::from_json(const Json& j) {
    try {
        if (j.value("format", std::string{}) != "pdef-library" || j.value("version", 0) != 1) {
            throw DomainError("not a version 1 library file");
        }
        DefenseLibrary lib;
        for (const auto& ej : j.at("entries")) {
            const auto kind = action_kind_from_string(ej.at("kind").get<std::string>());
            if (!kind) throw DomainError("library entry with unknown kind");
            const auto& mj = ej.at("metadata");
            lib.entries_[schema_signature(*kind)] =
                Entry{ej.at("kind").get<std::string>(), ej.value("origin", std::string("library")),
                      ProgramMetadata{mj.value("purpose", std::string{}), mj.value("environment", std::string{}),
                                      mj.value("effectiveness", std::vector<double>{}),
                                      mj.value("created_at", std::string{})}};
        }
        return lib;
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("malformed library file: ") + ex.what());
    }
}

void DefenseLibrary::save(const std::string& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

DefenseLibrary DefenseLibrary::load(const std::string& path) {
    const auto text = read_file_if_exists(path);
    if (!text) return seeded();
    try {
        return from_json(Json::parse(*text));
    } catch (const std::exception& ex) {
        throw IoError("cannot load library from " + path + ": " + ex.what());
    }
}

std::string render_script(const Action& a) {
    std::ostringstream s;
    const auto str = [&](const char* k) { return a.params.contains(k) ? a.params[k].dump() : std::string("\"\""); };
    const auto raw = [&](const char* k) {
        return a.params.contains(k) && a.params[k].is_string() ? a.params[k].get<std::string>() : str(k);
    };
    s << "#!/bin/bash\n# audit rendering of " << to_string(a.kind) << "; not executed\n";
    switch (a.kind) {
        case ActionKind::block_source:
            s << "IP=\"" << raw("ip") << "\"\n"
              << "iptables -A INPUT -s \"$IP\" -j DROP\n"
              << "logger -t pdef \"blocked $IP\"\n";
            break;
        case ActionKind::rate_limit:
            s << "IP=\"" << raw("ip") << "\"\n"
              << "iptables -A INPUT -s \"$IP\" -p tcp --syn -m limit --limit " << raw("limit")
              << "/minute -j ACCEPT\n"
              << "iptables -A INPUT -s \"$IP\" -p tcp --syn -j DROP\n"
              << "logger -t pdef \"rate limited $IP\"\n";
            break;
        case ActionKind::recycle_half_open:
            s << "ss -K state syn-recv  # entries older than " << raw("min_age") << " steps\n"
              << "logger -t pdef \"recycled stale connections\"\n";
            break;
        case ActionKind::scale_replicas:
            s << "kubectl scale deployment/service --replicas=\"$((CURRENT + " << raw("delta") << "))\"\n";
            break;
        case ActionKind::shuffle_address: s << "rotate-service-address  # new endpoint, clients re-resolve\n"; break;
        case ActionKind::migrate_vm:
            s << "virsh migrate --live " << raw("vm") << " qemu+ssh://machine-" << raw("target_machine") << "/system\n";
            break;
        case ActionKind::throttle_vm:
            s << "virsh memtune " << raw("vm") << " --hard-limit " << raw("cap") << "%\n";
            break;
        case ActionKind::isolate_vm: s << "virsh suspend " << raw("vm") << "\n"; break;
        case ActionKind::noop: s << ":\n"; break;
        case ActionKind::generated:
            if (a.params.contains("steps") && a.params["steps"].is_array()) {
                for (const auto& step : a.params["steps"]) {
                    try {
                        const auto inner = render_script(action_from_json(step));
                        s << inner.substr(inner.find('\n', inner.find('\n') + 1) + 1);
                    } catch (const DomainError&) {
                        s << "# unreadable step\n";
                    }
                }
            }
            break;
    }
    return s.str();
}

Json to_json(const ValidationReport& r) {
    return {{"syntax_ok", r.syntax_ok},
            {"static_ok", r.static_ok},
            {"sandbox_ok", r.sandbox_ok},
            {"deployable", r.deployable()},
            {"failures", r.failures},
            {"availability_before", r.availability_before},
            {"availability_after", r.availability_after}};
}

namespace {

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Digest of everything a defense action can change.
std::string env_digest(const EnvState& env) {
    std::ostringstream s;
    const auto& svc = env.service;
    s << env.clock.step << '|' << svc.active_replicas << '|' << svc.address_epoch << '|' << svc.connections() << '|';
    for (const auto& b : svc.blocked_sources) s << b << ',';
    s << '|';
    for (const auto& [ip, l] : svc.rate_limits) s << ip << '=' << l << ',';
    s << '|';
    for (const auto& vm : env.cluster.vms) {
        s << vm.id << '@' << vm.host << (vm.isolated ? "i" : "") << (vm.throttle_cap ? std::to_string(*vm.throttle_cap) : "")
          << ',';
    }
    return s.str();
}

}  // namespace

std::string program_fingerprint(const ActionProgram& p, const EnvState& env) {
    const auto h = fnv1a(env_digest(env), fnv1a(to_json(p.action).dump()));
    std::ostringstream s;
    s << std::hex << h;
    return s.str();
}

ValidationReport validate_program(const ActionProgram& p, const EnvState& env, const Constraints& constraints) {
    ValidationReport r;
    r.fingerprint = program_fingerprint(p, env);

    auto shape = check_schema(p.action);
    if (p.action.kind == ActionKind::generated && shape.empty()) {
        for (const auto& step : p.action.params["steps"]) {
            try {
                const auto inner = action_from_json(step);
                if (inner.kind == ActionKind::generated) shape.push_back(Violation{"schema", "steps", "nested program"});
                for (auto& v : check_schema(inner)) shape.push_back(std::move(v));
            } catch (const DomainError& ex) {
                shape.push_back(Violation{"schema", "steps", ex.what()});
            }
        }
    }
    if (p.origin == "generated" && p.metadata.purpose.empty()) {
        shape.push_back(Violation{"schema", "purpose", "generated programs need a purpose"});
    }
    r.syntax_ok = shape.empty();
    for (const auto& v : shape) r.failures.push_back("syntax: " + v.message);
    if (!r.syntax_ok) return r;

    const auto violations = validate_action(p.action, constraints, env);
    r.static_ok = violations.empty();
    for (const auto& v : violations) r.failures.push_back("static: " + v.code + " " + v.field + ": " + v.message);
    if (!r.static_ok) return r;

    EnvState baseline = snapshot(env);
    EnvState treated = snapshot(env);
    try {
        apply_action(treated, p.action);
        auto broken = check_invariants(treated);
        const auto before = step_env(baseline);
        const auto after = step_env(treated);
        for (auto& b : check_invariants(treated)) broken.push_back(std::move(b));
        r.availability_before = before.availability;
        r.availability_after = after.availability;
        for (const auto& b : broken) r.failures.push_back("sandbox: invariant broken: " + b);
        if (after.availability < before.availability) {
            r.failures.push_back("sandbox: availability drops from " + std::to_string(before.availability) + " to " +
                                 std::to_string(after.availability));
        }
        r.sandbox_ok = broken.empty() && after.availability >= before.availability;
    } catch (const Error& ex) {
        r.failures.push_back(std::string("sandbox: ") + ex.what());
        r.sandbox_ok = false;
    }
    return r;
}

ExecutionRecord execute(const ActionProgram& p, const ValidationReport& report, EnvState& env) {
    if (!report.deployable()) {
        throw ContractViolation("refusing to execute " + std::string(to_string(p.action.kind)) +
                                " without a passing validation report");
    }
    if (report.fingerprint != program_fingerprint(p, env)) {
        throw ContractViolation("validation report does not belong to this program and state");
    }
    ExecutionRecord rec;
    rec.action = std::string(to_string(p.action.kind));
    rec.program_origin = p.origin;
    const int pods_before = env.service.active_pods();
    const auto start = std::chrono::steady_clock::now();
    apply_action(env, p.action);
    rec.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.resource_delta = env.service.active_pods() - pods_before;
    rec.executed = true;
    return rec;
}

Json env_summary(const EnvState& env) {
    const auto& svc = env.service;
    Json vms = Json::array();
    const auto& victim = env.cluster.victim();
    for (const auto& vm : env.cluster.vms) {
        if (vm.host != victim.host) continue;
        vms.push_back({{"id", vm.id}, {"host", vm.host}, {"isolated", vm.isolated}});
    }
    return {{"active_replicas", svc.active_replicas},
            {"max_replicas", env.config.max_replicas},
            {"pods_per_replica", svc.pods_per_replica},
            {"pod_pool", env.config.pod_pool},
            {"service_address", svc.address},
            {"blocked_sources", svc.blocked_sources},
            {"allowlisted_sources", svc.legit_sources.size()},
            {"victim_host_vms", std::move(vms)},
            {"machines", env.cluster.machines()},
            {"vms_per_machine", env.cluster.vms_per_machine_cap}};
}

GenerationResult generate_program(const std::string& objective, const Json& summary, const Constraints& constraints,
                                  const EnvState& env, Reasoner& reasoner, const std::optional<Action>& requested,
                                  int retries) {
    GenerationResult g;
    Json failures = Json::array();
    for (int attempt = 0; attempt <= retries; ++attempt) {
        ++g.attempts;
        Json payload = {{"round", env.clock.round},
                        {"objective", objective},
                        {"env_summary", summary},
                        {"constraints",
                         {{"max_new_replicas", constraints.max_new_replicas},
                          {"cpu_headroom", constraints.cpu_headroom},
                          {"memory_headroom", constraints.memory_headroom}}},
                        {"failures", failures}};
        if (requested) payload["action"] = to_json(*requested);
        ReasonerReply reply;
        try {
            reply = reasoner.complete(Stage::deployer, payload);
        } catch (const TransportError&) {
            throw;
        } catch (const ReasonerError& ex) {
            g.usage += reply.usage;
            failures.push_back(std::string("reply rejected: ") + ex.what());
            continue;
        }
        g.usage += reply.usage;
        try {
            const auto& pj = reply.response.at("program");
            ActionProgram p;
            p.action = action_from_json({{"kind", pj.at("kind")}, {"parameters", pj.value("parameters", Json::object())}});
            if (requested) {
                p.action.subtask = requested->subtask;
                p.action.target = requested->target;
                p.action.expected_effect = requested->expected_effect;
            }
            p.origin = "generated";
            p.metadata.purpose = pj.value("purpose", std::string{});
            p.metadata.environment = "service " + env.service.address + ", scenario " + std::string(to_string(env.config.attack));
            p.metadata.created_at =
                format_iso8601(kTimelineOrigin + static_cast<std::int64_t>(env.clock.completed_steps()) * env.config.step_seconds);
            p.script = render_script(p.action);
            const auto violations = validate_action(p.action, constraints, env);
            if (p.metadata.purpose.empty()) failures.push_back("program lacks a purpose");
            for (const auto& v : violations) failures.push_back(v.code + " " + v.field + ": " + v.message);
            if (violations.empty() && !p.metadata.purpose.empty()) {
                g.program = std::move(p);
                return g;
            }
        } catch (const std::exception& ex) {
            failures.push_back(std::string("unreadable program: ") + ex.what());
        }
    }
    throw GenerationError("no valid program for '" + objective + "' after " + std::to_string(g.attempts) +
                          " attempts: " + (failures.empty() ? std::string("?") : failures.back().get<std::string>()));
}

namespace {

std::string describe(const Action& a) {
    std::string s(to_string(a.kind));
    if (!a.target.empty()) s += " on " + a.target;
    if (!a.params.empty()) s += " with " + a.params.dump();
    if (!a.expected_effect.empty()) s += ": " + a.expected_effect;
    return s;
}

}  // namespace

DeploymentResult deploy_plan(const std::vector<Action>& actions, EnvState& env, const Constraints& constraints,
                             DefenseLibrary& library, Reasoner& reasoner, const std::string& audit_log) {
    DeploymentResult out;
    for (const auto& action : actions) {
        DeployedStep step;
        double generation_latency = 0.0;
        double generation_cost = 0.0;
        const auto match = library.match(std::string(to_string(action.kind)), action.params);
        if (match.program) {
            step.program = *match.program;
            step.program.action.subtask = action.subtask;
            step.program.action.target = action.target;
            step.program.action.expected_effect = action.expected_effect;
        } else {
            const auto start = std::chrono::steady_clock::now();
            const auto billed = reasoner.total_usage();
            try {
                auto g = generate_program(describe(action), env_summary(env), constraints, env, reasoner, action);
                step.program = std::move(g.program);
                step.generated = true;
            } catch (const GenerationError& ex) {
                step.program.action = action;
                step.program.origin = "generated";
                step.record.action = std::string(to_string(action.kind));
                step.record.error = ex.what();
                step.report.failures.push_back(std::string("generation: ") + ex.what());
            }
            generation_latency = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            const auto spent = usage_since(billed, reasoner.total_usage());
            out.usage += spent;
            generation_cost = spent.cost;
        }
        if (step.record.error.empty()) {
            step.report = validate_program(step.program, env, constraints);
            if (step.report.deployable()) {
                step.record = execute(step.program, step.report, env);
                if (!audit_log.empty()) append_line(audit_log, step.program.script);
            } else {
                step.record.action = std::string(to_string(step.program.action.kind));
                step.record.program_origin = step.program.origin;
                step.record.error = step.report.failures.empty() ? "not deployable" : step.report.failures.front();
            }
        }
        step.record.latency_s += generation_latency;
        step.record.cost += generation_cost;
        out.all_deployable = out.all_deployable && step.report.deployable();
        out.all_executed = out.all_executed && step.record.executed;
        out.steps.push_back(std::move(step));
    }
    return out;
}

}  // namespace pdef
