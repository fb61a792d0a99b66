#include "pdef/actions.hpp"

#include <algorithm>
#include <cmath>

namespace pdef {

namespace {

struct KindName {
    ActionKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {ActionKind::block_source, "block_source"},
    {ActionKind::rate_limit, "rate_limit"},
    {ActionKind::recycle_half_open, "recycle_half_open"},
    {ActionKind::scale_replicas, "scale_replicas"},
    {ActionKind::shuffle_address, "shuffle_address"},
    {ActionKind::migrate_vm, "migrate_vm"},
    {ActionKind::throttle_vm, "throttle_vm"},
    {ActionKind::isolate_vm, "isolate_vm"},
    {ActionKind::noop, "noop"},
    {ActionKind::generated, "generated"},
};

const char* type_name(ParamType t) {
    switch (t) {
        case ParamType::ipv4: return "ipv4";
        case ParamType::integer: return "integer";
        case ParamType::number: return "number";
        case ParamType::string: return "string";
        case ParamType::steps: return "steps";
    }
    return "string";
}

bool type_matches(const Json& v, ParamType t) {
    switch (t) {
        case ParamType::ipv4:
        case ParamType::string: return v.is_string();
        case ParamType::integer:
            if (v.is_number_integer()) return true;
            // Integral floats such as 2.0 are accepted; reasoners emit them.
            return v.is_number_float() && std::isfinite(v.get<double>()) && v.get<double>() == std::floor(v.get<double>());
        case ParamType::number: return v.is_number() && std::isfinite(v.get<double>());
        case ParamType::steps: return v.is_array();
    }
    return false;
}

long long as_int(const Json& v) {
    return v.is_number_integer() ? v.get<long long>() : static_cast<long long>(v.get<double>());
}

bool is_legit_source(const EnvState& env, const std::string& ip) {
    const auto& ls = env.service.legit_sources;
    return std::find(ls.begin(), ls.end(), ip) != ls.end();
}

void add(std::vector<Violation>& out, std::string code, std::string field, std::string message) {
    out.push_back(Violation{std::move(code), std::move(field), std::move(message)});
}

}  // namespace

std::string_view to_string(ActionKind kind) {
    for (const auto& kn : kKindNames) {
        if (kn.kind == kind) return kn.name;
    }
    return "noop";
}

std::optional<ActionKind> action_kind_from_string(std::string_view name) {
    for (const auto& kn : kKindNames) {
        if (name == kn.name) return kn.kind;
    }
    return std::nullopt;
}

const std::vector<ParamSpec>& param_schema(ActionKind kind) {
    static const std::vector<ParamSpec> none;
    static const std::vector<ParamSpec> ip{{"ip", ParamType::ipv4}};
    static const std::vector<ParamSpec> limit{{"ip", ParamType::ipv4}, {"limit", ParamType::integer}};
    static const std::vector<ParamSpec> recycle{{"min_age", ParamType::integer}};
    static const std::vector<ParamSpec> scale{{"delta", ParamType::integer}};
    static const std::vector<ParamSpec> migrate{{"vm", ParamType::string}, {"target_machine", ParamType::integer}};
    static const std::vector<ParamSpec> throttle{{"vm", ParamType::string}, {"cap", ParamType::number}};
    static const std::vector<ParamSpec> vm{{"vm", ParamType::string}};
    static const std::vector<ParamSpec> steps{{"steps", ParamType::steps}};
    switch (kind) {
        case ActionKind::block_source: return ip;
        case ActionKind::rate_limit: return limit;
        case ActionKind::recycle_half_open: return recycle;
        case ActionKind::scale_replicas: return scale;
        case ActionKind::migrate_vm: return migrate;
        case ActionKind::throttle_vm: return throttle;
        case ActionKind::isolate_vm: return vm;
        case ActionKind::generated: return steps;
        case ActionKind::shuffle_address:
        case ActionKind::noop: return none;
    }
    return none;
}

std::string schema_signature(ActionKind kind) {
    std::string s(to_string(kind));
    s += '(';
    bool first = true;
    for (const auto& p : param_schema(kind)) {
        if (!first) s += ',';
        first = false;
        s += p.name;
        s += ':';
        s += type_name(p.type);
    }
    s += ')';
    return s;
}

Json to_json(const Action& a) {
    Json j = {{"kind", to_string(a.kind)}, {"parameters", a.params}};
    if (!a.subtask.empty()) j["subtask"] = a.subtask;
    if (!a.target.empty()) j["target"] = a.target;
    if (!a.expected_effect.empty()) j["expected_effect"] = a.expected_effect;
    return j;
}

Action action_from_json(const Json& j) {
    if (!j.is_object()) throw DomainError("action must be an object");
    const auto kind_it = j.find("kind");
    if (kind_it == j.end() || !kind_it->is_string()) throw DomainError("action lacks a kind");
    const auto kind = action_kind_from_string(kind_it->get<std::string>());
    if (!kind) throw DomainError("unknown action kind '" + kind_it->get<std::string>() + "'");
    Action a;
    a.kind = *kind;
    if (const auto p = j.find("parameters"); p != j.end() && !p->is_null()) {
        if (!p->is_object()) throw DomainError("action parameters must be an object");
        a.params = *p;
    }
    a.subtask = j.value("subtask", std::string{});
    a.target = j.value("target", std::string{});
    a.expected_effect = j.value("expected_effect", std::string{});
    return a;
}

Json to_json(const Violation& v) { return {{"code", v.code}, {"field", v.field}, {"message", v.message}}; }

std::vector<Violation> check_schema(const Action& a) {
    std::vector<Violation> out;
    if (!a.params.is_object()) {
        add(out, "schema", "parameters", "parameters must be an object");
        return out;
    }
    const auto& schema = param_schema(a.kind);
    for (const auto& spec : schema) {
        const auto it = a.params.find(spec.name);
        if (it == a.params.end()) {
            add(out, "schema", spec.name, "missing parameter '" + spec.name + "'");
        } else if (!type_matches(*it, spec.type)) {
            add(out, "schema", spec.name, "parameter '" + spec.name + "' must be " + type_name(spec.type));
        } else if (spec.type == ParamType::ipv4 && !is_valid_ipv4(it->get<std::string>())) {
            add(out, "format", spec.name, "'" + it->get<std::string>() + "' is not a dotted IPv4 address");
        }
    }
    for (const auto& [key, value] : a.params.items()) {
        const bool declared =
            std::any_of(schema.begin(), schema.end(), [&, &k = key](const ParamSpec& s) { return s.name == k; });
        if (!declared) add(out, "schema", key, "unexpected parameter '" + key + "'");
    }
    return out;
}

std::vector<Violation> validate_action(const Action& a, const Constraints& constraints, const EnvState& env) {
    auto out = check_schema(a);
    if (!out.empty()) return out;
    const auto& cfg = env.config;
    const auto& p = a.params;
    switch (a.kind) {
        case ActionKind::block_source: {
            const auto ip = p["ip"].get<std::string>();
            if (is_legit_source(env, ip)) add(out, "forbidden_effect", "ip", ip + " is an allowlisted client");
            break;
        }
        case ActionKind::rate_limit: {
            const auto ip = p["ip"].get<std::string>();
            if (is_legit_source(env, ip)) add(out, "forbidden_effect", "ip", ip + " is an allowlisted client");
            const auto limit = as_int(p["limit"]);
            if (limit < 0 || limit > kMaxRateLimit) {
                add(out, "range", "limit", "limit " + std::to_string(limit) + " outside 0.." + std::to_string(kMaxRateLimit));
            }
            break;
        }
        case ActionKind::recycle_half_open: {
            const auto age = as_int(p["min_age"]);
            if (age < 0 || age > cfg.syn_hold_steps) {
                add(out, "range", "min_age",
                    "min_age " + std::to_string(age) + " outside 0.." + std::to_string(cfg.syn_hold_steps));
            }
            break;
        }
        case ActionKind::scale_replicas: {
            const auto delta = as_int(p["delta"]);
            const long long target = env.service.active_replicas + delta;
            if (delta == 0) add(out, "range", "delta", "delta must be non-zero");
            if (target < 1) add(out, "forbidden_effect", "delta", "would leave fewer than 1 replica");
            if (target > cfg.max_replicas) {
                add(out, "range", "delta",
                    "target " + std::to_string(target) + " replicas exceeds cap " + std::to_string(cfg.max_replicas));
            }
            if (target * env.service.pods_per_replica > cfg.pod_pool) {
                add(out, "capacity", "delta", "target exceeds pod pool of " + std::to_string(cfg.pod_pool));
            }
            if (delta > constraints.max_new_replicas) {
                add(out, "constraint", "delta",
                    "delta " + std::to_string(delta) + " exceeds max_new_replicas " +
                        std::to_string(constraints.max_new_replicas));
            }
            break;
        }
        case ActionKind::shuffle_address:
        case ActionKind::noop: break;
        case ActionKind::migrate_vm: {
            const auto id = p["vm"].get<std::string>();
            const auto machine = as_int(p["target_machine"]);
            const Vm* vm = env.cluster.find(id);
            if (vm == nullptr) {
                add(out, "range", "vm", "unknown vm '" + id + "'");
                break;
            }
            if (machine < 0 || machine >= env.cluster.machines()) {
                add(out, "range", "target_machine", "machine " + std::to_string(machine) + " does not exist");
                break;
            }
            if (machine == vm->host) add(out, "range", "target_machine", "vm already runs on machine " + std::to_string(machine));
            if (env.cluster.vms_on(static_cast<int>(machine)) >= env.cluster.vms_per_machine_cap) {
                add(out, "capacity", "target_machine",
                    "machine " + std::to_string(machine) + " already hosts " +
                        std::to_string(env.cluster.vms_per_machine_cap) + " VMs");
            }
            break;
        }
        case ActionKind::throttle_vm:
        case ActionKind::isolate_vm: {
            const auto id = p["vm"].get<std::string>();
            const Vm* vm = env.cluster.find(id);
            if (vm == nullptr) {
                add(out, "range", "vm", "unknown vm '" + id + "'");
                break;
            }
            if (vm->role == VmRole::victim) add(out, "forbidden_effect", "vm", "the protected workload cannot be restricted");
            if (a.kind == ActionKind::throttle_vm) {
                const double cap = p["cap"].get<double>();
                if (cap < 0 || cap > cfg.mem_cap) add(out, "range", "cap", "cap outside 0.." + std::to_string(cfg.mem_cap));
            }
            break;
        }
        case ActionKind::generated: {
            const auto& steps = p["steps"];
            if (steps.empty() || static_cast<int>(steps.size()) > kMaxGeneratedSteps) {
                add(out, "range", "steps", "generated programs hold 1.." + std::to_string(kMaxGeneratedSteps) + " steps");
                break;
            }
            for (std::size_t i = 0; i < steps.size(); ++i) {
                const std::string field = "steps[" + std::to_string(i) + "]";
                try {
                    const Action step = action_from_json(steps[i]);
                    if (step.kind == ActionKind::generated) {
                        add(out, "schema", field, "generated programs cannot nest");
                        continue;
                    }
                    for (auto v : validate_action(step, constraints, env)) {
                        v.field = field + "." + v.field;
                        out.push_back(std::move(v));
                    }
                } catch (const DomainError& ex) {
                    add(out, "schema", field, ex.what());
                }
            }
            break;
        }
    }
    return out;
}

void apply_action(EnvState& env, const Action& a) {
    const auto& p = a.params;
    switch (a.kind) {
        case ActionKind::block_source: mutate::block_source(env, p.at("ip").get<std::string>()); break;
        case ActionKind::rate_limit:
            mutate::rate_limit(env, p.at("ip").get<std::string>(), static_cast<int>(as_int(p.at("limit"))));
            break;
        case ActionKind::recycle_half_open: mutate::recycle_half_open(env, static_cast<int>(as_int(p.at("min_age")))); break;
        case ActionKind::scale_replicas: mutate::scale_replicas(env, static_cast<int>(as_int(p.at("delta")))); break;
        case ActionKind::shuffle_address: mutate::shuffle_address(env); break;
        case ActionKind::migrate_vm:
            mutate::migrate_vm(env, p.at("vm").get<std::string>(), static_cast<int>(as_int(p.at("target_machine"))));
            break;
        case ActionKind::throttle_vm: mutate::throttle_vm(env, p.at("vm").get<std::string>(), p.at("cap").get<double>()); break;
        case ActionKind::isolate_vm: mutate::isolate_vm(env, p.at("vm").get<std::string>()); break;
        case ActionKind::noop: break;
        case ActionKind::generated:
            for (const auto& step : p.at("steps")) apply_action(env, action_from_json(step));
            break;
    }
}

int pods_after(const EnvState& env, const Action& a) {
    const int pods = env.service.active_pods();
    if (a.kind == ActionKind::scale_replicas && a.params.contains("delta") && a.params["delta"].is_number()) {
        return std::clamp(pods + static_cast<int>(as_int(a.params["delta"])) * env.service.pods_per_replica, 0,
                          env.config.pod_pool);
    }
    if (a.kind == ActionKind::generated && a.params.contains("steps") && a.params["steps"].is_array()) {
        int total = pods;
        for (const auto& s : a.params["steps"]) {
            try {
                total += pods_after(env, action_from_json(s)) - pods;
            } catch (const DomainError&) {
            }
        }
        return std::clamp(total, 0, env.config.pod_pool);
    }
    return pods;
}

}  // namespace pdef
