#pragma once

#include "pdef/analyzer.hpp"
#include "pdef/cloud_env.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pdef {

// The closed set of defense actions. `generated` wraps up to eight primitive
// steps produced by the reasoner.
enum class ActionKind {
    block_source,
    rate_limit,
    recycle_half_open,
    scale_replicas,
    shuffle_address,
    migrate_vm,
    throttle_vm,
    isolate_vm,
    noop,
    generated,
};
std::string_view to_string(ActionKind kind);
std::optional<ActionKind> action_kind_from_string(std::string_view name);

inline constexpr int kMaxGeneratedSteps = 8;
inline constexpr int kMaxRateLimit = 10000;

enum class ParamType { ipv4, integer, number, string, steps };

struct ParamSpec {
    std::string name;
    ParamType type = ParamType::string;
};

// Declared parameters of a kind, in canonical order.
const std::vector<ParamSpec>& param_schema(ActionKind kind);
// Canonical "kind(name:type,...)" text; library entries are keyed by it.
std::string schema_signature(ActionKind kind);

struct Action {
    ActionKind kind = ActionKind::noop;
    Json params = Json::object();
    std::string subtask;          // subtask the action serves, empty when free-standing
    std::string target;           // human-readable target (IP, VM, service)
    std::string expected_effect;

    bool operator==(const Action&) const = default;
};

Json to_json(const Action& a);
// Throws DomainError on an unknown kind or non-object parameters.
Action action_from_json(const Json& j);

struct Violation {
    std::string code;   // schema | format | range | constraint | capacity | forbidden_effect
    std::string field;
    std::string message;

    bool operator==(const Violation&) const = default;
};
Json to_json(const Violation& v);

// Parameter-shape check only (types, required and unexpected fields).
std::vector<Violation> check_schema(const Action& a);

// Full gate: schema, ranges, analyzer constraints and environment caps.
// Never throws.
std::vector<Violation> validate_action(const Action& a, const Constraints& constraints, const EnvState& env);

// Applies an action to the environment. Only the deployer calls this, and
// only after validation passed; impossible operations throw DomainError.
void apply_action(EnvState& env, const Action& a);

// Pool pods the action would hold once applied (for resource estimates).
int pods_after(const EnvState& env, const Action& a);

}  // namespace pdef
