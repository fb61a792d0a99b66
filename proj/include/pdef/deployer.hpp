#pragma once

#include "pdef/actions.hpp"
#include "pdef/feedback.hpp"
#include "pdef/reasoner.hpp"

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace pdef {

struct ProgramMetadata {
    std::string purpose;
    std::string environment;
    std::vector<double> effectiveness;  // weighted scores of rounds it ran in
    std::string created_at;

    bool operator==(const ProgramMetadata&) const = default;
};

struct ActionProgram {
    Action action;
    std::string origin = "library";  // library | generated
    ProgramMetadata metadata;
    std::string script;  // audit rendering, never executed

    bool operator==(const ActionProgram&) const = default;
};

struct LibraryMatch {
    std::optional<ActionProgram> program;
    std::string reason;  // why nothing matched
};

// Stored programs keyed by kind and parameter schema. Reads and writes are
// serialized so one library may back concurrent trials.
class DefenseLibrary {
public:
    // block_source, rate_limit, scale_replicas and noop.
    static DefenseLibrary seeded();

    LibraryMatch match(const std::string& kind, const Json& parameters) const;
    // Adds the program's kind if new, otherwise appends to its history only.
    void archive(const ActionProgram& program, std::optional<double> effectiveness);
    std::size_t size() const;
    std::optional<ProgramMetadata> metadata(const std::string& key) const;
    std::vector<std::string> keys() const;

    Json to_json() const;
    static DefenseLibrary from_json(const Json& j);
    void save(const std::string& path) const;
    static DefenseLibrary load(const std::string& path);

    DefenseLibrary() = default;
    DefenseLibrary(const DefenseLibrary& o);
    DefenseLibrary& operator=(const DefenseLibrary& o);

private:
    struct Entry {
        std::string kind;
        std::string origin;
        ProgramMetadata metadata;
    };
    mutable std::mutex mu_;
    std::map<std::string, Entry> entries_;  // schema_signature -> entry
};

// Shell rendering of a program for the audit log. Never executed.
std::string render_script(const Action& a);

struct ValidationReport {
    bool syntax_ok = false;
    bool static_ok = false;
    bool sandbox_ok = false;
    std::vector<std::string> failures;
    std::string fingerprint;  // binds the report to one program and env step
    double availability_before = 0.0;
    double availability_after = 0.0;

    bool deployable() const { return syntax_ok && static_ok && sandbox_ok; }
};
Json to_json(const ValidationReport& r);

std::string program_fingerprint(const ActionProgram& p, const EnvState& env);

// Syntax (DSL shape), static (ranges, constraints, forbidden effects) and a
// sandbox run: the program and a no-op each advance their own snapshot by one
// step; the program must not lower availability nor break an invariant.
// The live environment is never touched.
ValidationReport validate_program(const ActionProgram& p, const EnvState& env, const Constraints& constraints);

// Throws ContractViolation unless `report` is a deployable report for this
// very program on this env step.
ExecutionRecord execute(const ActionProgram& p, const ValidationReport& report, EnvState& env);

struct GenerationResult {
    ActionProgram program;
    int attempts = 0;
    Usage usage;
};

inline constexpr int kRepairRetries = 2;

// Asks the reasoner for a program; a reply that fails the static checks is
// sent back with its violations up to `retries` more times. Throws
// GenerationError when no acceptable program comes back.
GenerationResult generate_program(const std::string& objective, const Json& env_summary,
                                  const Constraints& constraints, const EnvState& env, Reasoner& reasoner,
                                  const std::optional<Action>& requested = std::nullopt,
                                  int retries = kRepairRetries);

struct DeployedStep {
    ActionProgram program;
    ValidationReport report;
    ExecutionRecord record;
    bool generated = false;
};

struct DeploymentResult {
    std::vector<DeployedStep> steps;
    bool all_deployable = true;
    bool all_executed = true;
    Usage usage;
};

Json env_summary(const EnvState& env);

// Resolves, validates and executes every action of a plan in order.
DeploymentResult deploy_plan(const std::vector<Action>& actions, EnvState& env, const Constraints& constraints,
                             DefenseLibrary& library, Reasoner& reasoner, const std::string& audit_log = {});

}  // namespace pdef
