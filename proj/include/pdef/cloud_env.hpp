#pragma once

#include "pdef/common.hpp"
#include "pdef/config.hpp"
#include "pdef/telemetry.hpp"

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace pdef {

// Connections from one source that arrived in the same step share a group.
struct ConnGroup {
    std::string source;
    int age = 0;  // steps since admission
    int count = 0;

    bool operator==(const ConnGroup&) const = default;
};

struct Pod {
    int legit = 0;                      // short-lived, released every step
    std::vector<ConnGroup> half_open;   // SYN entries, expire at the hold time
    std::vector<ConnGroup> slow;        // slow HTTP requests, held until recycled
    double memory_util = 0.0;

    int half_open_count() const;
    int slow_count() const;
    int hostile() const { return half_open_count() + slow_count(); }
    int total() const { return legit + hostile(); }

    bool operator==(const Pod&) const = default;
};

struct ServiceState {
    int active_replicas = 0;
    int pods_per_replica = 0;
    std::vector<Pod> pods;  // one entry per active pod
    std::string address;
    int address_epoch = 0;
    int shuffled_at_step = -1;  // last completed step when the address changed
    std::set<std::string> blocked_sources;
    std::map<std::string, int> rate_limits;  // source -> admitted connections per step
    std::vector<std::string> legit_sources;   // allowlist of known clients
    std::size_t rr_cursor = 0;

    int active_pods() const { return static_cast<int>(pods.size()); }
    int half_open() const;
    int slow() const;
    int connections() const;
    int affected_pods() const;

    bool operator==(const ServiceState&) const = default;
};

enum class VmRole { victim, attacker, bystander };
std::string_view to_string(VmRole role);

struct Vm {
    std::string id;
    int host = 0;
    VmRole role = VmRole::bystander;
    double contention_emitted = 0.0;
    double progress = 0.0;  // useful work, victim only
    std::optional<double> throttle_cap;
    bool isolated = false;
    int relocating_until = -1;  // attacker is re-acquiring the victim until this step

    bool operator==(const Vm&) const = default;
};

struct ClusterState {
    int racks = 0;
    int machines_per_rack = 0;
    int vms_per_machine_cap = 0;
    std::vector<Vm> vms;

    int machines() const { return racks * machines_per_rack; }
    int vms_on(int machine) const;
    const Vm* find(const std::string& id) const;
    Vm* find(const std::string& id);
    const Vm& victim() const;
    // Contention seen by `vm`: what the other non-isolated VMs on its host emit.
    double contention_seen_by(const Vm& vm) const;
    double machine_contention(int machine) const;

    bool operator==(const ClusterState&) const = default;
};

// step is the index of the next step to simulate; one step is step_seconds of
// simulated time. A round completes when the five stages have run in order.
struct Clock {
    int step = 1;
    int round = 1;
    int episode = 1;
    int stage_cursor = 0;

    int completed_steps() const { return step - 1; }
    // Throws ContractViolation when stages run out of order.
    void complete_stage(Stage stage);

    bool operator==(const Clock&) const = default;
};

struct AttackProfile {
    AttackKind kind = AttackKind::none;
    std::vector<std::string> sources;  // IPs for flooding, VM ids for memory DoS
    int intensity = 0;
    double jitter = 0.0;
    int adaptation_delay = 0;

    bool operator==(const AttackProfile&) const = default;
};

struct EnvState {
    ScenarioConfig config;
    AttackProfile profile;
    ServiceState service;
    ClusterState cluster;
    Clock clock;
    bool terminated = false;

    int capacity() const { return service.active_pods() * config.conns_per_pod; }
    int free_slots() const { return capacity() - service.connections(); }

    bool operator==(const EnvState&) const = default;
};

enum class FlowKind { legit, syn, slow };

struct Flow {
    std::string source;
    FlowKind kind = FlowKind::legit;
    int count = 0;

    bool operator==(const Flow&) const = default;
};

struct AttackLoad {
    std::vector<Flow> flows;
    std::map<std::string, double> contention;  // attacker VM id -> emitted contention

    int total() const;
};

struct LegitLoad {
    std::vector<Flow> flows;

    int total() const;
};

struct Inbound {
    AttackLoad attack;
    LegitLoad legit;
};

struct StepOutcome {
    int step = 0;
    double availability = 1.0;          // scenario-relevant availability
    double service_availability = 1.0;  // served / offered legit demand
    double progress_gain = 1.0;         // victim useful work this step
    bool survived = true;
    int legit_offered = 0;
    int legit_served = 0;
    int hostile_admitted = 0;
    int blocked_from_blocklist = 0;  // connections a blocked source tried to open
    std::vector<RawEvent> raw_events;
};

// Builds the initial world; throws ConfigError for structural cap violations.
EnvState init_env(const ScenarioConfig& config);

// The deterministic legit demand for the env's next step.
LegitLoad legit_load(const EnvState& env);

// Advances one step with the given inbound load. Never fails; saturation only
// lowers availability.
StepOutcome advance_step(EnvState& env, const Inbound& inbound);

// Advances one step using the env's own attack profile and legit demand.
StepOutcome step_env(EnvState& env);

Termination check_termination(std::span<const RoundLabel> history, int stable_rounds = 5);

RoundLabel label_round(std::span<const StepOutcome> outcomes, const ScenarioConfig& config);

inline EnvState snapshot(const EnvState& env) { return env; }

// Every violated structural invariant, empty when the state is consistent.
std::vector<std::string> check_invariants(const EnvState& env);

// Mutations used by the deployer. They throw DomainError when the operation
// is impossible in the current state; validation is expected to rule that out.
namespace mutate {
void block_source(EnvState& env, const std::string& ip);
void rate_limit(EnvState& env, const std::string& ip, int limit);
int recycle_half_open(EnvState& env, int min_age);
void scale_replicas(EnvState& env, int delta);
void shuffle_address(EnvState& env);
void migrate_vm(EnvState& env, const std::string& vm, int target_machine);
void throttle_vm(EnvState& env, const std::string& vm, double cap);
void isolate_vm(EnvState& env, const std::string& vm);
}  // namespace mutate

// Epoch seconds of the telemetry timeline origin (2025-06-01T10:00:00Z).
inline constexpr std::int64_t kTimelineOrigin = 1748772000;

}  // namespace pdef
