#pragma once

#include "pdef/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pdef {

// Every simulation constant of a scenario. Defaults reproduce the reference
// setup: 5 of at most 10 replicas, 10 pods each out of a 100-pod pool, 256
// connections per pod, 5x10 machines hosting up to 10 VMs, 30 s steps.
struct ScenarioConfig {
    AttackKind attack = AttackKind::syn_flood;
    std::uint64_t seed = 1;

    // Elastic service.
    int max_replicas = 10;
    int pod_pool = 100;
    int pods_per_replica = 10;
    int initial_replicas = 5;
    int conns_per_pod = 256;
    int mem_cap = 100;

    // Co-resident VM cluster.
    int racks = 5;
    int machines_per_rack = 10;
    int vms_per_machine = 10;
    int runtime_cap = 100;
    int max_bystanders_per_machine = 5;
    int victim_host_bystanders = 2;
    int bystander_contention = 0;  // idle co-residents; raise to model noisy neighbours

    // Clock and episode structure.
    int step_seconds = 30;
    int steps_per_round = 4;
    int stable_rounds = 5;
    int max_rounds = 50;

    // Dynamics the reference setup leaves open.
    int legit_demand = 1000;
    double legit_jitter = 0.1;
    int legit_sources = 20;
    int syn_hold_steps = 8;
    double survive_threshold = 0.95;
    double compromise_threshold = 0.5;

    // Attack profile.
    int attack_sources = 2;
    int attack_intensity = 0;  // 0 selects the per-kind default
    double attack_jitter = 0.2;
    int adaptation_delay = 3;
    std::vector<std::string> attacker_ips{"203.0.113.7", "198.51.100.23"};

    int total_machines() const { return racks * machines_per_rack; }
    int initial_pods() const { return initial_replicas * pods_per_replica; }
    int effective_intensity() const;

    // Throws ConfigError on any structural cap violation.
    void validate() const;

    bool operator==(const ScenarioConfig&) const = default;
};

int default_intensity(AttackKind kind);

// Key-value text format: one `key = value` per line, '#' starts a comment,
// list values are comma separated. Unknown keys are rejected.
ScenarioConfig parse_scenario_config(const std::string& text);
ScenarioConfig load_scenario_config(const std::string& path);
std::string format_scenario_config(const ScenarioConfig& config);

}  // namespace pdef
