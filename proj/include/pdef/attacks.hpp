#pragma once

#include "pdef/cloud_env.hpp"

namespace pdef {

// Profile for the configured scenario. Flooding profiles use the configured
// attacker IPs; memory DoS uses the co-resident attacker VM ids.
AttackProfile make_profile(const ScenarioConfig& config, const ClusterState& cluster);

// Load the profile emits at `step`. Blocked sources and sources still
// re-acquiring a shuffled address (or a migrated victim) emit nothing.
// Throws ConfigError when the profile kind does not match the scenario.
AttackLoad emit_load(const AttackProfile& profile, const EnvState& env, int step);

// True while a flooding attacker has not yet re-acquired the service address.
bool flooding_adapting(const EnvState& env, int step);

}  // namespace pdef
