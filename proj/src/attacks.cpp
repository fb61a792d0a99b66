#include "pdef/attacks.hpp"

#include <algorithm>
#include <cmath>

namespace pdef {

AttackProfile make_profile(const ScenarioConfig& config, const ClusterState& cluster) {
    AttackProfile p;
    p.kind = config.attack;
    p.intensity = config.effective_intensity();
    p.jitter = config.attack_jitter;
    p.adaptation_delay = config.adaptation_delay;
    if (is_flooding(config.attack)) {
        p.sources.assign(config.attacker_ips.begin(), config.attacker_ips.begin() + config.attack_sources);
    } else if (config.attack == AttackKind::memory_dos) {
        for (const auto& vm : cluster.vms) {
            if (vm.role == VmRole::attacker) p.sources.push_back(vm.id);
        }
    }
    return p;
}

bool flooding_adapting(const EnvState& env, int step) {
    const int shuffled = env.service.shuffled_at_step;
    return shuffled >= 0 && step <= shuffled + env.profile.adaptation_delay;
}

AttackLoad emit_load(const AttackProfile& profile, const EnvState& env, int step) {
    if (profile.kind != env.config.attack) {
        throw ConfigError("attack profile '" + std::string(to_string(profile.kind)) + "' does not match scenario '" +
                          std::string(to_string(env.config.attack)) + "'");
    }
    AttackLoad load;
    if (profile.kind == AttackKind::none) return load;

    const double cap = env.config.mem_cap;
    for (std::size_t i = 0; i < profile.sources.size(); ++i) {
        const auto& source = profile.sources[i];
        const double u = hash_uniform(env.config.seed, static_cast<std::uint64_t>(step), 0xA77AC0ULL + i);
        const double scaled = profile.intensity * (1.0 + profile.jitter * (2.0 * u - 1.0));
        if (is_flooding(profile.kind)) {
            if (env.service.blocked_sources.count(source) != 0) continue;
            if (flooding_adapting(env, step)) continue;
            const int n = std::max(0, static_cast<int>(std::lround(scaled)));
            if (n == 0) continue;
            load.flows.push_back(
                Flow{source, profile.kind == AttackKind::syn_flood ? FlowKind::syn : FlowKind::slow, n});
        } else {
            const Vm* vm = env.cluster.find(source);
            if (vm == nullptr || vm->isolated) continue;
            if (vm->relocating_until >= 0 && step <= vm->relocating_until) continue;
            // Memory contention is bounded by the per-VM cap whatever the intensity.
            double emitted = std::min(cap, static_cast<double>(profile.intensity));
            if (profile.intensity < cap) emitted = std::min(cap, std::max(0.0, scaled));
            if (vm->throttle_cap) emitted = std::min(emitted, *vm->throttle_cap);
            load.contention[source] = emitted;
        }
    }
    return load;
}

}  // namespace pdef
