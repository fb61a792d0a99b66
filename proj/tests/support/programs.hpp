#pragma once

#include "pdef/deployer.hpp"

namespace pdef::test {

inline ActionProgram library_program(Action a) {
    ActionProgram p;
    p.action = std::move(a);
    p.origin = "library";
    p.script = render_script(p.action);
    return p;
}

// Random actions, many of them malformed.
inline Action random_action(Rng& rng, const EnvState& env) {
    Action a;
    a.kind = static_cast<ActionKind>(rng.index(10));
    const auto pick_ip = [&]() -> Json {
        switch (rng.index(4)) {
            case 0: return env.service.legit_sources[rng.index(env.service.legit_sources.size())];
            case 1: return env.config.attacker_ips[rng.index(env.config.attacker_ips.size())];
            case 2: return "999.1.1.1";
            default: return 42;
        }
    };
    const auto pick_int = [&]() -> Json {
        if (rng.uniform() < 0.1) return "7";
        return static_cast<int>(rng.index(41)) - 20;
    };
    const auto pick_vm = [&]() -> Json {
        if (rng.uniform() < 0.1) return "vm-ghost";
        return env.cluster.vms[rng.index(env.cluster.vms.size())].id;
    };
    switch (a.kind) {
        case ActionKind::block_source: a.params = {{"ip", pick_ip()}}; break;
        case ActionKind::rate_limit: a.params = {{"ip", pick_ip()}, {"limit", pick_int()}}; break;
        case ActionKind::recycle_half_open: a.params = {{"min_age", pick_int()}}; break;
        case ActionKind::scale_replicas: a.params = {{"delta", pick_int()}}; break;
        case ActionKind::migrate_vm: a.params = {{"vm", pick_vm()}, {"target_machine", pick_int()}}; break;
        case ActionKind::throttle_vm: a.params = {{"vm", pick_vm()}, {"cap", 150.0 * rng.uniform() - 20.0}}; break;
        case ActionKind::isolate_vm: a.params = {{"vm", pick_vm()}}; break;
        case ActionKind::generated: {
            Json steps = Json::array();
            const auto n = rng.index(4);
            for (std::size_t i = 0; i < n; ++i) {
                Action inner;
                inner.kind = ActionKind::scale_replicas;
                inner.params = {{"delta", pick_int()}};
                steps.push_back(to_json(inner));
            }
            a.params = {{"steps", steps}};
            break;
        }
        default: break;
    }
    if (rng.uniform() < 0.05) a.params["unexpected"] = true;
    return a;
}

}  // namespace pdef::test
