#include "pdef/cloud_env.hpp"

#include "pdef/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace pdef {

namespace {

int group_total(const std::vector<ConnGroup>& groups) {
    int n = 0;
    for (const auto& g : groups) n += g.count;
    return n;
}

std::string legit_ip(int i) {
    return "10.0." + std::to_string(i / 250) + "." + std::to_string(i % 250 + 1);
}

// Largest-remainder split of `slots` in proportion to `demand`.
std::vector<int> proportional_admission(const std::vector<int>& demand, int slots) {
    const long long total = std::accumulate(demand.begin(), demand.end(), 0LL);
    std::vector<int> admitted(demand.size(), 0);
    if (total <= slots) return demand;
    if (slots <= 0) return admitted;
    std::vector<std::pair<double, std::size_t>> remainders;
    int given = 0;
    for (std::size_t i = 0; i < demand.size(); ++i) {
        const double exact = static_cast<double>(demand[i]) * slots / static_cast<double>(total);
        admitted[i] = static_cast<int>(std::floor(exact));
        given += admitted[i];
        remainders.emplace_back(exact - admitted[i], i);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; given < slots && k < remainders.size(); ++k) {
        const auto i = remainders[k].second;
        if (admitted[i] < demand[i]) {
            ++admitted[i];
            ++given;
        }
    }
    return admitted;
}

// Water-fills `count` connections over pods by free capacity, starting at the
// round-robin cursor so ties rotate between steps.
std::vector<int> spread(int count, const std::vector<int>& free, std::size_t cursor) {
    const std::size_t n = free.size();
    std::vector<int> alloc(n, 0);
    int remaining = count;
    while (remaining > 0) {
        std::vector<std::size_t> eligible;
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = (cursor + k) % n;
            if (free[i] - alloc[i] > 0) eligible.push_back(i);
        }
        if (eligible.empty()) break;
        const int share = remaining / static_cast<int>(eligible.size());
        if (share == 0) {
            for (std::size_t k = 0; k < eligible.size() && remaining > 0; ++k) {
                ++alloc[eligible[k]];
                --remaining;
            }
            break;
        }
        for (const auto i : eligible) {
            const int take = std::min(share, free[i] - alloc[i]);
            alloc[i] += take;
            remaining -= take;
        }
    }
    return alloc;
}

std::string step_timestamp(const EnvState& env, int step) {
    return format_iso8601(kTimelineOrigin + static_cast<std::int64_t>(step - 1) * env.config.step_seconds);
}

RawEvent make_event(const std::string& ts, std::string name, bool relevant, bool hostile) {
    RawEvent e;
    e.timestamp = ts;
    e.event = std::move(name);
    e.truth = GroundTruth{relevant, hostile};
    return e;
}

}  // namespace

int Pod::half_open_count() const { return group_total(half_open); }
int Pod::slow_count() const { return group_total(slow); }

int ServiceState::half_open() const {
    int n = 0;
    for (const auto& p : pods) n += p.half_open_count();
    return n;
}

int ServiceState::slow() const {
    int n = 0;
    for (const auto& p : pods) n += p.slow_count();
    return n;
}

int ServiceState::connections() const {
    int n = 0;
    for (const auto& p : pods) n += p.total();
    return n;
}

int ServiceState::affected_pods() const {
    int n = 0;
    for (const auto& p : pods) n += p.hostile() > 0 ? 1 : 0;
    return n;
}

std::string_view to_string(VmRole role) {
    switch (role) {
        case VmRole::victim: return "victim";
        case VmRole::attacker: return "attacker";
        case VmRole::bystander: return "bystander";
    }
    return "bystander";
}

int ClusterState::vms_on(int machine) const {
    return static_cast<int>(std::count_if(vms.begin(), vms.end(), [&](const Vm& v) { return v.host == machine; }));
}

const Vm* ClusterState::find(const std::string& id) const {
    for (const auto& v : vms) {
        if (v.id == id) return &v;
    }
    return nullptr;
}

Vm* ClusterState::find(const std::string& id) {
    for (auto& v : vms) {
        if (v.id == id) return &v;
    }
    return nullptr;
}

const Vm& ClusterState::victim() const {
    for (const auto& v : vms) {
        if (v.role == VmRole::victim) return v;
    }
    throw DomainError("cluster has no victim VM");
}

double ClusterState::contention_seen_by(const Vm& vm) const {
    double c = 0.0;
    for (const auto& other : vms) {
        if (other.id == vm.id || other.host != vm.host || other.isolated) continue;
        c += other.contention_emitted;
    }
    return c;
}

double ClusterState::machine_contention(int machine) const {
    double c = 0.0;
    for (const auto& v : vms) {
        if (v.host == machine && !v.isolated && v.role != VmRole::victim) c += v.contention_emitted;
    }
    return c;
}

void Clock::complete_stage(Stage stage) {
    if (static_cast<int>(stage) != stage_cursor) {
        throw ContractViolation("stage '" + std::string(to_string(stage)) + "' ran out of order");
    }
    if (++stage_cursor == kStageCount) {
        stage_cursor = 0;
        ++round;
    }
}

int AttackLoad::total() const {
    int n = 0;
    for (const auto& f : flows) n += f.count;
    return n;
}

int LegitLoad::total() const {
    int n = 0;
    for (const auto& f : flows) n += f.count;
    return n;
}

EnvState init_env(const ScenarioConfig& config) {
    config.validate();
    EnvState env;
    env.config = config;

    auto& svc = env.service;
    svc.active_replicas = config.initial_replicas;
    svc.pods_per_replica = config.pods_per_replica;
    svc.pods.assign(static_cast<std::size_t>(config.initial_pods()), Pod{});
    svc.address = "svc-0";
    for (int i = 0; i < config.legit_sources; ++i) svc.legit_sources.push_back(legit_ip(i));

    auto& cl = env.cluster;
    cl.racks = config.racks;
    cl.machines_per_rack = config.machines_per_rack;
    cl.vms_per_machine_cap = config.vms_per_machine;
    std::mt19937_64 rng(mix_seed(config.seed, 0xC1u));
    cl.vms.push_back(Vm{"vm-victim", 0, VmRole::victim});
    for (int b = 0; b < config.victim_host_bystanders; ++b) {
        cl.vms.push_back(Vm{"vm-0-" + std::to_string(b), 0, VmRole::bystander});
    }
    if (config.attack == AttackKind::memory_dos) {
        for (int a = 0; a < config.attack_sources; ++a) {
            cl.vms.push_back(Vm{"vm-att-" + std::to_string(a + 1), 0, VmRole::attacker});
        }
    }
    std::uniform_int_distribution<int> bystanders(0, config.max_bystanders_per_machine);
    for (int m = 1; m < cl.machines(); ++m) {
        const int n = bystanders(rng);
        for (int b = 0; b < n; ++b) {
            cl.vms.push_back(Vm{"vm-" + std::to_string(m) + "-" + std::to_string(b), m, VmRole::bystander});
        }
    }
    for (auto& vm : cl.vms) {
        if (vm.role == VmRole::bystander) vm.contention_emitted = config.bystander_contention;
    }
    env.profile = make_profile(config, cl);
    return env;
}

LegitLoad legit_load(const EnvState& env) {
    LegitLoad load;
    const auto& cfg = env.config;
    const double u = hash_uniform(cfg.seed, static_cast<std::uint64_t>(env.clock.step), 0x1E617ULL);
    const int demand =
        std::max(0, static_cast<int>(std::lround(cfg.legit_demand * (1.0 + cfg.legit_jitter * (2.0 * u - 1.0)))));
    const auto& sources = env.service.legit_sources;
    if (sources.empty() || demand == 0) return load;
    const int n = static_cast<int>(sources.size());
    for (int i = 0; i < n; ++i) {
        const int share = demand / n + (i < demand % n ? 1 : 0);
        if (share > 0) load.flows.push_back(Flow{sources[static_cast<std::size_t>(i)], FlowKind::legit, share});
    }
    return load;
}

StepOutcome advance_step(EnvState& env, const Inbound& inbound) {
    const auto& cfg = env.config;
    auto& svc = env.service;
    const int step = env.clock.step;
    StepOutcome out;
    out.step = step;
    const std::string ts = step_timestamp(env, step);

    // Age and expire previous state; short-lived legit sessions are released.
    for (auto& pod : svc.pods) {
        pod.legit = 0;
        for (auto& g : pod.half_open) ++g.age;
        std::erase_if(pod.half_open, [&](const ConnGroup& g) { return g.age >= cfg.syn_hold_steps; });
        for (auto& g : pod.slow) ++g.age;
    }

    // Filter: blocklist first, then per-source rate limits.
    std::vector<Flow> flows;
    std::map<std::string, int> blocked_drops;
    std::map<std::string, int> limited_drops;
    std::map<std::string, bool> flow_hostile;
    auto admit_filter = [&](const Flow& f, bool hostile) {
        flow_hostile[f.source] = hostile;
        if (svc.blocked_sources.count(f.source) != 0) {
            blocked_drops[f.source] += f.count;
            out.blocked_from_blocklist += f.count;
            return;
        }
        Flow kept = f;
        if (const auto it = svc.rate_limits.find(f.source); it != svc.rate_limits.end() && kept.count > it->second) {
            limited_drops[f.source] += kept.count - it->second;
            kept.count = it->second;
        }
        if (kept.count > 0) flows.push_back(kept);
    };
    for (const auto& f : inbound.legit.flows) {
        out.legit_offered += f.count;
        admit_filter(f, false);
    }
    for (const auto& f : inbound.attack.flows) admit_filter(f, true);

    // FIFO admission with arrivals spread evenly over the step: when demand
    // exceeds the free slots every flow gets its proportional share.
    std::vector<int> demand;
    demand.reserve(flows.size());
    for (const auto& f : flows) demand.push_back(f.count);
    const int free_total = std::max(0, env.free_slots());
    const std::vector<int> admitted = proportional_admission(demand, free_total);

    std::vector<int> free(svc.pods.size());
    for (std::size_t i = 0; i < svc.pods.size(); ++i) free[i] = cfg.conns_per_pod - svc.pods[i].total();
    std::map<std::string, int> hostile_by_source;
    for (std::size_t fi = 0; fi < flows.size(); ++fi) {
        const auto& f = flows[fi];
        const int n = admitted[fi];
        if (n <= 0 || svc.pods.empty()) continue;
        const auto alloc = spread(n, free, svc.rr_cursor);
        for (std::size_t i = 0; i < alloc.size(); ++i) {
            if (alloc[i] == 0) continue;
            free[i] -= alloc[i];
            auto& pod = svc.pods[i];
            switch (f.kind) {
                case FlowKind::legit: pod.legit += alloc[i]; break;
                case FlowKind::syn: pod.half_open.push_back(ConnGroup{f.source, 0, alloc[i]}); break;
                case FlowKind::slow: pod.slow.push_back(ConnGroup{f.source, 0, alloc[i]}); break;
            }
        }
        if (f.kind == FlowKind::legit) {
            out.legit_served += n;
        } else {
            out.hostile_admitted += n;
            hostile_by_source[f.source] += n;
        }
    }
    if (!svc.pods.empty()) svc.rr_cursor = (svc.rr_cursor + 1) % svc.pods.size();
    for (auto& pod : svc.pods) pod.memory_util = static_cast<double>(cfg.mem_cap) * pod.total() / cfg.conns_per_pod;
    out.service_availability =
        out.legit_offered == 0 ? 1.0 : static_cast<double>(out.legit_served) / out.legit_offered;

    // Co-resident contention and victim progress.
    auto& cl = env.cluster;
    for (auto& vm : cl.vms) {
        if (vm.role != VmRole::attacker) continue;
        if (vm.relocating_until >= 0 && step > vm.relocating_until) {
            const int target = cl.victim().host;
            if (vm.host != target && cl.vms_on(target) < cl.vms_per_machine_cap) vm.host = target;
            vm.relocating_until = -1;
        }
    }
    for (auto& vm : cl.vms) {
        if (vm.role != VmRole::attacker) continue;
        const auto it = inbound.attack.contention.find(vm.id);
        vm.contention_emitted =
            (vm.isolated || it == inbound.attack.contention.end()) ? 0.0 : std::min<double>(cfg.mem_cap, it->second);
    }
    const double seen = std::min<double>(cfg.mem_cap, cl.contention_seen_by(cl.victim()));
    out.progress_gain = std::clamp(1.0 - seen / cfg.mem_cap, 0.0, 1.0);
    for (auto& vm : cl.vms) {
        if (vm.role == VmRole::victim) vm.progress = std::min<double>(cfg.runtime_cap, vm.progress + out.progress_gain);
    }

    out.availability = cfg.attack == AttackKind::memory_dos ? out.progress_gain : out.service_availability;
    out.survived = out.availability >= cfg.survive_threshold;

    // Telemetry.
    auto& events = out.raw_events;
    {
        RawEvent hb = make_event(ts, "heartbeat", false, false);
        hb.status = "ok";
        events.push_back(std::move(hb));
    }
    {
        RawEvent m = make_event(ts, "service_metrics", true, false);
        const int cap = env.capacity();
        const int conns = svc.connections();
        m.entity = svc.address;
        m.metrics = {{"cpu", cap == 0 ? 0.0 : 100.0 * conns / cap},
                     {"memory", cap == 0 ? 0.0 : static_cast<double>(cfg.mem_cap) * conns / cap},
                     {"connections", conns},
                     {"legit_connections", out.legit_served},
                     {"legit_offered", out.legit_offered},
                     {"legit_served", out.legit_served},
                     {"half_open", svc.half_open()},
                     {"slow_connections", svc.slow()},
                     {"active_pods", svc.active_pods()},
                     {"active_replicas", svc.active_replicas},
                     {"capacity", cap},
                     {"free_slots", cap - conns},
                     {"affected_pods", svc.affected_pods()}};
        events.push_back(std::move(m));
    }
    const auto& victim = cl.victim();
    for (const auto& vm : cl.vms) {
        if (vm.host != victim.host || vm.isolated) continue;
        RawEvent m = make_event(ts, "vm_metrics", true, false);
        m.entity = vm.id;
        m.metrics = {{"contention", vm.contention_emitted}, {"host", vm.host}};
        if (vm.role == VmRole::victim) {
            m.metrics["contention_seen"] = seen;
            m.metrics["progress"] = vm.progress;
            m.metrics["progress_gain"] = out.progress_gain;
        }
        events.push_back(std::move(m));
        if (vm.role != VmRole::victim && vm.contention_emitted >= 20.0) {
            RawEvent spike = make_event(ts, "contention_spike", true, vm.role == VmRole::attacker);
            spike.entity = vm.id;
            spike.status = "warning";
            spike.metrics = {{"contention", vm.contention_emitted}};
            events.push_back(std::move(spike));
        }
    }
    for (const auto& [source, n] : hostile_by_source) {
        const bool syn = env.config.attack == AttackKind::syn_flood;
        RawEvent e = make_event(ts, syn ? "syn_half_open" : "slow_request", true, true);
        e.source_ip = source;
        e.status = syn ? "syn_recv" : "incomplete";
        e.repeat = n;
        events.push_back(std::move(e));
    }
    for (const auto& [source, n] : blocked_drops) {
        RawEvent e = make_event(ts, "blocked_drop", true, flow_hostile[source]);
        e.source_ip = source;
        e.status = "dropped";
        e.repeat = n;
        events.push_back(std::move(e));
    }
    for (const auto& [source, n] : limited_drops) {
        if (n <= 0) continue;
        RawEvent e = make_event(ts, "rate_limited", true, flow_hostile[source]);
        e.source_ip = source;
        e.status = "dropped";
        e.repeat = n;
        events.push_back(std::move(e));
    }

    ++env.clock.step;
    return out;
}

StepOutcome step_env(EnvState& env) {
    Inbound in;
    in.attack = emit_load(env.profile, env, env.clock.step);
    in.legit = legit_load(env);
    return advance_step(env, in);
}

Termination check_termination(std::span<const RoundLabel> history, int stable_rounds) {
    if (stable_rounds <= 0 || static_cast<int>(history.size()) < stable_rounds) return Termination::running;
    const auto tail = history.subspan(history.size() - static_cast<std::size_t>(stable_rounds));
    if (std::all_of(tail.begin(), tail.end(), [](RoundLabel l) { return l == RoundLabel::secure; })) {
        return Termination::secure_end;
    }
    if (std::all_of(tail.begin(), tail.end(), [](RoundLabel l) { return l == RoundLabel::compromised; })) {
        return Termination::compromised_end;
    }
    return Termination::running;
}

RoundLabel label_round(std::span<const StepOutcome> outcomes, const ScenarioConfig& config) {
    if (outcomes.empty()) return RoundLabel::contested;
    for (const auto& o : outcomes) {
        if (o.availability < config.compromise_threshold) return RoundLabel::compromised;
    }
    if (config.attack == AttackKind::memory_dos) return RoundLabel::secure;
    const bool all_survived = std::all_of(outcomes.begin(), outcomes.end(), [](const StepOutcome& o) { return o.survived; });
    if (all_survived && outcomes.back().hostile_admitted == 0) return RoundLabel::secure;
    return RoundLabel::contested;
}

std::vector<std::string> check_invariants(const EnvState& env) {
    std::vector<std::string> out;
    const auto& cfg = env.config;
    const auto& svc = env.service;
    if (svc.active_replicas < 1 || svc.active_replicas > cfg.max_replicas) {
        out.push_back("active_replicas " + std::to_string(svc.active_replicas) + " outside [1," +
                      std::to_string(cfg.max_replicas) + "]");
    }
    if (svc.active_pods() != svc.active_replicas * svc.pods_per_replica) out.push_back("pod table size mismatch");
    if (svc.active_pods() > cfg.pod_pool) out.push_back("active pods exceed pod pool");
    for (std::size_t i = 0; i < svc.pods.size(); ++i) {
        const auto& p = svc.pods[i];
        if (p.total() > cfg.conns_per_pod) out.push_back("pod " + std::to_string(i) + " over connection capacity");
        if (p.memory_util > cfg.mem_cap + 1e-9) out.push_back("pod " + std::to_string(i) + " over memory cap");
        if (p.legit < 0 || p.half_open_count() < 0 || p.slow_count() < 0) {
            out.push_back("pod " + std::to_string(i) + " negative count");
        }
    }
    if (svc.connections() > env.capacity()) out.push_back("connections exceed capacity");
    const auto& cl = env.cluster;
    for (int m = 0; m < cl.machines(); ++m) {
        if (cl.vms_on(m) > cl.vms_per_machine_cap) out.push_back("machine " + std::to_string(m) + " over VM cap");
    }
    for (const auto& vm : cl.vms) {
        if (vm.host < 0 || vm.host >= cl.machines()) out.push_back("vm " + vm.id + " on unknown machine");
        if (vm.contention_emitted > cfg.mem_cap + 1e-9) out.push_back("vm " + vm.id + " over contention cap");
        if (vm.progress > cfg.runtime_cap + 1e-9) out.push_back("vm " + vm.id + " progress over runtime cap");
    }
    return out;
}

namespace mutate {

void block_source(EnvState& env, const std::string& ip) { env.service.blocked_sources.insert(ip); }

void rate_limit(EnvState& env, const std::string& ip, int limit) {
    if (limit < 0) throw DomainError("rate limit must be >= 0");
    env.service.rate_limits[ip] = limit;
}

int recycle_half_open(EnvState& env, int min_age) {
    int recycled = 0;
    auto old_enough = [&](const ConnGroup& g) {
        if (g.age >= min_age) {
            recycled += g.count;
            return true;
        }
        return false;
    };
    for (auto& pod : env.service.pods) {
        std::erase_if(pod.half_open, old_enough);
        std::erase_if(pod.slow, old_enough);
        pod.memory_util = static_cast<double>(env.config.mem_cap) * pod.total() / env.config.conns_per_pod;
    }
    return recycled;
}

void scale_replicas(EnvState& env, int delta) {
    auto& svc = env.service;
    const int target = svc.active_replicas + delta;
    if (target < 1 || target > env.config.max_replicas) throw DomainError("replica target out of range");
    if (target * svc.pods_per_replica > env.config.pod_pool) throw DomainError("replica target exceeds pod pool");
    svc.active_replicas = target;
    svc.pods.resize(static_cast<std::size_t>(target * svc.pods_per_replica));
    if (!svc.pods.empty()) svc.rr_cursor %= svc.pods.size();
}

void shuffle_address(EnvState& env) {
    auto& svc = env.service;
    ++svc.address_epoch;
    svc.address = "svc-" + std::to_string(svc.address_epoch);
    svc.shuffled_at_step = env.clock.completed_steps();
}

void migrate_vm(EnvState& env, const std::string& id, int target_machine) {
    auto& cl = env.cluster;
    Vm* vm = cl.find(id);
    if (vm == nullptr) throw DomainError("unknown vm '" + id + "'");
    if (target_machine < 0 || target_machine >= cl.machines()) throw DomainError("unknown machine");
    if (vm->host == target_machine) return;
    if (cl.vms_on(target_machine) >= cl.vms_per_machine_cap) throw DomainError("target machine is full");
    vm->host = target_machine;
    if (vm->role == VmRole::victim) {
        // Co-resident attackers lose the victim and need adaptation_delay steps to follow.
        const int until = env.clock.completed_steps() + env.profile.adaptation_delay;
        for (auto& other : cl.vms) {
            if (other.role == VmRole::attacker && !other.isolated) other.relocating_until = until;
        }
    }
}

void throttle_vm(EnvState& env, const std::string& id, double cap) {
    Vm* vm = env.cluster.find(id);
    if (vm == nullptr) throw DomainError("unknown vm '" + id + "'");
    if (cap < 0 || cap > env.config.mem_cap) throw DomainError("throttle cap out of range");
    vm->throttle_cap = cap;
    vm->contention_emitted = std::min(vm->contention_emitted, cap);
}

void isolate_vm(EnvState& env, const std::string& id) {
    Vm* vm = env.cluster.find(id);
    if (vm == nullptr) throw DomainError("unknown vm '" + id + "'");
    vm->isolated = true;
    vm->contention_emitted = 0.0;
    vm->relocating_until = -1;
}

}  // namespace mutate

}  // namespace pdef
