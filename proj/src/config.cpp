#include "pdef/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace pdef {

int default_intensity(AttackKind kind) {
    switch (kind) {
        case AttackKind::syn_flood: return 2000;
        case AttackKind::slow_http: return 400;
        case AttackKind::memory_dos: return 80;
        case AttackKind::none: return 0;
    }
    return 0;
}

int ScenarioConfig::effective_intensity() const {
    return attack_intensity > 0 ? attack_intensity : default_intensity(attack);
}

void ScenarioConfig::validate() const {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("invalid scenario config: " + what);
    };
    require(max_replicas >= 1, "max_replicas must be >= 1");
    require(pods_per_replica >= 1, "pods_per_replica must be >= 1");
    require(pod_pool >= pods_per_replica, "pod_pool must hold at least one replica");
    require(initial_replicas >= 1, "initial_replicas must be >= 1");
    require(initial_replicas <= max_replicas, "initial_replicas " + std::to_string(initial_replicas) +
                                                  " exceeds max_replicas " + std::to_string(max_replicas));
    require(initial_replicas * pods_per_replica <= pod_pool, "initial pods exceed pod_pool");
    require(conns_per_pod >= 1, "conns_per_pod must be >= 1");
    require(mem_cap >= 1, "mem_cap must be >= 1");
    require(racks >= 1 && machines_per_rack >= 1, "cluster needs at least one machine");
    require(total_machines() >= 2, "cluster needs at least two machines");
    require(vms_per_machine >= 2, "vms_per_machine must be >= 2");
    require(max_bystanders_per_machine >= 0 && max_bystanders_per_machine < vms_per_machine,
            "max_bystanders_per_machine out of range");
    require(victim_host_bystanders >= 0 && victim_host_bystanders + 1 + attack_sources <= vms_per_machine,
            "victim host cannot fit victim, bystanders and attacker VMs");
    require(bystander_contention >= 0 && bystander_contention <= mem_cap, "bystander_contention out of range");
    require(runtime_cap >= 1, "runtime_cap must be >= 1");
    require(step_seconds >= 1, "step_seconds must be >= 1");
    require(steps_per_round >= 1, "steps_per_round must be >= 1");
    require(stable_rounds >= 1, "stable_rounds must be >= 1");
    require(max_rounds >= stable_rounds, "max_rounds must be >= stable_rounds");
    require(legit_demand >= 0, "legit_demand must be >= 0");
    require(legit_jitter >= 0.0 && legit_jitter < 1.0, "legit_jitter must be in [0,1)");
    require(legit_sources >= 1 && legit_sources <= 250, "legit_sources must be in [1,250]");
    require(syn_hold_steps >= 1, "syn_hold_steps must be >= 1");
    require(survive_threshold > 0.0 && survive_threshold <= 1.0, "survive_threshold must be in (0,1]");
    require(compromise_threshold >= 0.0 && compromise_threshold <= survive_threshold,
            "compromise_threshold must be in [0, survive_threshold]");
    require(attack_sources >= 1, "attack_sources must be >= 1");
    require(attack_intensity >= 0, "attack_intensity must be >= 0");
    require(attack_jitter >= 0.0 && attack_jitter < 1.0, "attack_jitter must be in [0,1)");
    require(adaptation_delay >= 0, "adaptation_delay must be >= 0");
    if (is_flooding(attack)) {
        require(static_cast<int>(attacker_ips.size()) >= attack_sources, "not enough attacker_ips");
        for (const auto& ip : attacker_ips) require(is_valid_ipv4(ip), "attacker ip '" + ip + "' is not IPv4");
    }
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("key '" + key + "': not an integer: " + v);
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw ConfigError("key '" + key + "': not a number: " + v);
        return out;
    } catch (const std::logic_error&) {
        throw ConfigError("key '" + key + "': not a number: " + v);
    }
}

std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    auto int_field = [](int ScenarioConfig::*field) -> Setter {
        return [field](ScenarioConfig& c, const std::string& k, const std::string& v) { c.*field = to_int(k, v); };
    };
    auto double_field = [](double ScenarioConfig::*field) -> Setter {
        return [field](ScenarioConfig& c, const std::string& k, const std::string& v) {
            c.*field = to_double(k, v);
        };
    };
    static const std::map<std::string, Setter> table{
        {"attack", [](ScenarioConfig& c, const std::string&, const std::string& v) {
             c.attack = attack_kind_from_string(v);
         }},
        {"seed", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             std::uint64_t out = 0;
             auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
             if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("key '" + k + "': bad seed");
             c.seed = out;
         }},
        {"max_replicas", int_field(&ScenarioConfig::max_replicas)},
        {"pod_pool", int_field(&ScenarioConfig::pod_pool)},
        {"pods_per_replica", int_field(&ScenarioConfig::pods_per_replica)},
        {"initial_replicas", int_field(&ScenarioConfig::initial_replicas)},
        {"conns_per_pod", int_field(&ScenarioConfig::conns_per_pod)},
        {"mem_cap", int_field(&ScenarioConfig::mem_cap)},
        {"racks", int_field(&ScenarioConfig::racks)},
        {"machines_per_rack", int_field(&ScenarioConfig::machines_per_rack)},
        {"vms_per_machine", int_field(&ScenarioConfig::vms_per_machine)},
        {"runtime_cap", int_field(&ScenarioConfig::runtime_cap)},
        {"max_bystanders_per_machine", int_field(&ScenarioConfig::max_bystanders_per_machine)},
        {"victim_host_bystanders", int_field(&ScenarioConfig::victim_host_bystanders)},
        {"bystander_contention", int_field(&ScenarioConfig::bystander_contention)},
        {"step_seconds", int_field(&ScenarioConfig::step_seconds)},
        {"steps_per_round", int_field(&ScenarioConfig::steps_per_round)},
        {"stable_rounds", int_field(&ScenarioConfig::stable_rounds)},
        {"max_rounds", int_field(&ScenarioConfig::max_rounds)},
        {"legit_demand", int_field(&ScenarioConfig::legit_demand)},
        {"legit_jitter", double_field(&ScenarioConfig::legit_jitter)},
        {"legit_sources", int_field(&ScenarioConfig::legit_sources)},
        {"syn_hold_steps", int_field(&ScenarioConfig::syn_hold_steps)},
        {"survive_threshold", double_field(&ScenarioConfig::survive_threshold)},
        {"compromise_threshold", double_field(&ScenarioConfig::compromise_threshold)},
        {"attack_sources", int_field(&ScenarioConfig::attack_sources)},
        {"attack_intensity", int_field(&ScenarioConfig::attack_intensity)},
        {"attack_jitter", double_field(&ScenarioConfig::attack_jitter)},
        {"adaptation_delay", int_field(&ScenarioConfig::adaptation_delay)},
        {"attacker_ips", [](ScenarioConfig& c, const std::string&, const std::string& v) {
             c.attacker_ips = to_list(v);
         }},
    };
    return table;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
    ScenarioConfig config;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters().find(key);
        if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        it->second(config, key, value);
    }
    config.validate();
    return config;
}

ScenarioConfig load_scenario_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario_config(buf.str());
}

std::string format_scenario_config(const ScenarioConfig& c) {
    std::ostringstream out;
    out << "# scenario config\n";
    out << "attack = " << to_string(c.attack) << "\n";
    out << "seed = " << c.seed << "\n";
    out << "max_replicas = " << c.max_replicas << "\n";
    out << "pod_pool = " << c.pod_pool << "\n";
    out << "pods_per_replica = " << c.pods_per_replica << "\n";
    out << "initial_replicas = " << c.initial_replicas << "\n";
    out << "conns_per_pod = " << c.conns_per_pod << "\n";
    out << "mem_cap = " << c.mem_cap << "\n";
    out << "racks = " << c.racks << "\n";
    out << "machines_per_rack = " << c.machines_per_rack << "\n";
    out << "vms_per_machine = " << c.vms_per_machine << "\n";
    out << "runtime_cap = " << c.runtime_cap << "\n";
    out << "max_bystanders_per_machine = " << c.max_bystanders_per_machine << "\n";
    out << "victim_host_bystanders = " << c.victim_host_bystanders << "\n";
    out << "bystander_contention = " << c.bystander_contention << "\n";
    out << "step_seconds = " << c.step_seconds << "\n";
    out << "steps_per_round = " << c.steps_per_round << "\n";
    out << "stable_rounds = " << c.stable_rounds << "\n";
    out << "max_rounds = " << c.max_rounds << "\n";
    out << "legit_demand = " << c.legit_demand << "\n";
    out << "legit_jitter = " << c.legit_jitter << "\n";
    out << "legit_sources = " << c.legit_sources << "\n";
    out << "syn_hold_steps = " << c.syn_hold_steps << "\n";
    out << "survive_threshold = " << c.survive_threshold << "\n";
    out << "compromise_threshold = " << c.compromise_threshold << "\n";
    out << "attack_sources = " << c.attack_sources << "\n";
    out << "attack_intensity = " << c.attack_intensity << "\n";
    out << "attack_jitter = " << c.attack_jitter << "\n";
    out << "adaptation_delay = " << c.adaptation_delay << "\n";
    out << "attacker_ips = ";
    for (std::size_t i = 0; i < c.attacker_ips.size(); ++i) out << (i ? "," : "") << c.attacker_ips[i];
    out << "\n";
    return out.str();
}

}  // namespace pdef
