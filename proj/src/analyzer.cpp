#include "pdef/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pdef {

EnvCaps EnvCaps::from(const ScenarioConfig& c) {
    return EnvCaps{c.max_replicas, c.pod_pool, c.pods_per_replica, c.conns_per_pod,
                   c.mem_cap,      c.vms_per_machine, c.total_machines()};
}

const std::map<std::string, MetricPrior>& metric_priors() {
    static const std::map<std::string, MetricPrior> priors = {
        {"half_open", {0.0, 25.0}},
        {"slow_connections", {0.0, 10.0}},
        {"victim_contention", {2.0, 2.0}},
        {"cpu_util", {8.0, 2.0}},
        {"availability_loss", {0.0, 0.01}},
    };
    return priors;
}

void AnalyzerHistory::push(Observation obs, bool under_attack) {
    streak_ = under_attack ? streak_ + 1 : 0;
    // Rounds judged hostile stay out of the baseline so an attack never becomes the new normal.
    if (under_attack) return;
    rounds_.push_back(std::move(obs));
    while (static_cast<int>(rounds_.size()) > std::max(window_, 1)) rounds_.pop_front();
}

Observation observe(const SecurityRecord& r) {
    const auto& s = r.status_summary;
    Observation o;
    o["half_open"] = static_cast<double>(s.half_open_connections);
    o["slow_connections"] = static_cast<double>(s.slow_connections);
    o["victim_contention"] = s.victim_contention.value_or(0.0);
    o["cpu_util"] = s.cpu_util;
    o["availability_loss"] = 1.0 - std::min(s.min_availability, s.min_progress_gain);
    return o;
}

StatusReport analyze_status(const SecurityRecord& r, const EnvCaps& caps, const AnalyzerConfig& cfg) {
    StatusReport st;
    const auto& s = r.status_summary;
    st.low_confidence = !s.present;
    st.indicators = observe(r);
    const double cap = s.capacity > 0 ? static_cast<double>(s.capacity) : 1.0;
    st.indicators["half_open_fraction"] = s.half_open_connections / cap;
    st.indicators["slow_fraction"] = s.slow_connections / cap;
    st.indicators["free_slot_fraction"] = s.free_slots / cap;
    st.indicators["memory_util"] = s.memory_util;
    st.indicators["active_replicas"] = static_cast<double>(s.active_replicas);
    st.indicators["affected_fraction"] =
        s.active_pods > 0 ? static_cast<double>(s.affected_pods) / static_cast<double>(s.active_pods) : 0.0;

    auto& c = st.constraints;
    const int active_replicas = static_cast<int>(s.active_replicas);
    const int active_pods = static_cast<int>(s.active_pods);
    const int by_replicas = caps.max_replicas - active_replicas;
    const int by_pool = caps.pods_per_replica > 0 ? (caps.pod_pool - active_pods) / caps.pods_per_replica : 0;
    c.max_new_replicas = std::max(0, std::min(by_replicas, by_pool));
    c.cpu_headroom = std::clamp(100.0 - s.cpu_util, 0.0, 100.0);
    c.memory_headroom = std::clamp(100.0 - s.memory_util, 0.0, 100.0);
    if (s.cpu_util >= cfg.high_utilization || s.memory_util >= cfg.high_utilization) {
        c.preemptible_tasks = {"batch_reporting", "log_compaction"};
    }
    return st;
}

double score_risk(int scope_sub, int impact_sub, int duration_sub) {
    if (scope_sub < 0 || scope_sub > 3) throw DomainError("scope sub-score " + std::to_string(scope_sub) + " outside 0..3");
    if (impact_sub < 0 || impact_sub > 4) {
        throw DomainError("impact sub-score " + std::to_string(impact_sub) + " outside 0..4");
    }
    if (duration_sub < 0 || duration_sub > 3) {
        throw DomainError("duration sub-score " + std::to_string(duration_sub) + " outside 0..3");
    }
    return static_cast<double>(scope_sub + impact_sub + duration_sub);
}

int scope_subscore(double f) {
    if (f < 0.10) return 0;
    if (f < 0.30) return 1;
    if (f < 0.60) return 2;
    return 3;
}

int impact_subscore(double loss) {
    if (loss <= 0.0) return 0;
    if (loss <= 0.05) return 1;
    if (loss <= 0.20) return 2;
    if (loss <= 0.50) return 3;
    return 4;
}

int duration_subscore(int rounds) {
    if (rounds <= 0) return 0;
    if (rounds == 1) return 1;
    if (rounds <= 3) return 2;
    return 3;
}

namespace {

struct Baseline {
    double mean = 0.0;
    double sigma = 1.0;
};

Baseline baseline_of(const std::string& metric, const AnalyzerHistory& history) {
    const auto& prior = metric_priors().at(metric);
    std::vector<double> xs;
    for (const auto& round : history.rounds()) {
        if (const auto it = round.find(metric); it != round.end()) xs.push_back(it->second);
    }
    if (xs.empty()) return {prior.mean, prior.sigma};
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(xs.size());
    return {mean, std::max(std::sqrt(var), prior.sigma)};
}

AttackKind signature_of(const std::string& metric) {
    if (metric == "half_open") return AttackKind::syn_flood;
    if (metric == "slow_connections") return AttackKind::slow_http;
    if (metric == "victim_contention") return AttackKind::memory_dos;
    return AttackKind::none;
}

}  // namespace

AnomalyReport detect_anomalies(const SecurityRecord& r, const AnalyzerHistory& history, const AnalyzerConfig& cfg) {
    AnomalyReport rep;
    const auto obs = observe(r);
    const auto& s = r.status_summary;
    const double cap = s.capacity > 0 ? static_cast<double>(s.capacity) : 1.0;
    std::map<std::string, double> guard_ratio = {
        {"half_open", s.half_open_connections / cap / cfg.half_open_fraction_guard},
        {"slow_connections", s.slow_connections / cap / cfg.slow_fraction_guard},
        {"victim_contention", obs.at("victim_contention") / cfg.contention_guard},
    };

    AttackKind best = AttackKind::none;
    double best_strength = 0.0;
    for (const auto& [metric, value] : obs) {
        const auto b = baseline_of(metric, history);
        const double dev = (value - b.mean) / b.sigma;
        const auto g = guard_ratio.find(metric);
        const bool guard = g != guard_ratio.end() && g->second >= 1.0;
        if (std::abs(dev) <= cfg.k && !guard) continue;
        rep.anomalies.push_back(Anomaly{metric, value, b.mean, dev, guard});
        const AttackKind kind = signature_of(metric);
        if (kind == AttackKind::none || (dev <= cfg.k && !guard)) continue;
        // Rank competing signatures by how far past their absolute guardrail they are.
        const double strength = g->second;
        if (best == AttackKind::none || strength > best_strength) {
            best = kind;
            best_strength = strength;
        }
    }
    rep.hypothesis = best;
    return rep;
}

RiskAssessment assess(const SecurityRecord& r, const AnalyzerHistory& history, const EnvCaps& caps,
                      const AnalyzerConfig& cfg) {
    RiskAssessment a;
    const auto st = analyze_status(r, caps, cfg);
    const auto rep = detect_anomalies(r, history, cfg);
    a.constraints = st.constraints;
    a.low_confidence = st.low_confidence;
    a.anomalies = rep.anomalies;
    a.hypothesis = rep.hypothesis;
    const auto& s = r.status_summary;
    a.victim_vm = s.victim_vm;
    a.victim_contention = s.victim_contention.value_or(0.0);

    double affected = st.indicators.at("affected_fraction");
    if (a.victim_contention >= cfg.scope_contention) affected = 1.0;
    const bool under_attack = a.hypothesis != AttackKind::none;
    a.scope_sub = scope_subscore(affected);
    a.impact_sub = impact_subscore(st.indicators.at("availability_loss"));
    a.duration_sub = duration_subscore(under_attack ? history.attack_streak() + 1 : 0);
    a.risk_score = score_risk(a.scope_sub, a.impact_sub, a.duration_sub);

    std::vector<std::pair<std::int64_t, std::string>> offenders;
    for (const auto& alert : r.alerts) {
        if ((alert.kind == "syn_half_open" || alert.kind == "slow_request") && is_valid_ipv4(alert.source)) {
            offenders.emplace_back(alert.count, alert.source);
        }
    }
    std::sort(offenders.begin(), offenders.end(),
              [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    for (const auto& o : offenders) a.offenders.push_back(o.second);

    std::vector<std::pair<double, std::string>> contenders;
    for (const auto& [id, c] : s.vm_contention) {
        if (a.victim_vm && id == *a.victim_vm) continue;
        if (c >= cfg.scope_contention) contenders.emplace_back(c, id);
    }
    std::sort(contenders.begin(), contenders.end(),
              [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
    for (const auto& c : contenders) a.contenders.push_back(c.second);

    std::ostringstream why;
    why << "hypothesis " << hypothesis_name(a.hypothesis) << "; scope " << a.scope_sub << " (affected "
        << static_cast<int>(std::lround(affected * 100)) << "%), impact " << a.impact_sub << " (availability loss "
        << static_cast<int>(std::lround(st.indicators.at("availability_loss") * 100)) << "%), duration "
        << a.duration_sub;
    for (const auto& an : a.anomalies) {
        why << "; " << an.metric << " " << an.observed << " vs baseline " << an.baseline;
        if (an.guardrail) why << " (guardrail)";
    }
    if (a.low_confidence) why << "; no service sample, low confidence";
    a.rationale = why.str();
    return a;
}

Json to_json(const RiskAssessment& a) {
    Json anomalies = Json::array();
    for (const auto& an : a.anomalies) {
        anomalies.push_back({{"metric", an.metric},
                             {"observed", an.observed},
                             {"baseline", an.baseline},
                             {"deviation", an.deviation},
                             {"guardrail", an.guardrail}});
    }
    return {{"scope_sub", a.scope_sub},
            {"impact_sub", a.impact_sub},
            {"duration_sub", a.duration_sub},
            {"risk_score", a.risk_score},
            {"risk_bucket", to_string(a.bucket())},
            {"attack_hypothesis", hypothesis_name(a.hypothesis)},
            {"anomalies", std::move(anomalies)},
            {"rationale", a.rationale},
            {"constraints",
             {{"max_new_replicas", a.constraints.max_new_replicas},
              {"cpu_headroom", a.constraints.cpu_headroom},
              {"memory_headroom", a.constraints.memory_headroom},
              {"preemptible_tasks", a.constraints.preemptible_tasks}}},
            {"low_confidence", a.low_confidence},
            {"offenders", a.offenders},
            {"contenders", a.contenders},
            {"victim_vm", a.victim_vm ? Json(*a.victim_vm) : Json(nullptr)},
            {"victim_contention", a.victim_contention}};
}

}  // namespace pdef
