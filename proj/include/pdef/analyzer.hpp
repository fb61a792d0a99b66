#pragma once

#include "pdef/collector.hpp"
#include "pdef/config.hpp"

#include <deque>
#include <map>
#include <string>
#include <vector>

namespace pdef {

// Structural limits the analyzer and the decision stage plan against.
struct EnvCaps {
    int max_replicas = 10;
    int pod_pool = 100;
    int pods_per_replica = 10;
    int conns_per_pod = 256;
    int mem_cap = 100;
    int vms_per_machine = 10;
    int machines = 50;

    static EnvCaps from(const ScenarioConfig& config);
};

struct Constraints {
    int max_new_replicas = 0;
    double cpu_headroom = 100.0;
    double memory_headroom = 100.0;
    std::vector<std::string> preemptible_tasks;

    bool operator==(const Constraints&) const = default;
};

struct StatusReport {
    std::map<std::string, double> indicators;
    Constraints constraints;
    bool low_confidence = false;  // no service sample in the record
};

struct Anomaly {
    std::string metric;
    double observed = 0.0;
    double baseline = 0.0;
    double deviation = 0.0;  // in standard deviations, signed
    bool guardrail = false;  // tripped an absolute threshold

    bool operator==(const Anomaly&) const = default;
};

struct AnalyzerConfig {
    double k = 3.0;
    int window = 10;
    double half_open_fraction_guard = 0.1;
    double slow_fraction_guard = 0.05;
    double contention_guard = 30.0;
    double scope_contention = 20.0;  // victim contention that counts the victim as affected
    double high_utilization = 85.0;
};

// Per-round metric values the baselines are built from.
using Observation = std::map<std::string, double>;

struct MetricPrior {
    double mean = 0.0;
    double sigma = 1.0;  // also the floor applied to rolling estimates
};
const std::map<std::string, MetricPrior>& metric_priors();

// Rolling window of quiet rounds plus the current attack streak.
class AnalyzerHistory {
public:
    explicit AnalyzerHistory(int window = 10) : window_(window) {}

    void push(Observation obs, bool under_attack);
    const std::deque<Observation>& rounds() const { return rounds_; }
    int attack_streak() const { return streak_; }
    bool empty() const { return rounds_.empty(); }

private:
    int window_;
    std::deque<Observation> rounds_;
    int streak_ = 0;
};

struct AnomalyReport {
    std::vector<Anomaly> anomalies;
    AttackKind hypothesis = AttackKind::none;  // none reads as "unknown"
};

struct RiskAssessment {
    int scope_sub = 0;
    int impact_sub = 0;
    int duration_sub = 0;
    double risk_score = 0.0;
    std::vector<Anomaly> anomalies;
    AttackKind hypothesis = AttackKind::none;
    std::string rationale;
    Constraints constraints;
    bool low_confidence = false;
    std::vector<std::string> offenders;   // hostile sources, most active first
    std::vector<std::string> contenders;  // VMs loading the victim's host, heaviest first
    std::optional<std::string> victim_vm;
    double victim_contention = 0.0;

    RiskBucket bucket() const { return risk_bucket(risk_score); }
};

Observation observe(const SecurityRecord& record);
StatusReport analyze_status(const SecurityRecord& record, const EnvCaps& caps, const AnalyzerConfig& cfg = {});

// Sub-scores are bounded to 0..3, 0..4 and 0..3; since the maxima add up to
// 10 the 0-10 normalization is the identity on the sum.
double score_risk(int scope_sub, int impact_sub, int duration_sub);
int scope_subscore(double affected_fraction);
int impact_subscore(double availability_loss);
int duration_subscore(int rounds_under_attack);

AnomalyReport detect_anomalies(const SecurityRecord& record, const AnalyzerHistory& history,
                               const AnalyzerConfig& cfg = {});

// Full assessment for one round. The history is read, not updated; the caller
// pushes observe(record) afterwards.
RiskAssessment assess(const SecurityRecord& record, const AnalyzerHistory& history, const EnvCaps& caps,
                      const AnalyzerConfig& cfg = {});

Json to_json(const RiskAssessment& a);

}  // namespace pdef
