#pragma once

#include "pdef/cloud_env.hpp"
#include "pdef/decision.hpp"
#include "pdef/objectives.hpp"

#include <deque>
#include <span>
#include <string>
#include <vector>

namespace pdef {

struct ExecutionRecord {
    std::string action;        // action kind
    std::string program_origin;  // library | generated
    double latency_s = 0.0;    // wall clock including reasoner time billed to it
    double cost = 0.0;         // reasoner spend billed to it
    int resource_delta = 0;    // pods added (negative when released)
    bool executed = false;
    std::string error;
};
Json to_json(const ExecutionRecord& r);

struct EvaluationVector {
    double security = 0.0;       // fraction of protected steps
    int recovery_steps = 0;      // steps until the first surviving step, -1 if none
    double resource = 0.0;       // fraction of the pod pool newly consumed
    double financial_cost = 0.0;
    double qos = 0.0;            // mean availability over the round
    Norms norms{};
    double weighted_score = 0.0;
};
Json to_json(const EvaluationVector& e);

inline constexpr double kCostReference = 0.01;

// Normalizers: recovery 1/(1+steps) (0 when never recovered), resource
// 1 - fraction, cost 1/(1 + cost/cost_ref); security and qos are used as is.
Norms normalize(const EvaluationVector& e, double cost_ref = kCostReference);

// A step is protected when it survived and, for flooding, admitted nothing
// hostile. Throws ConfigError when the weights are invalid.
EvaluationVector evaluate(const EnvState& before, const EnvState& after, std::span<const StepOutcome> outcomes,
                          std::span<const ExecutionRecord> records, const Weights& weights,
                          double cost_ref = kCostReference);

Verdict endpoint_check(std::span<const RoundLabel> history, int stable_rounds = 5);

enum class Flag { success, failure };
std::string_view to_string(Flag f);

struct IntraEntry {
    int round = 0;
    std::string context;    // PlanContext::key()
    std::string signature;  // plan_signature of the executed plan
    Json plan = Json::object();
    bool validated = true;
    std::vector<ExecutionRecord> executions;
    EvaluationVector evaluation;
    RoundLabel label = RoundLabel::contested;
    Flag flag = Flag::failure;
};

struct AnnotatedStep {
    int round = 0;
    std::string context;
    std::string signature;
    Flag flag = Flag::failure;
    Norms norms{};

    bool operator==(const AnnotatedStep&) const = default;
};

struct InterEntry {
    int episode_id = 0;
    Flag flag = Flag::failure;  // equals the episode verdict
    int rounds = 0;
    std::string attack;                 // hypothesis names seen, comma separated
    std::vector<std::string> buckets;   // risk buckets seen
    std::vector<AnnotatedStep> sequence;
    std::string rationale;

    bool operator==(const InterEntry&) const = default;
};

// Intra-episode round log plus a sliding window of the W most recent
// finalized episodes.
class EpisodeMemory {
public:
    explicit EpisodeMemory(int window = 5, bool inter_enabled = true);

    void record(IntraEntry entry);
    // Summarizes the intra log into one inter entry, evicts beyond the window
    // and clears the intra log.
    void finalize(int episode_id, Verdict verdict);

    // Realized norms and failure flags for one context. Entries of a failed
    // episode count as failures whatever their round flag.
    PlanMemoryView view(const std::string& context) const;

    const std::vector<IntraEntry>& intra() const { return intra_; }
    const std::deque<InterEntry>& inter() const { return inter_; }
    int window() const { return window_; }
    bool inter_enabled() const { return inter_enabled_; }
    // Checks |inter| <= W and entry flags; returns the problems found.
    std::vector<std::string> check_invariants() const;

    Json to_json() const;
    static EpisodeMemory from_json(const Json& j, bool inter_enabled = true);
    // Atomic write (temp file + rename); throws IoError.
    void save(const std::string& path) const;
    // Missing file yields an empty memory; a corrupt one throws IoError.
    static EpisodeMemory load(const std::string& path, int window = 5, bool inter_enabled = true);

private:
    int window_;
    bool inter_enabled_;
    std::vector<IntraEntry> intra_;
    std::deque<InterEntry> inter_;
};

}  // namespace pdef
