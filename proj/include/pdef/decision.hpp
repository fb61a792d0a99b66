#pragma once

#include "pdef/actions.hpp"
#include "pdef/analyzer.hpp"
#include "pdef/objectives.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace pdef {

struct Subtask {
    std::string id;
    std::string objective;
    int priority = 0;
    std::vector<std::string> depends_on;
    Constraints constraints;

    bool operator==(const Subtask&) const = default;
};

// 3 for high risk, 2 medium, 1 low, 0 when there is nothing to defend.
int priority_class(double risk_score);

// Kahn ordering; among ready subtasks higher priority first, then id.
// Throws PlanningError on a cycle or a dependency on an unknown id.
std::vector<Subtask> order_subtasks(std::vector<Subtask> subtasks);

// Default decomposition for an assessment: flooding gets block -> recycle
// (-> scale out when risk is high), memory DoS gets contender eviction, an
// unexplained risk gets a generic restore task, zero risk gets nothing.
std::vector<Subtask> decompose(const RiskAssessment& assessment);

// Memory key: (hypothesis, risk bucket).
struct PlanContext {
    AttackKind hypothesis = AttackKind::none;
    RiskBucket bucket = RiskBucket::low;

    std::string key() const;
    bool operator==(const PlanContext&) const = default;
};
PlanContext context_of(const RiskAssessment& a);

struct CandidatePlan {
    std::string name;
    std::vector<Action> actions;
    Norms estimates{};  // prior guess of the evaluation norms
    std::string rationale;
};

// Action kinds joined by '+', consecutive repeats collapsed.
std::string plan_signature(const std::vector<Action>& actions);

// Keeps only actions serving a present subtask (free-standing actions stay),
// reorders them to follow the subtask order and drops empty or duplicate
// candidates.
std::vector<CandidatePlan> project_candidates(const std::vector<CandidatePlan>& candidates,
                                              const std::vector<Subtask>& subtasks);

struct RejectedCandidate {
    std::string name;
    std::vector<Violation> violations;
};

struct FilterResult {
    std::vector<CandidatePlan> valid;
    std::vector<RejectedCandidate> rejected;
};
// A candidate survives only if every one of its actions validates.
FilterResult filter_valid(const std::vector<CandidatePlan>& candidates, const Constraints& constraints,
                          const EnvState& env);

// What memory knows about plans in one context.
struct PlanMemoryView {
    std::map<std::string, Norms> realized;  // signature -> mean realized norms
    std::set<std::string> failed;           // signatures flagged failed
};

struct DefensePlan {
    std::vector<Action> actions;
    std::string rationale;
    bool explored = false;
    std::string signature;
    std::string candidate;
    double score = 0.0;

    bool empty() const { return actions.empty(); }
};
Json to_json(const DefensePlan& p);

// Small deterministic RNG; draws are portable across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    double uniform();  // [0,1)
    std::size_t index(std::size_t n);

private:
    std::uint64_t state_;
};

double plan_score(const CandidatePlan& c, const Weights& w, const PlanMemoryView& memory);

// Index of the exploitation choice among candidates not flagged failed (all
// of them when every one is flagged). Ties go to the lower index.
std::size_t exploit_index(const std::vector<CandidatePlan>& candidates, const Weights& w, const PlanMemoryView& memory);

// Epsilon-greedy choice. One uniform draw is always consumed; below epsilon a
// uniformly drawn non-argmax eligible candidate is taken instead.
// Throws PlanningError on an empty candidate set or epsilon outside [0,1].
DefensePlan select_plan(const std::vector<CandidatePlan>& candidates, const Weights& w, double epsilon,
                        const PlanMemoryView& memory, Rng& rng);

// True when the plan's actions follow the subtask order (a linear extension).
bool respects_order(const DefensePlan& plan, const std::vector<Subtask>& ordered);

}  // namespace pdef
