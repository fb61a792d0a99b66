#include "pdef/decision.hpp"

#include <algorithm>
#include <queue>

namespace pdef {

int priority_class(double risk_score) {
    if (risk_score <= 0) return 0;
    switch (risk_bucket(risk_score)) {
        case RiskBucket::high: return 3;
        case RiskBucket::medium: return 2;
        case RiskBucket::low: return 1;
    }
    return 1;
}

std::vector<Subtask> order_subtasks(std::vector<Subtask> subtasks) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        if (!index.emplace(subtasks[i].id, i).second) throw PlanningError("duplicate subtask id '" + subtasks[i].id + "'");
    }
    std::vector<int> indegree(subtasks.size(), 0);
    std::vector<std::vector<std::size_t>> dependents(subtasks.size());
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        for (const auto& dep : subtasks[i].depends_on) {
            const auto it = index.find(dep);
            if (it == index.end()) {
                throw PlanningError("subtask '" + subtasks[i].id + "' depends on unknown '" + dep + "'");
            }
            ++indegree[i];
            dependents[it->second].push_back(i);
        }
    }
    auto before = [&](std::size_t a, std::size_t b) {
        if (subtasks[a].priority != subtasks[b].priority) return subtasks[a].priority < subtasks[b].priority;
        return subtasks[a].id > subtasks[b].id;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(before)> ready(before);
    for (std::size_t i = 0; i < subtasks.size(); ++i) {
        if (indegree[i] == 0) ready.push(i);
    }
    std::vector<Subtask> out;
    while (!ready.empty()) {
        const auto i = ready.top();
        ready.pop();
        out.push_back(subtasks[i]);
        for (const auto d : dependents[i]) {
            if (--indegree[d] == 0) ready.push(d);
        }
    }
    if (out.size() != subtasks.size()) throw PlanningError("subtask dependencies form a cycle");
    return out;
}

std::vector<Subtask> decompose(const RiskAssessment& a) {
    const int prio = priority_class(a.risk_score);
    if (prio == 0) return {};
    std::vector<Subtask> tasks;
    auto add = [&](std::string id, std::string objective, std::vector<std::string> deps) {
        tasks.push_back(Subtask{std::move(id), std::move(objective), prio, std::move(deps), a.constraints});
    };
    if (is_flooding(a.hypothesis)) {
        add("block_sources", "cut_attack_sources", {});
        add("recycle_half_open", "release_held_connections", {"block_sources"});
        if (a.bucket() == RiskBucket::high) add("scale_out", "restore_capacity", {"recycle_half_open"});
    } else if (a.hypothesis == AttackKind::memory_dos) {
        add("evict_contender", "evict_contender", {});
    } else {
        add("restore_availability", "restore_availability", {});
    }
    return order_subtasks(std::move(tasks));
}

std::string PlanContext::key() const {
    return std::string(hypothesis_name(hypothesis)) + "/" + std::string(to_string(bucket));
}

PlanContext context_of(const RiskAssessment& a) { return PlanContext{a.hypothesis, a.bucket()}; }

std::string plan_signature(const std::vector<Action>& actions) {
    std::string sig;
    std::string_view prev;
    for (const auto& a : actions) {
        const auto name = to_string(a.kind);
        if (name == prev) continue;
        if (!sig.empty()) sig += '+';
        sig += name;
        prev = name;
    }
    return sig.empty() ? "empty" : sig;
}

std::vector<CandidatePlan> project_candidates(const std::vector<CandidatePlan>& candidates,
                                              const std::vector<Subtask>& subtasks) {
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < subtasks.size(); ++i) rank[subtasks[i].id] = i;
    std::vector<CandidatePlan> out;
    std::set<std::string> seen;
    for (const auto& c : candidates) {
        CandidatePlan p = c;
        p.actions.clear();
        for (const auto& a : c.actions) {
            if (a.subtask.empty() || rank.count(a.subtask) != 0) p.actions.push_back(a);
        }
        std::stable_sort(p.actions.begin(), p.actions.end(), [&](const Action& x, const Action& y) {
            const auto rx = x.subtask.empty() ? subtasks.size() : rank[x.subtask];
            const auto ry = y.subtask.empty() ? subtasks.size() : rank[y.subtask];
            return rx < ry;
        });
        if (p.actions.empty()) continue;
        Json key = Json::array();
        for (const auto& a : p.actions) key.push_back(to_json(a));
        if (!seen.insert(key.dump()).second) continue;
        out.push_back(std::move(p));
    }
    return out;
}

FilterResult filter_valid(const std::vector<CandidatePlan>& candidates, const Constraints& constraints,
                          const EnvState& env) {
    FilterResult r;
    for (const auto& c : candidates) {
        std::vector<Violation> violations;
        for (const auto& a : c.actions) {
            for (auto& v : validate_action(a, constraints, env)) violations.push_back(std::move(v));
        }
        if (violations.empty()) {
            r.valid.push_back(c);
        } else {
            r.rejected.push_back(RejectedCandidate{c.name, std::move(violations)});
        }
    }
    return r;
}

Json to_json(const DefensePlan& p) {
    Json actions = Json::array();
    for (const auto& a : p.actions) actions.push_back(to_json(a));
    return {{"actions", std::move(actions)}, {"rationale", p.rationale}, {"explored", p.explored},
            {"signature", p.signature},      {"candidate", p.candidate}, {"score", p.score}};
}

std::uint64_t Rng::next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::size_t Rng::index(std::size_t n) {
    if (n == 0) return 0;
    return std::min(n - 1, static_cast<std::size_t>(uniform() * static_cast<double>(n)));
}

double plan_score(const CandidatePlan& c, const Weights& w, const PlanMemoryView& memory) {
    const auto it = memory.realized.find(plan_signature(c.actions));
    return w.score(it != memory.realized.end() ? it->second : c.estimates);
}

namespace {

std::vector<std::size_t> eligible_indices(const std::vector<CandidatePlan>& candidates, const PlanMemoryView& memory) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (memory.failed.count(plan_signature(candidates[i].actions)) == 0) idx.push_back(i);
    }
    if (idx.empty()) {
        for (std::size_t i = 0; i < candidates.size(); ++i) idx.push_back(i);
    }
    return idx;
}

}  // namespace

std::size_t exploit_index(const std::vector<CandidatePlan>& candidates, const Weights& w, const PlanMemoryView& memory) {
    if (candidates.empty()) throw PlanningError("no candidate plans");
    const auto idx = eligible_indices(candidates, memory);
    std::size_t best = idx.front();
    double best_score = plan_score(candidates[best], w, memory);
    for (const auto i : idx) {
        const double s = plan_score(candidates[i], w, memory);
        if (s > best_score) {
            best = i;
            best_score = s;
        }
    }
    return best;
}

DefensePlan select_plan(const std::vector<CandidatePlan>& candidates, const Weights& w, double epsilon,
                        const PlanMemoryView& memory, Rng& rng) {
    if (candidates.empty()) throw PlanningError("no candidate plans");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw PlanningError("epsilon must lie in [0,1]");
    const std::size_t best = exploit_index(candidates, w, memory);
    std::size_t chosen = best;
    bool explored = false;
    const double u = rng.uniform();
    if (u < epsilon) {
        std::vector<std::size_t> others;
        for (const auto i : eligible_indices(candidates, memory)) {
            if (i != best) others.push_back(i);
        }
        if (!others.empty()) {
            chosen = others[rng.index(others.size())];
            explored = true;
        }
    }
    const auto& c = candidates[chosen];
    DefensePlan plan;
    plan.actions = c.actions;
    plan.rationale = c.rationale;
    plan.explored = explored;
    plan.signature = plan_signature(c.actions);
    plan.candidate = c.name;
    plan.score = plan_score(c, w, memory);
    return plan;
}

bool respects_order(const DefensePlan& plan, const std::vector<Subtask>& ordered) {
    std::map<std::string, std::size_t> rank;
    for (std::size_t i = 0; i < ordered.size(); ++i) rank[ordered[i].id] = i;
    std::size_t last = 0;
    for (const auto& a : plan.actions) {
        if (a.subtask.empty()) continue;
        const auto it = rank.find(a.subtask);
        if (it == rank.end()) return false;
        if (it->second < last) return false;
        last = it->second;
    }
    return true;
}

}  // namespace pdef
