#include "pdef/feedback.hpp"

#include "pdef/io.hpp"

#include <algorithm>
#include <set>

namespace pdef {

Json to_json(const ExecutionRecord& r) {
    return {{"action", r.action},       {"origin", r.program_origin}, {"latency_s", r.latency_s},
            {"cost", r.cost},           {"resource_delta", r.resource_delta}, {"executed", r.executed},
            {"error", r.error}};
}

Json to_json(const EvaluationVector& e) {
    return {{"security", e.security},
            {"recovery_steps", e.recovery_steps},
            {"resource", e.resource},
            {"financial_cost", e.financial_cost},
            {"qos", e.qos},
            {"norms", norms_to_json(e.norms)},
            {"weighted_score", e.weighted_score}};
}

Norms normalize(const EvaluationVector& e, double cost_ref) {
    Norms n{};
    n[0] = std::clamp(e.security, 0.0, 1.0);
    n[1] = e.recovery_steps < 0 ? 0.0 : 1.0 / (1.0 + e.recovery_steps);
    n[2] = std::clamp(1.0 - e.resource, 0.0, 1.0);
    n[3] = 1.0 / (1.0 + std::max(0.0, e.financial_cost) / cost_ref);
    n[4] = std::clamp(e.qos, 0.0, 1.0);
    return n;
}

EvaluationVector evaluate(const EnvState& before, const EnvState& after, std::span<const StepOutcome> outcomes,
                          std::span<const ExecutionRecord> records, const Weights& weights, double cost_ref) {
    weights.validate();
    EvaluationVector e;
    const bool flooding = after.config.attack != AttackKind::memory_dos;
    int protected_steps = 0;
    double availability = 0.0;
    e.recovery_steps = -1;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        if (o.survived && (!flooding || o.hostile_admitted == 0)) ++protected_steps;
        if (o.survived && e.recovery_steps < 0) e.recovery_steps = static_cast<int>(i);
        availability += o.availability;
    }
    if (!outcomes.empty()) {
        e.security = static_cast<double>(protected_steps) / static_cast<double>(outcomes.size());
        e.qos = availability / static_cast<double>(outcomes.size());
    }
    const int added = std::max(0, after.service.active_pods() - before.service.active_pods());
    e.resource = static_cast<double>(added) / std::max(1, after.config.pod_pool);
    for (const auto& r : records) e.financial_cost += r.cost;
    e.norms = normalize(e, cost_ref);
    e.weighted_score = weights.score(e.norms);
    return e;
}

Verdict endpoint_check(std::span<const RoundLabel> history, int stable_rounds) {
    switch (check_termination(history, stable_rounds)) {
        case Termination::secure_end: return Verdict::success;
        case Termination::compromised_end: return Verdict::failure;
        case Termination::running: return Verdict::undecided;
    }
    return Verdict::undecided;
}

std::string_view to_string(Flag f) { return f == Flag::success ? "success" : "failure"; }

namespace {

Flag flag_from_string(const std::string& s) {
    if (s == "success") return Flag::success;
    if (s == "failure") return Flag::failure;
    throw DomainError("unknown outcome flag '" + s + "'");
}

}  // namespace

EpisodeMemory::EpisodeMemory(int window, bool inter_enabled) : window_(window), inter_enabled_(inter_enabled) {
    if (window < 1) throw ConfigError("memory window must be >= 1");
}

void EpisodeMemory::record(IntraEntry entry) { intra_.push_back(std::move(entry)); }

void EpisodeMemory::finalize(int episode_id, Verdict verdict) {
    if (verdict == Verdict::undecided) throw DomainError("cannot finalize an undecided episode");
    InterEntry e;
    e.episode_id = episode_id;
    e.flag = verdict == Verdict::success ? Flag::success : Flag::failure;
    e.rounds = static_cast<int>(intra_.size());
    std::set<std::string> attacks;
    std::set<std::string> buckets;
    for (const auto& r : intra_) {
        if (r.signature == "empty") continue;
        e.sequence.push_back(AnnotatedStep{r.round, r.context, r.signature, r.flag, r.evaluation.norms});
        const auto slash = r.context.find('/');
        attacks.insert(r.context.substr(0, slash));
        if (slash != std::string::npos) buckets.insert(r.context.substr(slash + 1));
    }
    for (const auto& a : attacks) e.attack += (e.attack.empty() ? "" : ",") + a;
    e.buckets.assign(buckets.begin(), buckets.end());
    e.rationale = std::string(to_string(e.flag)) + " after " + std::to_string(e.rounds) + " rounds";
    if (inter_enabled_) {
        inter_.push_back(std::move(e));
        while (static_cast<int>(inter_.size()) > window_) inter_.pop_front();
    }
    intra_.clear();
}

PlanMemoryView EpisodeMemory::view(const std::string& context) const {
    PlanMemoryView v;
    std::map<std::string, std::pair<Norms, int>> sums;
    auto add = [&](const std::string& sig, const Norms& n, bool failed) {
        auto& [sum, count] = sums[sig];
        for (std::size_t i = 0; i < kObjectiveCount; ++i) sum[i] += n[i];
        ++count;
        if (failed) v.failed.insert(sig);
    };
    for (const auto& e : inter_) {
        for (const auto& s : e.sequence) {
            if (s.context == context) add(s.signature, s.norms, s.flag == Flag::failure || e.flag == Flag::failure);
        }
    }
    for (const auto& r : intra_) {
        if (r.context == context && r.signature != "empty") add(r.signature, r.evaluation.norms, r.flag == Flag::failure);
    }
    for (const auto& [sig, acc] : sums) {
        Norms mean{};
        for (std::size_t i = 0; i < kObjectiveCount; ++i) mean[i] = acc.first[i] / acc.second;
        v.realized[sig] = mean;
    }
    return v;
}

std::vector<std::string> EpisodeMemory::check_invariants() const {
    std::vector<std::string> out;
    if (static_cast<int>(inter_.size()) > window_) out.push_back("inter pool exceeds its window");
    for (std::size_t i = 1; i < inter_.size(); ++i) {
        if (inter_[i].episode_id <= inter_[i - 1].episode_id) out.push_back("inter pool out of episode order");
    }
    if (!inter_enabled_ && !inter_.empty()) out.push_back("inter pool populated while disabled");
    return out;
}

Json EpisodeMemory::to_json() const {
    Json inter = Json::array();
    for (const auto& e : inter_) {
        Json seq = Json::array();
        for (const auto& s : e.sequence) {
            seq.push_back({{"round", s.round},
                           {"context", s.context},
                           {"signature", s.signature},
                           {"flag", to_string(s.flag)},
                           {"norms", norms_to_json(s.norms)}});
        }
        inter.push_back({{"episode_id", e.episode_id},
                         {"flag", to_string(e.flag)},
                         {"rounds", e.rounds},
                         {"attack", e.attack},
                         {"buckets", e.buckets},
                         {"sequence", std::move(seq)},
                         {"rationale", e.rationale}});
    }
    Json intra = Json::array();
    for (const auto& r : intra_) {
        Json execs = Json::array();
        for (const auto& x : r.executions) execs.push_back(pdef::to_json(x));
        intra.push_back({{"round", r.round},
                         {"context", r.context},
                         {"signature", r.signature},
                         {"plan", r.plan},
                         {"validated", r.validated},
                         {"executions", std::move(execs)},
                         {"evaluation", pdef::to_json(r.evaluation)},
                         {"label", to_string(r.label)},
                         {"flag", to_string(r.flag)}});
    }
    return {{"format", "pdef-memory"}, {"version", 1}, {"window", window_}, {"inter", std::move(inter)},
            {"intra", std::move(intra)}};
}

EpisodeMemory EpisodeMemory::from_json(const Json& j, bool inter_enabled) {
    try {
        if (j.value("format", std::string{}) != "pdef-memory" || j.value("version", 0) != 1) {
            throw DomainError("not a version 1 memory file");
        }
        EpisodeMemory m(j.at("window").get<int>(), inter_enabled);
        if (inter_enabled) {
            for (const auto& ej : j.at("inter")) {
                InterEntry e;
                e.episode_id = ej.at("episode_id").get<int>();
                e.flag = flag_from_string(ej.at("flag").get<std::string>());
                e.rounds = ej.at("rounds").get<int>();
                e.attack = ej.value("attack", std::string{});
                e.buckets = ej.value("buckets", std::vector<std::string>{});
                e.rationale = ej.value("rationale", std::string{});
                for (const auto& sj : ej.at("sequence")) {
                    e.sequence.push_back(AnnotatedStep{sj.at("round").get<int>(), sj.at("context").get<std::string>(),
                                                       sj.at("signature").get<std::string>(),
                                                       flag_from_string(sj.at("flag").get<std::string>()),
                                                       norms_from_json(sj.at("norms"))});
                }
                m.inter_.push_back(std::move(e));
            }
            while (static_cast<int>(m.inter_.size()) > m.window_) m.inter_.pop_front();
        }
        for (const auto& rj : j.value("intra", Json::array())) {
            IntraEntry r;
            r.round = rj.at("round").get<int>();
            r.context = rj.at("context").get<std::string>();
            r.signature = rj.at("signature").get<std::string>();
            r.plan = rj.value("plan", Json::object());
            r.validated = rj.value("validated", true);
            r.label = round_label_from_string(rj.at("label").get<std::string>());
            r.flag = flag_from_string(rj.at("flag").get<std::string>());
            r.evaluation.norms = norms_from_json(rj.at("evaluation").at("norms"));
            r.evaluation.weighted_score = rj.at("evaluation").value("weighted_score", 0.0);
            m.intra_.push_back(std::move(r));
        }
        return m;
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("malformed memory file: ") + ex.what());
    }
}

void EpisodeMemory::save(const std::string& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

EpisodeMemory EpisodeMemory::load(const std::string& path, int window, bool inter_enabled) {
    const auto text = read_file_if_exists(path);
    if (!text) return EpisodeMemory(window, inter_enabled);
    try {
        return from_json(Json::parse(*text), inter_enabled);
    } catch (const std::exception& ex) {
        throw IoError("cannot load memory from " + path + ": " + ex.what());
    }
}

}  // namespace pdef
