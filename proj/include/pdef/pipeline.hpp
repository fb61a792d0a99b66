#pragma once

#include "pdef/analyzer.hpp"
#include "pdef/decision.hpp"
#include "pdef/deployer.hpp"
#include "pdef/feedback.hpp"
#include "pdef/reasoner.hpp"

#include <array>
#include <string>
#include <vector>

namespace pdef {

struct PipelineConfig {
    ScenarioConfig scenario;
    Weights weights;
    AnalyzerConfig analyzer;
    double epsilon = 0.1;
    double epsilon_decay = 0.9;  // applied once per finished episode
    bool memory_enabled = true;
    int memory_window = 5;
    double cost_ref = kCostReference;
    double plan_risk_threshold = 1.0;  // decision must produce a plan at or above this risk
    std::string trace_path;            // JSON lines of raw events and round summaries
    std::string audit_log;             // rendered scripts of executed programs
    std::string memory_path;           // memory reloaded before and saved after each episode

    // Throws ConfigError.
    void validate() const;
};

struct RoundResult {
    int round = 0;
    RoundLabel label = RoundLabel::contested;
    std::array<bool, kStageCount> stage_ok{};
    std::vector<bool> survived;  // one per simulated step of the round
    double risk_score = 0.0;
    double truth_risk = 0.0;
    AttackKind hypothesis = AttackKind::none;
    AttackKind truth_hypothesis = AttackKind::none;
    std::string context;
    std::string plan;  // signature
    bool explored = false;
    std::vector<double> action_latency_s;
    double cost = 0.0;
    EvaluationVector evaluation;
    Flag flag = Flag::failure;
    std::vector<std::string> stage_errors;
};

struct EpisodeResult {
    int episode = 0;
    Verdict verdict = Verdict::failure;
    int rounds = 0;
    int steps_to_success = 0;  // rounds until the success endpoint, max_rounds on failure
    std::vector<RoundResult> round_results;
    Usage usage;
    double epsilon = 0.0;

    std::vector<bool> survived() const;
    std::vector<double> action_latencies() const;
};

// Owns one trial: its library, memory, RNG and epsilon schedule. Episodes run
// sequentially against fresh environments.
class EpisodeRunner {
public:
    EpisodeRunner(PipelineConfig config, Reasoner& reasoner, std::uint64_t seed);

    // Throws TransportError when the reasoner endpoint is unreachable.
    EpisodeResult run_episode();

    const EpisodeMemory& memory() const { return memory_; }
    const DefenseLibrary& library() const { return library_; }
    double epsilon() const { return epsilon_; }
    int episodes_run() const { return episode_; }

private:
    PipelineConfig config_;
    Reasoner& reasoner_;
    std::uint64_t seed_;
    EpisodeMemory memory_;
    DefenseLibrary library_;
    Rng rng_;
    double epsilon_;
    int episode_ = 0;
};

// Machines with room for one more VM, least contended first, at most `limit`.
std::vector<int> migration_targets(const EnvState& env, std::size_t limit = 3);

// Risk the analyzer would assign if it could read the simulator's labels.
struct TruthAssessment {
    double risk = 0.0;
    AttackKind hypothesis = AttackKind::none;
};
TruthAssessment truth_assessment(std::span<const StepOutcome> outcomes, const EnvState& env, int attack_streak);

}  // namespace pdef
