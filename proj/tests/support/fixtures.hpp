#pragma once

#include "pdef/bench.hpp"

namespace pdef::test {

inline EpisodeRecord episode_record(int episode, Verdict v, int steps, std::vector<std::array<bool, kStageCount>> stages,
                                    std::vector<bool> survived, std::vector<double> latency, double cost) {
    EpisodeRecord e;
    e.episode = episode;
    e.verdict = v;
    e.rounds = steps;
    e.steps_to_success = steps;
    e.stage_ok = std::move(stages);
    e.survived = std::move(survived);
    e.action_latency_s = std::move(latency);
    e.cost = cost;
    return e;
}

// Two completed trials and one errored one. Hand-computed figures:
//   rounds 5; stage hits collector 4, analyzer 4, decision 4, deployer 4, feedback 3
//   surviving per trial 3/6 = 0.5 and 7/8 = 0.875 -> mean 0.6875,
//     s = 0.375 / sqrt(2), half width 1.96 * 0.375 / 2 = 0.3675
//   steps by episode (6 + 5) / 2 = 5.5 and (50 + 5) / 2 = 27.5
//   efficacy 3/4, latency (0.5 + 0.25 + 1 + 0.25) / 4 = 0.5, cost 0.6 / 4 = 0.15
inline std::vector<TrialResult> metric_fixture() {
    TrialResult a;
    a.trial = 0;
    a.seed = 1;
    a.scenario = "syn_flood";
    a.backend = "oracle";
    a.episodes.push_back(episode_record(1, Verdict::success, 6,
                                        {{true, true, false, true, true}, {true, false, true, true, true}},
                                        {true, true, false, true}, {0.5, 0.25}, 0.1));
    a.episodes.push_back(
        episode_record(2, Verdict::failure, 50, {{false, true, true, true, false}}, {false, false}, {}, 0.3));
    TrialResult b = a;
    b.trial = 1;
    b.seed = 2;
    b.episodes.clear();
    b.episodes.push_back(
        episode_record(1, Verdict::success, 5, {{true, true, true, true, true}}, {true, true, true, true}, {1.0}, 0.2));
    b.episodes.push_back(
        episode_record(2, Verdict::success, 5, {{true, true, true, false, false}}, {true, true, true, false}, {0.25}, 0.0));
    TrialResult c;
    c.trial = 2;
    c.seed = 3;
    c.scenario = "syn_flood";
    c.backend = "oracle";
    c.errored = true;
    c.error = "endpoint unreachable";
    return {a, b, c};
}

}  // namespace pdef::test
