#include "pdef/analyzer.hpp"
#include "pdef/cloud_env.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace pdef {
namespace {

SecurityRecord record_with(double cpu, double mem, int replicas, int pods) {
    SecurityRecord r;
    auto& s = r.status_summary;
    s.present = true;
    s.samples = 4;
    s.cpu_util = cpu;
    s.memory_util = mem;
    s.active_replicas = replicas;
    s.active_pods = pods;
    s.capacity = pods * 256;
    s.free_slots = s.capacity;
    return r;
}

TEST(AnalyzeStatus, HighUtilizationMarksPreemptibleWork) {
    // 8 replicas hold 80 of 100 pods, leaving room for 2 more.
    const auto st = analyze_status(record_with(95, 90, 8, 80), EnvCaps{});
    EXPECT_FALSE(st.constraints.preemptible_tasks.empty());
    EXPECT_EQ(st.constraints.max_new_replicas, 2);
    EXPECT_DOUBLE_EQ(st.constraints.cpu_headroom, 5.0);
}

TEST(AnalyzeStatus, IdleSystemHasFullHeadroom) {
    const auto st = analyze_status(record_with(0, 0, 5, 50), EnvCaps{});
    EXPECT_TRUE(st.constraints.preemptible_tasks.empty());
    EXPECT_DOUBLE_EQ(st.constraints.cpu_headroom, 100.0);
    EXPECT_DOUBLE_EQ(st.constraints.memory_headroom, 100.0);
    EXPECT_FALSE(st.low_confidence);
}

TEST(AnalyzeStatus, MaxNewReplicasFromThePool) {
    // (100 - 50) / 10
    EXPECT_EQ(analyze_status(record_with(10, 10, 5, 50), EnvCaps{}).constraints.max_new_replicas, 5);
}

TEST(AnalyzeStatus, MissingSummaryIsLowConfidence) {
    SecurityRecord r;
    EXPECT_TRUE(analyze_status(r, EnvCaps{}).low_confidence);
    EXPECT_TRUE(assess(r, AnalyzerHistory{}, EnvCaps{}).low_confidence);
}

TEST(ScoreRisk, Examples) {
    EXPECT_DOUBLE_EQ(score_risk(3, 4, 3), 10.0);
    EXPECT_DOUBLE_EQ(score_risk(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(score_risk(1, 2, 1), 4.0);
}

TEST(ScoreRisk, OutOfRangeIsADomainError) {
    EXPECT_THROW(score_risk(4, 0, 0), DomainError);
    EXPECT_THROW(score_risk(0, 5, 0), DomainError);
    EXPECT_THROW(score_risk(0, 0, -1), DomainError);
}

TEST(ScoreRisk, AllTriplesSumBoundedAndMonotone) {
    for (int s = 0; s <= 3; ++s) {
        for (int i = 0; i <= 4; ++i) {
            for (int d = 0; d <= 3; ++d) {
                const double r = score_risk(s, i, d);
                EXPECT_DOUBLE_EQ(r, s + i + d);
                EXPECT_GE(r, 0.0);
                EXPECT_LE(r, 10.0);
                if (s < 3) EXPECT_GE(score_risk(s + 1, i, d), r);
                if (i < 4) EXPECT_GE(score_risk(s, i + 1, d), r);
                if (d < 3) EXPECT_GE(score_risk(s, i, d + 1), r);
            }
        }
    }
}

TEST(SubScores, BucketBoundaries) {
    EXPECT_EQ(scope_subscore(0.0), 0);
    EXPECT_EQ(scope_subscore(0.0999), 0);
    EXPECT_EQ(scope_subscore(0.10), 1);
    EXPECT_EQ(scope_subscore(0.30), 2);
    EXPECT_EQ(scope_subscore(0.60), 3);
    EXPECT_EQ(scope_subscore(1.0), 3);
    EXPECT_EQ(impact_subscore(0.0), 0);
    EXPECT_EQ(impact_subscore(0.05), 1);
    EXPECT_EQ(impact_subscore(0.0501), 2);
    EXPECT_EQ(impact_subscore(0.20), 2);
    EXPECT_EQ(impact_subscore(0.50), 3);
    EXPECT_EQ(impact_subscore(0.51), 4);
    EXPECT_EQ(duration_subscore(0), 0);
    EXPECT_EQ(duration_subscore(1), 1);
    EXPECT_EQ(duration_subscore(3), 2);
    EXPECT_EQ(duration_subscore(4), 3);
    EXPECT_EQ(duration_subscore(40), 3);
}

TEST(SubScores, MonotoneOverFineGrid) {
    for (int k = 0; k < 1000; ++k) {
        const double f = k / 1000.0, g = (k + 1) / 1000.0;
        EXPECT_LE(scope_subscore(f), scope_subscore(g));
        EXPECT_LE(impact_subscore(f), impact_subscore(g));
    }
}

// Rolling mean and population sigma, floored at the metric prior.
bool three_sigma_oracle(const std::vector<double>& hist, double observed, double floor_sigma) {
    double mean = 0.0;
    for (double h : hist) mean += h;
    mean /= static_cast<double>(hist.size());
    double var = 0.0;
    for (double h : hist) var += (h - mean) * (h - mean);
    const double sigma = std::max(std::sqrt(var / static_cast<double>(hist.size())), floor_sigma);
    return std::abs(observed - mean) > 3.0 * sigma;
}

SecurityRecord with_half_open(std::int64_t half_open) {
    auto r = record_with(10, 10, 5, 50);
    r.status_summary.half_open_connections = half_open;
    return r;
}

TEST(DetectAnomalies, HalfOpenSurgeIsSynFlood) {
    const std::vector<double> calm = {40, 55, 50, 45, 60};
    AnalyzerHistory h;
    for (double v : calm) h.push(observe(with_half_open(static_cast<std::int64_t>(v))), false);
    ASSERT_TRUE(three_sigma_oracle(calm, 4000, metric_priors().at("half_open").sigma));
    const auto rep = detect_anomalies(with_half_open(4000), h);
    EXPECT_EQ(rep.hypothesis, AttackKind::syn_flood);
    bool flagged = false;
    for (const auto& a : rep.anomalies) flagged = flagged || a.metric == "half_open";
    EXPECT_TRUE(flagged);
}

TEST(DetectAnomalies, RecordEqualToBaselineIsQuiet) {
    AnalyzerHistory h;
    const auto r = with_half_open(50);
    for (int i = 0; i < 5; ++i) h.push(observe(r), false);
    const auto rep = detect_anomalies(r, h);
    EXPECT_TRUE(rep.anomalies.empty());
    EXPECT_EQ(rep.hypothesis, AttackKind::none);
}

TEST(DetectAnomalies, VictimContentionSurgeIsMemoryDos) {
    auto calm = record_with(10, 10, 5, 50);
    calm.status_summary.victim_contention = 5.0;
    calm.status_summary.victim_vm = "vm-victim";
    AnalyzerHistory h;
    for (int i = 0; i < 5; ++i) h.push(observe(calm), false);
    auto hot = calm;
    hot.status_summary.victim_contention = 80.0;
    hot.status_summary.min_progress_gain = 0.2;
    EXPECT_EQ(detect_anomalies(hot, h).hypothesis, AttackKind::memory_dos);
}

TEST(DetectAnomalies, FlagsMatchThreeSigmaOracleOnRandomHistories) {
    Rng rng(31);
    AnalyzerConfig cfg;
    cfg.half_open_fraction_guard = 1e9;  // isolate the statistical rule
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> hist;
        AnalyzerHistory h;
        const int n = 1 + static_cast<int>(rng.index(10));
        const double level = 200.0 * rng.uniform();
        for (int i = 0; i < n; ++i) {
            hist.push_back(std::round(level + 60.0 * (rng.uniform() - 0.5)));
            h.push(observe(with_half_open(static_cast<std::int64_t>(hist.back()))), false);
        }
        const double observed = std::round(level + 400.0 * (rng.uniform() - 0.3));
        const auto rep = detect_anomalies(with_half_open(static_cast<std::int64_t>(std::max(0.0, observed))), h, cfg);
        bool flagged = false;
        for (const auto& a : rep.anomalies) flagged = flagged || a.metric == "half_open";
        EXPECT_EQ(flagged, three_sigma_oracle(hist, std::max(0.0, observed), metric_priors().at("half_open").sigma));
    }
}

TEST(AnalyzerHistory, AttackRoundsStayOutOfTheBaseline) {
    AnalyzerHistory h(3);
    h.push({{"half_open", 1}}, false);
    h.push({{"half_open", 9000}}, true);
    h.push({{"half_open", 9000}}, true);
    EXPECT_EQ(h.rounds().size(), 1u);
    EXPECT_EQ(h.attack_streak(), 2);
    for (int i = 0; i < 5; ++i) h.push({{"half_open", 2}}, false);
    EXPECT_EQ(h.rounds().size(), 3u);
    EXPECT_EQ(h.attack_streak(), 0);
}

TEST(Assess, SubScoresStayInRangeOnSimulatedRounds) {
    for (auto kind : {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos}) {
        auto env = init_env(test::scenario(kind, 3));
        AnalyzerHistory h;
        for (int round = 0; round < 12; ++round) {
            std::vector<RawEvent> raw;
            for (int s = 0; s < 4; ++s) {
                auto o = step_env(env);
                raw.insert(raw.end(), o.raw_events.begin(), o.raw_events.end());
            }
            const auto rec = collect(raw, round + 1);
            const auto a = assess(rec, h, EnvCaps::from(env.config));
            EXPECT_GE(a.scope_sub, 0);
            EXPECT_LE(a.scope_sub, 3);
            EXPECT_GE(a.impact_sub, 0);
            EXPECT_LE(a.impact_sub, 4);
            EXPECT_GE(a.duration_sub, 0);
            EXPECT_LE(a.duration_sub, 3);
            EXPECT_DOUBLE_EQ(a.risk_score, a.scope_sub + a.impact_sub + a.duration_sub);
            h.push(observe(rec), a.hypothesis != AttackKind::none);
        }
    }
}

TEST(Assess, HypothesisMatchesInjectedAttackAfterRoundTwo) {
    // No defense: the attack keeps running, every round after the second
    // should name it.
    int rounds = 0, hits = 0;
    for (auto kind : {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos}) {
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            auto env = init_env(test::scenario(kind, seed));
            AnalyzerHistory h;
            for (int round = 1; round <= 8; ++round) {
                std::vector<RawEvent> raw;
                for (int s = 0; s < 4; ++s) {
                    auto o = step_env(env);
                    raw.insert(raw.end(), o.raw_events.begin(), o.raw_events.end());
                }
                const auto rec = collect(raw, round);
                const auto a = assess(rec, h, EnvCaps::from(env.config));
                if (round > 2) {
                    ++rounds;
                    hits += a.hypothesis == kind;
                }
                h.push(observe(rec), a.hypothesis != AttackKind::none);
            }
        }
    }
    EXPECT_GE(static_cast<double>(hits) / rounds, 0.95) << hits << "/" << rounds;
}

TEST(Assess, QuietScenarioScoresZero) {
    auto env = init_env(test::scenario(AttackKind::none));
    AnalyzerHistory h;
    for (int round = 1; round <= 6; ++round) {
        std::vector<RawEvent> raw;
        for (int s = 0; s < 4; ++s) {
            auto o = step_env(env);
            raw.insert(raw.end(), o.raw_events.begin(), o.raw_events.end());
        }
        const auto rec = collect(raw, round);
        const auto a = assess(rec, h, EnvCaps::from(env.config));
        EXPECT_DOUBLE_EQ(a.risk_score, 0.0) << a.rationale;
        EXPECT_EQ(a.hypothesis, AttackKind::none);
        h.push(observe(rec), false);
    }
}

}  // namespace
}  // namespace pdef
