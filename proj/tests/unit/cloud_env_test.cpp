#include "pdef/attacks.hpp"
#include "pdef/cloud_env.hpp"
#include "pdef/config.hpp"

#include "helpers.hpp"

#include <gtest/gtest.h>

namespace pdef {
namespace {

using test::scenario;

TEST(InitEnv, DefaultsGiveFiftyPodsAndCapacity12800) {
    const auto env = init_env(scenario(AttackKind::syn_flood));
    // 5 replicas x 10 pods, 50 pods x 256 connections.
    EXPECT_EQ(env.service.active_replicas, 5);
    EXPECT_EQ(env.service.active_pods(), 5 * 10);
    EXPECT_EQ(env.capacity(), 50 * 256);
    EXPECT_EQ(env.clock.step, 1);
    EXPECT_EQ(env.clock.round, 1);
    EXPECT_EQ(env.clock.episode, 1);
    EXPECT_TRUE(check_invariants(env).empty());
}

TEST(InitEnv, TenReplicasExactlyExhaustThePool) {
    auto c = scenario(AttackKind::syn_flood);
    c.initial_replicas = 10;
    const auto env = init_env(c);
    EXPECT_EQ(env.service.active_pods(), 100);
}

TEST(InitEnv, ElevenReplicasIsAConfigError) {
    auto c = scenario(AttackKind::syn_flood);
    c.initial_replicas = 11;
    EXPECT_THROW(init_env(c), ConfigError);
}

TEST(InitEnv, ClusterLayoutFollowsTheConfig) {
    const auto env = init_env(scenario(AttackKind::memory_dos));
    EXPECT_EQ(env.cluster.machines(), 50);
    for (int m = 0; m < env.cluster.machines(); ++m) EXPECT_LE(env.cluster.vms_on(m), 10);
    int victims = 0, attackers = 0;
    for (const auto& vm : env.cluster.vms) {
        victims += vm.role == VmRole::victim;
        attackers += vm.role == VmRole::attacker;
    }
    EXPECT_EQ(victims, 1);
    EXPECT_EQ(attackers, 2);
    for (const auto& vm : env.cluster.vms) {
        if (vm.role == VmRole::attacker) EXPECT_EQ(vm.host, env.cluster.victim().host);
    }
}

TEST(InitEnv, SameSeedSameWorld) {
    EXPECT_EQ(init_env(scenario(AttackKind::memory_dos, 9)), init_env(scenario(AttackKind::memory_dos, 9)));
}

TEST(AdvanceStep, NoAttackAndDemandWithinCapacitySurvives) {
    auto env = init_env(scenario(AttackKind::none));
    const auto out = advance_step(env, test::legit_only(1000));
    EXPECT_DOUBLE_EQ(out.availability, 1.0);
    EXPECT_TRUE(out.survived);
    EXPECT_EQ(out.legit_served, 1000);
}

TEST(AdvanceStep, FullHalfOpenSaturationGivesZeroAvailability) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    for (auto& pod : env.service.pods) pod.half_open.push_back(ConnGroup{"203.0.113.7", 0, 256});
    ASSERT_EQ(env.free_slots(), 0);
    const auto out = advance_step(env, test::legit_only(1000));
    EXPECT_DOUBLE_EQ(out.availability, 0.0);
    EXPECT_FALSE(out.survived);
}

TEST(AdvanceStep, FiveHundredFreeSlotsServeHalfOfAThousand) {
    // Two pods of 256 slots with 12 held slow connections leave 500 free.
    auto c = scenario(AttackKind::slow_http);
    c.initial_replicas = 1;
    c.pods_per_replica = 2;
    auto env = init_env(c);
    ASSERT_EQ(env.capacity(), 512);
    env.service.pods[0].slow.push_back(ConnGroup{"198.51.100.23", 0, 6});
    env.service.pods[1].slow.push_back(ConnGroup{"198.51.100.23", 0, 6});
    ASSERT_EQ(env.free_slots(), 500);
    const auto out = advance_step(env, test::legit_only(1000));
    EXPECT_EQ(out.legit_served, 500);
    EXPECT_DOUBLE_EQ(out.availability, 500.0 / 1000.0);
}

TEST(AdvanceStep, HalfOpenEntriesExpireAtTheHoldTime) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    env.service.pods[0].half_open.push_back(ConnGroup{"203.0.113.7", 0, 10});
    for (int i = 0; i < env.config.syn_hold_steps - 1; ++i) advance_step(env, Inbound{});
    EXPECT_EQ(env.service.half_open(), 10);
    advance_step(env, Inbound{});
    EXPECT_EQ(env.service.half_open(), 0);
}

TEST(AdvanceStep, BlockedSourceAddsNoConnections) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    mutate::block_source(env, "203.0.113.7");
    Inbound in;
    in.attack.flows.push_back(Flow{"203.0.113.7", FlowKind::syn, 5000});
    const auto out = advance_step(env, in);
    EXPECT_EQ(out.hostile_admitted, 0);
    EXPECT_EQ(out.blocked_from_blocklist, 5000);
    EXPECT_EQ(env.service.half_open(), 0);
}

TEST(AdvanceStep, RateLimitCapsAdmissionPerStep) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    mutate::rate_limit(env, "203.0.113.7", 100);
    Inbound in;
    in.attack.flows.push_back(Flow{"203.0.113.7", FlowKind::syn, 5000});
    EXPECT_EQ(advance_step(env, in).hostile_admitted, 100);
}

TEST(AdvanceStep, VictimProgressFollowsContention) {
    auto env = init_env(scenario(AttackKind::memory_dos));
    Inbound in;
    for (const auto& vm : env.cluster.vms) {
        if (vm.role == VmRole::attacker) in.attack.contention[vm.id] = 30.0;
    }
    const auto out = advance_step(env, in);
    // Two attackers at 30 each: gain 1 - 60/100.
    EXPECT_NEAR(out.progress_gain, 0.4, 1e-12);
    EXPECT_NEAR(env.cluster.victim().progress, 0.4, 1e-12);
    EXPECT_FALSE(out.survived);
}

TEST(AdvanceStep, SurvivedMatchesThreshold) {
    // Property: survived iff availability >= survive_threshold, over random loads.
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        auto c = scenario(AttackKind::syn_flood, rng.next());
        auto env = init_env(c);
        for (int s = 0; s < 3; ++s) {
            Inbound in = test::legit_only(static_cast<int>(rng.index(3000)) + 1);
            in.attack.flows.push_back(Flow{"203.0.113.7", FlowKind::syn, static_cast<int>(rng.index(8000))});
            const auto out = advance_step(env, in);
            EXPECT_EQ(out.survived, out.availability >= c.survive_threshold);
            EXPECT_TRUE(check_invariants(env).empty());
        }
    }
}

TEST(AdvanceStep, CapacityIsConservedUnderRandomActions) {
    Rng rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const AttackKind kinds[] = {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos};
        auto env = init_env(scenario(kinds[trial % 3], rng.next()));
        for (int s = 0; s < 30; ++s) {
            switch (rng.index(6)) {
                case 0: mutate::block_source(env, "203.0.113.7"); break;
                case 1:
                    if (env.service.active_replicas < 10) mutate::scale_replicas(env, 1);
                    break;
                case 2:
                    if (env.service.active_replicas > 1) mutate::scale_replicas(env, -1);
                    break;
                case 3: mutate::recycle_half_open(env, 0); break;
                case 4: mutate::shuffle_address(env); break;
                default: break;
            }
            const auto before_blocked = env.service.blocked_sources;
            const auto out = step_env(env);
            EXPECT_LE(env.service.connections(), env.capacity());
            EXPECT_TRUE(check_invariants(env).empty());
            for (const auto& pod : env.service.pods) {
                for (const auto& g : pod.half_open) {
                    if (before_blocked.count(g.source) != 0) EXPECT_GT(g.age, 0) << "new connection from blocked source";
                }
            }
            (void)out;
        }
    }
}

TEST(AdvanceStep, DeterministicTrajectory) {
    for (auto kind : {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos}) {
        auto a = init_env(scenario(kind, 77));
        auto b = init_env(scenario(kind, 77));
        for (int s = 0; s < 20; ++s) {
            if (s == 6) {
                mutate::scale_replicas(a, 2);
                mutate::scale_replicas(b, 2);
            }
            const auto oa = step_env(a);
            const auto ob = step_env(b);
            ASSERT_EQ(oa.availability, ob.availability);
            ASSERT_EQ(oa.hostile_admitted, ob.hostile_admitted);
            ASSERT_EQ(oa.raw_events, ob.raw_events);
        }
        EXPECT_EQ(a, b);
    }
}

TEST(CheckTermination, Examples) {
    using L = RoundLabel;
    const std::vector<L> secure(5, L::secure);
    EXPECT_EQ(check_termination(secure), Termination::secure_end);
    const std::vector<L> broken{L::compromised, L::compromised, L::compromised, L::compromised, L::secure};
    EXPECT_EQ(check_termination(broken), Termination::running);
    const std::vector<L> short_history(4, L::secure);
    EXPECT_EQ(check_termination(short_history), Termination::running);
    const std::vector<L> lost(5, L::compromised);
    EXPECT_EQ(check_termination(lost), Termination::compromised_end);
}

TEST(CheckTermination, MatchesSuffixScan) {
    Rng rng(2024);
    for (int i = 0; i < 2000; ++i) {
        std::vector<RoundLabel> h(rng.index(12));
        // Skewed draws so long uniform suffixes actually occur.
        const auto bias = static_cast<RoundLabel>(rng.index(3));
        for (auto& l : h) l = rng.uniform() < 0.7 ? bias : static_cast<RoundLabel>(rng.index(3));
        ASSERT_EQ(check_termination(h), test::brute_force_termination(h, 5));
    }
}

TEST(Snapshot, CopyIsIndependent) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    auto copy = snapshot(env);
    EXPECT_EQ(copy, env);
    mutate::scale_replicas(copy, 5);
    EXPECT_EQ(copy.service.active_replicas, 10);
    EXPECT_EQ(env.service.active_replicas, 5);
    env.terminated = true;
    EXPECT_TRUE(snapshot(env).terminated);
}

TEST(Clock, RoundAdvancesAfterTheFifthStage) {
    Clock c;
    for (int k = 0; k < kStageCount; ++k) {
        EXPECT_EQ(c.round, 1);
        c.complete_stage(static_cast<Stage>(k));
    }
    EXPECT_EQ(c.round, 2);
    EXPECT_THROW(c.complete_stage(Stage::analyzer), ContractViolation);
}

TEST(LabelRound, CompromisedWhenAnyStepFallsBelowHalf) {
    const auto c = scenario(AttackKind::syn_flood);
    std::vector<StepOutcome> steps(4);
    EXPECT_EQ(label_round(steps, c), RoundLabel::secure);
    steps[2].availability = 0.49;
    steps[2].survived = false;
    EXPECT_EQ(label_round(steps, c), RoundLabel::compromised);
    steps[2].availability = 0.9;
    EXPECT_EQ(label_round(steps, c), RoundLabel::contested);
}

TEST(Mutations, ScaleBeyondPoolThrows) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    EXPECT_THROW(mutate::scale_replicas(env, 6), DomainError);
    EXPECT_THROW(mutate::scale_replicas(env, -5), DomainError);
}

TEST(Attacks, BlockedSourceEmitsNothing) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    mutate::block_source(env, "203.0.113.7");
    const auto load = emit_load(env.profile, env, env.clock.step);
    ASSERT_EQ(load.flows.size(), 1u);
    EXPECT_EQ(load.flows[0].source, "198.51.100.23");
}

TEST(Attacks, ShuffleSilencesForTheAdaptationDelay) {
    // Shuffled after step t completes: silent during t+1..t+3, back at t+4.
    auto env = init_env(scenario(AttackKind::syn_flood));
    for (int i = 0; i < 2; ++i) step_env(env);
    const int t = env.clock.completed_steps();
    mutate::shuffle_address(env);
    for (int s = t + 1; s <= t + 3; ++s) EXPECT_EQ(emit_load(env.profile, env, s).total(), 0) << "step " << s;
    EXPECT_GT(emit_load(env.profile, env, t + 4).total(), 0);
}

TEST(Attacks, MemoryContentionIsCappedAtOneHundred) {
    for (int intensity : {100, 150, 1000}) {
        auto c = scenario(AttackKind::memory_dos);
        c.attack_intensity = intensity;
        auto env = init_env(c);
        const auto load = emit_load(env.profile, env, 1);
        ASSERT_EQ(load.contention.size(), 2u);
        for (const auto& [vm, v] : load.contention) EXPECT_DOUBLE_EQ(v, 100.0) << vm;
    }
}

TEST(Attacks, FloodingProfilesUseTwoIps) {
    const auto env = init_env(scenario(AttackKind::slow_http));
    ASSERT_EQ(env.profile.sources.size(), 2u);
    EXPECT_NE(env.profile.sources[0], env.profile.sources[1]);
    for (const auto& s : env.profile.sources) EXPECT_TRUE(is_valid_ipv4(s));
    const auto mem = init_env(scenario(AttackKind::memory_dos));
    for (const auto& s : mem.profile.sources) EXPECT_FALSE(is_valid_ipv4(s));
}

TEST(Attacks, MismatchedProfileIsAConfigError) {
    auto env = init_env(scenario(AttackKind::syn_flood));
    auto profile = env.profile;
    profile.kind = AttackKind::slow_http;
    EXPECT_THROW(emit_load(profile, env, 1), ConfigError);
}

TEST(Attacks, FloodLoadIsAdditiveOverActiveSources) {
    Rng rng(3);
    for (int i = 0; i < 100; ++i) {
        auto env = init_env(scenario(AttackKind::syn_flood, rng.next()));
        const int step = 1 + static_cast<int>(rng.index(50));
        const auto full = emit_load(env.profile, env, step);
        int expected = 0;
        for (const auto& f : full.flows) expected += f.source == "203.0.113.7" ? 0 : f.count;
        mutate::block_source(env, "203.0.113.7");
        EXPECT_EQ(emit_load(env.profile, env, step).total(), expected);
    }
}

TEST(Attacks, EmittedContentionNeverExceedsCap) {
    Rng rng(8);
    for (int i = 0; i < 200; ++i) {
        auto c = scenario(AttackKind::memory_dos, rng.next());
        c.attack_intensity = 1 + static_cast<int>(rng.index(400));
        c.attack_jitter = rng.uniform();
        auto env = init_env(c);
        for (const auto& [vm, v] : emit_load(env.profile, env, 1 + static_cast<int>(rng.index(20))).contention) {
            EXPECT_LE(v, 100.0);
            EXPECT_GE(v, 0.0);
        }
    }
}

TEST(ScenarioConfigText, RoundTripsAndRejectsUnknownKeys) {
    auto c = scenario(AttackKind::slow_http, 42);
    c.attacker_ips = {"192.0.2.1", "192.0.2.2"};
    c.legit_demand = 1200;
    EXPECT_EQ(parse_scenario_config(format_scenario_config(c)), c);
    EXPECT_THROW(parse_scenario_config("bogus = 1\n"), ConfigError);
    EXPECT_EQ(parse_scenario_config("# comment\nattack = memory_dos\n").attack, AttackKind::memory_dos);
}

}  // namespace
}  // namespace pdef
