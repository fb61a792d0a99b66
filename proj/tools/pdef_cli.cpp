#include "pdef/bench.hpp"
#include "pdef/io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <sstream>

using namespace pdef;

namespace {

std::vector<AttackKind> scenarios_from(const std::string& name) {
    if (name == "all") return {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos};
    return {attack_kind_from_string(name)};
}

std::string method_label(AgentKind k) {
    switch (k) {
        case AgentKind::dqn: return "DQN";
        case AgentKind::ac: return "AC";
        case AgentKind::ppo: return "PPO";
        case AgentKind::random: return "Random";
    }
    return "Random";
}

// Rows written by `train`, read back by `report --baselines`.
std::vector<TableRow> load_baseline_rows(const std::string& path) {
    const Json doc = Json::parse(read_file(path));
    if (doc.value("format", "") != "pdef-baselines") throw ReportError(path + " is not a baseline evaluation file");
    std::map<std::string, TableRow> rows;
    for (const auto& r : doc.at("rows")) {
        const auto method = r.at("method").get<std::string>();
        auto& row = rows[method];
        row.method = method;
        row.cells[attack_kind_from_string(r.at("scenario").get<std::string>())] = {
            100.0 * r.at("efficacy").get<double>(), r.at("mean_latency_s").get<double>(), r.at("mean_cost").get<double>()};
    }
    std::vector<TableRow> out;
    for (auto& [_, row] : rows) out.push_back(std::move(row));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Proactive DoS defense pipeline: simulator, benchmark and RL baselines"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run pipeline trials and export metrics");
    std::string scenario = "syn_flood", backend = "oracle", model, endpoint, api_key_env, config_path;
    std::string memory_path, trace_path, audit_log, transcript, out_dir = "results";
    int trials = 200, episodes = 10, workers = 0, retries = -1;
    std::uint64_t seed = 1;
    double epsilon = 0.1, risk_k = 3.0, price_in = -1.0, price_out = -1.0;
    bool no_memory = false;
    run->add_option("--scenario", scenario, "syn_flood, slow_http, memory_dos, none or all")->capture_default_str();
    run->add_option("--backend", backend, "oracle or remote")->check(CLI::IsMember({"oracle", "remote"}))->capture_default_str();
    run->add_option("--model", model, "Sampling preset: gpt-4o-mini, deepseek-r1-distill-qwen-32b, qwen3-32b");
    run->add_option("--endpoint", endpoint, "Chat-completions URL for the remote backend");
    run->add_option("--api-key-env", api_key_env, "Environment variable holding the bearer token");
    run->add_option("--price-in", price_in, "Cost per input token");
    run->add_option("--price-out", price_out, "Cost per output token");
    run->add_option("--retries", retries, "Extra attempts after a schema-invalid reply");
    run->add_option("--transcript", transcript, "JSON lines of every remote exchange");
    run->add_option("--config", config_path, "Scenario constants file (key = value)");
    run->add_option("--trials", trials)->capture_default_str();
    run->add_option("--episodes", episodes)->capture_default_str();
    run->add_option("--seed", seed)->capture_default_str();
    run->add_option("--workers", workers, "0 uses every core")->capture_default_str();
    run->add_option("--epsilon", epsilon, "Initial exploration rate")->capture_default_str();
    run->add_option("--risk-k", risk_k, "Anomaly threshold in standard deviations")->capture_default_str();
    run->add_option("--memory-path", memory_path, "Persist episode memory per trial under this prefix");
    run->add_flag("--no-memory", no_memory, "Plan without the episode memory");
    run->add_option("--trace", trace_path, "JSON-lines trace prefix, one file per trial");
    run->add_option("--audit-log", audit_log, "Rendered scripts of executed programs, one file per trial");
    run->add_option("--out-dir", out_dir)->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "Recompute metrics from saved trial records");
    std::vector<std::string> inputs;
    std::string baselines_path, report_out = "results";
    report->add_option("--in", inputs, "trials_*.jsonl files written by run")->required();
    report->add_option("--baselines", baselines_path, "baselines.json written by train");
    report->add_option("--out-dir", report_out)->capture_default_str();

    // train
    auto* trainc = app.add_subcommand("train", "Train and evaluate the RL baselines");
    std::string train_scenario = "syn_flood", agent = "dqn", train_out = "results";
    int train_episodes = 200, eval_episodes = 50;
    std::uint64_t train_seed = 1;
    trainc->add_option("--scenario", train_scenario, "syn_flood, slow_http, memory_dos or all")->capture_default_str();
    trainc->add_option("--agent", agent, "dqn, ac, ppo, random or all")->capture_default_str();
    trainc->add_option("--episodes", train_episodes)->capture_default_str();
    trainc->add_option("--eval-episodes", eval_episodes)->capture_default_str();
    trainc->add_option("--seed", train_seed)->capture_default_str();
    trainc->add_option("--out-dir", train_out)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            BenchConfig bc;
            if (!config_path.empty()) bc.pipeline.scenario = load_scenario_config(config_path);
            if (backend == "remote") {
                bc.reasoner = model.empty() ? ReasonerConfig{} : model_preset(model);
                bc.reasoner.backend = BackendKind::remote;
                if (model.empty()) bc.reasoner.model_name = "remote";
            } else if (!model.empty()) {
                throw ConfigError("--model applies to the remote backend");
            }
            if (!endpoint.empty()) bc.reasoner.endpoint = endpoint;
            if (!api_key_env.empty()) bc.reasoner.api_key_env = api_key_env;
            if (price_in >= 0) bc.reasoner.price_input = price_in;
            if (price_out >= 0) bc.reasoner.price_output = price_out;
            if (retries >= 0) bc.reasoner.retries = retries;
            bc.reasoner.transcript_path = transcript;
            bc.pipeline.epsilon = epsilon;
            bc.pipeline.analyzer.k = risk_k;
            bc.pipeline.memory_enabled = !no_memory;
            bc.pipeline.memory_path = memory_path;
            bc.pipeline.trace_path = trace_path;
            bc.pipeline.audit_log = audit_log;
            bc.trials = trials;
            bc.episodes = episodes;
            bc.seed = seed;
            bc.workers = workers;

            std::vector<Report> reports;
            for (auto a : scenarios_from(scenario)) {
                BenchConfig sc = bc;
                sc.pipeline.scenario.attack = a;
                if (scenarios_from(scenario).size() > 1) {
                    sc.pipeline.memory_path = memory_path.empty() ? "" : memory_path + "." + std::string(to_string(a));
                    sc.pipeline.trace_path = trace_path.empty() ? "" : trace_path + "." + std::string(to_string(a));
                    sc.pipeline.audit_log = audit_log.empty() ? "" : audit_log + "." + std::string(to_string(a));
                }
                const auto start = std::chrono::steady_clock::now();
                const auto results = run_bench(sc, {});
                const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                std::ostringstream lines;
                int errored = 0;
                for (const auto& t : results) {
                    lines << t.to_json().dump() << "\n";
                    errored += t.errored;
                }
                write_file_atomic(out_dir + "/trials_" + std::string(to_string(a)) + ".jsonl", lines.str());
                if (errored > 0) std::cerr << "warning: " << errored << " trial(s) errored and are excluded\n";
                const auto r = metrics(results);
                std::cout << r.scenario << ": efficacy " << r.efficacy << ", surviving " << r.surviving.mean << " +- "
                          << r.surviving.half_width << ", steps ep1 " << r.steps_by_episode.front() << " -> ep"
                          << r.steps_by_episode.size() << " " << r.steps_by_episode.back() << " (" << secs << " s)\n";
                reports.push_back(r);
            }
            export_reports(reports, {}, out_dir);
            std::cout << "wrote " << out_dir << "/{report.json,summary.csv,table.md,steps_grid.csv,stage_accuracy.csv}\n";
        } else if (*report) {
            std::map<std::pair<std::string, std::string>, std::vector<TrialResult>> groups;
            for (const auto& path : inputs) {
                std::istringstream in(read_file(path));
                for (std::string line; std::getline(in, line);) {
                    if (line.empty()) continue;
                    auto t = TrialResult::from_json(Json::parse(line));
                    groups[{t.scenario, t.backend}].push_back(std::move(t));
                }
            }
            std::vector<Report> reports;
            for (const auto& [_, ts] : groups) reports.push_back(metrics(ts));
            const auto extra = baselines_path.empty() ? std::vector<TableRow>{} : load_baseline_rows(baselines_path);
            export_reports(reports, extra, report_out);
            std::cout << "wrote " << reports.size() << " report(s) to " << report_out << "\n";
        } else if (*trainc) {
            std::vector<AgentKind> agents;
            if (agent == "all") {
                agents = {AgentKind::dqn, AgentKind::ac, AgentKind::ppo, AgentKind::random};
            } else {
                agents = {agent_kind_from_string(agent)};
            }
            TrainConfig tc;
            tc.episodes = train_episodes;
            Json rows = Json::array();
            std::vector<TableRow> table;
            for (auto a : scenarios_from(train_scenario)) {
                ScenarioConfig sc;
                sc.attack = a;
                for (auto k : agents) {
                    const auto start = std::chrono::steady_clock::now();
                    auto tr = train(k, sc, tc, train_seed);
                    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                    const auto ev = evaluate_policy(*tr.agent, sc, tc, eval_episodes, train_seed + 1);
                    const std::string stem = train_out + "/" + std::string(to_string(k)) + "_" + std::string(to_string(a));
                    write_file_atomic(stem + "_curve.csv", curve_csv(tr.curve));
                    save_agent(*tr.agent, stem + "_model.json");
                    rows.push_back({{"method", method_label(k)},
                                    {"scenario", to_string(a)},
                                    {"efficacy", ev.efficacy},
                                    {"mean_latency_s", ev.mean_latency_s},
                                    {"mean_cost", ev.mean_cost},
                                    {"surviving_rate", ev.surviving_rate},
                                    {"episodes", ev.episodes},
                                    {"train_seconds", secs}});
                    std::cout << to_string(k) << " " << to_string(a) << ": efficacy " << ev.efficacy << ", surviving "
                              << ev.surviving_rate << ", latency " << ev.mean_latency_s << " s (trained in " << secs
                              << " s)\n";
                }
            }
            write_file_atomic(train_out + "/baselines.json",
                              Json{{"format", "pdef-baselines"}, {"version", 1}, {"rows", rows}}.dump(2) + "\n");
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
