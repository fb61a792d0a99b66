#include "pdef/bench.hpp"

#include "pdef/io.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace pdef {

void BenchConfig::validate() const {
    pipeline.validate();
    reasoner.validate();
    if (trials < 1) throw ConfigError("trials must be positive");
    if (episodes < 1) throw ConfigError("episodes must be positive");
    if (workers < 0) throw ConfigError("workers must not be negative");
}

EpisodeRecord EpisodeRecord::from(const EpisodeResult& r) {
    EpisodeRecord e;
    e.episode = r.episode;
    e.verdict = r.verdict;
    e.rounds = r.rounds;
    e.steps_to_success = r.steps_to_success;
    for (const auto& rr : r.round_results) e.stage_ok.push_back(rr.stage_ok);
    e.survived = r.survived();
    e.action_latency_s = r.action_latencies();
    e.cost = r.usage.cost;
    return e;
}

Json TrialResult::to_json() const {
    Json eps = Json::array();
    for (const auto& e : episodes) {
        Json stages = Json::array();
        for (const auto& s : e.stage_ok) stages.push_back(s);
        eps.push_back({{"episode", e.episode},
                       {"verdict", pdef::to_string(e.verdict)},
                       {"rounds", e.rounds},
                       {"steps_to_success", e.steps_to_success},
                       {"stage_ok", stages},
                       {"survived", e.survived},
                       {"action_latency_s", e.action_latency_s},
                       {"cost", e.cost}});
    }
    return {{"trial", trial},       {"seed", seed},     {"scenario", scenario}, {"backend", backend},
            {"errored", errored},   {"error", error},   {"episodes", eps}};
}

TrialResult TrialResult::from_json(const Json& j) {
    try {
        TrialResult t;
        t.trial = j.at("trial").get<int>();
        t.seed = j.at("seed").get<std::uint64_t>();
        t.scenario = j.at("scenario").get<std::string>();
        t.backend = j.at("backend").get<std::string>();
        t.errored = j.at("errored").get<bool>();
        t.error = j.value("error", "");
        for (const auto& je : j.at("episodes")) {
            EpisodeRecord e;
            e.episode = je.at("episode").get<int>();
            e.verdict = verdict_from_string(je.at("verdict").get<std::string>());
            e.rounds = je.at("rounds").get<int>();
            e.steps_to_success = je.at("steps_to_success").get<int>();
            for (const auto& s : je.at("stage_ok")) e.stage_ok.push_back(s.get<std::array<bool, kStageCount>>());
            e.survived = je.at("survived").get<std::vector<bool>>();
            e.action_latency_s = je.at("action_latency_s").get<std::vector<double>>();
            e.cost = je.at("cost").get<double>();
            t.episodes.push_back(std::move(e));
        }
        return t;
    } catch (const Json::exception& ex) {
        throw ReportError(std::string("malformed trial record: ") + ex.what());
    } catch (const ConfigError& ex) {
        throw ReportError(std::string("malformed trial record: ") + ex.what());
    }
}

std::string per_trial_path(const std::string& path, int trial) {
    if (path.empty()) return path;
    return path + ".trial" + std::to_string(trial);
}

std::vector<TrialResult> run_bench(const BenchConfig& config, const ReasonerFactory& factory) {
    config.validate();
    const int n = config.trials;
    int workers = config.workers > 0 ? config.workers : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, n);

    std::vector<TrialResult> results(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    std::mutex fail_mu;
    std::exception_ptr failure;

    auto run_trial = [&](int i) {
        TrialResult& t = results[static_cast<std::size_t>(i)];
        t.trial = i;
        t.seed = config.seed + static_cast<std::uint64_t>(i);
        t.scenario = std::string(to_string(config.pipeline.scenario.attack));
        auto reasoner = factory ? factory(i) : make_reasoner(config.reasoner);
        t.backend = reasoner->name();
        PipelineConfig pc = config.pipeline;
        pc.memory_path = per_trial_path(pc.memory_path, i);
        pc.trace_path = per_trial_path(pc.trace_path, i);
        pc.audit_log = per_trial_path(pc.audit_log, i);
        EpisodeRunner runner(pc, *reasoner, t.seed);
        try {
            for (int e = 0; e < config.episodes; ++e) t.episodes.push_back(EpisodeRecord::from(runner.run_episode()));
        } catch (const TransportError& ex) {
            t.errored = true;
            t.error = ex.what();
            t.episodes.clear();
        }
    };
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            {
                std::lock_guard lock(fail_mu);
                if (failure) return;
            }
            try {
                run_trial(i);
            } catch (...) {
                std::lock_guard lock(fail_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

MeanCi mean_ci95(std::span<const double> sample) {
    if (sample.empty()) throw ReportError("cannot summarize an empty sample");
    MeanCi out;
    out.n = static_cast<int>(sample.size());
    out.mean = std::accumulate(sample.begin(), sample.end(), 0.0) / out.n;
    if (out.n > 1) {
        double ss = 0.0;
        for (double v : sample) ss += (v - out.mean) * (v - out.mean);
        out.half_width = 1.96 * std::sqrt(ss / (out.n - 1)) / std::sqrt(static_cast<double>(out.n));
    }
    return out;
}

Json Report::to_json() const {
    return {{"scenario", scenario},
            {"backend", backend},
            {"trials", trials},
            {"errored_trials", errored_trials},
            {"episodes", episodes},
            {"stage_accuracy", stage_accuracy},
            {"surviving_rate", {{"mean", surviving.mean}, {"ci95", surviving.half_width}, {"n", surviving.n}}},
            {"steps_by_episode", steps_by_episode},
            {"efficacy", efficacy},
            {"mean_latency_s", mean_latency_s},
            {"mean_cost", mean_cost}};
}

Report metrics(std::span<const TrialResult> trials) {
    Report r;
    std::vector<double> surviving;
    std::array<double, kStageCount> stage_hits{};
    double rounds = 0.0;
    std::vector<double> steps_sum;
    std::vector<int> steps_n;
    double successes = 0.0, latency_sum = 0.0, cost_sum = 0.0;
    std::size_t latency_n = 0;
    for (const auto& t : trials) {
        if (r.scenario.empty() && r.backend.empty()) {
            r.scenario = t.scenario;
            r.backend = t.backend;
        } else if (t.scenario != r.scenario || t.backend != r.backend) {
            throw ReportError("trials mix scenarios or backends");
        }
        if (t.errored) {
            ++r.errored_trials;
            continue;
        }
        if (t.episodes.empty()) throw ReportError("trial " + std::to_string(t.trial) + " has no episodes");
        ++r.trials;
        double surv = 0.0, steps = 0.0;
        for (std::size_t i = 0; i < t.episodes.size(); ++i) {
            const auto& e = t.episodes[i];
            ++r.episodes;
            for (const auto& s : e.stage_ok) {
                rounds += 1.0;
                for (int k = 0; k < kStageCount; ++k) stage_hits[static_cast<std::size_t>(k)] += s[static_cast<std::size_t>(k)];
            }
            for (bool b : e.survived) surv += b;
            steps += static_cast<double>(e.survived.size());
            if (steps_sum.size() <= i) {
                steps_sum.resize(i + 1, 0.0);
                steps_n.resize(i + 1, 0);
            }
            steps_sum[i] += e.steps_to_success;
            ++steps_n[i];
            successes += e.verdict == Verdict::success;
            for (double l : e.action_latency_s) latency_sum += l;
            latency_n += e.action_latency_s.size();
            cost_sum += e.cost;
        }
        surviving.push_back(steps > 0 ? surv / steps : 0.0);
    }
    if (r.trials == 0) throw ReportError("no completed trials to report");
    for (int k = 0; k < kStageCount; ++k) {
        r.stage_accuracy[static_cast<std::size_t>(k)] = rounds > 0 ? stage_hits[static_cast<std::size_t>(k)] / rounds : 0.0;
    }
    r.surviving = mean_ci95(surviving);
    for (std::size_t i = 0; i < steps_sum.size(); ++i) r.steps_by_episode.push_back(steps_sum[i] / steps_n[i]);
    r.efficacy = successes / r.episodes;
    r.mean_latency_s = latency_n > 0 ? latency_sum / static_cast<double>(latency_n) : 0.0;
    r.mean_cost = cost_sum / r.episodes;
    return r;
}

TableRow table_row(const std::string& method, std::span<const Report> reports) {
    TableRow row{method, {}};
    for (const auto& r : reports) {
        row.cells[attack_kind_from_string(r.scenario)] = {100.0 * r.efficacy, r.mean_latency_s, r.mean_cost};
    }
    return row;
}

TableRow table_row(const std::string& method, AttackKind attack, const PolicyEvaluation& eval) {
    return {method, {{attack, {100.0 * eval.efficacy, eval.mean_latency_s, eval.mean_cost}}}};
}

namespace {

constexpr std::array<AttackKind, 3> kTableAttacks = {AttackKind::syn_flood, AttackKind::slow_http, AttackKind::memory_dos};

std::string fixed(double v, int digits) {
    std::ostringstream s;
    if (v != 0.0 && std::abs(v) < std::pow(10.0, -digits)) {
        s << std::scientific << std::setprecision(1) << v;
        return s.str();
    }
    s << std::fixed << std::setprecision(digits) << v;
    return s.str();
}

// Plain decimal text, enough digits to recompute figures from the CSVs.
std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(10) << v;
    return s.str();
}

void render_rows(std::ostringstream& out, std::span<const TableRow> rows, const std::string& suffix) {
    for (const auto& row : rows) {
        out << "| " << row.method << suffix;
        for (auto a : kTableAttacks) {
            auto it = row.cells.find(a);
            if (it == row.cells.end()) {
                out << " | - | - | -";
            } else {
                out << " | " << fixed(it->second.efficacy_pct, 2) << " | " << fixed(it->second.latency_s, 4) << " | "
                    << fixed(it->second.cost, 4);
            }
        }
        out << " |\n";
    }
}

}  // namespace

const std::vector<TableRow>& reference_table() {
    using A = AttackKind;
    static const std::vector<TableRow> rows = {
        {"DQN", {{A::syn_flood, {82.68, 0.0595, 0.0135}}, {A::slow_http, {84.94, 0.0601, 0.0136}}, {A::memory_dos, {56.07, 0.2117, 0.0479}}}},
        {"AC", {{A::syn_flood, {73.65, 0.1189, 0.0269}}, {A::slow_http, {77.35, 0.1134, 0.0256}}, {A::memory_dos, {54.90, 0.6142, 0.1389}}}},
        {"PPO", {{A::syn_flood, {73.00, 0.5429, 0.1228}}, {A::slow_http, {78.79, 0.4740, 0.1072}}, {A::memory_dos, {55.56, 1.1341, 0.2565}}}},
        {"GPT-4o mini", {{A::syn_flood, {97.08, 2.7255, 3.2045}}, {A::slow_http, {98.47, 2.6646, 3.3227}}, {A::memory_dos, {98.78, 2.5523, 2.3432}}}},
        {"DeepSeek-R1-Distill-Qwen-32B", {{A::syn_flood, {98.15, 7.1682, 0.0418}}, {A::slow_http, {98.02, 7.3874, 0.0322}}, {A::memory_dos, {98.88, 7.3286, 0.0301}}}},
        {"Qwen3-32B", {{A::syn_flood, {98.66, 12.411, 0.0492}}, {A::slow_http, {97.69, 13.136, 0.0258}}, {A::memory_dos, {93.87, 16.394, 0.0809}}}},
    };
    return rows;
}

const std::vector<StepsReference>& reference_steps() {
    // First episode from the GPT-4o mini runs, tenth from DeepSeek-R1-Distill-Qwen-32B.
    static const std::vector<StepsReference> rows = {
        {AttackKind::syn_flood, 10.05, 5.64}, {AttackKind::slow_http, 9.69, 5.26}, {AttackKind::memory_dos, 16.02, 6.40}};
    return rows;
}

std::string render_table(std::span<const TableRow> measured) {
    std::ostringstream out;
    out << "| Method | SYN Efficacy (%) | SYN Latency (s) | SYN Cost ($) | SlowHTTP Efficacy (%) | SlowHTTP Latency (s) "
           "| SlowHTTP Cost ($) | Memory DoS Efficacy (%) | Memory DoS Latency (s) | Memory DoS Cost ($) |\n";
    out << "|---|---|---|---|---|---|---|---|---|---|\n";
    render_rows(out, measured, "");
    render_rows(out, reference_table(), " (published)");
    out << "\nLatency is end-to-end wall clock per executed action, including reasoner round trips and any queueing "
           "at the endpoint. Cost is per episode. Rows marked (published) are reference values, not measurements.\n";
    return out.str();
}

void export_reports(std::span<const Report> reports, std::span<const TableRow> extra_rows, const std::string& out_dir) {
    if (reports.empty()) throw ReportError("nothing to export");

    Json doc = {{"format", "pdef-report"}, {"version", 1}, {"reports", Json::array()}};
    for (const auto& r : reports) doc["reports"].push_back(r.to_json());

    std::ostringstream summary;
    summary << "scenario,backend,trials,errored_trials,episodes,efficacy,surviving_mean,surviving_ci95,mean_latency_s,"
               "mean_cost";
    for (int k = 0; k < kStageCount; ++k) summary << ",accuracy_" << to_string(static_cast<Stage>(k));
    summary << "\n";
    for (const auto& r : reports) {
        summary << r.scenario << "," << r.backend << "," << r.trials << "," << r.errored_trials << "," << r.episodes << ","
                << num(r.efficacy) << "," << num(r.surviving.mean) << "," << num(r.surviving.half_width) << ","
                << num(r.mean_latency_s) << "," << num(r.mean_cost);
        for (double a : r.stage_accuracy) summary << "," << num(a);
        summary << "\n";
    }

    std::map<std::string, std::vector<Report>> by_backend;
    for (const auto& r : reports) by_backend[r.backend].push_back(r);
    std::vector<TableRow> rows;
    for (const auto& [backend, rs] : by_backend) rows.push_back(table_row(backend, rs));
    rows.insert(rows.end(), extra_rows.begin(), extra_rows.end());
    const std::string table = render_table(rows);

    std::ostringstream grid;
    grid << "scenario,backend,episode,mean_steps,reference_steps\n";
    for (const auto& r : reports) {
        const AttackKind a = attack_kind_from_string(r.scenario);
        const StepsReference* ref = nullptr;
        for (const auto& s : reference_steps()) {
            if (s.attack == a) ref = &s;
        }
        for (std::size_t i = 0; i < r.steps_by_episode.size(); ++i) {
            grid << r.scenario << "," << r.backend << "," << i + 1 << "," << num(r.steps_by_episode[i]) << ",";
            if (ref != nullptr && i == 0) grid << num(ref->first);
            if (ref != nullptr && i == 9) grid << num(ref->tenth);
            grid << "\n";
        }
    }

    std::ostringstream acc;
    acc << "scenario,backend,stage,accuracy\n";
    for (const auto& r : reports) {
        for (int k = 0; k < kStageCount; ++k) {
            acc << r.scenario << "," << r.backend << "," << to_string(static_cast<Stage>(k)) << ","
                << num(r.stage_accuracy[static_cast<std::size_t>(k)]) << "\n";
        }
    }

    const std::string dir = out_dir.empty() ? "." : out_dir;
    write_file_atomic(dir + "/report.json", doc.dump(2) + "\n");
    write_file_atomic(dir + "/summary.csv", summary.str());
    write_file_atomic(dir + "/table.md", table);
    write_file_atomic(dir + "/steps_grid.csv", grid.str());
    write_file_atomic(dir + "/stage_accuracy.csv", acc.str());
}

}  // namespace pdef
