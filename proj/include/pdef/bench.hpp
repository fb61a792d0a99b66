#pragma once

#include "pdef/baselines.hpp"
#include "pdef/pipeline.hpp"

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace pdef {

struct BenchConfig {
    PipelineConfig pipeline;
    ReasonerConfig reasoner;
    int trials = 200;
    int episodes = 10;
    std::uint64_t seed = 1;  // trial i runs with seed + i
    int workers = 0;         // 0 picks the hardware concurrency

    // Throws ConfigError.
    void validate() const;
};

struct EpisodeRecord {
    int episode = 0;
    Verdict verdict = Verdict::failure;
    int rounds = 0;
    int steps_to_success = 0;
    std::vector<std::array<bool, kStageCount>> stage_ok;  // per round
    std::vector<bool> survived;                            // per post-warm-up step
    std::vector<double> action_latency_s;                  // per executed action
    double cost = 0.0;

    static EpisodeRecord from(const EpisodeResult& r);
};

struct TrialResult {
    int trial = 0;
    std::uint64_t seed = 0;
    std::string scenario;
    std::string backend;
    bool errored = false;
    std::string error;
    std::vector<EpisodeRecord> episodes;

    Json to_json() const;
    // Throws ReportError on a malformed record.
    static TrialResult from_json(const Json& j);
};

// One trial's reasoner; the default builds make_reasoner(config.reasoner).
using ReasonerFactory = std::function<std::unique_ptr<Reasoner>(int trial)>;

// Trials run on a bounded worker pool. A trial whose endpoint is unreachable
// is returned with errored = true; any other failure is rethrown.
std::vector<TrialResult> run_bench(const BenchConfig& config, const ReasonerFactory& factory = {});

// Per-trial copies of a shared file path: "<path>.trial<N>". Empty stays empty.
std::string per_trial_path(const std::string& path, int trial);

struct MeanCi {
    double mean = 0.0;
    double half_width = 0.0;  // 1.96 * s / sqrt(n), s with n - 1 degrees of freedom
    int n = 0;
};
// Throws ReportError on an empty sample.
MeanCi mean_ci95(std::span<const double> sample);

struct Report {
    std::string scenario;
    std::string backend;
    int trials = 0;  // non-errored
    int errored_trials = 0;
    int episodes = 0;
    std::array<double, kStageCount> stage_accuracy{};
    MeanCi surviving;                       // over per-trial surviving rates
    std::vector<double> steps_by_episode;   // mean steps-to-success per episode index
    double efficacy = 0.0;                  // fraction of success episodes
    double mean_latency_s = 0.0;            // over every executed action
    double mean_cost = 0.0;                 // per episode

    Json to_json() const;
};

// Throws ReportError when no non-errored trial is present or the trials mix
// scenarios or backends.
Report metrics(std::span<const TrialResult> trials);

struct TableCell {
    double efficacy_pct = 0.0;
    double latency_s = 0.0;
    double cost = 0.0;
};
struct TableRow {
    std::string method;
    std::map<AttackKind, TableCell> cells;  // missing attacks render as "-"
};

TableRow table_row(const std::string& method, std::span<const Report> reports);
TableRow table_row(const std::string& method, AttackKind attack, const PolicyEvaluation& eval);

// Published comparison rows, shown next to measured rows.
const std::vector<TableRow>& reference_table();
// Published mean steps at the first and tenth episode per attack.
struct StepsReference {
    AttackKind attack;
    double first;
    double tenth;
};
const std::vector<StepsReference>& reference_steps();

std::string render_table(std::span<const TableRow> measured);

// Writes report.json, summary.csv, table.md, steps_grid.csv and
// stage_accuracy.csv into out_dir. Everything is rendered before the first
// write. Throws ReportError on an empty report set and IoError on write
// failures.
void export_reports(std::span<const Report> reports, std::span<const TableRow> extra_rows, const std::string& out_dir);

}  // namespace pdef
