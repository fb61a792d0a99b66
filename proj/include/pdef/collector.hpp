#pragma once

#include "pdef/telemetry.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdef {

enum class Relevance { alert, summary, irrelevant };
std::string_view to_string(Relevance r);
std::optional<Relevance> relevance_from_string(std::string_view name);

// Event name -> class. Names missing from the table are treated as alerts so
// that nothing unfamiliar is silently discarded.
class RelevanceTable {
public:
    static RelevanceTable defaults();

    Relevance classify(const std::string& event) const;
    void set(const std::string& event, Relevance r) { classes_[event] = r; }
    const std::map<std::string, Relevance>& entries() const { return classes_; }

private:
    std::map<std::string, Relevance> classes_;
};

struct AlertDetail {
    std::optional<std::string> username;
    std::optional<std::string> status;
    std::int64_t count = 0;

    bool operator==(const AlertDetail&) const = default;
};

// One alert per (kind, source). Events that differ only in username or status
// stay distinguishable through the detail list.
struct Alert {
    std::string kind;
    std::string source;
    std::int64_t count = 0;
    std::string first_seen;
    std::string last_seen;
    std::vector<AlertDetail> details;

    bool operator==(const Alert&) const = default;
};

struct StatusSummary {
    bool present = false;  // at least one service sample was seen
    double cpu_util = 0.0;
    double memory_util = 0.0;
    std::int64_t total_connections = 0;
    std::int64_t legit_connections = 0;
    std::int64_t half_open_connections = 0;
    std::int64_t slow_connections = 0;
    std::int64_t active_pods = 0;
    std::int64_t active_replicas = 0;
    std::int64_t capacity = 0;
    std::int64_t free_slots = 0;
    std::int64_t affected_pods = 0;
    std::int64_t legit_offered = 0;  // summed over the round
    std::int64_t legit_served = 0;
    double min_availability = 1.0;  // worst service sample of the round
    std::map<std::string, double> vm_contention;  // latest sample per VM
    std::optional<double> victim_contention;      // contention seen by the victim VM
    std::optional<std::string> victim_vm;
    double min_progress_gain = 1.0;
    int samples = 0;

    bool operator==(const StatusSummary&) const = default;
};

struct QuarantinedEvent {
    std::size_t index = 0;  // position in the raw input
    std::string warning;

    bool operator==(const QuarantinedEvent&) const = default;
};

inline constexpr int kRecordSchemaVersion = 1;

struct SecurityRecord {
    int round_id = 0;
    StatusSummary status_summary;
    std::vector<Alert> alerts;  // sorted by (kind, source)
    std::int64_t dropped_irrelevant = 0;
    std::int64_t summary_events = 0;
    std::vector<QuarantinedEvent> quarantined;
    int schema_version = kRecordSchemaVersion;

    bool operator==(const SecurityRecord&) const = default;
};

// Parses, normalizes, deduplicates and aggregates one round of telemetry.
// Malformed entries are quarantined; the call itself never fails.
SecurityRecord collect(std::span<const Json> raw, int round_id,
                       const RelevanceTable& table = RelevanceTable::defaults());
SecurityRecord collect(std::span<const RawEvent> raw, int round_id,
                       const RelevanceTable& table = RelevanceTable::defaults());

// Every violated record invariant; empty when the record is well formed.
std::vector<std::string> validate_record(const SecurityRecord& record);

// Event multiplicities a record accounts for, for conservation checks.
struct EventTally {
    std::int64_t relevant = 0;
    std::int64_t irrelevant = 0;
};
EventTally tally_by_truth(std::span<const RawEvent> raw);
bool conserves(const SecurityRecord& record, const EventTally& truth);

// Raw events that collect back into the same alerts, drops and summary count.
std::vector<RawEvent> to_raw_events(const SecurityRecord& record);

Json to_json(const SecurityRecord& record);
SecurityRecord security_record_from_json(const Json& j);

}  // namespace pdef
