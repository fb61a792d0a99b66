#include "pdef/collector.hpp"

#include "pdef/common.hpp"

#include <algorithm>
#include <cctype>
#include <limits>
#include <set>
#include <tuple>

namespace pdef {

std::string_view to_string(Relevance r) {
    switch (r) {
        case Relevance::alert: return "alert";
        case Relevance::summary: return "summary";
        case Relevance::irrelevant: return "irrelevant";
    }
    return "alert";
}

std::optional<Relevance> relevance_from_string(std::string_view name) {
    if (name == "alert") return Relevance::alert;
    if (name == "summary") return Relevance::summary;
    if (name == "irrelevant") return Relevance::irrelevant;
    return std::nullopt;
}

RelevanceTable RelevanceTable::defaults() {
    RelevanceTable t;
    for (const char* name : {"heartbeat", "health_check", "keepalive", "status_ok"}) t.set(name, Relevance::irrelevant);
    for (const char* name : {"service_metrics", "vm_metrics"}) t.set(name, Relevance::summary);
    return t;
}

Relevance RelevanceTable::classify(const std::string& event) const {
    const auto it = classes_.find(event);
    return it == classes_.end() ? Relevance::alert : it->second;
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::optional<std::string> normalized(const std::optional<std::string>& s) {
    if (!s) return std::nullopt;
    std::string t = trim(*s);
    if (t.empty()) return std::nullopt;
    return t;
}

struct Normalized {
    RawEvent event;
    std::int64_t epoch = 0;
};

// Returns a warning when the event cannot be used.
std::optional<std::string> normalize(RawEvent& e, std::int64_t& epoch) {
    e.event = lower(trim(e.event));
    if (e.event.empty()) return "empty event name";
    const auto ts = parse_iso8601(trim(e.timestamp));
    if (!ts) return "unparseable timestamp '" + e.timestamp + "'";
    epoch = *ts;
    e.timestamp = format_iso8601(*ts);
    e.source_ip = normalized(e.source_ip);
    e.username = normalized(e.username);
    e.status = normalized(e.status);
    if (e.status) e.status = lower(*e.status);
    e.entity = normalized(e.entity);
    if (e.repeat < 1) return "non-positive repeat count";
    return std::nullopt;
}

double metric(const RawEvent& e, const char* key, double fallback = 0.0) {
    const auto it = e.metrics.find(key);
    return it == e.metrics.end() ? fallback : it->second;
}

// Later samples win; equal timestamps fall back to comparing the metric maps
// so the result does not depend on input order.
bool newer(std::int64_t epoch, const RawEvent& e, std::int64_t best_epoch, const RawEvent* best) {
    if (best == nullptr) return true;
    if (epoch != best_epoch) return epoch > best_epoch;
    return e.metrics > best->metrics;
}

struct AlertKey {
    std::string kind;
    std::string source;
    auto operator<=>(const AlertKey&) const = default;
};

struct AlertAcc {
    std::int64_t count = 0;
    std::int64_t first = 0;
    std::int64_t last = 0;
    std::map<std::pair<std::optional<std::string>, std::optional<std::string>>, std::int64_t> details;
};

SecurityRecord build(std::vector<Normalized>& events, std::vector<QuarantinedEvent> quarantined, int round_id,
                     const RelevanceTable& table) {
    SecurityRecord rec;
    rec.round_id = round_id;
    rec.quarantined = std::move(quarantined);
    std::map<AlertKey, AlertAcc> alerts;
    auto& s = rec.status_summary;
    const RawEvent* latest_service = nullptr;
    std::int64_t latest_service_epoch = 0;
    std::map<std::string, std::pair<std::int64_t, const RawEvent*>> latest_vm;

    for (const auto& n : events) {
        const auto& e = n.event;
        switch (table.classify(e.event)) {
            case Relevance::irrelevant: rec.dropped_irrelevant += e.repeat; break;
            case Relevance::summary: {
                rec.summary_events += e.repeat;
                if (e.event == "vm_metrics" || (e.entity && e.metrics.count("contention") && !e.metrics.count("cpu"))) {
                    const std::string id = e.entity.value_or("-");
                    auto& slot = latest_vm[id];
                    if (newer(n.epoch, e, slot.first, slot.second)) slot = {n.epoch, &e};
                    if (e.metrics.count("progress_gain")) {
                        s.min_progress_gain = std::min(s.min_progress_gain, metric(e, "progress_gain", 1.0));
                    }
                } else {
                    ++s.samples;
                    s.present = true;
                    const double offered = metric(e, "legit_offered");
                    const double served = metric(e, "legit_served");
                    s.legit_offered += static_cast<std::int64_t>(offered);
                    s.legit_served += static_cast<std::int64_t>(served);
                    if (offered > 0) s.min_availability = std::min(s.min_availability, served / offered);
                    if (newer(n.epoch, e, latest_service_epoch, latest_service)) {
                        latest_service = &e;
                        latest_service_epoch = n.epoch;
                    }
                }
                break;
            }
            case Relevance::alert: {
                AlertKey key{e.event, e.source_ip.value_or(e.entity.value_or("-"))};
                auto& acc = alerts[key];
                if (acc.count == 0) {
                    acc.first = n.epoch;
                    acc.last = n.epoch;
                }
                acc.count += e.repeat;
                acc.first = std::min(acc.first, n.epoch);
                acc.last = std::max(acc.last, n.epoch);
                acc.details[{e.username, e.status}] += e.repeat;
                break;
            }
        }
    }

    if (latest_service != nullptr) {
        const auto& e = *latest_service;
        s.cpu_util = metric(e, "cpu");
        s.memory_util = metric(e, "memory");
        s.total_connections = static_cast<std::int64_t>(metric(e, "connections"));
        s.legit_connections = static_cast<std::int64_t>(metric(e, "legit_connections"));
        s.half_open_connections = static_cast<std::int64_t>(metric(e, "half_open"));
        s.slow_connections = static_cast<std::int64_t>(metric(e, "slow_connections"));
        s.active_pods = static_cast<std::int64_t>(metric(e, "active_pods"));
        s.active_replicas = static_cast<std::int64_t>(metric(e, "active_replicas"));
        s.capacity = static_cast<std::int64_t>(metric(e, "capacity"));
        s.free_slots = static_cast<std::int64_t>(metric(e, "free_slots"));
        s.affected_pods = static_cast<std::int64_t>(metric(e, "affected_pods"));
    }
    // Only VMs present in the most recent host sample; a migrated victim leaves
    // its old neighbours behind.
    std::int64_t vm_epoch = std::numeric_limits<std::int64_t>::min();
    for (const auto& [id, slot] : latest_vm) vm_epoch = std::max(vm_epoch, slot.first);
    for (const auto& [id, slot] : latest_vm) {
        if (slot.first != vm_epoch) continue;
        const auto& e = *slot.second;
        s.vm_contention[id] = metric(e, "contention");
        if (e.metrics.count("contention_seen")) {
            s.victim_contention = metric(e, "contention_seen");
            s.victim_vm = id;
        }
    }

    for (const auto& [key, acc] : alerts) {
        Alert a;
        a.kind = key.kind;
        a.source = key.source;
        a.count = acc.count;
        a.first_seen = format_iso8601(acc.first);
        a.last_seen = format_iso8601(acc.last);
        for (const auto& [d, c] : acc.details) a.details.push_back(AlertDetail{d.first, d.second, c});
        rec.alerts.push_back(std::move(a));
    }
    return rec;
}

}  // namespace

SecurityRecord collect(std::span<const RawEvent> raw, int round_id, const RelevanceTable& table) {
    std::vector<Normalized> events;
    std::vector<QuarantinedEvent> quarantined;
    events.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        Normalized n{raw[i], 0};
        if (auto warning = normalize(n.event, n.epoch)) {
            quarantined.push_back(QuarantinedEvent{i, *warning});
            continue;
        }
        events.push_back(std::move(n));
    }
    return build(events, std::move(quarantined), round_id, table);
}

SecurityRecord collect(std::span<const Json> raw, int round_id, const RelevanceTable& table) {
    std::vector<Normalized> events;
    std::vector<QuarantinedEvent> quarantined;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        try {
            Normalized n{raw_event_from_json(raw[i]), 0};
            if (auto warning = normalize(n.event, n.epoch)) {
                quarantined.push_back(QuarantinedEvent{i, *warning});
                continue;
            }
            events.push_back(std::move(n));
        } catch (const Error& ex) {
            quarantined.push_back(QuarantinedEvent{i, ex.what()});
        } catch (const nlohmann::json::exception& ex) {
            quarantined.push_back(QuarantinedEvent{i, ex.what()});
        }
    }
    return build(events, std::move(quarantined), round_id, table);
}

std::vector<std::string> validate_record(const SecurityRecord& r) {
    std::vector<std::string> out;
    if (r.schema_version != kRecordSchemaVersion) {
        out.push_back("unsupported schema_version " + std::to_string(r.schema_version));
    }
    if (r.round_id < 0) out.push_back("negative round_id");
    if (r.dropped_irrelevant < 0) out.push_back("negative dropped_irrelevant");
    if (r.summary_events < 0) out.push_back("negative summary_events");
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& a : r.alerts) {
        const std::string tag = "alert (" + a.kind + ", " + a.source + ")";
        if (!seen.insert({a.kind, a.source}).second) out.push_back("duplicate " + tag);
        if (a.kind.empty()) out.push_back("alert with empty kind");
        if (a.count < 1) out.push_back(tag + " has count " + std::to_string(a.count));
        const auto first = parse_iso8601(a.first_seen);
        const auto last = parse_iso8601(a.last_seen);
        if (!first || !last) {
            out.push_back(tag + " has an unparseable time span");
        } else if (*first > *last) {
            out.push_back(tag + " first_seen after last_seen");
        }
        std::int64_t detail_total = 0;
        for (const auto& d : a.details) {
            if (d.count < 1) out.push_back(tag + " has a non-positive detail count");
            detail_total += d.count;
        }
        if (!a.details.empty() && detail_total != a.count) out.push_back(tag + " detail counts do not sum to count");
    }
    const auto& s = r.status_summary;
    if (s.cpu_util < 0 || s.cpu_util > 100) out.push_back("cpu_util outside [0,100]");
    if (s.memory_util < 0 || s.memory_util > 100) out.push_back("memory_util outside [0,100]");
    if (s.min_availability < 0 || s.min_availability > 1) out.push_back("min_availability outside [0,1]");
    for (const auto& [id, c] : s.vm_contention) {
        if (c < 0 || c > 100) out.push_back("contention of " + id + " outside [0,100]");
    }
    if (s.total_connections < 0 || s.half_open_connections < 0 || s.slow_connections < 0 || s.legit_connections < 0) {
        out.push_back("negative connection count");
    }
    return out;
}

EventTally tally_by_truth(std::span<const RawEvent> raw) {
    EventTally t;
    for (const auto& e : raw) {
        const bool relevant = e.truth ? e.truth->relevant : true;
        (relevant ? t.relevant : t.irrelevant) += e.repeat;
    }
    return t;
}

bool conserves(const SecurityRecord& r, const EventTally& truth) {
    std::int64_t alerted = 0;
    for (const auto& a : r.alerts) alerted += a.count;
    return alerted + r.summary_events == truth.relevant && r.dropped_irrelevant == truth.irrelevant;
}

std::vector<RawEvent> to_raw_events(const SecurityRecord& r) {
    std::vector<RawEvent> out;
    for (const auto& a : r.alerts) {
        // The first unit lands on first_seen, the last on last_seen.
        std::int64_t remaining = a.count;
        for (const auto& d : a.details) {
            std::int64_t left = d.count;
            auto emit = [&](const std::string& ts, std::int64_t n) {
                RawEvent e;
                e.timestamp = ts;
                e.event = a.kind;
                if (is_valid_ipv4(a.source)) {
                    e.source_ip = a.source;
                } else if (a.source != "-") {
                    e.entity = a.source;
                }
                e.username = d.username;
                e.status = d.status;
                e.repeat = n;
                out.push_back(std::move(e));
            };
            if (remaining == a.count && left > 0) {
                emit(a.first_seen, 1);
                --left;
                --remaining;
            }
            if (left > 0 && remaining == left) {
                if (left > 1) emit(a.first_seen, left - 1);
                emit(a.last_seen, 1);
            } else if (left > 0) {
                emit(a.first_seen, left);
            }
            remaining -= left;
        }
    }
    const std::string ts = !r.alerts.empty() ? r.alerts.front().first_seen : format_iso8601(0);
    if (r.dropped_irrelevant > 0) {
        RawEvent e;
        e.timestamp = ts;
        e.event = "heartbeat";
        e.repeat = r.dropped_irrelevant;
        out.push_back(std::move(e));
    }
    const auto& s = r.status_summary;
    std::int64_t vm_events = 0;
    for (const auto& [id, c] : s.vm_contention) {
        RawEvent e;
        e.timestamp = ts;
        e.event = "vm_metrics";
        e.entity = id;
        e.metrics["contention"] = c;
        out.push_back(std::move(e));
        ++vm_events;
    }
    if (r.summary_events > vm_events) {
        RawEvent e;
        e.timestamp = ts;
        e.event = "service_metrics";
        e.metrics = {{"cpu", s.cpu_util},
                     {"memory", s.memory_util},
                     {"connections", static_cast<double>(s.total_connections)},
                     {"half_open", static_cast<double>(s.half_open_connections)},
                     {"slow_connections", static_cast<double>(s.slow_connections)}};
        e.repeat = r.summary_events - vm_events;
        out.push_back(std::move(e));
    }
    return out;
}

Json to_json(const SecurityRecord& r) {
    Json alerts = Json::array();
    for (const auto& a : r.alerts) {
        Json details = Json::array();
        for (const auto& d : a.details) {
            Json dj = {{"count", d.count}};
            dj["username"] = d.username ? Json(*d.username) : Json(nullptr);
            dj["status"] = d.status ? Json(*d.status) : Json(nullptr);
            details.push_back(std::move(dj));
        }
        alerts.push_back({{"kind", a.kind},
                          {"source", a.source},
                          {"count", a.count},
                          {"first_seen", a.first_seen},
                          {"last_seen", a.last_seen},
                          {"details", std::move(details)}});
    }
    const auto& s = r.status_summary;
    Json summary = {{"present", s.present},
                    {"cpu_util", s.cpu_util},
                    {"memory_util", s.memory_util},
                    {"total_connections", s.total_connections},
                    {"legit_connections", s.legit_connections},
                    {"half_open_connections", s.half_open_connections},
                    {"slow_connections", s.slow_connections},
                    {"active_pods", s.active_pods},
                    {"active_replicas", s.active_replicas},
                    {"capacity", s.capacity},
                    {"free_slots", s.free_slots},
                    {"affected_pods", s.affected_pods},
                    {"legit_offered", s.legit_offered},
                    {"legit_served", s.legit_served},
                    {"min_availability", s.min_availability},
                    {"vm_contention", s.vm_contention},
                    {"victim_contention", s.victim_contention ? Json(*s.victim_contention) : Json(nullptr)},
                    {"victim_vm", s.victim_vm ? Json(*s.victim_vm) : Json(nullptr)},
                    {"min_progress_gain", s.min_progress_gain},
                    {"samples", s.samples}};
    Json quarantined = Json::array();
    for (const auto& q : r.quarantined) quarantined.push_back({{"index", q.index}, {"warning", q.warning}});
    return {{"schema_version", r.schema_version},
            {"round_id", r.round_id},
            {"status_summary", std::move(summary)},
            {"alerts", std::move(alerts)},
            {"dropped_irrelevant", r.dropped_irrelevant},
            {"summary_events", r.summary_events},
            {"quarantined", std::move(quarantined)}};
}

SecurityRecord security_record_from_json(const Json& j) {
    try {
        SecurityRecord r;
        r.schema_version = j.at("schema_version").get<int>();
        r.round_id = j.at("round_id").get<int>();
        r.dropped_irrelevant = j.at("dropped_irrelevant").get<std::int64_t>();
        r.summary_events = j.value("summary_events", std::int64_t{0});
        for (const auto& aj : j.at("alerts")) {
            Alert a;
            a.kind = aj.at("kind").get<std::string>();
            a.source = aj.at("source").get<std::string>();
            a.count = aj.at("count").get<std::int64_t>();
            a.first_seen = aj.at("first_seen").get<std::string>();
            a.last_seen = aj.at("last_seen").get<std::string>();
            for (const auto& dj : aj.value("details", Json::array())) {
                AlertDetail d;
                if (dj.contains("username") && dj["username"].is_string()) d.username = dj["username"].get<std::string>();
                if (dj.contains("status") && dj["status"].is_string()) d.status = dj["status"].get<std::string>();
                d.count = dj.at("count").get<std::int64_t>();
                a.details.push_back(std::move(d));
            }
            r.alerts.push_back(std::move(a));
        }
        const auto& sj = j.at("status_summary");
        auto& s = r.status_summary;
        s.present = sj.value("present", false);
        s.cpu_util = sj.value("cpu_util", 0.0);
        s.memory_util = sj.value("memory_util", 0.0);
        s.total_connections = sj.value("total_connections", std::int64_t{0});
        s.legit_connections = sj.value("legit_connections", std::int64_t{0});
        s.half_open_connections = sj.value("half_open_connections", std::int64_t{0});
        s.slow_connections = sj.value("slow_connections", std::int64_t{0});
        s.active_pods = sj.value("active_pods", std::int64_t{0});
        s.active_replicas = sj.value("active_replicas", std::int64_t{0});
        s.capacity = sj.value("capacity", std::int64_t{0});
        s.free_slots = sj.value("free_slots", std::int64_t{0});
        s.affected_pods = sj.value("affected_pods", std::int64_t{0});
        s.legit_offered = sj.value("legit_offered", std::int64_t{0});
        s.legit_served = sj.value("legit_served", std::int64_t{0});
        s.min_availability = sj.value("min_availability", 1.0);
        if (sj.contains("vm_contention")) s.vm_contention = sj["vm_contention"].get<std::map<std::string, double>>();
        if (sj.contains("victim_contention") && sj["victim_contention"].is_number()) {
            s.victim_contention = sj["victim_contention"].get<double>();
        }
        if (sj.contains("victim_vm") && sj["victim_vm"].is_string()) s.victim_vm = sj["victim_vm"].get<std::string>();
        s.min_progress_gain = sj.value("min_progress_gain", 1.0);
        s.samples = sj.value("samples", 0);
        for (const auto& qj : j.value("quarantined", Json::array())) {
            r.quarantined.push_back(QuarantinedEvent{qj.at("index").get<std::size_t>(), qj.at("warning").get<std::string>()});
        }
        return r;
    } catch (const nlohmann::json::exception& ex) {
        throw DomainError(std::string("malformed security record: ") + ex.what());
    }
}

}  // namespace pdef
