#include "pdef/telemetry.hpp"

#include "pdef/common.hpp"

namespace pdef {

Json to_json(const RawEvent& e, bool include_truth) {
    Json j = e.extra.is_object() ? e.extra : Json::object();
    j["timestamp"] = e.timestamp;
    j["event"] = e.event;
    if (e.source_ip) j["source_ip"] = *e.source_ip;
    if (e.username) j["username"] = *e.username;
    if (e.status) j["status"] = *e.status;
    if (e.entity) j["entity"] = *e.entity;
    if (!e.metrics.empty()) j["metrics"] = e.metrics;
    if (e.repeat != 1) j["repeat"] = e.repeat;
    if (include_truth && e.truth) j["_truth"] = {{"relevant", e.truth->relevant}, {"hostile", e.truth->hostile}};
    return j;
}

namespace {

std::optional<std::string> optional_string(const Json& j, const char* key) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DomainError(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

RawEvent raw_event_from_json(const Json& j) {
    if (!j.is_object()) throw DomainError("raw event must be a JSON object");
    RawEvent e;
    const auto ts = j.find("timestamp");
    if (ts == j.end() || !ts->is_string()) throw DomainError("raw event lacks a string timestamp");
    e.timestamp = ts->get<std::string>();
    const auto ev = j.find("event");
    if (ev == j.end() || !ev->is_string()) throw DomainError("raw event lacks a string event name");
    e.event = ev->get<std::string>();
    e.source_ip = optional_string(j, "source_ip");
    e.username = optional_string(j, "username");
    e.status = optional_string(j, "status");
    e.entity = optional_string(j, "entity");
    if (const auto m = j.find("metrics"); m != j.end() && !m->is_null()) {
        if (!m->is_object()) throw DomainError("field 'metrics' must be an object");
        for (const auto& [k, v] : m->items()) {
            if (!v.is_number()) throw DomainError("metric '" + k + "' must be numeric");
            e.metrics[k] = v.get<double>();
        }
    }
    if (const auto r = j.find("repeat"); r != j.end()) {
        if (!r->is_number_integer() || r->get<std::int64_t>() < 1) {
            throw DomainError("field 'repeat' must be a positive integer");
        }
        e.repeat = r->get<std::int64_t>();
    }
    if (const auto t = j.find("_truth"); t != j.end() && t->is_object()) {
        e.truth = GroundTruth{t->value("relevant", true), t->value("hostile", false)};
    }
    static const char* kKnown[] = {"timestamp", "event", "source_ip", "username", "status",
                                   "entity",    "metrics", "repeat",  "_truth"};
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        for (const char* name : kKnown) known = known || k == name;
        if (!known) e.extra[k] = v;
    }
    return e;
}

}  // namespace pdef
