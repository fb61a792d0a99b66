#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>

namespace pdef {

using Json = nlohmann::json;

// Label attached by the simulator; never read by the pipeline stages, only by
// the bench when it scores stage accuracy.
struct GroundTruth {
    bool relevant = true;
    bool hostile = false;

    bool operator==(const GroundTruth&) const = default;
};

// One telemetry line. `repeat` folds N identical lines into one entry, the way
// syslog reports "last message repeated N times".
struct RawEvent {
    std::string timestamp;
    std::string event;
    std::optional<std::string> source_ip;
    std::optional<std::string> username;
    std::optional<std::string> status;
    std::optional<std::string> entity;  // VM or pod id for host-level events
    std::map<std::string, double> metrics;
    std::int64_t repeat = 1;
    Json extra = Json::object();  // unknown fields, passed through verbatim
    std::optional<GroundTruth> truth;

    bool operator==(const RawEvent&) const = default;
};

// Serializes ground truth under "_truth" only when include_truth is set.
Json to_json(const RawEvent& event, bool include_truth = false);

// Throws DomainError when a known field has the wrong type.
RawEvent raw_event_from_json(const Json& j);

}  // namespace pdef
