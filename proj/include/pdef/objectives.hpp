#pragma once

#include "pdef/telemetry.hpp"

#include <array>
#include <string_view>

namespace pdef {

// The five evaluation dimensions, each normalized into [0,1] with higher
// meaning better: security, recovery, resource, financial, qos.
inline constexpr std::size_t kObjectiveCount = 5;
inline constexpr std::array<std::string_view, kObjectiveCount> kObjectiveNames = {"security", "recovery", "resource",
                                                                                  "financial", "qos"};

using Norms = std::array<double, kObjectiveCount>;

struct Weights {
    Norms w{0.2, 0.2, 0.2, 0.2, 0.2};

    // Throws ConfigError unless every weight is >= 0 and they sum to 1.
    void validate() const;
    double score(const Norms& n) const;
};

Json norms_to_json(const Norms& n);
// Missing dimensions default to 0; values are clamped into [0,1].
Norms norms_from_json(const Json& j);

}  // namespace pdef
