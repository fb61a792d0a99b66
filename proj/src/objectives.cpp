#include "pdef/objectives.hpp"

#include "pdef/common.hpp"

#include <algorithm>
#include <cmath>

namespace pdef {

void Weights::validate() const {
    double sum = 0.0;
    for (std::size_t i = 0; i < kObjectiveCount; ++i) {
        if (!std::isfinite(w[i]) || w[i] < 0) {
            throw ConfigError("weight '" + std::string(kObjectiveNames[i]) + "' must be a non-negative number");
        }
        sum += w[i];
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("objective weights sum to " + std::to_string(sum) + ", not 1");
}

double Weights::score(const Norms& n) const {
    double s = 0.0;
    for (std::size_t i = 0; i < kObjectiveCount; ++i) s += w[i] * n[i];
    return s;
}

Json norms_to_json(const Norms& n) {
    Json j = Json::object();
    for (std::size_t i = 0; i < kObjectiveCount; ++i) j[std::string(kObjectiveNames[i])] = n[i];
    return j;
}

Norms norms_from_json(const Json& j) {
    Norms n{};
    for (std::size_t i = 0; i < kObjectiveCount; ++i) {
        const auto it = j.find(std::string(kObjectiveNames[i]));
        if (it != j.end() && it->is_number()) n[i] = std::clamp(it->get<double>(), 0.0, 1.0);
    }
    return n;
}

}  // namespace pdef
