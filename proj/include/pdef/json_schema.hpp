#pragma once

#include "pdef/telemetry.hpp"

#include <string>
#include <vector>

namespace pdef {

// Validates `value` against a JSON Schema subset: type (including type
// lists), enum, const, properties, required, additionalProperties (bool or
// schema), items, minItems, maxItems, minimum, maximum, minLength. Returns
// one message per violation, each prefixed with its JSON path.
std::vector<std::string> validate_schema(const Json& schema, const Json& value, const std::string& path = "$");

}  // namespace pdef
