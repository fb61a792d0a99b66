#pragma once

#include <map>
#include <string>
#include <string_view>

namespace pdef {

// Prompt templates and response schemas compiled in from assets/.
const std::map<std::string, std::string_view>& embedded_assets();

// Throws ConfigError for an unknown asset name such as "prompts/decision.txt".
std::string_view asset(const std::string& name);

}  // namespace pdef
