#pragma once

#include <optional>
#include <string>

namespace pdef {

// Writes via a temporary sibling and rename so readers never see partial
// files. Creates missing parent directories. Throws IoError.
void write_file_atomic(const std::string& path, const std::string& content);

std::optional<std::string> read_file_if_exists(const std::string& path);
// Throws IoError when the file cannot be read.
std::string read_file(const std::string& path);

// Appends one line; throws IoError.
void append_line(const std::string& path, const std::string& line);

}  // namespace pdef
