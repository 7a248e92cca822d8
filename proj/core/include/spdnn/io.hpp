#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace spdnn {

/// Whole file as bytes. Throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes to a temporary sibling and renames it over `path`, so a failed
/// write never leaves a partial file behind. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

} // namespace spdnn
