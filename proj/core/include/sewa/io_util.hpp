#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace sewa {

// Writes to a sibling temp file and renames over the target.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

// 17 significant digits ("%.17g"); round-trips every double.
std::string format_double(double v);

}  // namespace sewa
