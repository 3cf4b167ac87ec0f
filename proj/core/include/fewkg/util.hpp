#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace fewkg {

// Shortest round-trip decimal form of a double ("0.1" not "0.10000000000000001").
// All numeric text artifacts go through this so reruns are byte-identical.
std::string fmt_double(double v);

// FNV-1a 64-bit, used for config hashes embedded in artifacts.
uint64_t fnv1a64(std::string_view s);
std::string hex64(uint64_t v);

// Write-then-rename so readers never observe a half-written file.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace fewkg
