#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ofilab {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// splitmix64 step; used to derive independent per-module seeds from one root.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t root, std::string_view label);

}  // namespace ofilab
