#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace srcv::io {

// Throw IoError naming the path on failure.
std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace srcv::io
