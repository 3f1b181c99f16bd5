#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace texfuse
{
    std::string sha256_hex(std::string_view bytes);
    std::string sha256_file(const std::filesystem::path& path);

    // Copy of a JSON value without timing fields ("elapsed_ms", "timings",
    // "started_at"), which legitimately differ between identical runs.
    nlohmann::json strip_timings(const nlohmann::json& value);

    // Digest over every file below `dir` (relative path + content). JSON and
    // JSON-lines files are hashed after strip_timings.
    std::string hash_directory(const std::filesystem::path& dir);
} // namespace texfuse
