#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "texfuse/pipeline.hpp"
#include "texfuse/texture_fuse.hpp"

namespace texfuse
{
    // Values of the TOML subset the run configuration uses: strings, booleans,
    // integers, floats and (possibly multi-line) arrays of those, grouped in
    // [tables]. Inline tables, dates and dotted keys are rejected.
    struct TomlValue
    {
        enum class Kind
        {
            boolean,
            integer,
            floating,
            string,
            array,
        };

        Kind kind = Kind::integer;
        bool boolean = false;
        std::int64_t integer = 0;
        double floating = 0.0;
        std::string string;
        std::vector<TomlValue> items;
        int line = 0;
    };

    std::string_view to_string(TomlValue::Kind kind) noexcept;

    // table name ("" for top level) -> key -> value
    using TomlDocument = std::map<std::string, std::map<std::string, TomlValue>>;

    TomlDocument parse_toml(std::string_view text, const std::string& source = "<config>");

    struct RemoteSettings
    {
        int timeout_ms = 600000;
        int retries = 2;
    };

    struct RunConfig
    {
        PipelineConfig pipeline;
        FuseConfig fusion;
        RemoteSettings remote;
    };

    // Applies the document on top of defaults; unknown tables or keys and
    // type errors raise ConfigError naming source:line.
    RunConfig parse_run_config(std::string_view text, const std::string& source = "<config>");
    RunConfig load_run_config(const std::filesystem::path& path);

    nlohmann::json to_json(const RunConfig& config);
    // Inverse of to_json; goes through the same validation as a config file.
    RunConfig run_config_from_json(const nlohmann::json& snapshot, const std::string& source = "<manifest>");
    // Default configuration as an annotated TOML file.
    std::string default_config_toml();
} // namespace texfuse
