#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeshadow::experiment {

// Field-level configuration problems; maps to exit status 2.
struct ValidationError : std::runtime_error {
    explicit ValidationError(std::vector<std::string> fields_)
        : std::runtime_error("configuration invalid: " + join(fields_)),
          fields(std::move(fields_)) {}
    std::vector<std::string> fields;

  private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s;
        for (const auto& f : v) s += (s.empty() ? "" : "; ") + f;
        return s;
    }
};

// Declarative key-value config with [section] headers; '#' and ';' start comments.
struct Config {
    std::string raw;       // original text, echoed into the manifest
    std::string base_dir;  // directory of the config file, for relative paths
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool has(const std::string& section, const std::string& key) const;
    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback = "") const;
};

Config parse_config_text(const std::string& text, const std::string& base_dir = ".");
Config parse_config_file(const std::string& path);

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::string out_dir;  // overrides [run] out
    int jobs = 0;         // 0 = take from config
};

// exit status: 0 all assertions pass, 1 assertion failure, 2 validation
// failure, 3 solver failure
struct RunResult {
    int status = 0;
    std::string run_dir;
    std::vector<std::string> failed;  // names of failed assertions/checks
    std::string message;
};

RunResult run(const Config& config, const RunOverrides& overrides = {});

// FNV-1a over the config text and seed; names the append-only run directory.
std::string content_hash(const std::string& text, std::uint64_t seed);

}  // namespace treeshadow::experiment
