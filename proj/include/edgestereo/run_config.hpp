#pragma once

#include "edgestereo/losses.hpp"
#include "edgestereo/model.hpp"
#include "edgestereo/sgm.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace edgestereo {

inline constexpr std::uint64_t kDefaultSeed = 20180101;

/// Settings of one CLI invocation. Values come from defaults, then an optional config file,
/// then command-line flags.
struct RunConfig {
    std::string command;
    std::uint64_t seed = kDefaultSeed;

    // Paths (empty = not given).
    std::filesystem::path left;
    std::filesystem::path right;
    std::filesystem::path output;
    std::filesystem::path preview;
    std::filesystem::path edges;
    std::filesystem::path gt;
    std::filesystem::path data_dir;
    std::filesystem::path pred_dir;
    std::filesystem::path gt_dir;
    std::filesystem::path checkpoint;
    std::filesystem::path checkpoint_out;
    std::filesystem::path log;

    // Generator.
    int count = 1;
    int height = 64;
    int width = 64;
    int channels = 1;

    sgm::SgmConfig sgm{};
    model::PyramidConfig pyramid{};
    losses::LossWeights weights{};
    model::Schedule schedule{};
    int stage = 1;

    // Evaluation.
    std::vector<std::string> metrics{"epe", "3px", "1px"};
    double edge_threshold = 0.5;
    double edge_tolerance = -1.0;
    int boundary_radius = 4;

    // Gradient check.
    std::string op = "all";
    int points = 100;
};

/// Every key accepted by config files; the CLI flag for key "a.b_c" is "--a-b-c".
const std::vector<std::string>& config_keys();
std::string flag_for_key(const std::string& key);

/// Parses "key = value" lines; '#' starts a comment, blank lines are ignored. Throws
/// ConfigError on malformed lines or duplicate keys.
std::map<std::string, std::string> parse_config_text(const std::string& text);

/// Applies one setting. Throws ConfigError for unknown keys and unparseable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Applies every setting of a parsed config file.
void apply_settings(RunConfig& cfg, const std::map<std::string, std::string>& settings);

/// Cross-field checks (pyramid consistency, SGM penalties, weight list lengths, schedule).
void validate(const RunConfig& cfg);

} // namespace edgestereo
