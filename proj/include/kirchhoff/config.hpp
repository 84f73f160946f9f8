/**
 * @file config.hpp
 * @brief JSON run configuration with strict key checking.
 *
 * Top-level blocks: model, perturbation, grid, flow, simplex, study, plus
 * `seed` and `output_dir`. Every block is optional and falls back to the
 * defaults of the corresponding struct; unknown keys are rejected.
 */
#pragma once

#include "kirchhoff/study.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kirchhoff {

struct StudyConfig {
    std::vector<double> b_values{0.2, 0.1, 0.05, 0.02, 0.01, 0.0};
    std::vector<double> limit_b_values{0.1, 0.05, 0.02, 0.01};
    std::size_t multi_bump_n = 3;
    MultiBumpOptions multi_bump;
    std::vector<double> cone_eps{1e-3, 1e-2, 1e-1, 1.0};
    std::size_t cone_samples = 200;
    std::size_t descent_samples = 100;
};

struct Config {
    PipelineConfig pipeline; ///< model, grid, flow, simplex, perturbation, schedule, shooting
    StudyConfig study;
    std::uint64_t seed = 1;
    std::string output_dir = "out";
    ValidationReport validation; ///< validate_model on the configured model and perturbation
};

/// Parses and validates; `source` names the document in error messages.
/// Throws ConfigError (parse errors carry line and column).
Config parse_config(const std::string& text, const std::string& source = "config");
Config load_config(const std::filesystem::path& path);

/// Effective configuration after defaults, in a fixed key order.
nlohmann::ordered_json to_json(const Config& c);

} // namespace kirchhoff
