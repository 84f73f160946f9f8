/**
 * @file suite.hpp
 * @brief Invariant and property battery behind the `suite` subcommand and the
 * acceptance binary.
 *
 * Models of the individual checks are fixed (a = 1, V = 1, power f); the
 * configuration supplies the flow, simplex, schedule and grid settings, the
 * sample counts and the seed.
 */
#pragma once

#include "kirchhoff/config.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace kirchhoff {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    nlohmann::ordered_json data = nlohmann::ordered_json::object();
};

struct SuiteResult {
    std::vector<CriterionResult> criteria;
    bool all_pass() const;
};

/// Criteria 1-9; a solver failure inside a check fails that check only.
/// `progress` receives one line per finished check.
SuiteResult run_suite(const Config& c, const std::function<void(const CriterionResult&)>& progress = {});

nlohmann::ordered_json to_json(const SuiteResult& r);

} // namespace kirchhoff
