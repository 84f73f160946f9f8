/**
 * @file report.hpp
 * @brief Deterministic JSON emission (fixed key order, 17 significant digits,
 * trailing newline), result serializers and the run manifest.
 */
#pragma once

#include "kirchhoff/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kirchhoff {

using nlohmann::ordered_json;

/// Two-space indented JSON; doubles as %.17g, non-finite values as null.
std::string dump_json(const ordered_json& j);

/// Writes dump_json(j); throws std::runtime_error naming the path on failure.
void write_json(const std::filesystem::path& path, const ordered_json& j);

ordered_json to_json(const EnergyReport& r);
ordered_json to_json(const CriticalPoint& cp); ///< without the profile (see write_field_csv)
ordered_json to_json(const OracleSolution& o);
ordered_json to_json(const DoublingReport& r);
ordered_json to_json(const LimitReport& r);
ordered_json to_json(const ValidationReport& r);

template <class T>
void write_report(const T& result, const std::filesystem::path& path) {
    write_json(path, to_json(result));
}

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

/// Hash of the effective configuration; the output directory is excluded so
/// that runs into different directories compare equal.
std::string config_hash(const Config& c);

struct Manifest {
    std::string command;
    std::string status = "ok"; ///< ok | solver_failure | failed_checks
    std::string message;
    ordered_json summary = ordered_json::object();
    std::vector<std::filesystem::path> files; ///< relative to the output directory
};

/// manifest.json with tool and library versions, config hash, seed, summary and
/// the SHA-256 of every listed output file.
void write_manifest(const std::filesystem::path& dir, const Config& c, const Manifest& m);

} // namespace kirchhoff
