/**
 * @file acceptance.cpp
 * @brief Runs the suite twice on configs/suite.json and prints one line per criterion.
 *
 * Criteria 1-9 come from suite.json of the first run; criterion 10 compares the
 * two manifests byte for byte. Exit status 0 iff every line passes.
 */
#include "kirchhoff/cli.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

int main(int argc, char** argv) {
    const fs::path config = argc > 1 ? fs::path(argv[1]) : fs::path(KIRCHHOFF_SUITE_CONFIG);
    const fs::path root = fs::temp_directory_path() / "kirchhoff_acceptance";
    fs::remove_all(root);

    std::ostringstream sink;
    for (const char* run : {"run1", "run2"}) {
        const int code = kirchhoff::run_command({"suite", config.string(), "--out", (root / run).string()}, sink, sink);
        if (code == 2) {
            std::cerr << sink.str();
            return 2;
        }
    }

    bool all = true;
    const auto suite = nlohmann::json::parse(slurp(root / "run1" / "suite.json"));
    for (int id = 1; id <= 9; ++id) {
        bool pass = false;
        std::string name = "missing", detail;
        for (const auto& c : suite["criteria"]) {
            if (c["id"] != id) continue;
            pass = c["pass"].get<bool>();
            name = c["name"].get<std::string>();
            detail = c["detail"].get<std::string>();
        }
        all = all && pass;
        std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << name << "  (" << detail << ")\n";
    }

    const std::string m1 = slurp(root / "run1" / "manifest.json");
    const std::string m2 = slurp(root / "run2" / "manifest.json");
    const bool same = !m1.empty() && m1 == m2;
    all = all && same;
    std::cout << "criterion 10: " << (same ? "PASS" : "FAIL") << "  reproducible manifest  ("
              << (same ? "byte-identical across two runs" : "manifests differ") << ")\n";
    return all ? 0 : 1;
}
