#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kirchhoff/cli.hpp"
#include "kirchhoff/config.hpp"
#include "kirchhoff/errors.hpp"
#include "kirchhoff/report.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

using namespace kirchhoff;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text) {
    try {
        (void)parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("kirchhoff_test_config_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_file(const fs::path& p, const std::string& text) {
    std::ofstream(p) << text;
    return p;
}

int run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    return run_command(args, out, err);
}

constexpr const char* kSmall = R"({"model": {"nonlinearity": {"power": 4}}, "grid": {"r_max": 20, "n": 400}})";

} // namespace

TEST_CASE("a minimal cubic configuration loads with defaults") {
    const Config c = parse_config(R"({"model": {"nonlinearity": {"power": 3}}})");
    CHECK(c.validation.all_pass());
    CHECK(c.pipeline.model.mu == 3.0);
    CHECK(c.pipeline.model.a == 1.0);
    CHECK(c.pipeline.pert0.lambda == 0.01);
    CHECK(c.pipeline.pert0.beta == 0.01);
    CHECK(c.seed == 1);
    CHECK(c.output_dir == "out");
}

TEST_CASE("perturbation exponents outside the admissible ranges are rejected") {
    const std::string alpha = config_error(R"({"model": {"nonlinearity": {"power": 3}}, "perturbation": {"alpha": 0.9}})");
    CHECK(alpha.find("(mu-2)/(3mu+2)") != std::string::npos);
    const std::string r = config_error(R"({"model": {"nonlinearity": {"power": 3}}, "perturbation": {"r_exp": 4.4}})");
    CHECK(r.find("9/2") != std::string::npos);
}

TEST_CASE("unknown keys and malformed JSON are configuration errors") {
    CHECK(config_error(R"({"modle": {}})").find("modle") != std::string::npos);
    CHECK(config_error(R"({"grid": {"nn": 3}})").find("nn") != std::string::npos);
    CHECK(config_error(R"({"model": {"potential": {"kind": "constant", "c9": 1}}})").find("c9") != std::string::npos);
    const std::string e = config_error("{\"grid\": {\n  \"n\": }}");
    CHECK(e.find("line 2") != std::string::npos);
    CHECK(e.find("column") != std::string::npos);
}

TEST_CASE("to_json round trip") {
    const Config c = parse_config(R"({"model": {"a": 2, "b": 0.05, "nonlinearity": {"power": 4}},
                                      "grid": {"r_max": 15, "n": 900}, "seed": 7, "study": {"b_values": [0.1, 0]}})");
    const auto j = to_json(c);
    const Config d = parse_config(j.dump());
    CHECK(to_json(d) == j);
    CHECK(d.pipeline.model.a == 2.0);
    CHECK(d.pipeline.n == 900);
    CHECK(d.seed == 7);
    CHECK(d.study.b_values == std::vector<double>{0.1, 0.0});
}

TEST_CASE("dump_json: full precision, null for non-finite, trailing newline") {
    ordered_json j{{"x", 0.1}, {"nan", std::numeric_limits<double>::quiet_NaN()}, {"n", 3}};
    const std::string s = dump_json(j);
    CHECK(s.back() == '\n');
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(s.find("\"nan\": null") != std::string::npos);
    CHECK(nlohmann::json::parse(s)["x"].get<double>() == 0.1);
}

TEST_CASE("reports are deterministic and complete") {
    const Config c = parse_config(kSmall);
    const auto P = make_problem(c.pipeline.model, build_grid(20.0, 400));
    BumpSpec bump;
    bump.intervals = {{0.0, 4.0}};
    bump.signs = {1};
    const auto cp = mountain_pass_positive(P, c.pipeline.minimax, bump);
    const fs::path dir = scratch("report");
    write_report(cp, dir / "a.json");
    write_report(cp, dir / "b.json");
    CHECK(slurp(dir / "a.json") == slurp(dir / "b.json"));
    CHECK(sha256_file(dir / "a.json") == sha256_file(dir / "b.json"));

    const auto er = to_json(energy_report(cp.u, P, unperturbed(c.pipeline.model)));
    for (const char* key : {"e_norm_sq", "grad_sq", "l2_sq", "energy_I", "energy_pert", "residual_sup", "pohozaev_res",
                            "cone_dist_plus", "cone_dist_minus", "sign_changes"}) {
        CAPTURE(key);
        REQUIRE(er.contains(key));
        CHECK_FALSE(er[key].is_null());
    }
}

TEST_CASE("sha256 known answer") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config hash ignores the output directory only") {
    Config a = parse_config(kSmall);
    Config b = a;
    b.output_dir = "elsewhere";
    CHECK(config_hash(a) == config_hash(b));
    b.seed = 2;
    CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("run_command: exit codes, outputs and manifests") {
    const fs::path dir = scratch("cli");
    const fs::path good = write_file(dir / "good.json", kSmall);
    const fs::path bad = write_file(dir / "bad.json", R"({"modle": {}})");
    const fs::path alpha =
        write_file(dir / "alpha.json", R"({"model": {"nonlinearity": {"power": 3}}, "perturbation": {"alpha": 0.9}})");

    CHECK(run({"validate", good.string(), "--out", (dir / "v").string()}) == 0);
    CHECK(fs::exists(dir / "v" / "validation.json"));
    CHECK(fs::exists(dir / "v" / "manifest.json"));
    CHECK(run({"validate", bad.string(), "--out", (dir / "x").string()}) == 2);
    CHECK(run({"ground", alpha.string(), "--out", (dir / "x").string()}) == 2);
    CHECK(run({"frobnicate", good.string()}) == 2);
    CHECK(run({"oracle"}) == 2);
    CHECK(run({"--help"}) == 0);

    CHECK(run({"oracle", good.string(), "--nodes", "1", "--out", (dir / "o1").string()}) == 0);
    CHECK(run({"oracle", good.string(), "--nodes", "1", "--out", (dir / "o2").string()}) == 0);
    for (const char* f : {"oracle.json", "oracle_profile.csv", "manifest.json"}) {
        CAPTURE(f);
        CHECK(slurp(dir / "o1" / f) == slurp(dir / "o2" / f));
    }
    const auto man = nlohmann::json::parse(slurp(dir / "o1" / "manifest.json"));
    CHECK(man["status"] == "ok");
    CHECK(man["command"] == "oracle");
    CHECK(man["summary"]["k_nodes"] == 1);
    CHECK(man["files"].size() == 2);

    // environment variable beats the config, --out beats both
    ::setenv(kOutputDirEnv, (dir / "env").string().c_str(), 1);
    CHECK(run({"validate", good.string()}) == 0);
    CHECK(fs::exists(dir / "env" / "manifest.json"));
    CHECK(run({"validate", good.string(), "--out", (dir / "flag").string()}) == 0);
    CHECK(fs::exists(dir / "flag" / "manifest.json"));
    ::unsetenv(kOutputDirEnv);
}
