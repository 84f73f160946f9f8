#include "kirchhoff/report.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#ifndef KIRCHHOFF_VERSION
#define KIRCHHOFF_VERSION "0.0.0"
#endif

namespace kirchhoff {

namespace {

void emit(std::string& out, const ordered_json& j, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
    case ordered_json::value_t::object: {
        if (j.empty()) {
            out += "{}";
            return;
        }
        out += "{\n";
        bool first = true;
        for (const auto& [key, value] : j.items()) {
            if (!first) out += ",\n";
            first = false;
            out += inner + ordered_json(key).dump() + ": ";
            emit(out, value, indent + 1);
        }
        out += "\n" + pad + "}";
        return;
    }
    case ordered_json::value_t::array: {
        if (j.empty()) {
            out += "[]";
            return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i > 0) out += ",\n";
            out += inner;
            emit(out, j[i], indent + 1);
        }
        out += "\n" + pad + "]";
        return;
    }
    case ordered_json::value_t::number_float: {
        const double x = j.get<double>();
        if (!std::isfinite(x)) {
            out += "null";
            return;
        }
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out += buf;
        return;
    }
    default:
        out += j.dump();
        return;
    }
}

std::string hex(const unsigned char* d, unsigned n) {
    std::ostringstream os;
    os << std::hex << std::setfill('0');
    for (unsigned i = 0; i < n; ++i) os << std::setw(2) << static_cast<int>(d[i]);
    return os.str();
}

} // namespace

std::string dump_json(const ordered_json& j) {
    std::string out;
    emit(out, j, 0);
    out += '\n';
    return out;
}

void write_json(const std::filesystem::path& path, const ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << dump_json(j);
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

ordered_json to_json(const EnergyReport& r) {
    ordered_json j;
    j["e_norm_sq"] = r.e_norm_sq;
    j["grad_sq"] = r.grad_sq;
    j["l2_sq"] = r.l2_sq;
    j["energy_I"] = r.energy_I;
    j["energy_pert"] = r.energy_pert;
    j["residual_sup"] = r.residual_sup;
    j["pohozaev_res"] = r.pohozaev_res ? ordered_json(*r.pohozaev_res) : ordered_json("unsupported");
    j["cone_dist_plus"] = r.cone_dist_plus;
    j["cone_dist_minus"] = r.cone_dist_minus;
    j["sign_changes"] = r.sign_changes;
    return j;
}

ordered_json to_json(const CriticalPoint& cp) {
    ordered_json j;
    j["kind"] = to_string(cp.kind);
    j["level"] = cp.level;
    j["converged"] = cp.converged;
    j["iterations"] = cp.iterations;
    j["gap"] = cp.gap;
    j["tol"] = cp.tol;
    j["bound"] = cp.bound;
    j["grid"] = {{"r_max", cp.grid.r_max}, {"n", cp.grid.n}};
    j["perturbation"] = {{"lambda", cp.pert.lambda},
                         {"beta", cp.pert.beta},
                         {"alpha", cp.pert.alpha},
                         {"r_exp", cp.pert.r_exp}};
    j["report"] = to_json(cp.report);
    j["sweep_max"] = cp.sweep_max;
    ordered_json stages = ordered_json::array();
    for (const auto& s : cp.stages) {
        stages.push_back({{"lambda", s.lambda},
                          {"level", s.level},
                          {"iterations", s.iterations},
                          {"gap", s.gap},
                          {"step_distance", s.step_distance},
                          {"solver", s.solver}});
    }
    j["stages"] = stages;
    j["provenance"] = cp.provenance;
    return j;
}

ordered_json to_json(const OracleSolution& o) {
    ordered_json j;
    j["source"] = to_string(o.source);
    j["k_nodes"] = o.k_nodes;
    j["u0"] = o.u0;
    j["a"] = o.model.a;
    j["b"] = o.model.b;
    j["scale"] = o.scale;
    j["energy"] = o.energy;
    j["integrals"] = {{"grad_sq", o.integrals.grad_sq},
                      {"pot_sq", o.integrals.pot_sq},
                      {"F_int", o.integrals.F_int},
                      {"l2_sq", o.integrals.l2_sq}};
    j["shoot_residual"] = o.shoot_residual;
    j["bisections"] = o.bisections;
    j["rho_cut"] = o.rho_cut * o.scale;
    j["step"] = o.step;
    j["grid"] = {{"r_max", o.grid.r_max}, {"n", o.grid.n}};
    j["sign_changes"] = count_sign_changes(o.u, sign_threshold(o.u));
    return j;
}

ordered_json to_json(const DoublingReport& r) {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        ordered_json x;
        x["b"] = row.b;
        x["c_b"] = row.c_b;
        x["m_b"] = row.m_b;
        x["margin"] = row.margin;
        x["verdict"] = row.verdict;
        x["complete"] = row.complete;
        x["c_oracle"] = row.c_oracle;
        x["ground_scale"] = row.ground_scale;
        x["nodal_scale"] = row.nodal_scale;
        x["ground_iterations"] = row.ground ? row.ground->iterations : 0;
        x["nodal_iterations"] = row.nodal ? row.nodal->iterations : 0;
        x["note"] = row.note;
        rows.push_back(x);
    }
    j["rows"] = rows;
    j["c0_oracle"] = r.c0_oracle;
    j["m0_oracle"] = r.m0_oracle;
    j["oracle_margin"] = r.oracle_margin;
    j["c0_extrapolated"] = r.c0_extrapolated;
    j["m0_extrapolated"] = r.m0_extrapolated;
    j["b_star"] = r.b_star ? ordered_json(*r.b_star) : ordered_json("none");
    j["trends_ok"] = r.trends_ok;
    return j;
}

ordered_json to_json(const LimitReport& r) {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"b", row.b},
                        {"level", row.level},
                        {"distance", row.distance},
                        {"energy_gap", row.energy_gap},
                        {"fit_ratio", row.fit_ratio},
                        {"complete", row.complete},
                        {"note", row.note}});
    }
    j["rows"] = rows;
    j["w0_energy"] = r.w0_energy;
    j["slope"] = r.slope;
    j["monotone"] = r.monotone;
    j["fit_ok"] = r.fit_ok;
    return j;
}

ordered_json to_json(const ValidationReport& r) {
    ordered_json checks = ordered_json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name},
                          {"status", to_string(c.status)},
                          {"detail", c.detail},
                          {"witness", c.witness ? ordered_json(*c.witness) : ordered_json("none")}});
    }
    return ordered_json{{"all_pass", r.all_pass()}, {"checks", checks}};
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    return hex(md, len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string config_hash(const Config& c) {
    ordered_json j = to_json(c);
    j.erase("output_dir");
    return sha256_hex(dump_json(j));
}

void write_manifest(const std::filesystem::path& dir, const Config& c, const Manifest& m) {
    ordered_json j;
    j["tool"] = "kirchhoff";
    j["version"] = KIRCHHOFF_VERSION;
    j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                    std::to_string(EIGEN_MINOR_VERSION)},
                      {"boost", BOOST_LIB_VERSION}};
    j["command"] = m.command;
    j["status"] = m.status;
    j["message"] = m.message;
    j["config_sha256"] = config_hash(c);
    j["seed"] = c.seed;
    j["eps_cone"] = c.pipeline.minimax.flow.eps_cone;
    j["summary"] = m.summary;
    ordered_json files = ordered_json::array();
    for (const auto& f : m.files) {
        files.push_back({{"name", f.generic_string()}, {"sha256", sha256_file(dir / f)}});
    }
    j["files"] = files;
    write_json(dir / "manifest.json", j);
}

} // namespace kirchhoff
