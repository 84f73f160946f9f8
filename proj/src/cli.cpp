#include "kirchhoff/cli.hpp"

#include "kirchhoff/errors.hpp"
#include "kirchhoff/report.hpp"
#include "kirchhoff/suite.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iomanip>

namespace kirchhoff {

namespace {

namespace fs = std::filesystem;

struct Context {
    Config cfg;
    fs::path dir;
    std::ostream& out;
    std::ostream& err;
};

double row_scale_for(const PipelineConfig& pc, SolutionKind kind) {
    if (!pc.auto_scale || pc.model.b == 0.0) return 1.0;
    return dilation_factor(pc.model.a, pc.model.a, pc.model.b, reference_grad_sq(pc, kind));
}

ordered_json level_summary(const CriticalPoint& cp) {
    return ordered_json{{"kind", to_string(cp.kind)},
                        {"level", cp.level},
                        {"iterations", cp.iterations},
                        {"converged", cp.converged},
                        {"R", cp.provenance.empty() ? std::string() : cp.provenance.back()}};
}

int write_solution(Context& ctx, const std::string& name, const CriticalPoint& cp, Manifest& man) {
    write_report(cp, ctx.dir / (name + ".json"));
    write_field_csv(ctx.dir / (name + "_profile.csv"), cp.u, cp.grid);
    man.files = {name + ".json", name + "_profile.csv"};
    man.summary = level_summary(cp);
    man.summary["provenance"] = cp.provenance;
    if (!cp.converged) {
        man.status = "solver_failure";
        man.message = "did not reach tolerance; partial result written";
    }
    return cp.converged ? 0 : 1;
}

int cmd_validate(Context& ctx, Manifest& man) {
    const auto& rep = ctx.cfg.validation;
    ctx.out << std::left << std::setw(28) << "hypothesis" << std::setw(13) << "status" << "detail\n";
    for (const auto& c : rep.checks) {
        ctx.out << std::setw(28) << c.name << std::setw(13) << to_string(c.status) << c.detail << '\n';
    }
    write_report(rep, ctx.dir / "validation.json");
    write_json(ctx.dir / "config.json", to_json(ctx.cfg));
    man.files = {"validation.json", "config.json"};
    man.summary = {{"all_pass", rep.all_pass()}};
    return 0;
}

int cmd_ground(Context& ctx, Manifest& man) {
    const PipelineConfig& pc = ctx.cfg.pipeline;
    const RowLayout row = row_layout(pc, pc.model.b, row_scale_for(pc, SolutionKind::ground));
    return write_solution(ctx, "ground", ground_pipeline(row, pc), man);
}

int cmd_nodal(Context& ctx, Manifest& man, bool to_zero) {
    const PipelineConfig& pc = ctx.cfg.pipeline;
    if (to_zero && !pc.pert0.active()) {
        throw ConfigError("perturbation.lambda", "continuation needs lambda = beta > 0");
    }
    const RowLayout row = row_layout(pc, pc.model.b, row_scale_for(pc, SolutionKind::nodal));
    const CriticalPoint cp = nodal_pipeline(row, pc, to_zero);
    return write_solution(ctx, to_zero ? "continuation" : "nodal", cp, man);
}

int cmd_doubling(Context& ctx, Manifest& man) {
    const DoublingReport rep = doubling_sweep(ctx.cfg.pipeline, ctx.cfg.study.b_values);
    write_doubling_csv(ctx.dir / "doubling.csv", rep);
    write_report(rep, ctx.dir / "doubling.json");
    man.files = {"doubling.csv", "doubling.json"};
    man.summary = {{"b_star", rep.b_star ? ordered_json(*rep.b_star) : ordered_json("none")},
                   {"oracle_margin", rep.oracle_margin}};
    ordered_json rows = ordered_json::array();
    bool complete = true;
    for (const auto& r : rep.rows) {
        complete = complete && r.complete;
        rows.push_back({{"b", r.b}, {"c_b", r.c_b}, {"m_b", r.m_b}, {"verdict", r.verdict}});
    }
    man.summary["rows"] = rows;
    if (!complete) {
        man.status = "solver_failure";
        man.message = "some rows are incomplete";
    }
    return complete ? 0 : 1;
}

int cmd_limit(Context& ctx, Manifest& man) {
    const LimitReport rep = limit_study(ctx.cfg.pipeline, ctx.cfg.study.limit_b_values);
    write_limit_csv(ctx.dir / "limit.csv", rep);
    write_report(rep, ctx.dir / "limit.json");
    man.files = {"limit.csv", "limit.json"};
    man.summary = {{"monotone", rep.monotone}, {"fit_ok", rep.fit_ok}, {"w0_energy", rep.w0_energy}};
    const bool complete =
        std::all_of(rep.rows.begin(), rep.rows.end(), [](const LimitRow& r) { return r.complete; });
    if (!complete) {
        man.status = "solver_failure";
        man.message = "some rows are incomplete";
    }
    return complete ? 0 : 1;
}

int cmd_oracle(Context& ctx, Manifest& man, std::size_t nodes) {
    const PipelineConfig& pc = ctx.cfg.pipeline;
    ModelParams m0 = pc.model;
    m0.b = 0.0;
    const RadialGrid base = build_grid(pc.r_max, pc.n);
    OracleSolution o = shoot_schrodinger(m0, nodes, base, pc.shoot);
    if (pc.model.b != 0.0) {
        const double s = dilation_factor(m0.a, pc.model.a, pc.model.b, o.integrals.grad_sq);
        o = dilation_oracle(o, pc.model, build_grid(pc.r_max * (pc.auto_scale ? s : 1.0), pc.n));
    }
    write_report(o, ctx.dir / "oracle.json");
    write_field_csv(ctx.dir / "oracle_profile.csv", o.u, o.grid);
    man.files = {"oracle.json", "oracle_profile.csv"};
    man.summary = {{"source", to_string(o.source)}, {"k_nodes", o.k_nodes}, {"u0", o.u0}, {"energy", o.energy}};
    return 0;
}

int cmd_suite(Context& ctx, Manifest& man) {
    const SuiteResult res = run_suite(ctx.cfg, [&](const CriterionResult& r) {
        ctx.err << "criterion " << r.id << " [" << (r.pass ? "pass" : "FAIL") << "] " << r.name << ": " << r.detail
                << '\n';
    });
    write_json(ctx.dir / "suite.json", to_json(res));
    man.files = {"suite.json"};
    ordered_json crit = ordered_json::array();
    for (const auto& r : res.criteria) crit.push_back({{"id", r.id}, {"pass", r.pass}});
    man.summary = {{"all_pass", res.all_pass()}, {"criteria", crit}};
    if (!res.all_pass()) {
        man.status = "failed_checks";
        man.message = "at least one criterion failed";
    }
    return res.all_pass() ? 0 : 1;
}

} // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Radial solver for the nonlocal Kirchhoff equation", "kirchhoff"};
    app.require_subcommand(1);
    std::string cfg_path;
    std::string out_dir;
    std::size_t nodes = 0;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"validate", "check the configuration and print the hypothesis table"},
        {"ground", "positive ground state by the mountain pass on a segment"},
        {"nodal", "least-energy nodal candidate at the configured perturbation"},
        {"continuation", "nodal solution continued to lambda = beta = 0"},
        {"doubling", "energy-doubling sweep over study.b_values"},
        {"limit", "b -> 0 limit study over study.limit_b_values"},
        {"oracle", "shooting (b = 0) or dilation (b > 0) oracle"},
        {"suite", "invariant and property battery"}};
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("config", cfg_path, "JSON configuration")->required();
        sub->add_option("--out", out_dir, "output directory");
        if (name == "oracle") sub->add_option("--nodes", nodes, "number of sign changes")->default_val(0);
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();

    Config cfg;
    try {
        cfg = load_config(cfg_path);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    }
    fs::path dir = cfg.output_dir;
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) dir = env;
    if (!out_dir.empty()) dir = out_dir;

    Context ctx{cfg, dir, out, err};
    Manifest man;
    man.command = cmd;
    int code = 0;
    try {
        fs::create_directories(dir);
        if (cmd == "validate") code = cmd_validate(ctx, man);
        else if (cmd == "ground") code = cmd_ground(ctx, man);
        else if (cmd == "nodal") code = cmd_nodal(ctx, man, false);
        else if (cmd == "continuation") code = cmd_nodal(ctx, man, true);
        else if (cmd == "doubling") code = cmd_doubling(ctx, man);
        else if (cmd == "limit") code = cmd_limit(ctx, man);
        else if (cmd == "oracle") code = cmd_oracle(ctx, man, nodes);
        else code = cmd_suite(ctx, man);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const UnsupportedError& e) {
        err << "unsupported: " << e.what() << '\n';
        return 2;
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        man.status = "solver_failure";
        man.message = e.kind();
        man.files.clear();
        code = 1;
    } catch (const NumericalError& e) {
        err << "solver failure: " << e.what() << '\n';
        man.status = "solver_failure";
        man.message = "numerical_error";
        man.files.clear();
        code = 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    try {
        write_manifest(dir, cfg, man);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    err << cmd << ": " << man.status << " (" << (dir / "manifest.json").string() << ")\n";
    return code;
}

} // namespace kirchhoff
