#include "kirchhoff/suite.hpp"

#include "kirchhoff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kirchhoff {

namespace {

using nlohmann::ordered_json;

std::string num(double x) {
    std::ostringstream os;
    os.precision(4);
    os << x;
    return os.str();
}

ModelParams power_model(double p, double b) {
    ModelParams m;
    m.b = b;
    m.nonlinearity = Nonlinearity::power(p);
    m.mu = p;
    return m;
}

// Configured pipeline settings with the model of a check. Perturbation
// exponents that are out of range for the new model fall back to midpoints.
PipelineConfig for_model(const Config& c, const ModelParams& m) {
    PipelineConfig pc = c.pipeline;
    pc.model = m;
    const PerturbationParams mid = unperturbed(m);
    const double lam = pc.pert0.active() ? pc.pert0.lambda : 0.01;
    try {
        pc.pert0 = make_perturbation(m, lam, lam, pc.pert0.alpha, pc.pert0.r_exp);
    } catch (const ConfigError&) {
        pc.pert0 = make_perturbation(m, lam, lam, mid.alpha, mid.r_exp);
    }
    return pc;
}

double sup_abs(const Field& u) {
    double s = 0.0;
    for (double x : u.values) s = std::max(s, std::abs(x));
    return s;
}

struct PohozaevEntry {
    std::string name;
    double level = 0.0;
    double residual = 0.0;
};

void record(std::vector<PohozaevEntry>& out, const std::string& name, const CriticalPoint& cp) {
    if (cp.converged && cp.report.pohozaev_res) out.push_back({name, cp.level, *cp.report.pohozaev_res});
}

CriterionResult dilation_equivalence(const Config& c, std::vector<PohozaevEntry>& poh) {
    CriterionResult r{1, "dilation-oracle equivalence", true, "", ordered_json::object()};
    PipelineConfig pc = for_model(c, power_model(4.0, 0.0));
    pc.r_max = 30.0;
    pc.n = 3000;
    const OracleSolution w = shoot_schrodinger(pc.model, 0, build_grid(pc.r_max, pc.n), pc.shoot);
    ordered_json rows = ordered_json::array();
    double worst_rel = 0.0, worst_ratio = 1e300;
    for (double b : {0.0, 0.01, 0.05, 0.1}) {
        const double s = pc.auto_scale ? dilation_factor(pc.model.a, pc.model.a, b, w.integrals.grad_sq) : 1.0;
        const RowLayout row = row_layout(pc, b, s);
        const CriticalPoint cp = ground_pipeline(row, pc);
        record(poh, "ground b=" + num(b), cp);
        const OracleSolution ub = dilation_oracle(w, row.problem.model, row.problem.grid);
        const double rel = std::abs(cp.level - ub.energy) / std::abs(ub.energy);

        const PerturbationParams none = unperturbed(row.problem.model);
        const Problem fine = make_problem(row.problem.model, build_grid(row.problem.grid.r_max, 2 * pc.n));
        const OracleSolution ub2 = dilation_oracle(w, fine.model, fine.grid);
        const double res1 = sup_abs(strong_residual(ub.u, row.problem, none));
        const double res2 = sup_abs(strong_residual(ub2.u, fine, none));
        const double ratio = res1 / res2;

        worst_rel = std::max(worst_rel, rel);
        worst_ratio = std::min(worst_ratio, ratio);
        const bool ok = cp.converged && rel <= 1e-3 && ratio >= 3.5;
        r.pass = r.pass && ok;
        rows.push_back({{"b", b},
                        {"scale", s},
                        {"solver_level", cp.level},
                        {"oracle_energy", ub.energy},
                        {"relative_error", rel},
                        {"residual_h", res1},
                        {"residual_h2", res2},
                        {"residual_ratio", ratio}});
    }
    r.data["rows"] = rows;
    r.detail = "max rel err " + num(worst_rel) + " (<= 1e-3), min residual ratio " + num(worst_ratio) + " (>= 3.5)";
    return r;
}

CriterionResult descent_inequality(const Config& c) {
    CriterionResult r{3, "descent inequality", true, "", ordered_json::object()};
    const ModelParams m = power_model(3.0, 0.05);
    const Problem P = make_problem(m, build_grid(20.0, 800));
    const PerturbationParams mid = unperturbed(m);
    const PerturbationParams pert = make_perturbation(m, 0.2, 0.2, mid.alpha, mid.r_exp);
    FlowConfig fc = c.pipeline.minimax.flow;
    fc.max_iter = 50;
    std::mt19937_64 rng(c.seed);
    double worst = 1e300;
    std::size_t fields_ok = 0, steps = 0, decreasing = 0;
    for (std::size_t k = 0; k < c.study.descent_samples; ++k) {
        const Field u = random_smooth_field(P.grid, rng);
        const Field d = difference(u, solve_T(u, P, pert));
        const double dn2 = e_norm_sq(d, P);
        const double delta = 1e-4 / std::max(1.0, std::sqrt(dn2));
        const double fd =
            (energy_perturbed(axpy(delta, d, u), P, pert) - energy_perturbed(axpy(-delta, d, u), P, pert)) /
            (2.0 * delta);
        worst = std::min(worst, fd / dn2);
        if (fd >= 0.999 * dn2) ++fields_ok;

        const FlowResult fr = descend(u, fc, P, pert);
        for (std::size_t i = 1; i < fr.energy_trace.size(); ++i) {
            ++steps;
            if (fr.energy_trace[i] < fr.energy_trace[i - 1]) ++decreasing;
        }
    }
    r.pass = fields_ok == c.study.descent_samples && decreasing == steps && c.study.descent_samples > 0;
    r.data = {{"fields", c.study.descent_samples},
              {"fields_ok", fields_ok},
              {"min_ratio", worst},
              {"accepted_steps", steps},
              {"decreasing_steps", decreasing}};
    r.detail = std::to_string(fields_ok) + "/" + std::to_string(c.study.descent_samples) +
               " fields with ratio >= 0.999 (min " + num(worst) + "), " + std::to_string(decreasing) + "/" +
               std::to_string(steps) + " accepted steps decrease";
    return r;
}

CriterionResult cone_invariance(const Config& c) {
    CriterionResult r{4, "cone invariance", false, "", ordered_json::object()};
    const ModelParams m = power_model(3.0, 0.05);
    const Problem P = make_problem(m, build_grid(30.0, 600));
    const PerturbationParams mid = unperturbed(m);
    const PerturbationParams pert = make_perturbation(m, 0.1, 0.1, mid.alpha, mid.r_exp);
    const auto rep = check_cone_invariance(c.study.cone_samples, c.study.cone_eps, P, pert, c.seed);
    ordered_json rows = ordered_json::array();
    std::size_t at_eps = 0, samples = 0;
    for (const auto& row : rep.rows) {
        rows.push_back({{"eps", row.eps},
                        {"invariant", row.invariant},
                        {"samples", row.samples},
                        {"worst_ratio", row.worst_ratio}});
        if (row.eps == rep.calibrated_eps) {
            at_eps = row.invariant;
            samples = row.samples;
        }
    }
    r.pass = rep.calibrated_eps > 0.0 && samples == c.study.cone_samples && at_eps == samples;
    r.data = {{"calibrated_eps", rep.calibrated_eps}, {"rows", rows}};
    r.detail = std::to_string(at_eps) + "/" + std::to_string(samples) + " at calibrated eps " +
               num(rep.calibrated_eps);
    return r;
}

CriterionResult decomposition(const Config&) {
    CriterionResult r{5, "decomposition identity", true, "", ordered_json::object()};
    const ModelParams m = power_model(3.0, 1.0);
    // zero crossing at a fixed fraction of the coarsest cell
    const double rho0 = (100.0 + 1.0 / 3.0) * 0.01;
    ordered_json rows = ordered_json::array();
    double prev = 0.0, worst = 1e300;
    for (std::size_t n : {1200u, 2400u, 4800u, 9600u}) {
        const Problem P = make_problem(m, build_grid(12.0, n));
        Field u = sample(P.grid, [&](double rho) { return (rho - rho0) * std::exp(-rho * rho); });
        clamp_boundary(u);
        const double gap = std::abs(decomposition_gap(u, P));
        double ratio = 0.0;
        if (prev > 0.0) {
            ratio = prev / gap;
            worst = std::min(worst, ratio);
        }
        rows.push_back({{"h", P.grid.h}, {"gap", gap}, {"ratio", ratio}});
        prev = gap;
    }
    r.pass = worst >= 1.9;
    r.data["rows"] = rows;
    r.detail = "min gap ratio per halving " + num(worst) + " (>= 1.9)";
    return r;
}

CriterionResult nodal_pipeline_check(const Config& c, std::vector<PohozaevEntry>& poh) {
    CriterionResult r{6, "nodal existence pipeline", false, "", ordered_json::object()};
    const PipelineConfig pc = for_model(c, power_model(3.0, 0.05));
    const ScaleReference ref = scale_reference(pc);
    const double s = row_scale(pc, ref, 0.05, SolutionKind::nodal);
    const RowLayout row = row_layout(pc, 0.05, s);
    const CriticalPoint cp = nodal_pipeline(row, pc);
    record(poh, "nodal p=3 b=0.05", cp);
    const double eps = row.minimax.flow.eps_cone;
    const double tol = row.minimax.flow.tol;
    const double dmin = std::min(cp.report.cone_dist_plus, cp.report.cone_dist_minus);
    const bool zero = cp.pert.lambda == 0.0 && cp.pert.beta == 0.0;
    const bool res_ok = cp.report.residual_sup <= 10.0 * tol;
    const bool sign_ok = cp.report.sign_changes >= 1;
    const bool cone_ok = dmin >= eps;
    const bool level_ok = cp.level >= eps * eps / 4.0 && cp.level <= cp.bound;
    r.pass = cp.converged && zero && res_ok && sign_ok && cone_ok && level_ok;
    r.data = {{"scale", s},
              {"level", cp.level},
              {"bound", cp.bound},
              {"residual_sup", cp.report.residual_sup},
              {"tol", tol},
              {"sign_changes", cp.report.sign_changes},
              {"min_cone_distance", dmin},
              {"eps", eps},
              {"stages", cp.stages.size()}};
    r.detail = "lambda=beta=" + num(cp.pert.lambda) + ", residual " + num(cp.report.residual_sup) + " (<= " +
               num(10.0 * tol) + "), sign changes " + std::to_string(cp.report.sign_changes) + ", cone dist " +
               num(dmin) + ", level " + num(cp.level) + " in [" + num(eps * eps / 4.0) + ", " + num(cp.bound) + "]";
    return r;
}

CriterionResult energy_doubling(const Config& c, std::vector<PohozaevEntry>& poh) {
    CriterionResult r{7, "energy doubling", false, "", ordered_json::object()};
    const PipelineConfig pc = for_model(c, power_model(4.0, 0.0));
    const DoublingReport rep = doubling_sweep(pc, {0.2, 0.1, 0.05, 0.02, 0.01, 0.0});
    bool below_ok = rep.b_star.has_value();
    for (const auto& row : rep.rows) {
        if (row.ground) record(poh, "doubling ground b=" + num(row.b), *row.ground);
        if (row.nodal) record(poh, "doubling nodal b=" + num(row.b), *row.nodal);
        if (rep.b_star && row.b <= *rep.b_star && !(row.complete && row.margin > 0.0)) below_ok = false;
    }
    r.pass = below_ok && rep.oracle_margin > 0.0 && rep.trends_ok;
    ordered_json rows = ordered_json::array();
    for (const auto& row : rep.rows) {
        rows.push_back({{"b", row.b}, {"c_b", row.c_b}, {"m_b", row.m_b}, {"margin", row.margin}, {"verdict", row.verdict}});
    }
    r.data = {{"rows", rows},
              {"c0_oracle", rep.c0_oracle},
              {"m0_oracle", rep.m0_oracle},
              {"b_star", rep.b_star ? ordered_json(*rep.b_star) : ordered_json("none")},
              {"trends_ok", rep.trends_ok}};
    r.detail = "b*=" + (rep.b_star ? num(*rep.b_star) : std::string("none")) + ", m0-2c0=" + num(rep.m0_oracle) +
               "-2*" + num(rep.c0_oracle) + "=" + num(rep.oracle_margin);
    return r;
}

CriterionResult limit(const Config& c, std::vector<PohozaevEntry>& poh) {
    CriterionResult r{8, "limit b -> 0", false, "", ordered_json::object()};
    ModelParams m;
    m.nonlinearity = Nonlinearity::sum({{50.0, 4.0}});
    m.mu = 4.0;
    const PipelineConfig pc = for_model(c, m);
    const LimitReport rep = limit_study(pc, {0.1, 0.05, 0.02, 0.01});
    ordered_json rows = ordered_json::array();
    for (const auto& row : rep.rows) {
        if (row.complete && row.pohozaev_res) poh.push_back({"limit nodal b=" + num(row.b), row.level, *row.pohozaev_res});
        rows.push_back({{"b", row.b}, {"distance", row.distance}, {"energy_gap", row.energy_gap}, {"fit_ratio", row.fit_ratio}});
    }
    r.pass = rep.monotone && rep.fit_ok;
    r.data = {{"rows", rows}, {"w0_energy", rep.w0_energy}, {"slope", rep.slope}};
    double lo = 1e300, hi = 0.0;
    for (const auto& row : rep.rows) {
        lo = std::min(lo, row.fit_ratio);
        hi = std::max(hi, row.fit_ratio);
    }
    r.detail = std::string("distance ") + (rep.monotone ? "monotone" : "not monotone") + ", gap/fit in [" + num(lo) +
               ", " + num(hi) + "] (within [0.2, 5])";
    return r;
}

CriterionResult scaling_laws(const Config& c) {
    CriterionResult r{9, "phi0 scaling laws", true, "", ordered_json::object()};
    const RadialGrid grid = build_grid(30.0, 3000);
    BumpSpec spec;
    spec.intervals = {{0.0, 8.0}, {8.0, 24.0}};
    spec.signs = {1, -1};
    const SimplexState s1 = build_phi0(spec, 1.0, 4, grid);
    const SimplexState s2 = build_phi0(spec, 2.0, 4, grid);
    double worst = 0.0;
    for (const auto& [i, j] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 1}, {0, 3}, {4, 0}}) {
        const Field& u1 = s1.nodes[s1.find(i, j)];
        const Field& u2 = s2.nodes[s2.find(i, j)];
        worst = std::max(worst, std::abs(grad_norm_sq(u2, grid) / grad_norm_sq(u1, grid) / 8.0 - 1.0));
        for (double q : {3.0, 4.0, 5.0}) {
            const double ratio = lp_norm_pow(u2, grid, q) / lp_norm_pow(u1, grid, q);
            worst = std::max(worst, std::abs(ratio / std::pow(2.0, 2.0 * q - 3.0) - 1.0));
        }
    }
    (void)c;
    r.pass = worst <= 1e-3;
    r.data = {{"max_relative_deviation", worst}};
    r.detail = "max relative deviation " + num(worst) + " (<= 1e-3)";
    return r;
}

CriterionResult pohozaev(const std::vector<PohozaevEntry>& entries) {
    CriterionResult r{2, "Pohozaev residual", !entries.empty(), "", ordered_json::object()};
    ordered_json rows = ordered_json::array();
    double worst = 0.0;
    for (const auto& e : entries) {
        const double rel = std::abs(e.residual) / (1.0 + std::abs(e.level));
        worst = std::max(worst, rel);
        if (rel > 1e-3) r.pass = false;
        rows.push_back({{"name", e.name}, {"level", e.level}, {"residual", e.residual}, {"relative", rel}});
    }
    r.data["points"] = rows;
    r.detail = std::to_string(entries.size()) + " converged critical points, max |P|/(1+|I|) " + num(worst) +
               " (<= 1e-3)";
    return r;
}

template <class Fn>
CriterionResult guarded(int id, const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        return CriterionResult{id, name, false, std::string("error: ") + e.what(), ordered_json::object()};
    }
}

} // namespace

bool SuiteResult::all_pass() const {
    return !criteria.empty() &&
           std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& r) { return r.pass; });
}

SuiteResult run_suite(const Config& c, const std::function<void(const CriterionResult&)>& progress) {
    SuiteResult out;
    std::vector<PohozaevEntry> poh;
    auto run = [&](CriterionResult r) {
        if (progress) progress(r);
        out.criteria.push_back(std::move(r));
    };
    run(guarded(1, "dilation-oracle equivalence", [&] { return dilation_equivalence(c, poh); }));
    run(guarded(3, "descent inequality", [&] { return descent_inequality(c); }));
    run(guarded(4, "cone invariance", [&] { return cone_invariance(c); }));
    run(guarded(5, "decomposition identity", [&] { return decomposition(c); }));
    run(guarded(6, "nodal existence pipeline", [&] { return nodal_pipeline_check(c, poh); }));
    run(guarded(7, "energy doubling", [&] { return energy_doubling(c, poh); }));
    run(guarded(8, "limit b -> 0", [&] { return limit(c, poh); }));
    run(guarded(9, "phi0 scaling laws", [&] { return scaling_laws(c); }));
    run(pohozaev(poh));
    std::stable_sort(out.criteria.begin(), out.criteria.end(),
                     [](const CriterionResult& a, const CriterionResult& b) { return a.id < b.id; });
    return out;
}

ordered_json to_json(const SuiteResult& r) {
    ordered_json crit = ordered_json::array();
    for (const auto& c : r.criteria) {
        crit.push_back({{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"detail", c.detail}, {"data", c.data}});
    }
    return ordered_json{{"all_pass", r.all_pass()}, {"criteria", crit}};
}

} // namespace kirchhoff
