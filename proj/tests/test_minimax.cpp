#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kirchhoff/errors.hpp"
#include "kirchhoff/minimax.hpp"

#include <cmath>

using namespace kirchhoff;

namespace {

ModelParams power_model(double p, double b) {
    ModelParams m;
    m.b = b;
    m.nonlinearity = Nonlinearity::power(p);
    m.mu = p;
    return m;
}

BumpSpec two_bumps(double scale = 1.0) {
    BumpSpec s;
    s.intervals = {{0.0, 2.0 * scale}, {2.0 * scale, 6.0 * scale}};
    s.signs = {1, -1};
    return s;
}

// Frozen shooting references (a = 1, V = 1), see test_study for the oracle itself.
constexpr double kGroundP4 = 18.8973;
constexpr double kNodalP4 = 118.98;

} // namespace

TEST_CASE("BumpSpec validation and profile") {
    BumpSpec s = two_bumps();
    CHECK_NOTHROW(s.validate(10.0));
    CHECK_THROWS_AS(s.validate(5.0), ConfigError);
    s.intervals[1] = {1.5, 4.0};
    CHECK_THROWS_AS(s.validate(10.0), ConfigError);
    s = two_bumps();
    s.signs = {1};
    CHECK_THROWS_AS(s.validate(10.0), ConfigError);

    s = two_bumps();
    CHECK(s.bump(0, 1.0) == doctest::Approx(1.0));
    CHECK(s.bump(1, 4.0) == doctest::Approx(-1.0));
    CHECK(s.bump(0, 2.0) == 0.0);
    CHECK(s.bump(1, 7.0) == 0.0);

    const auto alt = alternating_bumps(4, 1.0, 9.0, 2.0);
    REQUIRE(alt.intervals.size() == 4);
    CHECK(alt.signs == std::vector<int>{1, -1, 1, -1});
    CHECK(alt.intervals[3].second == doctest::Approx(9.0));
    CHECK_NOTHROW(alt.validate(10.0));
}

TEST_CASE("build_phi0: layout, pinning, zero origin, support errors") {
    const auto grid = build_grid(30.0, 3000);
    const auto s = build_phi0(two_bumps(), 1.0, 4, grid);
    CHECK(s.nodes.size() == 15);
    const auto origin = s.find(0, 0);
    CHECK(s.nodes[origin] == Field(grid.size()));
    CHECK(s.pinned[origin]);
    for (std::size_t k = 0; k < s.nodes.size(); ++k) {
        const bool outer = s.index[k][0] + s.index[k][1] == 4;
        if (outer) CHECK(s.pinned[k]);
        if (k > 0) CHECK(s.index[k - 1] < s.index[k]);
    }
    // edge t2 = 0 holds the negative bump only, t1 = 0 the positive one
    for (double x : s.nodes[s.find(4, 0)].values) REQUIRE(x <= 0.0);
    for (double x : s.nodes[s.find(0, 4)].values) REQUIRE(x >= 0.0);

    CHECK_THROWS_AS(build_phi0(two_bumps(), 0.1, 4, grid), ConfigError);
    CHECK_THROWS_AS(build_phi0(two_bumps(), 600.0, 4, grid), ConfigError);
    BumpSpec same = two_bumps();
    same.signs = {1, 1};
    CHECK_THROWS_AS(build_phi0(same, 1.0, 4, grid), ConfigError);
}

TEST_CASE("phi0 scaling laws under R -> 2R") {
    const auto grid = build_grid(30.0, 3000);
    const BumpSpec spec = two_bumps(4.0);
    const auto s1 = build_phi0(spec, 1.0, 4, grid);
    const auto s2 = build_phi0(spec, 2.0, 4, grid);
    for (const auto& [i, j] : std::vector<std::pair<std::size_t, std::size_t>>{{1, 1}, {2, 1}, {0, 3}, {4, 0}}) {
        const Field& u1 = s1.nodes[s1.find(i, j)];
        const Field& u2 = s2.nodes[s2.find(i, j)];
        CHECK(grad_norm_sq(u2, grid) / grad_norm_sq(u1, grid) == doctest::Approx(8.0).epsilon(1e-3));
        for (double q : {3.0, 4.0, 5.0}) {
            CHECK(lp_norm_pow(u2, grid, q) / lp_norm_pow(u1, grid, q) ==
                  doctest::Approx(std::pow(2.0, 2.0 * q - 3.0)).epsilon(1e-3));
        }
        CHECK(lp_norm_pow(u2, grid, 2.0) / lp_norm_pow(u1, grid, 2.0) == doctest::Approx(2.0).epsilon(1e-3));
    }
}

TEST_CASE("calibrate_R: fails without beta, succeeds with beta = 1, r = 5") {
    const auto P = make_problem(power_model(3.0, 0.05), build_grid(30.0, 3000));
    const BumpSpec spec = two_bumps(4.0);
    const SimplexBuilder builder = [&](double R) { return build_phi0(spec, R, 4, P.grid); };

    try {
        (void)calibrate_R(builder, P, make_perturbation(P.model, 0.0, 0.0, 0.05, 5.0));
        FAIL("expected infeasible_initializer");
    } catch (const SolverError& e) {
        CHECK(e.kind() == "infeasible_initializer");
    }

    const auto pert = make_perturbation(P.model, 1.0, 1.0, 0.05, 5.0);
    const auto cal = calibrate_R(builder, P, pert);
    CHECK(cal.R > 1.0);
    REQUIRE(!cal.transcript.empty());
    CHECK(cal.transcript.back().second < 0.0);
    for (std::size_t k = 0; k + 1 < cal.transcript.size(); ++k) CHECK(cal.transcript[k].second >= 0.0);

    // monotone tail beyond the calibrated point
    double prev = cal.transcript.back().second;
    for (double R = 2.0 * cal.R; R <= 4.0 * cal.R; R *= 2.0) {
        const auto s = builder(R);
        double edge = -INFINITY;
        for (std::size_t k = 0; k < s.nodes.size(); ++k) {
            if (s.index[k][0] + s.index[k][1] == s.resolution) edge = std::max(edge, energy_perturbed(s.nodes[k], P, pert));
        }
        CHECK(edge < prev);
        prev = edge;
    }
}

TEST_CASE("SpanEnergy: value, gradient and Hessian") {
    const auto P = make_problem(power_model(3.0, 0.2), build_grid(20.0, 800));
    const auto pert = make_perturbation(P.model, 0.3, 0.4, 0.05, 5.0);
    const Field w = sample(P.grid, [](double r) { return (2.0 - r) * std::exp(-0.3 * r * r); });
    const auto parts = split_parts(w, SplitMode::signs, 2, P);
    REQUIRE(parts.size() == 2);
    const SpanEnergy g(parts, P, pert);
    Eigen::VectorXd s(2);
    s << 0.7, 1.6;
    CHECK(g.value(s) == doctest::Approx(energy_perturbed(axpy(s(0), parts[0], scaled(s(1), parts[1])), P, pert))
                            .epsilon(1e-12));
    const double h = 1e-6;
    const Eigen::VectorXd grad = g.gradient(s);
    const Eigen::MatrixXd H = g.hessian(s);
    for (int j = 0; j < 2; ++j) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
        e(j) = h;
        CHECK(grad(j) == doctest::Approx((g.value(s + e) - g.value(s - e)) / (2 * h)).epsilon(1e-6));
        const Eigen::VectorXd dg = (g.gradient(s + e) - g.gradient(s - e)) / (2 * h);
        for (int k = 0; k < 2; ++k) CHECK(H(k, j) == doctest::Approx(dg(k)).epsilon(1e-6));
    }
}

TEST_CASE("split_parts: signs, positive ray and merged runs") {
    const auto P = make_problem(power_model(4.0, 0.0), build_grid(10.0, 100));
    const Field w = sample(P.grid, [](double r) { return std::cos(r) * std::exp(-0.1 * r); });
    const auto signs = split_parts(w, SplitMode::signs, 2, P);
    REQUIRE(signs.size() == 2);
    Field sum = axpy(1.0, signs[0], signs[1]);
    CHECK(sum == w);
    const auto ray = split_parts(w, SplitMode::positive_ray, 1, P);
    REQUIRE(ray.size() == 1);
    for (double x : ray[0].values) CHECK(x >= 0.0);

    const auto runs = split_parts(w, SplitMode::runs, 10, P);
    CHECK(runs.size() == count_sign_changes(w, 0.0) + 1);
    const auto merged = split_parts(w, SplitMode::runs, 2, P);
    REQUIRE(merged.size() == 2);
    CHECK(axpy(1.0, merged[0], merged[1]) == w);
}

TEST_CASE("mountain_pass_positive at b = 0 matches the ground-state reference") {
    const auto P = make_problem(power_model(4.0, 0.0), build_grid(30.0, 3000));
    MinimaxConfig cfg;
    BumpSpec bump;
    bump.intervals = {{0.0, 4.0}};
    bump.signs = {1};
    const auto cp = mountain_pass_positive(P, cfg, bump);
    CHECK(cp.converged);
    CHECK(cp.kind == SolutionKind::ground);
    CHECK(cp.level == doctest::Approx(kGroundP4).epsilon(1e-3));
    for (std::size_t i = 0; i < P.grid.n; ++i) REQUIRE(cp.u[i] > 0.0);
    CHECK(cp.report.cone_dist_plus == 0.0);
    CHECK(cp.level <= cp.bound);
    for (std::size_t k = 1; k < cp.sweep_max.size(); ++k) CHECK(cp.sweep_max[k] <= cp.sweep_max[k - 1]);

    BumpSpec two = two_bumps();
    CHECK_THROWS_AS(mountain_pass_positive(P, cfg, two), ConfigError);
}

TEST_CASE("minimax_nodal at b = 0: reference level, sandwich, dominance over the ground state") {
    const auto P = make_problem(power_model(4.0, 0.0), build_grid(30.0, 3000));
    MinimaxConfig cfg;
    const auto pert = unperturbed(P.model);
    const BumpSpec spec = two_bumps();
    const auto cal = calibrate_R([&](double R) { return build_phi0(spec, R, 8, P.grid); }, P, pert);
    const auto simplex = build_phi0(spec, cal.R, 8, P.grid);
    const auto cp = minimax_nodal(P, pert, cfg, simplex);
    CHECK(cp.converged);
    CHECK(cp.kind == SolutionKind::nodal);
    CHECK(cp.level == doctest::Approx(kNodalP4).epsilon(1e-3));
    CHECK(cp.report.sign_changes == 1);
    const double eps = cfg.flow.eps_cone;
    CHECK(std::min(cp.report.cone_dist_plus, cp.report.cone_dist_minus) >= eps);
    CHECK(cp.level >= eps * eps / 4.0);
    CHECK(cp.level <= simplex_bound(simplex, P, pert));
    for (std::size_t k = 1; k < cp.sweep_max.size(); ++k) CHECK(cp.sweep_max[k] <= cp.sweep_max[k - 1]);
    CHECK(cp.level > kGroundP4);
}

TEST_CASE("newton_refine returns to a solution from a perturbed start") {
    const auto P = make_problem(power_model(4.0, 0.0), build_grid(30.0, 3000));
    MinimaxConfig cfg;
    BumpSpec bump;
    bump.intervals = {{0.0, 4.0}};
    bump.signs = {1};
    const auto cp = mountain_pass_positive(P, cfg, bump);
    Field start = cp.u;
    for (std::size_t i = 0; i < P.grid.n; ++i) start[i] *= 1.0 + 0.05 * std::exp(-P.grid.nodes[i]);
    const auto nr = newton_refine(start, P, unperturbed(P.model), 1e-8);
    CHECK(nr.converged);
    CHECK(e_norm(difference(nr.u, cp.u), P) < 1e-4 * e_norm(cp.u, P));
}

TEST_CASE("continuation to lambda = beta = 0 for p = 3, b = 0.05") {
    // Dilated layout: the nodal solution is w(rho / s) with s about 51.7.
    const double s = 51.7;
    const auto P = make_problem(power_model(3.0, 0.05), build_grid(20.0 * s, 2000));
    MinimaxConfig cfg;
    cfg.flow.tol = 1e-6 * std::pow(s, 1.5);
    const BumpSpec spec = two_bumps(s);
    const auto top = make_perturbation(P.model, 1.0, 1.0, 0.05, 5.0);
    const auto cal = calibrate_R([&](double R) { return build_phi0(spec, R, 8, P.grid); }, P, top);
    const auto simplex = build_phi0(spec, cal.R, 8, P.grid);
    const auto pert0 = make_perturbation(P.model, 0.01, 0.01, 0.05, 5.0);

    Schedule sched;
    sched.decay = 0.5;
    sched.floor = 1e-6;
    const auto cp = continuation_to_zero(P, pert0, sched, cfg, simplex);
    CHECK(cp.pert.lambda == 0.0);
    CHECK(cp.pert.beta == 0.0);
    CHECK(cp.converged);
    CHECK(cp.report.residual_sup <= 10.0 * cfg.flow.tol);
    CHECK(cp.report.sign_changes >= 1);
    CHECK(std::min(cp.report.cone_dist_plus, cp.report.cone_dist_minus) >= cfg.flow.eps_cone);
    CHECK(cp.level >= cfg.flow.eps_cone * cfg.flow.eps_cone / 4.0);
    CHECK(cp.level <= cp.bound);
    REQUIRE(cp.stages.size() > 3);
    for (std::size_t k = 2; k < cp.stages.size(); ++k) {
        CHECK(cp.stages[k].step_distance < cp.stages[k - 1].step_distance);
    }

    // path independence
    Schedule other = sched;
    other.decay = 0.7;
    const auto cp2 = continuation_to_zero(P, pert0, other, cfg, simplex);
    CHECK(e_norm(difference(cp.u, cp2.u), P) <= 10.0 * cfg.flow.tol);
}

TEST_CASE("continuation from lambda = beta = 1 follows a divergent branch and is reported") {
    const double s = 51.7;
    const auto P = make_problem(power_model(3.0, 0.05), build_grid(20.0 * s, 2000));
    MinimaxConfig cfg;
    cfg.flow.tol = 1e-6 * std::pow(s, 1.5);
    const BumpSpec spec = two_bumps(s);
    const auto top = make_perturbation(P.model, 1.0, 1.0, 0.05, 5.0);
    const auto simplex = build_phi0(spec, 4.0, 8, P.grid);
    Schedule sched;
    sched.floor = 1e-6;
    try {
        (void)continuation_to_zero(P, top, sched, cfg, simplex);
        FAIL("expected continuation_failure");
    } catch (const SolverError& e) {
        CHECK(e.kind() == "continuation_failure");
    }
}

TEST_CASE("multi_bump_search: level ladder and deduplication") {
    const auto P = make_problem(power_model(4.0, 0.0), build_grid(30.0, 3000));
    MinimaxConfig cfg;
    MultiBumpOptions opt;
    opt.samples = 4;
    const auto two = multi_bump_search(2, P, unperturbed(P.model), cfg, opt, 42);
    REQUIRE(two.size() == 1);
    CHECK(two[0].level == doctest::Approx(kNodalP4).epsilon(1e-3));
    CHECK(two[0].report.sign_changes == 1);

    const auto three = multi_bump_search(3, P, unperturbed(P.model), cfg, opt, 42);
    REQUIRE(!three.empty());
    CHECK(three.back().report.sign_changes == 2);
    CHECK(three.back().level > two[0].level);
    for (std::size_t i = 0; i < three.size(); ++i) {
        CHECK(three[i].converged);
        CHECK(three[i].level >= cfg.flow.eps_cone * cfg.flow.eps_cone / 4.0);
        for (std::size_t j = i + 1; j < three.size(); ++j) CHECK_FALSE(same_solution(three[i], three[j], P));
    }

    CriticalPoint flipped = two[0];
    flipped.u = scaled(-1.0, flipped.u);
    CHECK(same_solution(two[0], flipped, P));
    CHECK_THROWS_AS(multi_bump_search(1, P, unperturbed(P.model), cfg, opt, 1), ConfigError);
}

TEST_CASE("Schedule validation") {
    Schedule s;
    CHECK_NOTHROW(s.validate());
    s.decay = 1.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = Schedule{};
    s.floor = 0.0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(std::string(to_string(SolutionKind::ground)) == "ground");
}
