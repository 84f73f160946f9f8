#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kirchhoff/errors.hpp"
#include "kirchhoff/flow.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace kirchhoff;

namespace {

ModelParams cubic_model(double b) {
    ModelParams m;
    m.a = 1.0;
    m.b = b;
    m.potential = Potential::constant(1.0);
    m.nonlinearity = Nonlinearity::power(4.0);
    m.mu = 4.0;
    return m;
}

Field bump(const RadialGrid& g, double amp, double width) {
    Field u = sample(g, [&](double r) { return amp * std::exp(-r * r / (width * width)); });
    clamp_boundary(u);
    return u;
}

} // namespace

TEST_CASE("FlowConfig validation") {
    FlowConfig c;
    CHECK_NOTHROW(c.validate());
    c.step0 = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = FlowConfig{};
    c.backtrack = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = FlowConfig{};
    c.tol = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("solve_T: zero data, operator-apply oracle, dense oracle, superposition") {
    const auto P = make_problem(cubic_model(0.3), build_grid(10.0, 200));
    const auto pert = make_perturbation(P.model, 0.4, 0.3, 0.05, 5.0);
    CHECK(solve_T(Field(P.grid.size()), P, pert) == Field(P.grid.size()));

    const Field u = bump(P.grid, 1.5, 2.0);
    const auto L = linearize(u, P, pert);

    Field vstar = sample(P.grid, [](double r) { return std::cos(0.3 * r) * std::exp(-0.1 * r); });
    clamp_boundary(vstar);
    const Field back = L.solve(L.apply(vstar));
    for (std::size_t i = 0; i < vstar.size(); ++i) REQUIRE(back[i] == doctest::Approx(vstar[i]).epsilon(1e-12));

    const std::size_t n = P.grid.n;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        A(i, i) = L.diag[i];
        if (i + 1 < n) A(i, i + 1) = A(i + 1, i) = L.off[i];
    }
    const Field rhs = source_term(u, P, pert);
    Eigen::VectorXd b(n);
    for (std::size_t i = 0; i < n; ++i) b(i) = rhs[i];
    const Eigen::VectorXd x = A.partialPivLu().solve(b);
    const Field v = solve_T(u, P, pert);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num = std::max(num, std::abs(v[i] - x(i)));
        den = std::max(den, std::abs(x(i)));
    }
    CHECK(num / den < 1e-10);
    CHECK(v[n] == 0.0);

    const Field r1 = sample(P.grid, [](double r) { return std::sin(r); });
    const Field r2 = sample(P.grid, [](double r) { return r * std::exp(-r); });
    const Field lhs = L.solve(axpy(2.0, r1, r2));
    const Field rhs2 = axpy(2.0, L.solve(r1), L.solve(r2));
    for (std::size_t i = 0; i < n; ++i) REQUIRE(lhs[i] == doctest::Approx(rhs2[i]).epsilon(1e-10).scale(1.0));
}

TEST_CASE("solve_T reports the row of a broken pivot") {
    const auto P = make_problem(cubic_model(0.0), build_grid(10.0, 20));
    LinearizedOperator L = linearize(Field(P.grid.size()), P, unperturbed(P.model));
    L.diag[3] = std::nan("");
    try {
        (void)L.solve(Field(P.grid.size(), 1.0));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.row() == 3);
    }
}

TEST_CASE("gradient identity: I'(u) = L_u (u - T u)") {
    const auto P = make_problem(cubic_model(0.2), build_grid(12.0, 600));
    const auto pert = make_perturbation(P.model, 0.5, 0.5, 0.05, 5.0);
    const Field u = sample(P.grid, [](double r) { return 2.0 * (1.0 - 0.5 * r) * std::exp(-0.3 * r * r); });
    const Field d = difference(u, solve_T(u, P, pert));
    const auto L = linearize(u, P, pert);
    const Field Ld = L.apply(d);
    double analytic = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) analytic += Ld[i] * d[i];
    const double delta = 1e-5;
    const double fd = (energy_perturbed(axpy(delta, d, u), P, pert) - energy_perturbed(axpy(-delta, d, u), P, pert)) /
                      (2.0 * delta);
    CHECK(fd == doctest::Approx(analytic).epsilon(1e-6));
    CHECK(analytic >= e_norm_sq(d, P));
}

TEST_CASE("descent inequality on random smooth fields") {
    const auto P = make_problem(cubic_model(0.1), build_grid(20.0, 800));
    const auto pert = make_perturbation(P.model, 0.2, 0.2, 0.05, 5.0);
    std::mt19937_64 rng(7);
    for (int k = 0; k < 20; ++k) {
        const Field u = random_smooth_field(P.grid, rng);
        const Field d = difference(u, solve_T(u, P, pert));
        const double dn2 = e_norm_sq(d, P);
        const double delta = 1e-4 / std::max(1.0, std::sqrt(dn2));
        const double fd = (energy_perturbed(axpy(delta, d, u), P, pert) -
                           energy_perturbed(axpy(-delta, d, u), P, pert)) / (2.0 * delta);
        REQUIRE(fd >= 0.999 * dn2);
    }
}

TEST_CASE("cone_distance matches the split norms") {
    const auto P = make_problem(cubic_model(0.0), build_grid(10.0, 200));
    const Field pos = bump(P.grid, 1.0, 2.0);
    CHECK(cone_distance(pos, ConeSign::plus, P) == 0.0);
    CHECK(cone_distance(scaled(-1.0, pos), ConeSign::minus, P) == 0.0);
    const Field u = sample(P.grid, [](double r) { return std::cos(r) * std::exp(-0.2 * r * r); });
    const auto [up, um] = split_signs(u);
    const double Kp = grad_norm_sq(up, P.grid);
    double Lp = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) Lp += P.grid.cell_volumes[i] * up[i] * up[i];
    CHECK(cone_distance(u, ConeSign::minus, P) == doctest::Approx(std::sqrt(Kp + Lp)).epsilon(1e-13));
    CHECK(cone_distance(u, ConeSign::plus, P) == doctest::Approx(e_norm(um, P)).epsilon(1e-15));
}

TEST_CASE("T preserves sign exactly") {
    const auto P = make_problem(cubic_model(0.5), build_grid(10.0, 200));
    const auto pert = make_perturbation(P.model, 0.5, 0.5, 0.05, 5.0);
    const Field v = solve_T(bump(P.grid, 2.0, 1.5), P, pert);
    for (double x : v.values) REQUIRE(x >= 0.0);
    CHECK(cone_distance(v, ConeSign::plus, P) == 0.0);
}

TEST_CASE("flow_step: fixed point is returned unchanged, generic steps decrease the energy") {
    const auto P = make_problem(cubic_model(0.1), build_grid(20.0, 800));
    const auto pert = make_perturbation(P.model, 0.2, 0.2, 0.05, 5.0);
    FlowConfig cfg;
    const Field zero(P.grid.size());
    const auto st0 = flow_step(zero, cfg, P, pert);
    CHECK(st0.accepted);
    CHECK(st0.u == zero);
    CHECK(st0.step == 0.0);

    std::mt19937_64 rng(11);
    for (int k = 0; k < 20; ++k) {
        const Field u = random_smooth_field(P.grid, rng);
        const auto st = flow_step(u, cfg, P, pert);
        REQUIRE(st.accepted);
        REQUIRE(st.energy_after < st.energy_before);
    }
}

TEST_CASE("descend: zero start, small bump decays, large bump stays monotone and positive") {
    const auto P = make_problem(cubic_model(0.0), build_grid(30.0, 1500));
    const auto pert = unperturbed(P.model);
    FlowConfig cfg;
    cfg.tol = 1e-8;
    cfg.max_iter = 400;

    const auto r0 = descend(Field(P.grid.size()), cfg, P, pert);
    CHECK(r0.converged);
    CHECK(r0.iterations == 0);

    const auto small = descend(bump(P.grid, 0.3, 1.0), cfg, P, pert);
    CHECK(small.converged);
    CHECK(e_norm(small.u, P) < 1e-6);

    const auto big = descend(bump(P.grid, 6.0, 2.0), cfg, P, pert);
    for (std::size_t k = 1; k < big.energy_trace.size(); ++k) REQUIRE(big.energy_trace[k] < big.energy_trace[k - 1]);
    for (double x : big.u.values) REQUIRE(x >= 0.0);
    CHECK(big.cone_dist_plus == 0.0);
}

TEST_CASE("cone invariance: one-signed data and a calibrated range") {
    const auto P = make_problem(cubic_model(0.05), build_grid(30.0, 600));
    const auto pert = make_perturbation(P.model, 0.1, 0.1, 0.05, 5.0);
    const auto rep = check_cone_invariance(40, {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0}, P, pert, 3);
    REQUIRE(rep.rows.size() == 7);
    CHECK(rep.rows.front().invariant == rep.rows.front().samples);
    CHECK(rep.calibrated_eps >= 1e-3);
    CHECK(rep.rows.back().invariant < rep.rows.back().samples);
}
