#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kirchhoff/errors.hpp"
#include "kirchhoff/radial_grid.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace kirchhoff;

namespace {
constexpr double pi = std::numbers::pi;
}

TEST_CASE("build_grid: unit ball weights sum to the ball volume") {
    const auto g = build_grid(1.0, 8);
    double s = 0.0;
    for (double w : g.weights) s += w;
    CHECK(s == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-14));
    double m = 0.0;
    for (double v : g.cell_volumes) m += v;
    CHECK(m == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-14));
}

TEST_CASE("build_grid: sizes and spacing") {
    const auto g = build_grid(30.0, 3000);
    CHECK(g.size() == 3001);
    CHECK(g.nodes.size() == 3001);
    CHECK(g.h == doctest::Approx(0.01).epsilon(1e-15));
    CHECK(g.nodes.back() == doctest::Approx(30.0));
    for (std::size_t i = 1; i < g.size(); ++i) REQUIRE(g.nodes[i] > g.nodes[i - 1]);
    for (double w : g.weights) REQUIRE(w >= 0.0);
}

TEST_CASE("build_grid: rejects bad input") {
    CHECK_THROWS_AS(build_grid(1.0, 7), ConfigError);
    CHECK_THROWS_AS(build_grid(1.0, 6), ConfigError);
    CHECK_THROWS_AS(build_grid(0.0, 8), ConfigError);
    CHECK_THROWS_AS(build_grid(-1.0, 8), ConfigError);
}

TEST_CASE("integrate: constants, zero and the Gaussian moment") {
    const auto g = build_grid(5.0, 100);
    CHECK(integrate(Field(g.size(), 1.0), g) == doctest::Approx(4.0 * pi * 125.0 / 3.0).epsilon(1e-14));
    CHECK(integrate(Field(g.size(), 0.0), g) == 0.0);

    const auto g12 = build_grid(12.0, 6000);
    const Field e = sample(g12, [](double r) { return std::exp(-r * r); });
    CHECK(std::abs(integrate(e, g12) / std::pow(pi, 1.5) - 1.0) < 1e-10);

    CHECK_THROWS_AS(integrate(Field(5), g), DimensionError);
}

TEST_CASE("integrate: cubic moments are exact and smooth data converges at high order") {
    const auto g = build_grid(2.0, 16);
    // 4 pi int_0^2 rho * rho^2 = 4 pi * 4
    const Field r1 = sample(g, [](double r) { return r; });
    CHECK(integrate(r1, g) == doctest::Approx(16.0 * pi).epsilon(1e-13));

    // int_0^1 rho^2 sin(rho) = 2 sin 1 + cos 1 - 2
    const double ref = 4.0 * pi * (2.0 * std::sin(1.0) + std::cos(1.0) - 2.0);
    double prev = 0.0;
    for (std::size_t n : {8u, 16u, 32u}) {
        const auto gn = build_grid(1.0, n);
        const double err = std::abs(integrate(sample(gn, [](double r) { return std::sin(r); }), gn) - ref);
        if (prev > 0.0) CHECK(prev / err >= 8.0);
        prev = err;
    }
}

TEST_CASE("grad_norm_sq: zero, constants and the Gaussian moment") {
    const auto g = build_grid(3.0, 30);
    CHECK(grad_norm_sq(Field(g.size(), 0.0), g) == 0.0);
    CHECK(grad_norm_sq(Field(g.size(), 2.5), g) == 0.0);

    // 16 pi int rho^4 exp(-2 rho^2) = 16 pi * 3 sqrt(pi/2) / 32
    const double ref = 16.0 * pi * 3.0 * std::sqrt(pi / 2.0) / 32.0;
    const auto g12 = build_grid(12.0, 6000);
    const Field e = sample(g12, [](double r) { return std::exp(-r * r); });
    CHECK(std::abs(grad_norm_sq(e, g12) / ref - 1.0) < 1e-6);
}

TEST_CASE("stiffness_dot is the polarization of grad_norm_sq") {
    const auto g = build_grid(4.0, 40);
    const Field u = sample(g, [](double r) { return std::cos(r); });
    const Field v = sample(g, [](double r) { return r * std::exp(-r); });
    const double lhs = grad_norm_sq(axpy(1.0, u, v), g);
    const double rhs = grad_norm_sq(u, g) + 2.0 * stiffness_dot(u, v, g) + grad_norm_sq(v, g);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("lp_norm_pow") {
    const auto g1 = build_grid(1.0, 8);
    CHECK(lp_norm_pow(Field(g1.size(), 0.0), g1, 2.0) == 0.0);
    CHECK(lp_norm_pow(Field(g1.size(), 1.0), g1, 3.0) == doctest::Approx(4.0 * pi / 3.0).epsilon(1e-14));
    CHECK_THROWS_AS(lp_norm_pow(Field(g1.size(), 1.0), g1, 0.5), ConfigError);

    const auto g12 = build_grid(12.0, 6000);
    const Field e = sample(g12, [](double r) { return std::exp(-r * r); });
    CHECK(std::abs(lp_norm_pow(e, g12, 2.0) / std::pow(pi / 2.0, 1.5) - 1.0) < 1e-8);
}

TEST_CASE("split_signs is an exact partition") {
    const Field u(std::vector<double>{1.0, -2.0, 3.0});
    const auto [p, m] = split_signs(u);
    CHECK(p.values == std::vector<double>{1.0, 0.0, 3.0});
    CHECK(m.values == std::vector<double>{0.0, -2.0, 0.0});

    const Field pos(std::vector<double>{0.5, 1.0, 0.0});
    CHECK(split_signs(pos).first == pos);
    CHECK(split_signs(pos).second == Field(3));
    const Field neg(std::vector<double>{-0.5, -1.0, 0.0});
    CHECK(split_signs(neg).second == neg);

    const auto g = build_grid(6.0, 60);
    const Field w = sample(g, [](double r) { return std::sin(2.0 * r) * std::exp(-r); });
    const auto [wp, wm] = split_signs(w);
    for (std::size_t i = 0; i < w.size(); ++i) {
        REQUIRE(wp[i] + wm[i] == w[i]);
        REQUIRE(wp[i] * wm[i] == 0.0);
    }
}

TEST_CASE("count_sign_changes") {
    CHECK(count_sign_changes(Field(std::vector<double>{1.0, 2.0, 0.0}), 0.0) == 0);
    const auto g = build_grid(3.0, 30);
    const Field s = sample(g, [](double r) { return std::cos(r); });
    CHECK(count_sign_changes(s, 1e-12) == 1);
    CHECK(count_sign_changes(s, 10.0) == 0);
    // small dips below threshold do not count
    CHECK(count_sign_changes(Field(std::vector<double>{1.0, -1e-9, 1.0}), 1e-6) == 0);
}

TEST_CASE("field CSV round trip") {
    const auto g = build_grid(2.0, 10);
    const Field u = sample(g, [](double r) { return std::exp(-r) / 3.0; });
    const auto path = std::filesystem::temp_directory_path() / "kirchhoff_field_roundtrip.csv";
    write_field_csv(path, u, g);
    const auto [rho, v] = read_field_csv(path);
    CHECK(rho == g.nodes);
    CHECK(v == u);
    std::filesystem::remove(path);
}
