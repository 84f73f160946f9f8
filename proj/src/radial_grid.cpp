#include "kirchhoff/radial_grid.hpp"

#include "kirchhoff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

namespace kirchhoff {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// 4*pi * int_lo^hi rho^2 drho without the cancellation of hi^3 - lo^3.
double shell_volume(double lo, double hi) {
    return kFourPi * (hi - lo) * (hi * hi + hi * lo + lo * lo) / 3.0;
}

} // namespace

RadialGrid build_grid(double r_max, std::size_t n) {
    if (!(r_max > 0.0) || !std::isfinite(r_max)) {
        throw ConfigError("grid.r_max", "must be a positive finite radius");
    }
    if (n < 8 || n % 2 != 0) {
        throw ConfigError("grid.n", "number of intervals must be even and at least 8, got " +
                                        std::to_string(n));
    }

    RadialGrid g;
    g.r_max = r_max;
    g.n = n;
    g.h = r_max / static_cast<double>(n);
    g.nodes.resize(n + 1);
    g.weights.resize(n + 1);
    g.cell_volumes.resize(n + 1);
    g.face_coeffs.resize(n);

    for (std::size_t i = 0; i <= n; ++i) {
        const double rho = static_cast<double>(i) * g.h;
        g.nodes[i] = rho;

        const double simpson = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        g.weights[i] = kFourPi * g.h / 3.0 * simpson * rho * rho;

        const double lo = std::max(0.0, rho - 0.5 * g.h);
        const double hi = (i == n) ? r_max : rho + 0.5 * g.h;
        g.cell_volumes[i] = shell_volume(lo, hi);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double mid = (static_cast<double>(i) + 0.5) * g.h;
        g.face_coeffs[i] = kFourPi * mid * mid / g.h;
    }
    return g;
}

void check_dimension(const Field& u, const RadialGrid& grid) {
    if (u.size() != grid.size()) throw DimensionError(grid.size(), u.size());
}

void clamp_boundary(Field& u) {
    if (!u.values.empty()) u.values.back() = 0.0;
}

double integrate(const Field& g, const RadialGrid& grid) {
    check_dimension(g, grid);
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) s += grid.weights[i] * g[i];
    return s;
}

double stiffness_dot(const Field& u, const Field& v, const RadialGrid& grid) {
    check_dimension(u, grid);
    check_dimension(v, grid);
    double s = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
        s += grid.face_coeffs[i] * (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
    }
    return s;
}

double grad_norm_sq(const Field& u, const RadialGrid& grid) {
    return stiffness_dot(u, u, grid);
}

double lp_norm_pow(const Field& u, const RadialGrid& grid, double q) {
    if (!(q >= 1.0)) throw ConfigError("q", "exponent must be >= 1");
    check_dimension(u, grid);
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        s += grid.weights[i] * std::pow(std::abs(u[i]), q);
    }
    return s;
}

std::pair<Field, Field> split_signs(const Field& u) {
    Field plus(u.size());
    Field minus(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (u[i] > 0.0) {
            plus[i] = u[i];
        } else {
            minus[i] = u[i];
        }
    }
    return {std::move(plus), std::move(minus)};
}

std::size_t count_sign_changes(const Field& u, double threshold) {
    std::size_t changes = 0;
    int last_sign = 0;
    for (double x : u.values) {
        if (std::abs(x) < threshold || x == 0.0) continue;
        const int s = x > 0.0 ? 1 : -1;
        if (last_sign != 0 && s != last_sign) ++changes;
        last_sign = s;
    }
    return changes;
}

double mass_sum(const RadialGrid& grid, std::span<const double> g) {
    if (g.size() != grid.size()) throw DimensionError(grid.size(), g.size());
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += grid.cell_volumes[i] * g[i];
    return s;
}

Field axpy(double alpha, const Field& x, const Field& y) {
    if (x.size() != y.size()) throw DimensionError(y.size(), x.size());
    Field out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = alpha * x[i] + y[i];
    return out;
}

Field scaled(double alpha, const Field& x) {
    Field out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = alpha * x[i];
    return out;
}

Field difference(const Field& x, const Field& y) {
    return axpy(-1.0, y, x);
}

void write_field_csv(const std::filesystem::path& path, const Field& u, const RadialGrid& grid) {
    check_dimension(u, grid);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "rho,u\n" << std::setprecision(17);
    for (std::size_t i = 0; i < grid.size(); ++i) out << grid.nodes[i] << ',' << u[i] << '\n';
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::pair<std::vector<double>, Field> read_field_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "rho,u") throw ConfigError("csv", "expected header 'rho,u' in " + path.string());
    std::vector<double> rho;
    std::vector<double> u;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ConfigError("csv", "malformed line: " + line);
        rho.push_back(std::stod(line.substr(0, comma)));
        u.push_back(std::stod(line.substr(comma + 1)));
    }
    return {std::move(rho), Field(std::move(u))};
}

} // namespace kirchhoff
