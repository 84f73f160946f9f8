/**
 * @file radial_grid.hpp
 * @brief Uniform radial mesh on [0, r_max] for radially symmetric fields in R^3.
 *
 * Two quadratures live on the grid:
 *  - `weights`: composite Simpson for 4*pi * int g(rho) rho^2 drho. Exact on
 *    polynomials of degree <= 3 in rho; used by integrate() and lp_norm_pow().
 *  - `cell_volumes`: exact volume of the dual cell around each node. Together
 *    with the face coefficients this is the lumped-mass / finite-volume pair
 *    the variational discretization (energy, auxiliary operator) is built on.
 *
 * The gradient lives on faces: (u_{i+1} - u_i) / h is the centred difference
 * at rho_{i+1/2}. The resulting stiffness form is tridiagonal and reproduces
 * Delta(rho^2) = 6 exactly at every node including rho = 0.
 */
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace kirchhoff {

struct RadialGrid {
    double r_max = 0.0;
    std::size_t n = 0; ///< number of intervals
    double h = 0.0;
    std::vector<double> nodes;        ///< rho_i = i*h, size n+1
    std::vector<double> weights;      ///< Simpson weights scaled by 4*pi*rho_i^2
    std::vector<double> cell_volumes; ///< 4*pi * int_{cell_i} rho^2 drho
    std::vector<double> face_coeffs;  ///< 4*pi*rho_{i+1/2}^2 / h, size n

    std::size_t size() const noexcept { return n + 1; }
};

/// Nodal values of a radial function; the last entry is the Dirichlet node.
struct Field {
    std::vector<double> values;

    Field() = default;
    explicit Field(std::size_t size, double fill = 0.0) : values(size, fill) {}
    explicit Field(std::vector<double> v) : values(std::move(v)) {}

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
    std::span<const double> view() const noexcept { return values; }

    friend bool operator==(const Field&, const Field&) = default;
};

/// Throws ConfigError unless r_max > 0 and n is even with n >= 8.
RadialGrid build_grid(double r_max, std::size_t n);

/// Throws DimensionError if `u` does not live on `grid`.
void check_dimension(const Field& u, const RadialGrid& grid);

/// Samples g at the grid nodes. The Dirichlet node is left as g(r_max).
template <class Fn>
Field sample(const RadialGrid& grid, Fn&& g) {
    Field u(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) u[i] = g(grid.nodes[i]);
    return u;
}

/// Sets the Dirichlet node to zero.
void clamp_boundary(Field& u);

/// Simpson approximation of 4*pi * int_0^{r_max} g rho^2 drho.
double integrate(const Field& g, const RadialGrid& grid);

/// 4*pi * int (u')^2 rho^2 drho from face-centred differences.
double grad_norm_sq(const Field& u, const RadialGrid& grid);

/// int |u|^q over the ball (the q-th power of the L^q norm). Requires q >= 1.
double lp_norm_pow(const Field& u, const RadialGrid& grid, double q);

/// Nodewise split u = u_plus + u_minus with u_plus >= 0 >= u_minus.
std::pair<Field, Field> split_signs(const Field& u);

/// Number of strict sign changes after zeroing entries with |u_i| < threshold.
std::size_t count_sign_changes(const Field& u, double threshold);

/// Quadratic form u^T G v of the stiffness matrix (u^T G u = grad_norm_sq).
double stiffness_dot(const Field& u, const Field& v, const RadialGrid& grid);

/// sum_i cell_volume_i * g_i. The quadrature behind every variational term.
double mass_sum(const RadialGrid& grid, std::span<const double> g);

// Field arithmetic used throughout the solvers.
Field axpy(double alpha, const Field& x, const Field& y); ///< alpha*x + y
Field scaled(double alpha, const Field& x);
Field difference(const Field& x, const Field& y); ///< x - y

/// Two-column CSV with header `rho,u` and 17 significant digits.
void write_field_csv(const std::filesystem::path& path, const Field& u, const RadialGrid& grid);

/// Reads a CSV written by write_field_csv; returns (rho, u) columns.
std::pair<std::vector<double>, Field> read_field_csv(const std::filesystem::path& path);

} // namespace kirchhoff
