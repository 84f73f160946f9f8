/**
 * @file flow.hpp
 * @brief Auxiliary operator T, invariant cones and the damped descent flow.
 *
 * T(u) = v solves the linear problem
 *   (a + b|grad u|^2) G v + M (V + lambda |u|_2^{2 alpha}) v = M (f(u) + beta |u|^{r-2} u)
 * with v_n = 0. The matrix is symmetric, tridiagonal and an M-matrix, so T
 * maps nonnegative data to nonnegative solutions exactly.
 */
#pragma once

#include "kirchhoff/model.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace kirchhoff {

struct FlowConfig {
    double tol = 1e-6;
    std::size_t max_iter = 20000;
    double step0 = 1.0;
    double backtrack = 0.5;
    double armijo = 0.1;
    double eps_cone = 1e-2;

    void validate() const; ///< throws ConfigError
};

/// Tridiagonal operator L_u on the free nodes 0..n-1.
struct LinearizedOperator {
    double coef = 0.0;  ///< a + b u'Gu
    double shift = 0.0; ///< lambda (sum m u^2)^alpha
    std::vector<double> diag;
    std::vector<double> off; ///< off[i] couples i and i+1, size n-1

    Field apply(const Field& v) const;    ///< L v, last entry 0
    Field solve(const Field& rhs) const;  ///< Thomas algorithm, rhs entry n ignored
};

LinearizedOperator linearize(const Field& u, const Problem& P, const PerturbationParams& pert);

/// M (f(u) + beta |u|^{r-2} u).
Field source_term(const Field& u, const Problem& P, const PerturbationParams& pert);

Field solve_T(const Field& u, const Problem& P, const PerturbationParams& pert);

enum class ConeSign { plus, minus };

/// Surrogate distance: ||u-||_E to P+, ||u+||_E to P-.
double cone_distance(const Field& u, ConeSign sign, const Problem& P);

/// Optional map applied to every trial iterate (e.g. clipping to P+).
using Projector = std::function<Field(const Field&)>;

struct StepResult {
    Field u;
    bool accepted = false;
    double step = 0.0;
    double energy_before = 0.0;
    double energy_after = 0.0;
    double gap = 0.0; ///< ||u - T u||_E at the input
};

StepResult flow_step(const Field& u, const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert,
                     const Projector& project = {});

struct FlowResult {
    Field u;
    std::size_t iterations = 0;
    bool converged = false;
    bool stalled = false;           ///< backtracking exhausted
    bool diverged = false;          ///< energy ran off to -infinity
    std::vector<double> energy_trace; ///< initial energy, then one entry per accepted step
    std::vector<double> gap_trace;
    double fixed_point_gap = 0.0;
    double cone_dist_plus = 0.0;
    double cone_dist_minus = 0.0;
    double residual_sup = 0.0;
};

FlowResult descend(const Field& u0, const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert,
                   const Projector& project = {});

/// Writes `iter,energy,gap`; gap is empty for the initial entry when unknown.
void write_trace_csv(const std::filesystem::path& path, const FlowResult& r);

/// Seeded random smooth field: a few Gaussians with random signs, clamped.
Field random_smooth_field(const RadialGrid& grid, std::mt19937_64& rng, double amplitude = 2.0);

struct ConeInvarianceRow {
    double eps = 0.0;
    std::size_t samples = 0;
    std::size_t invariant = 0;
    double worst_ratio = 0.0; ///< max dist(T u) / eps over samples
};

struct ConeInvarianceReport {
    std::vector<ConeInvarianceRow> rows; ///< ascending eps
    double calibrated_eps = 0.0;        ///< largest eps whose row and all smaller rows pass; 0 if none
};

/// Samples u on the boundary of P_eps^- (and P_eps^+, alternating) and checks
/// that T u lies inside the same cone.
ConeInvarianceReport check_cone_invariance(std::size_t sample_count, std::vector<double> eps_list,
                                           const Problem& P, const PerturbationParams& pert,
                                           std::uint64_t seed);

} // namespace kirchhoff
