/**
 * @file minimax.hpp
 * @brief Simplex initializer, deformation of the simplex by flow steps,
 * positive mountain pass, continuation in (lambda, beta) and the multi-bump
 * search for higher nodal solutions.
 *
 * Convergence to a saddle is finished by a projected descent: the iterate is
 * split into disjoint parts u_j (sign parts, nodal runs or the positive part)
 * and replaced by sum s_j u_j, where s is the first local maximum of
 * s -> J(sum s_j u_j). The step direction is T u - u as in the flow.
 */
#pragma once

#include "kirchhoff/flow.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace kirchhoff {

/// Disjoint quartic bumps sign_i * amplitude * (1 - t^2)^2 on [l_i, r_i].
struct BumpSpec {
    std::vector<std::pair<double, double>> intervals;
    std::vector<int> signs;
    double amplitude = 1.0;

    void validate(double r_max) const; ///< throws ConfigError
    double bump(std::size_t i, double rho) const;
    /// R^2 * v_i(R rho) on the grid.
    Field sample_bump(std::size_t i, const RadialGrid& grid, double R) const;
    /// All bumps scaled by `factor` in radius (dilation of the layout).
    BumpSpec dilated(double factor) const;
};

/// n alternating-sign bumps of equal width tiling [inner, outer].
BumpSpec alternating_bumps(std::size_t n, double inner, double outer, double amplitude, int first_sign = 1);

struct SimplexState {
    std::size_t resolution = 0;
    double R = 1.0;
    std::vector<std::array<std::size_t, 2>> index; ///< (i, j): t1 = i/m, t2 = j/m; lexicographic
    std::vector<Field> nodes;
    std::vector<bool> pinned; ///< outer edge and the origin node

    std::size_t find(std::size_t i, std::size_t j) const;
};

/// Nodes R^2 [t1 v1(R rho) + t2 v2(R rho)] with v1 the negative and v2 the positive bump.
SimplexState build_phi0(const BumpSpec& spec, double R, std::size_t resolution, const RadialGrid& grid);

struct Calibration {
    double R = 0.0;
    std::vector<std::pair<double, double>> transcript; ///< (R, max outer-edge energy)
};

using SimplexBuilder = std::function<SimplexState(double R)>;

/// Smallest R = R0 * 2^k <= R_cap whose outer edge has negative perturbed energy.
Calibration calibrate_R(const SimplexBuilder& builder, const Problem& P, const PerturbationParams& pert,
                        double R0 = 1.0, double R_cap = 1024.0);

/// Max of I_{1,0} over the nodes of a simplex (the level bound C_R).
double simplex_bound(const SimplexState& s, const Problem& P, const PerturbationParams& pert);

enum class SplitMode { positive_ray, signs, runs };

/// J restricted to span{u_j} for disjoint parts, in closed form.
class SpanEnergy {
public:
    SpanEnergy(const std::vector<Field>& parts, const Problem& P, const PerturbationParams& pert);

    std::size_t dim() const noexcept { return static_cast<std::size_t>(L_.size()); }
    double value(const Eigen::VectorXd& s) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& s) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& s) const;

private:
    ModelParams model_;
    PerturbationParams pert_;
    Eigen::MatrixXd E_;  ///< a u_j'Gu_k + delta_jk sum m V u_j^2
    Eigen::MatrixXd G_;  ///< u_j'Gu_k
    Eigen::VectorXd L_;  ///< sum m u_j^2
    Eigen::MatrixXd Pw_; ///< Pw(j,k) = sum m |u_j|^{p_k}
    Eigen::VectorXd B_;  ///< sum m |u_j|^r
};

/// Disjoint parts of w for the given mode; empty parts are dropped.
std::vector<Field> split_parts(const Field& w, SplitMode mode, std::size_t max_parts, const Problem& P);

/// First local maximum of g over s > 0. With a warm start the search is a
/// Newton iteration from it; otherwise a scan along the diagonal ray followed by
/// coordinate sweeps. When the parts are strongly coupled (b > 0, p < 4) g may
/// have no local maximum; a nondegenerate stationary point at which every
/// coordinate is a fibre maximum is accepted instead. Returns nullopt if
/// neither is found.
std::optional<Eigen::VectorXd> first_local_max(const SpanEnergy& g, const std::optional<Eigen::VectorXd>& warm);

struct ProjectionResult {
    Field u;
    Eigen::VectorXd s;
    std::size_t parts = 0;
};

std::optional<ProjectionResult> project_span(const Field& w, SplitMode mode, std::size_t max_parts, const Problem& P,
                                             const PerturbationParams& pert, bool warm);

struct ProjectedDescentResult {
    Field u;
    bool converged = false;
    std::size_t iterations = 0;
    double gap = 0.0;
    std::vector<double> energy_trace;
};

/// Projected descent to a saddle of the given split type.
ProjectedDescentResult projected_descent(const Field& u0, SplitMode mode, std::size_t max_parts,
                                         const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert);

struct NewtonResult {
    Field u;
    bool converged = false;
    std::size_t iterations = 0;
    double gap = 0.0; ///< ||u - T u||_E at the returned iterate
};

/// Damped Newton iteration on the discrete Euler-Lagrange equation of
/// I_{lambda,beta}. Used where the span projection degenerates; it converges to
/// the nearby critical point irrespective of its Morse index.
NewtonResult newton_refine(const Field& u0, const Problem& P, const PerturbationParams& pert, double tol,
                           std::size_t max_iter = 60);

enum class SolutionKind { ground, nodal };
const char* to_string(SolutionKind k);

struct StageRecord {
    double lambda = 0.0; ///< lambda = beta of the stage
    double level = 0.0;
    std::size_t iterations = 0;
    double gap = 0.0;
    double step_distance = 0.0; ///< ||u_k - u_{k+1}||_E
    std::string solver;         ///< "newton" or "descent"
};

struct CriticalPoint {
    Field u;
    RadialGrid grid;
    double level = 0.0;
    EnergyReport report;
    SolutionKind kind = SolutionKind::nodal;
    std::vector<std::string> provenance;
    PerturbationParams pert;
    bool converged = false;
    std::size_t iterations = 0;
    double gap = 0.0;
    double tol = 0.0;
    double bound = 0.0;              ///< C_R of the initial simplex (nodal) or segment max (ground)
    std::vector<double> sweep_max;   ///< tracked maximum outside the cones per sweep
    std::vector<StageRecord> stages; ///< continuation stages
};

struct MinimaxConfig {
    FlowConfig flow;
    std::size_t sweeps = 10; ///< simplex deformation sweeps before the projected descent
};

CriticalPoint minimax_nodal(const Problem& P, const PerturbationParams& pert, const MinimaxConfig& cfg,
                            const SimplexState& simplex);

/// Segment t -> t R^2 v(R rho) with `resolution` interior steps; single positive bump.
CriticalPoint mountain_pass_positive(const Problem& P, const MinimaxConfig& cfg, const BumpSpec& bump, double R = 1.0,
                                     std::size_t resolution = 8);

struct Schedule {
    double decay = 0.5;
    double floor = 1e-3;

    void validate() const;
};

/// Warm-started stages lambda = beta -> 0 from a solved critical point.
CriticalPoint continue_to_zero(CriticalPoint start, const Problem& P, const Schedule& schedule,
                               const MinimaxConfig& cfg, SplitMode mode, std::size_t max_parts);

CriticalPoint continuation_to_zero(const Problem& P, const PerturbationParams& pert0, const Schedule& schedule,
                                   const MinimaxConfig& cfg, const SimplexState& simplex);

struct MultiBumpOptions {
    std::size_t samples = 8;
    double inner = 0.5;
    double outer = 12.0;
    double amplitude = 2.0;
    Schedule schedule;
};

std::vector<CriticalPoint> multi_bump_search(std::size_t n, const Problem& P, const PerturbationParams& pert,
                                             const MinimaxConfig& cfg, const MultiBumpOptions& opt,
                                             std::uint64_t seed);

/// Relative E-distance modulo sign and level gap test used for deduplication.
bool same_solution(const CriticalPoint& x, const CriticalPoint& y, const Problem& P);

} // namespace kirchhoff
