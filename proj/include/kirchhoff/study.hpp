/**
 * @file study.hpp
 * @brief Shooting and dilation oracles, solver pipelines with per-row grid
 * scaling, the energy-doubling sweep and the b -> 0 limit study.
 */
#pragma once

#include "kirchhoff/minimax.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kirchhoff {

struct OracleIntegrals {
    double grad_sq = 0.0; ///< int |grad w|^2
    double pot_sq = 0.0;  ///< int V w^2
    double F_int = 0.0;   ///< int F(w)
    double l2_sq = 0.0;   ///< int w^2
};

enum class OracleSource { shooting, dilation };
const char* to_string(OracleSource s);

/// Radial profile from the shooting ODE. Inside [0, rho_cut] values come from
/// cubic Hermite interpolation of the dense RK4 samples; beyond it from the
/// tail u_c (rho_c / rho) exp(-kappa (rho - rho_c)).
struct OracleSolution {
    Field u;
    RadialGrid grid;
    double u0 = 0.0;
    std::size_t k_nodes = 0;
    OracleIntegrals integrals;
    double energy = 0.0;
    OracleSource source = OracleSource::shooting;
    ModelParams model; ///< problem the profile solves (b = 0 for shooting)
    double scale = 1.0;         ///< dilation factor s (1 for shooting)
    double shoot_residual = 0.0; ///< |u| + |u'| at the cut
    std::size_t bisections = 0;

    // profile of the undilated shooting solution
    double step = 0.0;
    std::vector<double> prof_u;
    std::vector<double> prof_du;
    double rho_cut = 0.0;
    double tail_kappa = 0.0;

    double value_at(double rho) const;
};

struct ShootOptions {
    double tol = 1e-10;       ///< relative bisection width on u0
    double step = 0.0;        ///< RK4 step; 0 selects 1e-3 sqrt(a / V)
    double min_step = 1e-6;   ///< step-halving floor on blowup
    double amplitude_cap = 1e4;
};

/// Radial solution of -a Delta w + V w = f(w) with exactly k_nodes sign changes.
/// Throws SolverError("oracle_failure") when no bracket or a blowup persists.
OracleSolution shoot_schrodinger(const ModelParams& m, std::size_t k_nodes, const RadialGrid& grid,
                                 const ShootOptions& opt = {});

/// Positive root of a_w s^2 = a + b K s.
double dilation_factor(double a_w, double a, double b, double K);

/// u_b(rho) = w(rho / s) solves the Kirchhoff problem with (a, b) for constant V.
/// Throws UnsupportedError for non-constant V.
OracleSolution dilation_oracle(const OracleSolution& w, const ModelParams& target, const RadialGrid& grid);

// ---------------------------------------------------------------- pipelines

struct PipelineConfig {
    ModelParams model;
    double r_max = 20.0;
    std::size_t n = 8000;
    bool auto_scale = true; ///< dilate grid, bumps and tol by the expected solution scale
    MinimaxConfig minimax;
    BumpSpec ground_bump;
    BumpSpec nodal_bumps;
    std::size_t resolution = 8;
    std::optional<double> R; ///< empty: calibrate at lambda = beta = 1
    PerturbationParams pert0; ///< start of the continuation; inactive -> direct minimax
    Schedule schedule;
    ShootOptions shoot;

    PipelineConfig();
    void validate() const; ///< throws ConfigError
};

/// Problem, tolerances and bumps of one row, dilated by `scale`.
struct RowLayout {
    double b = 0.0;
    double scale = 1.0;
    Problem problem;
    MinimaxConfig minimax;
    BumpSpec ground_bump;
    BumpSpec nodal_bumps;
};

RowLayout row_layout(const PipelineConfig& c, double b, double scale);

/// int |grad u|^2 of the b = 0 ground and nodal solutions on the base grid,
/// used to predict the solution scale of each row.
struct ScaleReference {
    double ground_grad_sq = 0.0;
    double nodal_grad_sq = 0.0;
};

ScaleReference scale_reference(const PipelineConfig& c);
/// One entry of ScaleReference.
double reference_grad_sq(const PipelineConfig& c, SolutionKind kind);
double row_scale(const PipelineConfig& c, const ScaleReference& ref, double b, SolutionKind kind);

CriticalPoint ground_pipeline(const RowLayout& row, const PipelineConfig& c);
/// Calibrated simplex, then continuation_to_zero from c.pert0 (or
/// minimax_nodal if c.pert0 is inactive or `to_zero` is false).
CriticalPoint nodal_pipeline(const RowLayout& row, const PipelineConfig& c, bool to_zero = true);

// ---------------------------------------------------------------- doubling

struct DoublingRow {
    double b = 0.0;
    double c_b = 0.0;
    double m_b = 0.0;
    double margin = 0.0;
    bool complete = false;
    std::string verdict; ///< pass | fail | incomplete
    std::string note;
    double c_oracle = 0.0; ///< dilation-oracle ground level
    double ground_scale = 1.0;
    double nodal_scale = 1.0;
    std::optional<CriticalPoint> ground;
    std::optional<CriticalPoint> nodal;
};

struct DoublingReport {
    std::vector<DoublingRow> rows;
    double c0_oracle = 0.0; ///< shooting, k = 0
    double m0_oracle = 0.0; ///< shooting, k = 1
    double oracle_margin = 0.0;
    double c0_extrapolated = 0.0;
    double m0_extrapolated = 0.0;
    std::optional<double> b_star; ///< largest b with positive margins at and below it
    bool trends_ok = false;       ///< |c_b - c0| and |m_b - m0| shrink as b decreases
};

DoublingReport doubling_sweep(const PipelineConfig& c, std::vector<double> b_values);

/// `b,c_b,m_b,margin,verdict`
void write_doubling_csv(const std::filesystem::path& path, const DoublingReport& r);

// ---------------------------------------------------------------- limit

struct LimitRow {
    double b = 0.0;
    double level = 0.0;
    double distance = 0.0;   ///< ||w_b - w_0||_E on the row grid
    double energy_gap = 0.0; ///< |I(w_b) - I_0(w_0)|
    double fit_ratio = 0.0;  ///< energy_gap / (slope b)
    std::optional<double> pohozaev_res;
    bool complete = false;
    std::string note;
};

struct LimitReport {
    std::vector<LimitRow> rows; ///< in the order of b_seq
    double w0_energy = 0.0;
    double slope = 0.0; ///< least-squares gap ~ slope * b
    bool monotone = false;
    bool fit_ok = false; ///< every ratio in [1/5, 5]
};

LimitReport limit_study(const PipelineConfig& c, const std::vector<double>& b_seq);

/// `b,level,distance,energy_gap,fit_ratio`
void write_limit_csv(const std::filesystem::path& path, const LimitReport& r);

} // namespace kirchhoff
