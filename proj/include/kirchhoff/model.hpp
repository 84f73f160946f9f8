/**
 * @file model.hpp
 * @brief Problem data (a, b, V, f), perturbation parameters, hypothesis checks
 * and the discrete energy functionals.
 *
 * Every variational quantity uses the lumped mass (cell volumes) and the face
 * stiffness of RadialGrid, so that
 *   I_h(u) = 1/2 (a u'Gu + sum m V u^2) + b/4 (u'Gu)^2 - sum m F(u)
 * and its gradient is exactly L_u (u - T u) with the tridiagonal operator of
 * the flow module.
 */
#pragma once

#include "kirchhoff/radial_grid.hpp"

#include <optional>
#include <string>
#include <vector>

namespace kirchhoff {

enum class PotentialKind { constant, rational, tabulated };

/// Radial potential V(rho). Rational form is c0 + c1 / (1 + rho^2)^k.
struct Potential {
    PotentialKind kind = PotentialKind::constant;
    double c0 = 1.0;
    double c1 = 0.0;
    double k = 1.0;
    std::vector<double> table_rho; ///< strictly increasing, tabulated kind only
    std::vector<double> table_v;

    static Potential constant(double v0);
    static Potential rational(double c0, double c1, double k = 1.0);
    static Potential tabulated(std::vector<double> rho, std::vector<double> v);

    double value(double rho) const;
    /// rho * V'(rho); only for analytic kinds.
    double rho_derivative(double rho) const;
    bool differentiable() const noexcept { return kind != PotentialKind::tabulated; }
    bool is_constant() const noexcept { return kind == PotentialKind::constant; }
    /// Limit of V at infinity (last table value for tabulated data).
    double at_infinity() const;
    std::string describe() const;
};

struct PowerTerm {
    double coeff = 1.0;
    double exponent = 3.0;
};

/// f(t) = sum c_k |t|^{p_k-2} t,  F(t) = sum c_k |t|^{p_k} / p_k.
struct Nonlinearity {
    std::vector<PowerTerm> terms;

    static Nonlinearity power(double p);
    static Nonlinearity sum(std::vector<PowerTerm> terms);

    double f(double t) const;
    double df(double t) const; ///< f'(t)
    double F(double t) const;
    double max_exponent() const;
    double min_exponent() const;
    bool is_power() const noexcept;
    std::string describe() const;
};

struct ModelParams {
    double a = 1.0;
    double b = 0.0;
    Potential potential = Potential::constant(1.0);
    Nonlinearity nonlinearity = Nonlinearity::power(4.0);
    double mu = 4.0;

    double p() const { return nonlinearity.max_exponent(); }
};

/// Hard invariants of ModelParams; throws ConfigError naming the hypothesis.
void check_model(const ModelParams& m);

struct PerturbationParams {
    double lambda = 0.0;
    double beta = 0.0;
    double alpha = 0.0;
    double r_exp = 5.0;

    bool active() const noexcept { return lambda != 0.0 || beta != 0.0; }
};

/// Upper end of the admissible alpha interval, (mu-2)/(3mu+2).
double alpha_upper(double mu);
/// Lower end of the admissible r interval, max(p, 9/2).
double r_lower(double p);

/// Throws ConfigError unless lambda, beta in [0,1], alpha and r in range.
void check_perturbation(const PerturbationParams& pert, const ModelParams& m);

/// Validated construction.
PerturbationParams make_perturbation(const ModelParams& m, double lambda, double beta, double alpha,
                                     double r_exp);

/// lambda = beta = 0 with alpha and r at the midpoints of their intervals.
PerturbationParams unperturbed(const ModelParams& m);

enum class CheckStatus { pass, fail, not_checked };
const char* to_string(CheckStatus s);

struct HypothesisCheck {
    std::string name;
    CheckStatus status = CheckStatus::not_checked;
    std::string detail;
    std::optional<double> witness; ///< first violating sample (rho or t)
};

struct ValidationReport {
    std::vector<HypothesisCheck> checks;

    bool all_pass() const; ///< no check failed (not_checked is not a failure)
    const HypothesisCheck* find(const std::string& name) const;
};

/// Sampled hypothesis checks; report-only, never throws for failed checks.
ValidationReport validate_model(const ModelParams& m, const PerturbationParams& pert,
                                const RadialGrid& grid);

/// Model bound to a grid with the potential sampled once.
struct Problem {
    ModelParams model;
    RadialGrid grid;
    std::vector<double> V;      ///< V at the nodes
    std::vector<double> rho_dV; ///< rho V'(rho) at the nodes, empty for tabulated V
};

/// Runs check_model and the (V1) positivity check on the grid.
Problem make_problem(ModelParams model, RadialGrid grid);

/// Building blocks shared by the energies, residuals and projections.
struct EnergyParts {
    double grad_sq = 0.0;   ///< u'Gu
    double pot_sq = 0.0;    ///< sum m V u^2
    double l2_sq = 0.0;     ///< sum m u^2
    double F_int = 0.0;     ///< sum m F(u)
    double r_pow = 0.0;     ///< sum m |u|^r (only if requested)
};

EnergyParts energy_parts(const Field& u, const Problem& P, double r_exp = 0.0);

/// ||u||_E^2 = a u'Gu + sum m V u^2.
double e_norm_sq(const Field& u, const Problem& P);
double e_norm(const Field& u, const Problem& P);

double energy(const Field& u, const Problem& P);
double energy_perturbed(const Field& u, const Problem& P, const PerturbationParams& pert);

/// Nodal strong-form residual of the perturbed equation; entry n is zero.
Field strong_residual(const Field& u, const Problem& P, const PerturbationParams& pert);

/// Pohozaev functional; throws UnsupportedError for tabulated V.
double pohozaev_residual(const Field& u, const Problem& P, const PerturbationParams& pert);

/// I(u) - I(u+) - I(u-) - (b/2) |grad u+|^2 |grad u-|^2.
double decomposition_gap(const Field& u, const Problem& P);

struct EnergyReport {
    double e_norm_sq = 0.0;
    double grad_sq = 0.0;
    double l2_sq = 0.0;
    double energy_I = 0.0;
    double energy_pert = 0.0;
    double residual_sup = 0.0;
    std::optional<double> pohozaev_res; ///< absent for tabulated V
    double cone_dist_plus = 0.0;        ///< ||u-||_E
    double cone_dist_minus = 0.0;       ///< ||u+||_E
    std::size_t sign_changes = 0;
};

EnergyReport energy_report(const Field& u, const Problem& P, const PerturbationParams& pert);

/// Sign-change threshold used in reports: 1e-6 * max|u|.
double sign_threshold(const Field& u);

} // namespace kirchhoff
