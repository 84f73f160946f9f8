#include "kirchhoff/model.hpp"

#include "kirchhoff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace kirchhoff {

namespace {

std::string fmt_num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double signed_pow(double t, double e) {
    return std::copysign(std::pow(std::abs(t), e - 1.0), t);
}

} // namespace

Potential Potential::constant(double v0) {
    Potential v;
    v.kind = PotentialKind::constant;
    v.c0 = v0;
    v.c1 = 0.0;
    return v;
}

Potential Potential::rational(double c0, double c1, double k) {
    if (!(k > 0.0)) throw ConfigError("model.potential.k", "exponent must be positive");
    Potential v;
    v.kind = PotentialKind::rational;
    v.c0 = c0;
    v.c1 = c1;
    v.k = k;
    return v;
}

Potential Potential::tabulated(std::vector<double> rho, std::vector<double> values) {
    if (rho.size() < 2 || rho.size() != values.size()) {
        throw ConfigError("model.potential", "tabulated potential needs matching rho/values of length >= 2");
    }
    for (std::size_t i = 1; i < rho.size(); ++i) {
        if (!(rho[i] > rho[i - 1])) {
            throw ConfigError("model.potential.rho", "table radii must be strictly increasing");
        }
    }
    Potential v;
    v.kind = PotentialKind::tabulated;
    v.table_rho = std::move(rho);
    v.table_v = std::move(values);
    return v;
}

double Potential::value(double rho) const {
    switch (kind) {
    case PotentialKind::constant:
        return c0;
    case PotentialKind::rational:
        return c0 + c1 * std::pow(1.0 + rho * rho, -k);
    case PotentialKind::tabulated: {
        if (rho <= table_rho.front()) return table_v.front();
        if (rho >= table_rho.back()) return table_v.back();
        const auto it = std::upper_bound(table_rho.begin(), table_rho.end(), rho);
        const std::size_t j = static_cast<std::size_t>(it - table_rho.begin());
        const double t = (rho - table_rho[j - 1]) / (table_rho[j] - table_rho[j - 1]);
        return (1.0 - t) * table_v[j - 1] + t * table_v[j];
    }
    }
    return c0;
}

double Potential::rho_derivative(double rho) const {
    switch (kind) {
    case PotentialKind::constant:
        return 0.0;
    case PotentialKind::rational: {
        const double q = 1.0 + rho * rho;
        return -2.0 * k * c1 * rho * rho * std::pow(q, -k - 1.0);
    }
    case PotentialKind::tabulated:
        break;
    }
    throw UnsupportedError("tabulated potential has no derivative data");
}

double Potential::at_infinity() const {
    switch (kind) {
    case PotentialKind::constant:
    case PotentialKind::rational:
        return c0;
    case PotentialKind::tabulated:
        return table_v.back();
    }
    return c0;
}

std::string Potential::describe() const {
    switch (kind) {
    case PotentialKind::constant:
        return "V = " + fmt_num(c0);
    case PotentialKind::rational:
        return "V = " + fmt_num(c0) + " + " + fmt_num(c1) + "/(1+rho^2)^" + fmt_num(k);
    case PotentialKind::tabulated:
        return "V tabulated on " + std::to_string(table_rho.size()) + " radii";
    }
    return "";
}

Nonlinearity Nonlinearity::power(double p) {
    return Nonlinearity{{PowerTerm{1.0, p}}};
}

Nonlinearity Nonlinearity::sum(std::vector<PowerTerm> terms) {
    if (terms.empty()) throw ConfigError("model.nonlinearity.terms", "at least one term is required");
    return Nonlinearity{std::move(terms)};
}

double Nonlinearity::f(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term.coeff * signed_pow(t, term.exponent);
    return s;
}

double Nonlinearity::df(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term.coeff * (term.exponent - 1.0) * std::pow(std::abs(t), term.exponent - 2.0);
    return s;
}

double Nonlinearity::F(double t) const {
    double s = 0.0;
    for (const auto& term : terms) s += term.coeff * std::pow(std::abs(t), term.exponent) / term.exponent;
    return s;
}

double Nonlinearity::max_exponent() const {
    double p = -std::numeric_limits<double>::infinity();
    for (const auto& term : terms) p = std::max(p, term.exponent);
    return p;
}

double Nonlinearity::min_exponent() const {
    double p = std::numeric_limits<double>::infinity();
    for (const auto& term : terms) p = std::min(p, term.exponent);
    return p;
}

bool Nonlinearity::is_power() const noexcept {
    return terms.size() == 1 && terms.front().coeff == 1.0;
}

std::string Nonlinearity::describe() const {
    std::string s = "f = ";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i > 0) s += " + ";
        s += fmt_num(terms[i].coeff) + "|t|^" + fmt_num(terms[i].exponent - 2.0) + "t";
    }
    return s;
}

void check_model(const ModelParams& m) {
    if (!(m.a > 0.0) || !std::isfinite(m.a)) throw ConfigError("model.a", "diffusion coefficient must be positive");
    if (!(m.b >= 0.0) || !std::isfinite(m.b)) throw ConfigError("model.b", "nonlocal coefficient must be >= 0");
    if (m.nonlinearity.terms.empty()) {
        throw ConfigError("model.nonlinearity", "at least one power term is required");
    }
    for (const auto& term : m.nonlinearity.terms) {
        if (!std::isfinite(term.coeff) || !std::isfinite(term.exponent)) {
            throw ConfigError("model.nonlinearity", "non-finite term");
        }
        if (!(term.exponent > 2.0)) {
            throw ConfigError("model.nonlinearity", "exponent " + fmt_num(term.exponent) +
                                                        " must exceed 2 so that f(t)/t -> 0 at 0 (f1)");
        }
        if (!(term.exponent < 6.0)) {
            throw ConfigError("model.nonlinearity", "exponent " + fmt_num(term.exponent) +
                                                        " must be below the critical exponent 6 (f2)");
        }
    }
    const double p = m.p();
    if (!(m.mu > 2.0) || !(m.mu <= p)) {
        throw ConfigError("model.mu", "need 2 < mu <= p = " + fmt_num(p) + " (f3)");
    }
    const auto& V = m.potential;
    switch (V.kind) {
    case PotentialKind::constant:
        if (!(V.c0 > 0.0)) throw ConfigError("model.potential", "constant potential must be positive (V1)");
        break;
    case PotentialKind::rational:
        if (!std::isfinite(V.c0) || !std::isfinite(V.c1) || !(std::min(V.c0, V.c0 + V.c1) >= 0.0) ||
            !(V.c0 + std::max(V.c1, 0.0) > 0.0)) {
            throw ConfigError("model.potential", "rational potential must stay positive (V1)");
        }
        break;
    case PotentialKind::tabulated:
        for (double v : V.table_v) {
            if (!(v > 0.0)) throw ConfigError("model.potential", "tabulated values must be positive (V1)");
        }
        break;
    }
}

double alpha_upper(double mu) { return (mu - 2.0) / (3.0 * mu + 2.0); }

double r_lower(double p) { return std::max(p, 4.5); }

void check_perturbation(const PerturbationParams& pert, const ModelParams& m) {
    if (!(pert.lambda >= 0.0 && pert.lambda <= 1.0)) {
        throw ConfigError("perturbation.lambda", "must lie in [0,1]");
    }
    if (!(pert.beta >= 0.0 && pert.beta <= 1.0)) throw ConfigError("perturbation.beta", "must lie in [0,1]");
    const double hi = alpha_upper(m.mu);
    if (!(pert.alpha > 0.0 && pert.alpha < hi)) {
        throw ConfigError("perturbation.alpha", "alpha = " + fmt_num(pert.alpha) +
                                                    " outside (0,(mu-2)/(3mu+2)) = (0," + fmt_num(hi) +
                                                    ") required by the perturbed problem");
    }
    const double lo = r_lower(m.p());
    if (!(pert.r_exp > lo && pert.r_exp < 6.0)) {
        throw ConfigError("perturbation.r", "r = " + fmt_num(pert.r_exp) + " outside (max(p,9/2),6) = (" +
                                                fmt_num(lo) + ",6) required by the perturbed problem");
    }
}

PerturbationParams make_perturbation(const ModelParams& m, double lambda, double beta, double alpha,
                                     double r_exp) {
    PerturbationParams pert{lambda, beta, alpha, r_exp};
    check_perturbation(pert, m);
    return pert;
}

PerturbationParams unperturbed(const ModelParams& m) {
    return make_perturbation(m, 0.0, 0.0, 0.5 * alpha_upper(m.mu), 0.5 * (r_lower(m.p()) + 6.0));
}

const char* to_string(CheckStatus s) {
    switch (s) {
    case CheckStatus::pass:
        return "pass";
    case CheckStatus::fail:
        return "fail";
    case CheckStatus::not_checked:
        return "not_checked";
    }
    return "?";
}

bool ValidationReport::all_pass() const {
    return std::none_of(checks.begin(), checks.end(),
                        [](const HypothesisCheck& c) { return c.status == CheckStatus::fail; });
}

const HypothesisCheck* ValidationReport::find(const std::string& name) const {
    for (const auto& c : checks) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

ValidationReport validate_model(const ModelParams& m, const PerturbationParams& pert, const RadialGrid& grid) {
    ValidationReport rep;
    const auto& V = m.potential;
    const auto& f = m.nonlinearity;

    {
        HypothesisCheck c{"(V1)", CheckStatus::pass, "", std::nullopt};
        double vmin = std::numeric_limits<double>::infinity();
        for (double rho : grid.nodes) {
            const double v = V.value(rho);
            if (v < vmin) vmin = v;
            if (!(v > 0.0) && !c.witness) c.witness = rho;
        }
        if (c.witness) c.status = CheckStatus::fail;
        c.detail = "min V on grid = " + fmt_num(vmin);
        rep.checks.push_back(c);
    }
    {
        HypothesisCheck c{"(V2)", CheckStatus::pass, "", std::nullopt};
        if (!V.differentiable()) {
            c.status = CheckStatus::not_checked;
            c.detail = "tabulated potential: no derivative data";
        } else {
            const double w = (m.mu - 2.0) / m.mu;
            double worst = std::numeric_limits<double>::infinity();
            for (double rho : grid.nodes) {
                const double g = w * V.value(rho) - V.rho_derivative(rho);
                worst = std::min(worst, g);
                if (g < 0.0 && !c.witness) c.witness = rho;
            }
            if (c.witness) c.status = CheckStatus::fail;
            c.detail = "min ((mu-2)/mu)V - rho V' on grid = " + fmt_num(worst);
        }
        rep.checks.push_back(c);
    }
    rep.checks.push_back({"(V2) integrability", CheckStatus::not_checked,
                          "(grad V, x) in L^inf + L^{3/2} is not certified by grid sampling", std::nullopt});
    {
        HypothesisCheck c{"(f1)", CheckStatus::pass, "", std::nullopt};
        double prev = std::numeric_limits<double>::infinity();
        for (int e = -2; e >= -8; --e) {
            const double t = std::pow(10.0, e);
            const double ratio = std::abs(f.f(t) / t);
            if (!(ratio < prev) && !c.witness) c.witness = t;
            prev = ratio;
        }
        if (!(f.min_exponent() > 2.0) && !c.witness) c.witness = 0.0;
        if (c.witness) c.status = CheckStatus::fail;
        c.detail = "|f(t)/t| at t=1e-8: " + fmt_num(prev);
        rep.checks.push_back(c);
    }
    {
        HypothesisCheck c{"(f2)", CheckStatus::pass, "", std::nullopt};
        const double p = f.max_exponent();
        double cmax = 0.0;
        for (int e = 0; e <= 8; ++e) {
            const double t = std::pow(10.0, e);
            cmax = std::max(cmax, std::abs(f.f(t)) / std::pow(t, p - 1.0));
        }
        if (!(p < 6.0)) {
            c.status = CheckStatus::fail;
            c.witness = p;
        }
        c.detail = "sup |f(t)|/t^(p-1) on [1,1e8] = " + fmt_num(cmax) + ", p = " + fmt_num(p);
        rep.checks.push_back(c);
    }
    {
        HypothesisCheck c{"(f3)", CheckStatus::pass, "", std::nullopt};
        for (int sgn : {1, -1}) {
            for (int i = 0; i <= 120 && !c.witness; ++i) {
                const double t = sgn * std::pow(10.0, -6.0 + 0.1 * i);
                const double tf = t * f.f(t);
                const double muF = m.mu * f.F(t);
                if (!(muF > 0.0) || tf < muF - 1e-12 * std::abs(tf)) c.witness = t;
            }
        }
        if (c.witness) c.status = CheckStatus::fail;
        c.detail = "t f(t) >= mu F(t) > 0 on +-[1e-6, 1e6], mu = " + fmt_num(m.mu);
        rep.checks.push_back(c);
    }
    {
        const double hi = alpha_upper(m.mu);
        HypothesisCheck c{"alpha range", CheckStatus::pass, "(0," + fmt_num(hi) + ")", std::nullopt};
        if (!(pert.alpha > 0.0 && pert.alpha < hi)) {
            c.status = CheckStatus::fail;
            c.witness = pert.alpha;
        }
        rep.checks.push_back(c);
    }
    {
        const double lo = r_lower(m.p());
        HypothesisCheck c{"r range", CheckStatus::pass, "(" + fmt_num(lo) + ",6)", std::nullopt};
        if (!(pert.r_exp > lo && pert.r_exp < 6.0)) {
            c.status = CheckStatus::fail;
            c.witness = pert.r_exp;
        }
        rep.checks.push_back(c);
    }
    return rep;
}

Problem make_problem(ModelParams model, RadialGrid grid) {
    check_model(model);
    Problem P;
    P.V.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        P.V[i] = model.potential.value(grid.nodes[i]);
        if (!(P.V[i] > 0.0)) {
            throw ConfigError("model.potential", "V <= 0 at rho = " + fmt_num(grid.nodes[i]) + " (V1)");
        }
    }
    if (model.potential.differentiable()) {
        P.rho_dV.resize(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) P.rho_dV[i] = model.potential.rho_derivative(grid.nodes[i]);
    }
    P.model = std::move(model);
    P.grid = std::move(grid);
    return P;
}

EnergyParts energy_parts(const Field& u, const Problem& P, double r_exp) {
    check_dimension(u, P.grid);
    EnergyParts e;
    e.grad_sq = grad_norm_sq(u, P.grid);
    const auto& m = P.grid.cell_volumes;
    const auto& f = P.model.nonlinearity;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double x = u[i];
        if (x == 0.0) continue;
        const double x2 = x * x;
        e.pot_sq += m[i] * P.V[i] * x2;
        e.l2_sq += m[i] * x2;
        e.F_int += m[i] * f.F(x);
        if (r_exp > 0.0) e.r_pow += m[i] * std::pow(std::abs(x), r_exp);
    }
    return e;
}

double e_norm_sq(const Field& u, const Problem& P) {
    const auto e = energy_parts(u, P);
    return P.model.a * e.grad_sq + e.pot_sq;
}

double e_norm(const Field& u, const Problem& P) { return std::sqrt(e_norm_sq(u, P)); }

namespace {

double energy_from_parts(const EnergyParts& e, const ModelParams& m) {
    return 0.5 * (m.a * e.grad_sq + e.pot_sq) + 0.25 * m.b * e.grad_sq * e.grad_sq - e.F_int;
}

} // namespace

double energy(const Field& u, const Problem& P) {
    return energy_from_parts(energy_parts(u, P), P.model);
}

double energy_perturbed(const Field& u, const Problem& P, const PerturbationParams& pert) {
    const auto e = energy_parts(u, P, pert.beta != 0.0 ? pert.r_exp : 0.0);
    double I = energy_from_parts(e, P.model);
    if (pert.lambda != 0.0) {
        I += pert.lambda / (2.0 * (1.0 + pert.alpha)) * std::pow(e.l2_sq, 1.0 + pert.alpha);
    }
    if (pert.beta != 0.0) I -= pert.beta / pert.r_exp * e.r_pow;
    return I;
}

Field strong_residual(const Field& u, const Problem& P, const PerturbationParams& pert) {
    check_dimension(u, P.grid);
    const auto& g = P.grid;
    const auto e = energy_parts(u, P);
    const double coef = P.model.a + P.model.b * e.grad_sq;
    const double shift = pert.lambda != 0.0 ? pert.lambda * std::pow(e.l2_sq, pert.alpha) : 0.0;
    Field R(u.size());
    for (std::size_t i = 0; i < g.n; ++i) {
        double Gu = g.face_coeffs[i] * (u[i] - u[i + 1]);
        if (i > 0) Gu += g.face_coeffs[i - 1] * (u[i] - u[i - 1]);
        double src = P.model.nonlinearity.f(u[i]);
        if (pert.beta != 0.0) src += pert.beta * signed_pow(u[i], pert.r_exp);
        R[i] = coef * Gu / g.cell_volumes[i] + (P.V[i] + shift) * u[i] - src;
    }
    return R;
}

double pohozaev_residual(const Field& u, const Problem& P, const PerturbationParams& pert) {
    if (P.rho_dV.empty()) {
        throw UnsupportedError("Pohozaev residual needs an analytic potential; tabulated V is not supported");
    }
    const auto e = energy_parts(u, P, pert.beta != 0.0 ? pert.r_exp : 0.0);
    double radial = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) radial += P.grid.cell_volumes[i] * P.rho_dV[i] * u[i] * u[i];
    const double a = P.model.a;
    const double b = P.model.b;
    double res = 0.5 * a * e.grad_sq + 1.5 * e.pot_sq + 0.5 * radial + 0.5 * b * e.grad_sq * e.grad_sq -
                 3.0 * e.F_int;
    if (pert.lambda != 0.0) res += 1.5 * pert.lambda * std::pow(e.l2_sq, 1.0 + pert.alpha);
    if (pert.beta != 0.0) res -= 3.0 * pert.beta / pert.r_exp * e.r_pow;
    return res;
}

double decomposition_gap(const Field& u, const Problem& P) {
    const auto [up, um] = split_signs(u);
    const double Kp = grad_norm_sq(up, P.grid);
    const double Km = grad_norm_sq(um, P.grid);
    return energy(u, P) - energy(up, P) - energy(um, P) - 0.5 * P.model.b * Kp * Km;
}

double sign_threshold(const Field& u) {
    double mx = 0.0;
    for (double x : u.values) mx = std::max(mx, std::abs(x));
    return 1e-6 * mx;
}

EnergyReport energy_report(const Field& u, const Problem& P, const PerturbationParams& pert) {
    EnergyReport r;
    const auto e = energy_parts(u, P);
    r.grad_sq = e.grad_sq;
    r.l2_sq = e.l2_sq;
    r.e_norm_sq = P.model.a * e.grad_sq + e.pot_sq;
    r.energy_I = energy(u, P);
    r.energy_pert = energy_perturbed(u, P, pert);
    const Field R = strong_residual(u, P, pert);
    for (double x : R.values) r.residual_sup = std::max(r.residual_sup, std::abs(x));
    if (!P.rho_dV.empty()) r.pohozaev_res = pohozaev_residual(u, P, pert);
    const auto [up, um] = split_signs(u);
    r.cone_dist_plus = e_norm(um, P);
    r.cone_dist_minus = e_norm(up, P);
    r.sign_changes = count_sign_changes(u, sign_threshold(u));
    return r;
}

} // namespace kirchhoff
