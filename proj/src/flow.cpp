#include "kirchhoff/flow.hpp"

#include "kirchhoff/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace kirchhoff {

void FlowConfig::validate() const {
    if (!(tol > 0.0)) throw ConfigError("flow.tol", "must be positive");
    if (max_iter == 0) throw ConfigError("flow.max_iter", "must be positive");
    if (!(step0 > 0.0 && step0 <= 1.0)) throw ConfigError("flow.step0", "must lie in (0,1]");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("flow.backtrack", "must lie in (0,1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("flow.armijo", "must lie in (0,1)");
    if (!(eps_cone > 0.0)) throw ConfigError("flow.eps_cone", "must be positive");
}

LinearizedOperator linearize(const Field& u, const Problem& P, const PerturbationParams& pert) {
    check_dimension(u, P.grid);
    const auto& g = P.grid;
    const auto e = energy_parts(u, P);
    LinearizedOperator L;
    L.coef = P.model.a + P.model.b * e.grad_sq;
    L.shift = pert.lambda != 0.0 ? pert.lambda * std::pow(e.l2_sq, pert.alpha) : 0.0;
    L.diag.resize(g.n);
    L.off.resize(g.n - 1);
    for (std::size_t i = 0; i < g.n; ++i) {
        double k = g.face_coeffs[i];
        if (i > 0) k += g.face_coeffs[i - 1];
        L.diag[i] = L.coef * k + g.cell_volumes[i] * (P.V[i] + L.shift);
        if (i + 1 < g.n) L.off[i] = -L.coef * g.face_coeffs[i];
    }
    return L;
}

Field LinearizedOperator::apply(const Field& v) const {
    const std::size_t n = diag.size();
    if (v.size() != n + 1) throw DimensionError(n + 1, v.size());
    Field out(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        double s = diag[i] * v[i];
        if (i > 0) s += off[i - 1] * v[i - 1];
        if (i + 1 < n) s += off[i] * v[i + 1];
        out[i] = s;
    }
    return out;
}

Field LinearizedOperator::solve(const Field& rhs) const {
    const std::size_t n = diag.size();
    if (rhs.size() != n + 1) throw DimensionError(n + 1, rhs.size());
    std::vector<double> c(n, 0.0);
    std::vector<double> d(n, 0.0);
    double piv = diag[0];
    if (!std::isfinite(piv) || piv == 0.0) throw NumericalError("tridiagonal solve: bad pivot", 0);
    c[0] = n > 1 ? off[0] / piv : 0.0;
    d[0] = rhs[0] / piv;
    for (std::size_t i = 1; i < n; ++i) {
        piv = diag[i] - off[i - 1] * c[i - 1];
        if (!std::isfinite(piv) || piv == 0.0) throw NumericalError("tridiagonal solve: bad pivot", i);
        if (i + 1 < n) c[i] = off[i] / piv;
        d[i] = (rhs[i] - off[i - 1] * d[i - 1]) / piv;
    }
    Field v(n + 1);
    v[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) v[i] = d[i] - c[i] * v[i + 1];
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v[i])) throw NumericalError("tridiagonal solve: non-finite solution", i);
    }
    return v;
}

Field source_term(const Field& u, const Problem& P, const PerturbationParams& pert) {
    check_dimension(u, P.grid);
    Field s(u.size());
    const auto& f = P.model.nonlinearity;
    for (std::size_t i = 0; i < P.grid.n; ++i) {
        double x = f.f(u[i]);
        if (pert.beta != 0.0) x += pert.beta * std::copysign(std::pow(std::abs(u[i]), pert.r_exp - 1.0), u[i]);
        s[i] = P.grid.cell_volumes[i] * x;
    }
    return s;
}

Field solve_T(const Field& u, const Problem& P, const PerturbationParams& pert) {
    return linearize(u, P, pert).solve(source_term(u, P, pert));
}

double cone_distance(const Field& u, ConeSign sign, const Problem& P) {
    const auto [up, um] = split_signs(u);
    return e_norm(sign == ConeSign::plus ? um : up, P);
}

StepResult flow_step(const Field& u, const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert,
                     const Projector& project) {
    StepResult r;
    r.energy_before = energy_perturbed(u, P, pert);
    const Field d = difference(solve_T(u, P, pert), u);
    const double dn2 = e_norm_sq(d, P);
    r.gap = std::sqrt(dn2);
    if (dn2 == 0.0) {
        r.u = u;
        r.accepted = true;
        r.energy_after = r.energy_before;
        return r;
    }
    for (double s = cfg.step0; s > 1e-14; s *= cfg.backtrack) {
        Field w = axpy(s, d, u);
        clamp_boundary(w);
        if (project) w = project(w);
        const double J = energy_perturbed(w, P, pert);
        if (J <= r.energy_before - cfg.armijo * s * dn2) {
            r.u = std::move(w);
            r.accepted = true;
            r.step = s;
            r.energy_after = J;
            return r;
        }
    }
    r.u = u;
    r.accepted = false;
    r.energy_after = r.energy_before;
    return r;
}

FlowResult descend(const Field& u0, const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert,
                   const Projector& project) {
    cfg.validate();
    check_dimension(u0, P.grid);
    FlowResult res;
    res.u = u0;
    clamp_boundary(res.u);
    res.energy_trace.push_back(energy_perturbed(res.u, P, pert));
    bool have_gap = false;
    while (res.iterations < cfg.max_iter) {
        StepResult st;
        try {
            st = flow_step(res.u, cfg, P, pert, project);
        } catch (const NumericalError&) {
            // Unbounded descent (energy -> -infinity) overflows the solve.
            res.diverged = true;
            break;
        }
        if (!std::isfinite(st.energy_after)) {
            res.diverged = true;
            break;
        }
        res.fixed_point_gap = st.gap;
        have_gap = true;
        if (st.gap <= cfg.tol) {
            res.converged = true;
            break;
        }
        if (!st.accepted) {
            res.stalled = true;
            break;
        }
        res.u = std::move(st.u);
        res.energy_trace.push_back(st.energy_after);
        res.gap_trace.push_back(st.gap);
        ++res.iterations;
        have_gap = false;
    }
    if (res.diverged) {
        res.fixed_point_gap = std::numeric_limits<double>::infinity();
        res.converged = false;
    } else if (!have_gap) {
        res.fixed_point_gap = e_norm(difference(solve_T(res.u, P, pert), res.u), P);
        res.converged = res.fixed_point_gap <= cfg.tol;
    }
    res.cone_dist_plus = cone_distance(res.u, ConeSign::plus, P);
    res.cone_dist_minus = cone_distance(res.u, ConeSign::minus, P);
    const Field R = strong_residual(res.u, P, pert);
    for (double x : R.values) res.residual_sup = std::max(res.residual_sup, std::abs(x));
    return res;
}

void write_trace_csv(const std::filesystem::path& path, const FlowResult& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "iter,energy,gap\n" << std::setprecision(17);
    for (std::size_t k = 0; k < r.energy_trace.size(); ++k) {
        out << k << ',' << r.energy_trace[k] << ',';
        if (k < r.gap_trace.size()) out << r.gap_trace[k];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Field random_smooth_field(const RadialGrid& grid, std::mt19937_64& rng, double amplitude) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int terms = 2 + static_cast<int>(unit(rng) * 3.0);
    std::vector<double> A(terms), c(terms), w(terms);
    for (int k = 0; k < terms; ++k) {
        A[k] = amplitude * (2.0 * unit(rng) - 1.0);
        c[k] = 0.3 * grid.r_max * unit(rng);
        w[k] = grid.r_max * (0.03 + 0.1 * unit(rng));
    }
    Field u = sample(grid, [&](double rho) {
        double s = 0.0;
        for (int k = 0; k < terms; ++k) {
            const double z = (rho - c[k]) / w[k];
            s += A[k] * std::exp(-z * z);
        }
        return s;
    });
    clamp_boundary(u);
    return u;
}

ConeInvarianceReport check_cone_invariance(std::size_t sample_count, std::vector<double> eps_list,
                                           const Problem& P, const PerturbationParams& pert,
                                           std::uint64_t seed) {
    std::sort(eps_list.begin(), eps_list.end());
    ConeInvarianceReport rep;

    // Sign-changing shapes are drawn once and shared by every eps.
    std::mt19937_64 rng(seed);
    std::vector<std::pair<Field, Field>> shapes;
    while (shapes.size() < sample_count) {
        Field u = random_smooth_field(P.grid, rng);
        auto parts = split_signs(u);
        if (e_norm(parts.first, P) > 0.0 && e_norm(parts.second, P) > 0.0) shapes.push_back(std::move(parts));
    }

    bool prefix_ok = true;
    for (double eps : eps_list) {
        ConeInvarianceRow row;
        row.eps = eps;
        for (std::size_t s = 0; s < shapes.size(); ++s) {
            const auto& [up, um] = shapes[s];
            const bool minus_side = s % 2 == 0;
            // The offending part is rescaled so that the field sits on the cone boundary.
            const Field& off = minus_side ? up : um;
            const Field& keep = minus_side ? um : up;
            const Field u = axpy(eps / e_norm(off, P), off, keep);
            const Field v = solve_T(u, P, pert);
            const double d = cone_distance(v, minus_side ? ConeSign::minus : ConeSign::plus, P);
            row.worst_ratio = std::max(row.worst_ratio, d / eps);
            if (d < eps) ++row.invariant;
            ++row.samples;
        }
        if (prefix_ok && row.invariant == row.samples) {
            rep.calibrated_eps = eps;
        } else {
            prefix_ok = false;
        }
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace kirchhoff
