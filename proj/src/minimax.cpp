#include "kirchhoff/minimax.hpp"

#include "kirchhoff/errors.hpp"

#include <boost/math/tools/minima.hpp>

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace kirchhoff {

namespace {

std::string num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

double min_cone_distance(const Field& u, const Problem& P) {
    return std::min(cone_distance(u, ConeSign::plus, P), cone_distance(u, ConeSign::minus, P));
}

Field positive_part(const Field& w) {
    Field out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = std::max(w[i], 0.0);
    return out;
}

} // namespace

// ---------------------------------------------------------------- bumps

void BumpSpec::validate(double r_max) const {
    if (intervals.empty()) throw ConfigError("simplex.bumps", "at least one bump is required");
    if (signs.size() != intervals.size()) throw ConfigError("simplex.bumps", "one sign per interval is required");
    if (!(amplitude > 0.0)) throw ConfigError("simplex.amplitude", "must be positive");
    for (std::size_t i = 0; i < intervals.size(); ++i) {
        const auto [l, r] = intervals[i];
        if (!(l >= 0.0 && l < r && r < r_max)) {
            throw ConfigError("simplex.bumps", "interval [" + num(l) + "," + num(r) + "] must lie inside (0," +
                                                   num(r_max) + ")");
        }
        if (signs[i] != 1 && signs[i] != -1) throw ConfigError("simplex.bumps", "signs must be +1 or -1");
    }
    auto order = intervals;
    std::sort(order.begin(), order.end());
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (order[i].first < order[i - 1].second) throw ConfigError("simplex.bumps", "bump supports must be disjoint");
    }
}

double BumpSpec::bump(std::size_t i, double rho) const {
    const auto [l, r] = intervals[i];
    const double c = 0.5 * (l + r);
    const double w = 0.5 * (r - l);
    const double t = (rho - c) / w;
    if (std::abs(t) >= 1.0) return 0.0;
    const double q = 1.0 - t * t;
    return signs[i] * amplitude * q * q;
}

Field BumpSpec::sample_bump(std::size_t i, const RadialGrid& grid, double R) const {
    const auto [l, r] = intervals[i];
    if (!(R > 0.0)) throw ConfigError("simplex.R", "must be positive");
    if (r / R >= grid.r_max) throw ConfigError("simplex.R", "scaled bump support leaves the grid");
    if ((r - l) / R < 4.0 * grid.h) {
        throw ConfigError("simplex.R", "scaled bump [" + num(l / R) + "," + num(r / R) +
                                           "] spans fewer than 4 grid cells");
    }
    Field u = sample(grid, [&](double rho) { return R * R * bump(i, R * rho); });
    clamp_boundary(u);
    return u;
}

BumpSpec BumpSpec::dilated(double factor) const {
    BumpSpec out = *this;
    for (auto& [l, r] : out.intervals) {
        l *= factor;
        r *= factor;
    }
    return out;
}

BumpSpec alternating_bumps(std::size_t n, double inner, double outer, double amplitude, int first_sign) {
    if (n == 0 || !(outer > inner) || !(inner >= 0.0)) {
        throw ConfigError("multi_bump", "need n >= 1 and 0 <= inner < outer");
    }
    BumpSpec b;
    b.amplitude = amplitude;
    const double w = (outer - inner) / static_cast<double>(n);
    int sign = first_sign >= 0 ? 1 : -1;
    for (std::size_t k = 0; k < n; ++k) {
        b.intervals.emplace_back(inner + w * static_cast<double>(k), inner + w * static_cast<double>(k + 1));
        b.signs.push_back(sign);
        sign = -sign;
    }
    return b;
}

// ---------------------------------------------------------------- simplex

std::size_t SimplexState::find(std::size_t i, std::size_t j) const {
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k][0] == i && index[k][1] == j) return k;
    }
    throw std::out_of_range("simplex node (" + std::to_string(i) + "," + std::to_string(j) + ") not present");
}

SimplexState build_phi0(const BumpSpec& spec, double R, std::size_t resolution, const RadialGrid& grid) {
    spec.validate(grid.r_max);
    if (spec.intervals.size() != 2 || spec.signs[0] == spec.signs[1]) {
        throw ConfigError("simplex.bumps", "the simplex needs exactly two bumps of opposite sign");
    }
    if (resolution < 2) throw ConfigError("simplex.resolution", "must be at least 2");
    const std::size_t neg = spec.signs[0] < 0 ? 0 : 1;
    const Field v1 = spec.sample_bump(neg, grid, R);
    const Field v2 = spec.sample_bump(1 - neg, grid, R);

    SimplexState s;
    s.resolution = resolution;
    s.R = R;
    const double m = static_cast<double>(resolution);
    for (std::size_t i = 0; i <= resolution; ++i) {
        for (std::size_t j = 0; i + j <= resolution; ++j) {
            Field u = axpy(static_cast<double>(i) / m, v1, scaled(static_cast<double>(j) / m, v2));
            clamp_boundary(u);
            s.index.push_back({i, j});
            s.nodes.push_back(std::move(u));
            s.pinned.push_back(i + j == resolution || (i == 0 && j == 0));
        }
    }
    return s;
}

Calibration calibrate_R(const SimplexBuilder& builder, const Problem& P, const PerturbationParams& pert, double R0,
                        double R_cap) {
    Calibration cal;
    std::string why;
    for (double R = R0; R <= R_cap; R *= 2.0) {
        SimplexState s;
        try {
            s = builder(R);
        } catch (const ConfigError& e) {
            why = e.what();
            break;
        }
        double edge = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < s.nodes.size(); ++k) {
            if (s.index[k][0] + s.index[k][1] == s.resolution) edge = std::max(edge, energy_perturbed(s.nodes[k], P, pert));
        }
        cal.transcript.emplace_back(R, edge);
        if (edge < 0.0) {
            cal.R = R;
            return cal;
        }
    }
    std::string profile;
    for (const auto& [R, e] : cal.transcript) profile += " R=" + num(R) + ":" + num(e);
    throw SolverError("infeasible_initializer", "outer edge energy stays nonnegative up to R=" + num(R_cap) + ";" +
                                                    profile + (why.empty() ? "" : "; " + why));
}

double simplex_bound(const SimplexState& s, const Problem& P, const PerturbationParams& pert) {
    PerturbationParams top = pert;
    top.lambda = 1.0;
    top.beta = 0.0;
    double c = -std::numeric_limits<double>::infinity();
    for (const auto& u : s.nodes) c = std::max(c, energy_perturbed(u, P, top));
    return c;
}

// ---------------------------------------------------------------- span energy

SpanEnergy::SpanEnergy(const std::vector<Field>& parts, const Problem& P, const PerturbationParams& pert)
    : model_(P.model), pert_(pert) {
    const auto k = static_cast<Eigen::Index>(parts.size());
    const auto& terms = P.model.nonlinearity.terms;
    G_.resize(k, k);
    E_.resize(k, k);
    L_.resize(k);
    B_ = Eigen::VectorXd::Zero(k);
    Pw_.resize(k, static_cast<Eigen::Index>(terms.size()));
    for (Eigen::Index j = 0; j < k; ++j) {
        for (Eigen::Index l = j; l < k; ++l) {
            G_(j, l) = G_(l, j) = stiffness_dot(parts[j], parts[l], P.grid);
        }
    }
    E_ = P.model.a * G_;
    const auto& m = P.grid.cell_volumes;
    for (Eigen::Index j = 0; j < k; ++j) {
        double pot = 0.0, l2 = 0.0, br = 0.0;
        std::vector<double> pw(terms.size(), 0.0);
        const Field& u = parts[j];
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double x = u[i];
            if (x == 0.0) continue;
            pot += m[i] * P.V[i] * x * x;
            l2 += m[i] * x * x;
            const double ax = std::abs(x);
            for (std::size_t t = 0; t < terms.size(); ++t) pw[t] += m[i] * std::pow(ax, terms[t].exponent);
            if (pert.beta != 0.0) br += m[i] * std::pow(ax, pert.r_exp);
        }
        E_(j, j) += pot;
        L_(j) = l2;
        B_(j) = br;
        for (std::size_t t = 0; t < terms.size(); ++t) Pw_(j, static_cast<Eigen::Index>(t)) = pw[t];
    }
}

double SpanEnergy::value(const Eigen::VectorXd& s) const {
    const double K = s.dot(G_ * s);
    double v = 0.5 * s.dot(E_ * s) + 0.25 * model_.b * K * K;
    if (pert_.lambda != 0.0) {
        const double Lam = s.cwiseProduct(s).dot(L_);
        v += pert_.lambda / (2.0 * (1.0 + pert_.alpha)) * std::pow(Lam, 1.0 + pert_.alpha);
    }
    const auto& terms = model_.nonlinearity.terms;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const double p = terms[t].exponent;
            v -= terms[t].coeff * std::pow(s(j), p) * Pw_(j, static_cast<Eigen::Index>(t)) / p;
        }
        if (pert_.beta != 0.0) v -= pert_.beta / pert_.r_exp * std::pow(s(j), pert_.r_exp) * B_(j);
    }
    return v;
}

Eigen::VectorXd SpanEnergy::gradient(const Eigen::VectorXd& s) const {
    const Eigen::VectorXd Gs = G_ * s;
    const double K = s.dot(Gs);
    Eigen::VectorXd g = E_ * s + model_.b * K * Gs;
    if (pert_.lambda != 0.0) {
        const double Lam = s.cwiseProduct(s).dot(L_);
        g += pert_.lambda * std::pow(Lam, pert_.alpha) * L_.cwiseProduct(s);
    }
    const auto& terms = model_.nonlinearity.terms;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            g(j) -= terms[t].coeff * std::pow(s(j), terms[t].exponent - 1.0) * Pw_(j, static_cast<Eigen::Index>(t));
        }
        if (pert_.beta != 0.0) g(j) -= pert_.beta * std::pow(s(j), pert_.r_exp - 1.0) * B_(j);
    }
    return g;
}

Eigen::MatrixXd SpanEnergy::hessian(const Eigen::VectorXd& s) const {
    const Eigen::VectorXd Gs = G_ * s;
    const double K = s.dot(Gs);
    Eigen::MatrixXd H = E_ + model_.b * K * G_ + 2.0 * model_.b * Gs * Gs.transpose();
    if (pert_.lambda != 0.0) {
        const double Lam = s.cwiseProduct(s).dot(L_);
        const Eigen::VectorXd Ls = L_.cwiseProduct(s);
        H += 2.0 * pert_.lambda * pert_.alpha * std::pow(Lam, pert_.alpha - 1.0) * Ls * Ls.transpose();
        H.diagonal() += pert_.lambda * std::pow(Lam, pert_.alpha) * L_;
    }
    const auto& terms = model_.nonlinearity.terms;
    for (Eigen::Index j = 0; j < s.size(); ++j) {
        for (std::size_t t = 0; t < terms.size(); ++t) {
            const double p = terms[t].exponent;
            H(j, j) -= terms[t].coeff * (p - 1.0) * std::pow(s(j), p - 2.0) * Pw_(j, static_cast<Eigen::Index>(t));
        }
        if (pert_.beta != 0.0) {
            H(j, j) -= pert_.beta * (pert_.r_exp - 1.0) * std::pow(s(j), pert_.r_exp - 2.0) * B_(j);
        }
    }
    return H;
}

// ---------------------------------------------------------------- projection

std::vector<Field> split_parts(const Field& w, SplitMode mode, std::size_t max_parts, const Problem& P) {
    std::vector<Field> parts;
    if (mode == SplitMode::positive_ray) {
        Field p = positive_part(w);
        if (std::any_of(p.values.begin(), p.values.end(), [](double x) { return x != 0.0; })) parts.push_back(p);
        return parts;
    }
    if (mode == SplitMode::signs) {
        auto [up, um] = split_signs(w);
        for (Field* f : {&up, &um}) {
            if (std::any_of(f->values.begin(), f->values.end(), [](double x) { return x != 0.0; })) {
                parts.push_back(std::move(*f));
            }
        }
        return parts;
    }

    // Maximal same-sign runs; zero entries do not break a run.
    std::vector<std::pair<std::size_t, std::size_t>> runs; // [begin, end)
    int sign = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        const int s = w[i] > 0.0 ? 1 : -1;
        if (s != sign) {
            if (!runs.empty()) runs.back().second = i;
            runs.emplace_back(i, w.size());
            sign = s;
        }
    }
    auto make = [&](std::size_t b, std::size_t e) {
        Field f(w.size());
        for (std::size_t i = b; i < e; ++i) f[i] = w[i];
        return f;
    };
    while (runs.size() > std::max<std::size_t>(max_parts, 1)) {
        std::size_t smallest = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < runs.size(); ++k) {
            const double nrm = e_norm_sq(make(runs[k].first, runs[k].second), P);
            if (nrm < best) {
                best = nrm;
                smallest = k;
            }
        }
        if (smallest > 0) {
            runs[smallest - 1].second = runs[smallest].second;
            runs.erase(runs.begin() + static_cast<std::ptrdiff_t>(smallest));
        } else {
            runs[1].first = runs[0].first;
            runs.erase(runs.begin());
        }
    }
    for (const auto& [b, e] : runs) parts.push_back(make(b, e));
    return parts;
}

namespace {

constexpr int kBrentBits = 40;

/// First interior local maximum of phi on a geometric scan of [lo, hi].
std::optional<double> first_max_on_scan(const std::function<double(double)>& phi, double lo, double hi,
                                        double factor = 1.1) {
    double t_prev = lo, t = lo * factor;
    double f_prev = phi(t_prev), f = phi(t);
    while (t * factor <= hi) {
        const double t_next = t * factor;
        const double f_next = phi(t_next);
        if (f >= f_prev && f > f_next) {
            const auto r = boost::math::tools::brent_find_minima([&](double x) { return -phi(x); }, t_prev, t_next,
                                                                 kBrentBits);
            return r.first;
        }
        t_prev = t;
        f_prev = f;
        t = t_next;
        f = f_next;
    }
    return std::nullopt;
}

bool negative_definite(const Eigen::MatrixXd& H) {
    Eigen::LLT<Eigen::MatrixXd> llt(-H);
    return llt.info() == Eigen::Success;
}

/// Newton iteration for grad g = 0 from s. With `require_max` the Hessian
/// must stay negative definite; otherwise any nondegenerate stationary point
/// whose diagonal curvatures are negative is accepted.
std::optional<Eigen::VectorXd> newton_critical(const SpanEnergy& g, Eigen::VectorXd s, bool require_max) {
    for (int it = 0; it < 80; ++it) {
        const Eigen::MatrixXd H = g.hessian(s);
        Eigen::VectorXd step;
        if (require_max) {
            Eigen::LLT<Eigen::MatrixXd> llt(-H);
            if (llt.info() != Eigen::Success) return std::nullopt;
            step = llt.solve(g.gradient(s));
        } else {
            Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
            if (!lu.isInvertible()) return std::nullopt;
            step = -lu.solve(g.gradient(s));
        }
        // keep every coefficient positive
        double damp = 1.0;
        while (((s + damp * step).array() <= 0.25 * s.array()).any() && damp > 1e-8) damp *= 0.5;
        s += damp * step;
        if (!s.allFinite()) return std::nullopt;
        if ((damp * step).cwiseAbs().maxCoeff() <= 1e-14 * std::max(1.0, s.cwiseAbs().maxCoeff())) break;
    }
    const Eigen::VectorXd grad = g.gradient(s);
    const Eigen::MatrixXd H = g.hessian(s);
    const double scale = std::max(1.0, std::abs(g.value(s)));
    if (grad.cwiseProduct(s).cwiseAbs().maxCoeff() > 1e-8 * scale) return std::nullopt;
    if (require_max ? !negative_definite(H) : (H.diagonal().array() >= 0.0).any()) return std::nullopt;
    return s;
}

std::optional<Eigen::VectorXd> newton_any(const SpanEnergy& g, const Eigen::VectorXd& s) {
    if (auto r = newton_critical(g, s, true)) return r;
    if (g.dim() > 1) return newton_critical(g, s, false);
    return std::nullopt;
}

} // namespace

std::optional<Eigen::VectorXd> first_local_max(const SpanEnergy& g, const std::optional<Eigen::VectorXd>& warm) {
    const auto k = static_cast<Eigen::Index>(g.dim());
    if (k == 0) return std::nullopt;
    if (warm) {
        if (auto s = newton_any(g, *warm)) return s;
    }
    const auto diag = first_max_on_scan(
        [&](double t) { return g.value(Eigen::VectorXd::Constant(k, t)); }, 1e-6, 1e6);
    if (!diag) return std::nullopt;
    Eigen::VectorXd s = Eigen::VectorXd::Constant(k, *diag);
    if (auto r = newton_any(g, s)) return r;

    for (int round = 0; round < 30; ++round) {
        const Eigen::VectorXd before = s;
        for (Eigen::Index j = 0; j < k; ++j) {
            auto phi = [&](double t) {
                Eigen::VectorXd x = s;
                x(j) = t;
                return g.value(x);
            };
            if (auto t = first_max_on_scan(phi, 1e-4 * s(j), 1e4 * s(j))) s(j) = *t;
        }
        if ((s - before).cwiseAbs().maxCoeff() <= 1e-10 * s.cwiseAbs().maxCoeff()) break;
    }
    return newton_any(g, s);
}

std::optional<ProjectionResult> project_span(const Field& w, SplitMode mode, std::size_t max_parts, const Problem& P,
                                             const PerturbationParams& pert, bool warm) {
    const auto parts = split_parts(w, mode, max_parts, P);
    const std::size_t need = mode == SplitMode::signs ? 2 : 1;
    if (parts.size() < need) return std::nullopt;
    const SpanEnergy g(parts, P, pert);
    std::optional<Eigen::VectorXd> start;
    if (warm) start = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(parts.size()));
    const auto s = first_local_max(g, start);
    if (!s) return std::nullopt;
    ProjectionResult r;
    r.u = Field(w.size());
    for (std::size_t j = 0; j < parts.size(); ++j) r.u = axpy((*s)(static_cast<Eigen::Index>(j)), parts[j], r.u);
    clamp_boundary(r.u);
    r.s = *s;
    r.parts = parts.size();
    return r;
}

ProjectedDescentResult projected_descent(const Field& u0, SplitMode mode, std::size_t max_parts,
                                         const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert) {
    cfg.validate();
    const auto first = project_span(u0, mode, max_parts, P, pert, false);
    if (!first) {
        throw SolverError("projection_failed", "no local maximum of the energy on the span of the initial parts");
    }
    ProjectedDescentResult res;
    res.u = first->u;
    double J = energy_perturbed(res.u, P, pert);
    res.energy_trace.push_back(J);
    double best_gap = std::numeric_limits<double>::infinity();
    std::size_t best_at = 0;
    while (true) {
        const Field d = difference(solve_T(res.u, P, pert), res.u);
        const double dn2 = e_norm_sq(d, P);
        res.gap = std::sqrt(dn2);
        if (res.gap <= cfg.tol) {
            res.converged = true;
            break;
        }
        if (res.iterations >= cfg.max_iter) break;
        // stagnation: no 1% gain in the gap over 500 steps
        if (res.gap < 0.99 * best_gap) {
            best_gap = res.gap;
            best_at = res.iterations;
        } else if (res.iterations - best_at >= 500) {
            break;
        }
        bool accepted = false;
        for (double s = cfg.step0; s > 1e-14 && !accepted; s *= cfg.backtrack) {
            Field w = axpy(s, d, res.u);
            clamp_boundary(w);
            const auto q = project_span(w, mode, max_parts, P, pert, true);
            if (!q) continue;
            const double J1 = energy_perturbed(q->u, P, pert);
            if (J1 <= J - cfg.armijo * s * dn2) {
                res.u = q->u;
                J = J1;
                accepted = true;
            }
        }
        if (!accepted) break;
        res.energy_trace.push_back(J);
        ++res.iterations;
    }
    return res;
}

// ---------------------------------------------------------------- newton

namespace {

double fixed_point_gap(const Field& u, const Problem& P, const PerturbationParams& pert) {
    try {
        return e_norm(difference(solve_T(u, P, pert), u), P);
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
    }
}

} // namespace

NewtonResult newton_refine(const Field& u0, const Problem& P, const PerturbationParams& pert, double tol,
                           std::size_t max_iter) {
    const auto& grid = P.grid;
    const std::size_t n = grid.n;
    const auto& m = grid.cell_volumes;
    const auto& f = P.model.nonlinearity;
    NewtonResult res;
    res.u = u0;
    clamp_boundary(res.u);
    res.gap = fixed_point_gap(res.u, P, pert);
    while (res.gap > tol && res.iterations < max_iter) {
        const Field& u = res.u;
        const auto L = linearize(u, P, pert);
        const Field F = difference(L.apply(u), source_term(u, P, pert));

        // J = L + diag(-m f'(u) - beta (r-1) m |u|^{r-2}) + 2b g g' + 2 lambda alpha Lam^{alpha-1} q q'
        Eigen::VectorXd g(n), q(n), rhs(n);
        double lam_sq = 0.0;
        for (std::size_t i = 0; i < n; ++i) lam_sq += m[i] * u[i] * u[i];
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(3 * n);
        for (std::size_t i = 0; i < n; ++i) {
            double gi = grid.face_coeffs[i] * (u[i] - u[i + 1]);
            if (i > 0) gi += grid.face_coeffs[i - 1] * (u[i] - u[i - 1]);
            g(i) = gi;
            q(i) = m[i] * u[i];
            rhs(i) = F[i];
            double d = L.diag[i] - m[i] * f.df(u[i]);
            if (pert.beta != 0.0) d -= pert.beta * (pert.r_exp - 1.0) * m[i] * std::pow(std::abs(u[i]), pert.r_exp - 2.0);
            const auto ii = static_cast<Eigen::Index>(i);
            trip.emplace_back(ii, ii, d);
            if (i + 1 < n) {
                trip.emplace_back(ii, ii + 1, L.off[i]);
                trip.emplace_back(ii + 1, ii, L.off[i]);
            }
        }
        Eigen::SparseMatrix<double> T(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        T.setFromTriplets(trip.begin(), trip.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(T);
        if (lu.info() != Eigen::Success) break;

        // Woodbury for the low-rank part.
        std::vector<Eigen::VectorXd> U;
        std::vector<double> C;
        if (P.model.b != 0.0) {
            U.push_back(g);
            C.push_back(2.0 * P.model.b);
        }
        if (pert.lambda != 0.0 && lam_sq > 0.0) {
            U.push_back(q);
            C.push_back(2.0 * pert.lambda * pert.alpha * std::pow(lam_sq, pert.alpha - 1.0));
        }
        Eigen::VectorXd delta = lu.solve(rhs);
        if (!U.empty()) {
            const auto k = static_cast<Eigen::Index>(U.size());
            Eigen::MatrixXd Um(static_cast<Eigen::Index>(n), k);
            for (Eigen::Index j = 0; j < k; ++j) Um.col(j) = U[static_cast<std::size_t>(j)];
            const Eigen::MatrixXd TinvU = lu.solve(Um);
            Eigen::MatrixXd S = Um.transpose() * TinvU;
            for (Eigen::Index j = 0; j < k; ++j) S(j, j) += 1.0 / C[static_cast<std::size_t>(j)];
            delta -= TinvU * S.fullPivLu().solve(Um.transpose() * delta);
        }
        if (!delta.allFinite()) break;

        bool accepted = false;
        for (double t = 1.0; t >= 1.0 / 1024.0; t *= 0.5) {
            Field w = u;
            for (std::size_t i = 0; i < n; ++i) w[i] -= t * delta(static_cast<Eigen::Index>(i));
            const double gap = fixed_point_gap(w, P, pert);
            if (gap < res.gap) {
                res.u = std::move(w);
                res.gap = gap;
                accepted = true;
                break;
            }
        }
        ++res.iterations;
        if (!accepted) break;
    }
    res.converged = res.gap <= tol;
    return res;
}

// ---------------------------------------------------------------- solvers

namespace {

/// Projected descent, polished by Newton if it stalls short of tol.
ProjectedDescentResult solve_saddle(const Field& u0, SplitMode mode, std::size_t max_parts, const FlowConfig& cfg,
                                    const Problem& P, const PerturbationParams& pert) {
    auto pd = projected_descent(u0, mode, max_parts, cfg, P, pert);
    if (pd.converged) return pd;
    const auto nr = newton_refine(pd.u, P, pert, cfg.tol);
    if (nr.converged) {
        pd.u = nr.u;
        pd.gap = nr.gap;
        pd.iterations += nr.iterations;
        pd.converged = true;
        pd.energy_trace.push_back(energy_perturbed(pd.u, P, pert));
    }
    return pd;
}

} // namespace

const char* to_string(SolutionKind k) { return k == SolutionKind::ground ? "ground" : "nodal"; }

namespace {

CriticalPoint finish(const Field& u, const Problem& P, const PerturbationParams& pert, SolutionKind kind,
                     const ProjectedDescentResult& pd, double tol) {
    CriticalPoint cp;
    cp.u = u;
    cp.grid = P.grid;
    cp.kind = kind;
    cp.pert = pert;
    cp.level = energy_perturbed(u, P, pert);
    cp.report = energy_report(u, P, pert);
    cp.converged = pd.converged;
    cp.iterations = pd.iterations;
    cp.gap = pd.gap;
    cp.tol = tol;
    return cp;
}

struct SweepOutcome {
    std::vector<Field> nodes;
    std::vector<double> tracked;
    std::optional<std::size_t> best;
};

/// Synchronized flow steps on the free nodes. Nodes below zero energy are
/// frozen; `eligible` selects the nodes over which the maximum is tracked.
SweepOutcome deform(std::vector<Field> nodes, const std::vector<bool>& pinned, std::size_t sweeps,
                    const FlowConfig& cfg, const Problem& P, const PerturbationParams& pert,
                    const std::function<bool(const Field&)>& eligible, const Projector& project) {
    SweepOutcome out;
    std::vector<double> J(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) J[k] = energy_perturbed(nodes[k], P, pert);
    std::vector<bool> frozen(nodes.size(), false);

    auto track = [&]() {
        std::optional<std::size_t> best;
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!eligible(nodes[k])) continue;
            if (!best || J[k] > J[*best]) best = k;
        }
        return best;
    };
    out.best = track();
    if (out.best) out.tracked.push_back(J[*out.best]);
    for (std::size_t sweep = 0; sweep < sweeps && out.best; ++sweep) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (pinned[k] || frozen[k] || J[k] < 0.0) continue;
            try {
                auto st = flow_step(nodes[k], cfg, P, pert, project);
                if (st.accepted && std::isfinite(st.energy_after)) {
                    nodes[k] = std::move(st.u);
                    J[k] = st.energy_after;
                }
            } catch (const NumericalError&) {
                frozen[k] = true;
            }
        }
        out.best = track();
        if (!out.best) break;
        out.tracked.push_back(J[*out.best]);
        const double gap = e_norm(difference(solve_T(nodes[*out.best], P, pert), nodes[*out.best]), P);
        if (gap <= cfg.tol) break;
    }
    out.nodes = std::move(nodes);
    return out;
}

} // namespace

CriticalPoint minimax_nodal(const Problem& P, const PerturbationParams& pert, const MinimaxConfig& cfg,
                            const SimplexState& simplex) {
    cfg.flow.validate();
    const double eps = cfg.flow.eps_cone;
    const double bound = simplex_bound(simplex, P, pert);
    auto outside = [&](const Field& u) { return min_cone_distance(u, P) >= eps; };
    const auto sw = deform(simplex.nodes, simplex.pinned, cfg.sweeps, cfg.flow, P, pert, outside, {});
    if (!sw.best) {
        throw SolverError("degenerate_deformation",
                          "every simplex node lies in the cones; use a finer simplex or different bumps");
    }
    const auto pd = solve_saddle(sw.nodes[*sw.best], SplitMode::signs, 2, cfg.flow, P, pert);
    CriticalPoint cp = finish(pd.u, P, pert, SolutionKind::nodal, pd, cfg.flow.tol);
    cp.bound = bound;
    cp.sweep_max = sw.tracked;
    const auto idx = simplex.index[*sw.best];
    cp.provenance.push_back("minimax_nodal: R=" + num(simplex.R) + " resolution=" + std::to_string(simplex.resolution));
    cp.provenance.push_back("deformation: sweeps=" + std::to_string(sw.tracked.size() - 1) + " max node=(" +
                            std::to_string(idx[0]) + "," + std::to_string(idx[1]) + ")");
    cp.provenance.push_back("projected descent: iterations=" + std::to_string(pd.iterations));
    if (min_cone_distance(cp.u, P) < eps) {
        throw SolverError("collapsed_into_cone", "projected descent left the sign-changing region; min ||u+-||_E = " +
                                                     num(min_cone_distance(cp.u, P)));
    }
    return cp;
}

CriticalPoint mountain_pass_positive(const Problem& P, const MinimaxConfig& cfg, const BumpSpec& bump, double R,
                                     std::size_t resolution) {
    cfg.flow.validate();
    bump.validate(P.grid.r_max);
    if (bump.intervals.size() != 1 || bump.signs[0] != 1) {
        throw ConfigError("ground.bump", "mountain pass needs a single positive bump");
    }
    if (resolution < 2) throw ConfigError("ground.resolution", "must be at least 2");
    const auto pert = unperturbed(P.model);
    // The ray through the bump needs an interior maximum (for b > 0 it may not
    // have one); widening the bump by halving R restores it.
    const double R_in = R;
    Field v = bump.sample_bump(0, P.grid, R);
    while (!project_span(v, SplitMode::positive_ray, 1, P, pert, false)) {
        R *= 0.5;
        try {
            v = bump.sample_bump(0, P.grid, R);
        } catch (const ConfigError& e) {
            throw SolverError("collapse", "no ray maximum through the bump down to R=" + num(2.0 * R) + "; " + e.what());
        }
    }
    std::vector<Field> nodes;
    std::vector<bool> pinned;
    for (std::size_t k = 0; k <= resolution; ++k) {
        nodes.push_back(scaled(static_cast<double>(k) / static_cast<double>(resolution), v));
        pinned.push_back(k == 0 || k == resolution);
    }
    double bound = -std::numeric_limits<double>::infinity();
    for (const auto& u : nodes) bound = std::max(bound, energy(u, P));

    auto nonzero = [](const Field& u) {
        return std::any_of(u.values.begin(), u.values.end(), [](double x) { return x != 0.0; });
    };
    const auto sw = deform(nodes, pinned, cfg.sweeps, cfg.flow, P, pert, nonzero, positive_part);
    if (!sw.best) throw SolverError("collapse", "segment collapsed to zero; use a larger R or bump amplitude");
    ProjectedDescentResult pd;
    try {
        pd = solve_saddle(sw.nodes[*sw.best], SplitMode::positive_ray, 1, cfg.flow, P, pert);
    } catch (const SolverError& e) {
        throw SolverError("collapse", std::string(e.what()) + "; use a wider bump or larger R");
    }
    CriticalPoint cp = finish(pd.u, P, pert, SolutionKind::ground, pd, cfg.flow.tol);
    cp.bound = bound;
    cp.sweep_max = sw.tracked;
    cp.provenance.push_back("mountain_pass_positive: R=" + num(R) + (R != R_in ? " (from " + num(R_in) + ")" : "") +
                            " resolution=" + std::to_string(resolution));
    cp.provenance.push_back("projected descent: iterations=" + std::to_string(pd.iterations));
    if (e_norm(cp.u, P) == 0.0) throw SolverError("collapse", "ground-state candidate is zero");
    return cp;
}

void Schedule::validate() const {
    if (!(decay > 0.0 && decay < 1.0)) throw ConfigError("study.decay", "must lie in (0,1)");
    if (!(floor > 0.0)) throw ConfigError("study.floor", "must be positive");
}

namespace {
constexpr double kMaxStageFactor = 0.999;
}

CriticalPoint continue_to_zero(CriticalPoint start, const Problem& P, const Schedule& schedule,
                               const MinimaxConfig& cfg, SplitMode mode, std::size_t max_parts) {
    schedule.validate();
    PerturbationParams pert = start.pert;
    if (pert.lambda != pert.beta) {
        throw ConfigError("perturbation", "continuation ties lambda = beta; got different values");
    }
    double lam = pert.lambda;
    Field u = start.u;
    std::vector<StageRecord> stages;
    ProjectedDescentResult last;
    last.u = u;
    last.converged = start.converged;
    last.gap = start.gap;
    last.iterations = start.iterations;
    std::size_t total = start.iterations;
    // Stage factor; shrunk towards 1 while Newton fails to follow the branch
    // and relaxed back to the schedule's decay after each success.
    double factor = schedule.decay;
    while (lam > 0.0) {
        double next = lam * factor;
        if (next < schedule.floor) next = 0.0;
        pert.lambda = pert.beta = next;
        // Newton from the warm start stays on the branch; projected descent is
        // the fallback when the Jacobian is singular or Newton stalls.
        const auto nr = newton_refine(u, P, pert, cfg.flow.tol);
        std::string how = "newton";
        if (nr.converged) {
            last.u = nr.u;
            last.converged = true;
            last.gap = nr.gap;
            last.iterations = nr.iterations;
            factor = std::max(schedule.decay, factor * factor);
        } else if (next > 0.0 && factor < kMaxStageFactor) {
            factor = std::sqrt(factor);
            continue;
        } else {
            how = "descent";
            try {
                last = projected_descent(u, mode, max_parts, cfg.flow, P, pert);
            } catch (const SolverError& e) {
                last = ProjectedDescentResult{};
                last.u = u;
                last.gap = nr.gap;
            }
        }
        const double level = energy_perturbed(last.u, P, pert);
        const double dist = e_norm(difference(last.u, u), P);
        stages.push_back({next, level, last.iterations, last.gap, dist, how});
        const double last_good = stages.size() > 1 ? stages[stages.size() - 2].level : start.level;
        if (!last.converged) {
            throw SolverError("continuation_failure", "stage lambda=beta=" + num(next) + " did not converge (gap " +
                                                          num(last.gap) + "); last good level " + num(last_good));
        }
        if (start.bound != 0.0 && level > start.bound) {
            throw SolverError("continuation_failure", "stage lambda=beta=" + num(next) + " level " + num(level) +
                                                          " exceeds the bound " + num(start.bound) +
                                                          "; last good level " + num(last_good));
        }
        total += last.iterations;
        u = last.u;
        lam = next;
    }
    CriticalPoint cp = finish(u, P, pert, start.kind, last, cfg.flow.tol);
    cp.iterations = total;
    cp.bound = start.bound;
    cp.sweep_max = std::move(start.sweep_max);
    cp.provenance = std::move(start.provenance);
    cp.provenance.push_back("continuation: stages=" + std::to_string(stages.size()) + " decay=" +
                            num(schedule.decay) + " floor=" + num(schedule.floor));
    cp.stages = std::move(stages);
    return cp;
}

CriticalPoint continuation_to_zero(const Problem& P, const PerturbationParams& pert0, const Schedule& schedule,
                                   const MinimaxConfig& cfg, const SimplexState& simplex) {
    if (!(pert0.lambda > 0.0) || pert0.lambda != pert0.beta) {
        throw ConfigError("perturbation", "continuation starts from lambda = beta in (0,1]");
    }
    CriticalPoint cp = minimax_nodal(P, pert0, cfg, simplex);
    cp = continue_to_zero(std::move(cp), P, schedule, cfg, SplitMode::signs, 2);
    if (min_cone_distance(cp.u, P) < cfg.flow.eps_cone) {
        throw SolverError("continuation_failure", "limit entered the cones");
    }
    return cp;
}

bool same_solution(const CriticalPoint& x, const CriticalPoint& y, const Problem& P) {
    const double nx = e_norm(x.u, P);
    const double ny = e_norm(y.u, P);
    const double dist = std::min(e_norm(difference(x.u, y.u), P), e_norm(axpy(1.0, x.u, y.u), P));
    const double rel = dist / std::max({nx, ny, std::numeric_limits<double>::min()});
    return rel < 1e-2 && std::abs(x.level - y.level) < 1e-4 * (1.0 + std::abs(x.level));
}

std::vector<CriticalPoint> multi_bump_search(std::size_t n, const Problem& P, const PerturbationParams& pert,
                                             const MinimaxConfig& cfg, const MultiBumpOptions& opt,
                                             std::uint64_t seed) {
    if (n < 2) throw ConfigError("multi_bump.n", "need at least two bumps");
    cfg.flow.validate();
    const BumpSpec bumps = alternating_bumps(n, opt.inner, opt.outer, opt.amplitude);
    bumps.validate(P.grid.r_max);
    std::vector<Field> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(bumps.sample_bump(i, P.grid, 1.0));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<CriticalPoint> found;
    for (std::size_t sample = 0; sample < opt.samples; ++sample) {
        std::vector<double> t(n);
        double nrm = 0.0;
        for (auto& x : t) {
            x = std::abs(normal(rng));
            nrm += x * x;
        }
        nrm = std::sqrt(nrm);
        Field u(P.grid.size());
        for (std::size_t i = 0; i < n; ++i) u = axpy(t[i] / nrm, v[i], u);
        try {
            const auto pd = solve_saddle(u, SplitMode::runs, n, cfg.flow, P, pert);
            if (!pd.converged) continue;
            CriticalPoint cp = finish(pd.u, P, pert, SolutionKind::nodal, pd, cfg.flow.tol);
            cp.provenance.push_back("multi_bump_search: n=" + std::to_string(n) + " sample=" + std::to_string(sample));
            if (pert.active()) cp = continue_to_zero(std::move(cp), P, opt.schedule, cfg, SplitMode::runs, n);
            if (!cp.converged || cp.report.sign_changes == 0 || min_cone_distance(cp.u, P) < cfg.flow.eps_cone) {
                continue;
            }
            const bool dup = std::any_of(found.begin(), found.end(),
                                         [&](const CriticalPoint& other) { return same_solution(cp, other, P); });
            if (!dup) found.push_back(std::move(cp));
        } catch (const SolverError&) {
            continue;
        }
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const CriticalPoint& a, const CriticalPoint& b) { return a.level < b.level; });
    return found;
}

} // namespace kirchhoff
