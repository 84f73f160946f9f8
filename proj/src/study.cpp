#include "kirchhoff/study.hpp"

#include "kirchhoff/errors.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace kirchhoff {

namespace {

std::string num(double x) {
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

// u, u', then the running integrals K, int V u^2, L, Phi (all with 4 pi rho^2).
using State = std::array<double, 6>;
using Stepper = boost::numeric::odeint::runge_kutta4<State>;

struct ShootingSystem {
    const ModelParams& m;

    void operator()(const State& y, State& dy, double rho) const {
        const double u = y[0];
        const double v = y[1];
        const double V = m.potential.value(rho);
        const double w = 4.0 * std::numbers::pi * rho * rho;
        dy[0] = v;
        dy[1] = (V * u - m.nonlinearity.f(u)) / m.a - 2.0 * v / rho;
        dy[2] = w * v * v;
        dy[3] = w * V * u * u;
        dy[4] = w * u * u;
        dy[5] = w * m.nonlinearity.F(u);
    }
};

enum class Shot { low, high, blowup };

struct Trajectory {
    std::vector<double> u;
    std::vector<double> du;
    std::size_t cut = 0;
    State at_cut{};
};

// Integrates from the Taylor start and classifies u0: `high` once more than k
// zeros are crossed, `low` once the solution turns away from zero after its
// k-th crossing. The cut is the minimum of |u| + |u'| past the k-th crossing.
Shot shoot(const ModelParams& m, double u0, std::size_t k, double h, double rho_limit, double cap,
           Trajectory* rec) {
    const ShootingSystem sys{m};
    Stepper stepper;
    const double c = (m.potential.value(0.0) * u0 - m.nonlinearity.f(u0)) / (6.0 * m.a);
    State y{u0 + c * h * h, 2.0 * c * h, 0.0, 0.0, 0.0, 0.0};
    if (rec) {
        rec->u = {u0, y[0]};
        rec->du = {0.0, y[1]};
        rec->cut = 0;
    }
    std::size_t crossings = 0;
    bool toward_zero = false;
    double best = std::numeric_limits<double>::infinity();
    double rho = h;
    const auto steps = static_cast<std::size_t>(rho_limit / h);
    for (std::size_t i = 1; i < steps; ++i) {
        const double prev = y[0];
        stepper.do_step(sys, y, rho, h);
        rho = static_cast<double>(i + 1) * h;
        if (!std::isfinite(y[0]) || !std::isfinite(y[1])) return Shot::blowup;
        if (rec) {
            rec->u.push_back(y[0]);
            rec->du.push_back(y[1]);
        }
        if (prev * y[0] < 0.0) {
            ++crossings;
            toward_zero = false;
        }
        if (crossings > k) return Shot::high;
        if (y[0] * y[1] < 0.0) toward_zero = true;
        if (crossings == k) {
            const double mag = std::abs(y[0]) + std::abs(y[1]);
            if (rec && mag < best) {
                best = mag;
                rec->cut = i + 1;
                rec->at_cut = y;
            }
            if (toward_zero && y[0] * y[1] > 0.0) return Shot::low;
        }
        if (std::abs(y[0]) > cap * u0) return Shot::low;
    }
    return Shot::low;
}

double hermite(double y0, double d0, double y1, double d1, double h, double t) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
}

// Root of f(u) / u = V(0): below it the Taylor start moves away from zero.
double equilibrium(const ModelParams& m) {
    const double v0 = m.potential.value(0.0);
    double lo = 0.0;
    double hi = 1.0;
    while (m.nonlinearity.f(hi) / hi < v0) {
        hi *= 2.0;
        if (hi > 1e12) throw SolverError("oracle_failure", "f(u)/u does not reach V(0)");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (m.nonlinearity.f(mid) / mid < v0 ? lo : hi) = mid;
    }
    return hi;
}

OracleSolution sampled(OracleSolution o, const RadialGrid& grid) {
    o.grid = grid;
    o.u = sample(grid, [&](double rho) { return o.value_at(rho); });
    clamp_boundary(o.u);
    return o;
}

double fit_intercept(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return (sy - slope * sx) / n;
}

ModelParams with_b(ModelParams m, double b) {
    m.b = b;
    return m;
}

} // namespace

const char* to_string(OracleSource s) {
    return s == OracleSource::shooting ? "shooting" : "dilation";
}

double OracleSolution::value_at(double rho) const {
    const double x = rho / scale;
    if (x <= rho_cut) {
        const auto i = std::min(static_cast<std::size_t>(x / step), prof_u.size() - 2);
        const double t = (x - static_cast<double>(i) * step) / step;
        return hermite(prof_u[i], prof_du[i], prof_u[i + 1], prof_du[i + 1], step, t);
    }
    const double uc = prof_u.back();
    return uc * (rho_cut / x) * std::exp(-tail_kappa * (x - rho_cut));
}

OracleSolution shoot_schrodinger(const ModelParams& m, std::size_t k_nodes, const RadialGrid& grid,
                                 const ShootOptions& opt) {
    check_model(m);
    if (m.b != 0.0) throw ConfigError("model.b", "the shooting oracle solves the b = 0 problem");
    if (!m.potential.differentiable()) throw UnsupportedError("shooting oracle needs an analytic potential");
    if (!(opt.tol > 0.0)) throw ConfigError("shoot.tol", "must be positive");

    const double v_inf = m.potential.at_infinity();
    const double kappa = std::sqrt(v_inf / m.a);
    const double v_top = std::max(m.potential.value(0.0), v_inf);
    double h = opt.step > 0.0 ? opt.step : 1e-3 * std::sqrt(m.a / v_top);
    const double rho_limit = 60.0 / kappa * static_cast<double>(k_nodes + 1);

    const double u_eq = equilibrium(m);
    double lo = u_eq * (1.0 + 1e-6);
    double hi = 2.0 * u_eq;
    std::size_t bisections = 0;

    auto classify = [&](double u0) {
        for (;;) {
            const Shot s = shoot(m, u0, k_nodes, h, rho_limit, opt.amplitude_cap, nullptr);
            if (s != Shot::blowup) return s;
            h *= 0.5;
            if (h < opt.min_step) {
                throw SolverError("oracle_failure", "trajectory blows up at u0=" + num(u0) + " down to step " +
                                                        num(opt.min_step));
            }
        }
    };

    if (classify(lo) != Shot::low) throw SolverError("oracle_failure", "no lower bracket for u0");
    while (classify(hi) != Shot::high) {
        lo = hi;
        hi *= 2.0;
        if (hi > opt.amplitude_cap) {
            throw SolverError("oracle_failure", "no upper bracket for u0 below " + num(opt.amplitude_cap));
        }
    }
    while (hi - lo > opt.tol * hi && bisections < 200) {
        const double mid = 0.5 * (lo + hi);
        (classify(mid) == Shot::high ? hi : lo) = mid;
        ++bisections;
    }

    Trajectory tr;
    shoot(m, lo, k_nodes, h, rho_limit, opt.amplitude_cap, &tr);
    if (tr.cut == 0) throw SolverError("oracle_failure", "no cut point after " + std::to_string(k_nodes) + " zeros");

    OracleSolution o;
    o.model = m;
    o.u0 = lo;
    o.k_nodes = k_nodes;
    o.bisections = bisections;
    o.step = h;
    o.prof_u.assign(tr.u.begin(), tr.u.begin() + static_cast<std::ptrdiff_t>(tr.cut) + 1);
    o.prof_du.assign(tr.du.begin(), tr.du.begin() + static_cast<std::ptrdiff_t>(tr.cut) + 1);
    o.rho_cut = static_cast<double>(tr.cut) * h;
    o.tail_kappa = kappa;
    o.shoot_residual = std::abs(tr.at_cut[0]) + std::abs(tr.at_cut[1]);

    // Tail u_c (rho_c / rho) exp(-kappa (rho - rho_c)) to leading order.
    const double rc = o.rho_cut;
    const double uc = tr.at_cut[0];
    const double shell = 4.0 * std::numbers::pi * rc * rc * uc * uc / (2.0 * kappa);
    o.integrals.grad_sq = tr.at_cut[2] + shell * (kappa + 1.0 / rc) * (kappa + 1.0 / rc);
    o.integrals.pot_sq = tr.at_cut[3] + shell * v_inf;
    o.integrals.l2_sq = tr.at_cut[4] + shell;
    o.integrals.F_int = tr.at_cut[5];
    o.energy = 0.5 * m.a * o.integrals.grad_sq + 0.5 * o.integrals.pot_sq - o.integrals.F_int;
    return sampled(std::move(o), grid);
}

double dilation_factor(double a_w, double a, double b, double K) {
    if (!(a_w > 0.0 && a > 0.0 && b >= 0.0 && K >= 0.0)) throw ConfigError("dilation", "needs a_w, a > 0 and b, K >= 0");
    return (b * K + std::sqrt(b * b * K * K + 4.0 * a_w * a)) / (2.0 * a_w);
}

OracleSolution dilation_oracle(const OracleSolution& w, const ModelParams& target, const RadialGrid& grid) {
    if (!target.potential.is_constant() || !w.model.potential.is_constant()) {
        throw UnsupportedError("dilation oracle requires a constant potential");
    }
    if (w.model.b != 0.0 || w.scale != 1.0) throw ConfigError("dilation", "base profile must solve the b = 0 problem");
    if (target.potential.c0 != w.model.potential.c0 ||
        target.nonlinearity.describe() != w.model.nonlinearity.describe()) {
        throw ConfigError("dilation", "target and base profile differ in V or f");
    }
    const double K = w.integrals.grad_sq;
    const double s = dilation_factor(w.model.a, target.a, target.b, K);
    OracleSolution o = w;
    o.model = target;
    o.source = OracleSource::dilation;
    o.scale = s;
    o.integrals.grad_sq = s * K;
    o.integrals.pot_sq = s * s * s * w.integrals.pot_sq;
    o.integrals.l2_sq = s * s * s * w.integrals.l2_sq;
    o.integrals.F_int = s * s * s * w.integrals.F_int;
    const double Ks = o.integrals.grad_sq;
    o.energy = 0.5 * target.a * Ks + 0.5 * o.integrals.pot_sq + 0.25 * target.b * Ks * Ks - o.integrals.F_int;
    return sampled(std::move(o), grid);
}

// ---------------------------------------------------------------- pipelines

PipelineConfig::PipelineConfig() {
    r_max = 20.0;
    n = 8000;
    ground_bump.intervals = {{0.0, 4.0}};
    ground_bump.signs = {1};
    nodal_bumps.intervals = {{0.0, 2.0}, {2.0, 6.0}};
    nodal_bumps.signs = {1, -1};
    pert0 = make_perturbation(model, 0.01, 0.01, 0.05, 5.0);
    schedule.decay = 0.5;
    schedule.floor = 1e-6;
}

void PipelineConfig::validate() const {
    check_model(model);
    (void)build_grid(r_max, n);
    minimax.flow.validate();
    if (resolution < 2) throw ConfigError("simplex.resolution", "must be at least 2");
    if (R && !(*R > 0.0)) throw ConfigError("simplex.R", "must be positive");
    ground_bump.validate(r_max);
    nodal_bumps.validate(r_max);
    if (pert0.lambda != pert0.beta) throw ConfigError("continuation.lambda0", "lambda0 and beta0 must be equal");
    check_perturbation(pert0, model);
    schedule.validate();
}

RowLayout row_layout(const PipelineConfig& c, double b, double scale) {
    if (!(scale > 0.0)) throw ConfigError("scale", "must be positive");
    RowLayout row;
    row.b = b;
    row.scale = scale;
    row.problem = make_problem(with_b(c.model, b), build_grid(c.r_max * scale, c.n));
    row.minimax = c.minimax;
    // ||.||_E grows like s^{3/2} under rho -> rho / s.
    row.minimax.flow.tol = c.minimax.flow.tol * std::pow(scale, 1.5);
    row.ground_bump = c.ground_bump.dilated(scale);
    row.nodal_bumps = c.nodal_bumps.dilated(scale);
    return row;
}

double reference_grad_sq(const PipelineConfig& c, SolutionKind kind) {
    const RowLayout base = row_layout(c, 0.0, 1.0);
    const CriticalPoint cp = kind == SolutionKind::ground ? ground_pipeline(base, c) : nodal_pipeline(base, c);
    return energy_parts(cp.u, base.problem).grad_sq;
}

ScaleReference scale_reference(const PipelineConfig& c) {
    return {reference_grad_sq(c, SolutionKind::ground), reference_grad_sq(c, SolutionKind::nodal)};
}

double row_scale(const PipelineConfig& c, const ScaleReference& ref, double b, SolutionKind kind) {
    if (!c.auto_scale) return 1.0;
    const double K = kind == SolutionKind::ground ? ref.ground_grad_sq : ref.nodal_grad_sq;
    return dilation_factor(c.model.a, c.model.a, b, K);
}

CriticalPoint ground_pipeline(const RowLayout& row, const PipelineConfig& c) {
    return mountain_pass_positive(row.problem, row.minimax, row.ground_bump, 1.0, c.resolution);
}

CriticalPoint nodal_pipeline(const RowLayout& row, const PipelineConfig& c, bool to_zero) {
    const Problem& P = row.problem;
    auto builder = [&](double R) { return build_phi0(row.nodal_bumps, R, c.resolution, P.grid); };
    PerturbationParams pert0 = c.pert0;
    double R = 0.0;
    if (c.R) {
        R = *c.R;
    } else {
        // The simplex is calibrated with the full perturbation, which keeps the
        // outer edge negative also when b > 0 or p < 4.
        PerturbationParams top = pert0;
        if (pert0.active()) top.lambda = top.beta = 1.0;
        R = calibrate_R(builder, P, top).R;
    }
    const SimplexState simplex = builder(R);
    CriticalPoint cp = pert0.active() && to_zero ? continuation_to_zero(P, pert0, c.schedule, row.minimax, simplex)
                                      : minimax_nodal(P, pert0, row.minimax, simplex);
    cp.provenance.push_back("simplex R=" + num(R) + (c.R ? " (configured)" : " (calibrated)"));
    cp.provenance.push_back("row scale=" + num(row.scale));
    return cp;
}

// ---------------------------------------------------------------- doubling

DoublingReport doubling_sweep(const PipelineConfig& c, std::vector<double> b_values) {
    c.validate();
    if (b_values.empty()) throw ConfigError("doubling.b_values", "must not be empty");
    for (double b : b_values) {
        if (!(b >= 0.0)) throw ConfigError("doubling.b_values", "entries must be nonnegative");
    }
    std::sort(b_values.begin(), b_values.end(), std::greater<>());
    b_values.erase(std::unique(b_values.begin(), b_values.end()), b_values.end());

    DoublingReport rep;
    const RadialGrid base = build_grid(c.r_max, c.n);
    const ModelParams m0 = with_b(c.model, 0.0);
    const OracleSolution w_ground = shoot_schrodinger(m0, 0, base, c.shoot);
    const OracleSolution w_nodal = shoot_schrodinger(m0, 1, base, c.shoot);
    rep.c0_oracle = w_ground.energy;
    rep.m0_oracle = w_nodal.energy;
    rep.oracle_margin = rep.m0_oracle - 2.0 * rep.c0_oracle;

    const ScaleReference ref = scale_reference(c);
    for (double b : b_values) {
        DoublingRow row;
        row.b = b;
        row.ground_scale = row_scale(c, ref, b, SolutionKind::ground);
        row.nodal_scale = row_scale(c, ref, b, SolutionKind::nodal);
        try {
            const RowLayout g = row_layout(c, b, row.ground_scale);
            row.ground = ground_pipeline(g, c);
            if (c.model.potential.is_constant()) {
                row.c_oracle = dilation_oracle(w_ground, g.problem.model, g.problem.grid).energy;
            }
            const RowLayout nl = row_layout(c, b, row.nodal_scale);
            row.nodal = nodal_pipeline(nl, c);
            row.complete = row.ground->converged && row.nodal->converged;
            if (!row.complete) row.note = "solver did not reach tolerance";
        } catch (const SolverError& e) {
            row.complete = false;
            row.note = e.what();
        }
        if (row.ground) row.c_b = row.ground->level;
        if (row.nodal) row.m_b = row.nodal->level;
        if (b == 0.0) {
            if (row.complete) {
                row.note = "shooting oracle; solver c=" + num(row.c_b) + " m=" + num(row.m_b);
            } else {
                row.note = "shooting oracle; solver: " + row.note;
            }
            row.c_b = rep.c0_oracle;
            row.m_b = rep.m0_oracle;
            row.complete = true;
        }
        row.margin = row.m_b - 2.0 * row.c_b;
        row.verdict = !row.complete ? "incomplete" : row.margin > 0.0 ? "pass" : "fail";
        rep.rows.push_back(std::move(row));
    }

    // rows are in decreasing b; walk upwards from the smallest b
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) {
        if (!(it->complete && it->margin > 0.0)) break;
        rep.b_star = it->b;
    }

    std::vector<double> xs, cs, ms;
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend() && xs.size() < 3; ++it) {
        if (it->b > 0.0 && it->complete) {
            xs.push_back(it->b);
            cs.push_back(it->c_b);
            ms.push_back(it->m_b);
        }
    }
    if (xs.size() >= 2) {
        rep.c0_extrapolated = fit_intercept(xs, cs);
        rep.m0_extrapolated = fit_intercept(xs, ms);
    }

    rep.trends_ok = true;
    const DoublingRow* prev = nullptr;
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) {
        if (it->b == 0.0 || !it->complete) continue;
        if (prev && (std::abs(it->c_b - rep.c0_oracle) < std::abs(prev->c_b - rep.c0_oracle) ||
                     std::abs(it->m_b - rep.m0_oracle) < std::abs(prev->m_b - rep.m0_oracle))) {
            rep.trends_ok = false;
        }
        prev = &*it;
    }
    return rep;
}

void write_doubling_csv(const std::filesystem::path& path, const DoublingReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "b,c_b,m_b,margin,verdict\n" << std::setprecision(17);
    for (const auto& row : r.rows) {
        out << row.b << ',' << row.c_b << ',' << row.m_b << ',' << row.margin << ',' << row.verdict << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

// ---------------------------------------------------------------- limit

LimitReport limit_study(const PipelineConfig& c, const std::vector<double>& b_seq) {
    c.validate();
    if (b_seq.size() < 2) throw ConfigError("limit.b_values", "needs at least two values");
    for (double b : b_seq) {
        if (!(b > 0.0)) throw ConfigError("limit.b_values", "entries must be positive");
    }
    LimitReport rep;
    const ModelParams m0 = with_b(c.model, 0.0);
    const OracleSolution w0 = shoot_schrodinger(m0, 1, build_grid(c.r_max, c.n), c.shoot);
    rep.w0_energy = w0.energy;

    for (double b : b_seq) {
        LimitRow row;
        row.b = b;
        const double s = c.auto_scale ? dilation_factor(c.model.a, c.model.a, b, w0.integrals.grad_sq) : 1.0;
        try {
            const RowLayout layout = row_layout(c, b, s);
            const CriticalPoint cp = nodal_pipeline(layout, c);
            const Problem& P = layout.problem;
            Field w0_row = sample(P.grid, [&](double rho) { return w0.value_at(rho); });
            clamp_boundary(w0_row);
            const double sign = cp.u[0] * w0_row[0] < 0.0 ? -1.0 : 1.0;
            row.level = cp.level;
            row.distance = e_norm(axpy(-sign, w0_row, cp.u), P);
            row.energy_gap = std::abs(cp.level - w0.energy);
            row.pohozaev_res = cp.report.pohozaev_res;
            row.complete = cp.converged;
            if (!row.complete) row.note = "solver did not reach tolerance";
        } catch (const SolverError& e) {
            row.note = e.what();
        }
        rep.rows.push_back(std::move(row));
    }

    double sxy = 0.0, sxx = 0.0;
    bool all = true;
    for (const auto& r : rep.rows) {
        all = all && r.complete;
        if (!r.complete) continue;
        sxy += r.b * r.energy_gap;
        sxx += r.b * r.b;
    }
    rep.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    rep.fit_ok = all && rep.slope > 0.0;
    for (auto& r : rep.rows) {
        if (!r.complete || rep.slope <= 0.0) continue;
        r.fit_ratio = r.energy_gap / (rep.slope * r.b);
        if (r.fit_ratio < 0.2 || r.fit_ratio > 5.0) rep.fit_ok = false;
    }

    std::vector<const LimitRow*> by_b;
    for (const auto& r : rep.rows) by_b.push_back(&r);
    std::sort(by_b.begin(), by_b.end(), [](const LimitRow* x, const LimitRow* y) { return x->b > y->b; });
    rep.monotone = all;
    for (std::size_t k = 1; k < by_b.size(); ++k) {
        if (!(by_b[k]->distance < by_b[k - 1]->distance)) rep.monotone = false;
    }
    return rep;
}

void write_limit_csv(const std::filesystem::path& path, const LimitReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << "b,level,distance,energy_gap,fit_ratio\n" << std::setprecision(17);
    for (const auto& row : r.rows) {
        out << row.b << ',' << row.level << ',' << row.distance << ',' << row.energy_gap << ',' << row.fit_ratio
            << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

} // namespace kirchhoff
