#include "kirchhoff/config.hpp"

#include "kirchhoff/errors.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace kirchhoff {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void only_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) throw ConfigError(where, "must be an object");
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw ConfigError(where.empty() ? key : where + "." + key, "unknown key");
        }
    }
}

std::string path_of(const std::string& where, const char* key) {
    return where.empty() ? std::string(key) : where + "." + key;
}

double number(const json& obj, const char* key, const std::string& where, double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) throw ConfigError(path_of(where, key), "must be a number");
    return v.get<double>();
}

std::size_t count(const json& obj, const char* key, const std::string& where, std::size_t fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(path_of(where, key), "must be a nonnegative integer");
    }
    return v.get<std::size_t>();
}

bool boolean(const json& obj, const char* key, const std::string& where, bool fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_boolean()) throw ConfigError(path_of(where, key), "must be true or false");
    return v.get<bool>();
}

std::vector<double> numbers(const json& obj, const char* key, const std::string& where,
                            std::vector<double> fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_array()) throw ConfigError(path_of(where, key), "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ConfigError(path_of(where, key), "must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

Potential parse_potential(const json& j) {
    const std::string where = "model.potential";
    only_keys(j, {"kind", "c0", "c1", "k", "rho", "values"}, where);
    const std::string kind = j.value("kind", std::string("constant"));
    if (kind == "constant") {
        return Potential::constant(number(j, "c0", where, 1.0));
    }
    if (kind == "rational") {
        return Potential::rational(number(j, "c0", where, 1.0), number(j, "c1", where, 0.0),
                                   number(j, "k", where, 1.0));
    }
    if (kind == "tabulated") {
        return Potential::tabulated(numbers(j, "rho", where, {}), numbers(j, "values", where, {}));
    }
    throw ConfigError(where + ".kind", "expected constant, rational or tabulated");
}

Nonlinearity parse_nonlinearity(const json& j) {
    const std::string where = "model.nonlinearity";
    only_keys(j, {"power", "terms"}, where);
    if (j.contains("power") == j.contains("terms")) {
        throw ConfigError(where, "give exactly one of power or terms");
    }
    if (j.contains("power")) return Nonlinearity::power(number(j, "power", where, 0.0));
    const json& t = j.at("terms");
    if (!t.is_array()) throw ConfigError(where + ".terms", "must be an array");
    std::vector<PowerTerm> terms;
    for (const auto& e : t) {
        only_keys(e, {"coeff", "exponent"}, where + ".terms");
        terms.push_back({number(e, "coeff", where + ".terms", 1.0), number(e, "exponent", where + ".terms", 0.0)});
    }
    return Nonlinearity::sum(std::move(terms));
}

BumpSpec parse_bumps(const json& j, const std::string& where, BumpSpec spec) {
    only_keys(j, {"intervals", "signs", "amplitude"}, where);
    if (j.contains("intervals")) {
        const json& iv = j.at("intervals");
        if (!iv.is_array()) throw ConfigError(where + ".intervals", "must be an array of [l, r] pairs");
        spec.intervals.clear();
        for (const auto& p : iv) {
            if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
                throw ConfigError(where + ".intervals", "must be an array of [l, r] pairs");
            }
            spec.intervals.emplace_back(p[0].get<double>(), p[1].get<double>());
        }
    }
    if (j.contains("signs")) {
        const json& s = j.at("signs");
        if (!s.is_array()) throw ConfigError(where + ".signs", "must be an array of +1/-1");
        spec.signs.clear();
        for (const auto& x : s) {
            if (!x.is_number_integer()) throw ConfigError(where + ".signs", "must be an array of +1/-1");
            spec.signs.push_back(x.get<int>());
        }
    }
    spec.amplitude = number(j, "amplitude", where, spec.amplitude);
    return spec;
}

ordered_json bumps_json(const BumpSpec& s) {
    ordered_json iv = ordered_json::array();
    for (const auto& [l, r] : s.intervals) iv.push_back({l, r});
    return ordered_json{{"intervals", iv}, {"signs", s.signs}, {"amplitude", s.amplitude}};
}

std::string line_col(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

} // namespace

Config parse_config(const std::string& text, const std::string& source) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports the byte just past the offending token
        throw ConfigError(source, "parse error at " + line_col(text, e.byte > 0 ? e.byte - 1 : 0));
    }
    only_keys(root, {"model", "perturbation", "grid", "flow", "simplex", "study", "seed", "output_dir"}, "");

    Config c;
    PipelineConfig& pc = c.pipeline;

    const json model = root.value("model", json::object());
    only_keys(model, {"a", "b", "mu", "potential", "nonlinearity"}, "model");
    ModelParams& m = pc.model;
    m.a = number(model, "a", "model", 1.0);
    m.b = number(model, "b", "model", 0.0);
    if (model.contains("potential")) m.potential = parse_potential(model.at("potential"));
    if (model.contains("nonlinearity")) m.nonlinearity = parse_nonlinearity(model.at("nonlinearity"));
    m.mu = number(model, "mu", "model", m.nonlinearity.min_exponent());
    check_model(m);

    const json pert = root.value("perturbation", json::object());
    only_keys(pert, {"lambda", "beta", "alpha", "r_exp"}, "perturbation");
    const PerturbationParams mid = unperturbed(m);
    pc.pert0.lambda = number(pert, "lambda", "perturbation", 0.01);
    pc.pert0.beta = number(pert, "beta", "perturbation", pc.pert0.lambda);
    pc.pert0.alpha = number(pert, "alpha", "perturbation", mid.alpha);
    pc.pert0.r_exp = number(pert, "r_exp", "perturbation", mid.r_exp);
    check_perturbation(pc.pert0, m);

    const json grid = root.value("grid", json::object());
    only_keys(grid, {"r_max", "n", "auto_scale"}, "grid");
    pc.r_max = number(grid, "r_max", "grid", pc.r_max);
    pc.n = count(grid, "n", "grid", pc.n);
    pc.auto_scale = boolean(grid, "auto_scale", "grid", pc.auto_scale);

    const json flow = root.value("flow", json::object());
    only_keys(flow, {"tol", "max_iter", "step0", "backtrack", "armijo", "eps_cone"}, "flow");
    FlowConfig& f = pc.minimax.flow;
    f.tol = number(flow, "tol", "flow", f.tol);
    f.max_iter = count(flow, "max_iter", "flow", f.max_iter);
    f.step0 = number(flow, "step0", "flow", f.step0);
    f.backtrack = number(flow, "backtrack", "flow", f.backtrack);
    f.armijo = number(flow, "armijo", "flow", f.armijo);
    f.eps_cone = number(flow, "eps_cone", "flow", f.eps_cone);

    const json simplex = root.value("simplex", json::object());
    only_keys(simplex, {"resolution", "R", "sweeps", "nodal_bumps", "ground_bump"}, "simplex");
    pc.resolution = count(simplex, "resolution", "simplex", pc.resolution);
    pc.minimax.sweeps = count(simplex, "sweeps", "simplex", pc.minimax.sweeps);
    if (simplex.contains("R")) {
        const json& R = simplex.at("R");
        if (R.is_string() && R.get<std::string>() == "auto") {
            pc.R.reset();
        } else if (R.is_number()) {
            pc.R = R.get<double>();
        } else {
            throw ConfigError("simplex.R", "must be a number or \"auto\"");
        }
    }
    if (simplex.contains("nodal_bumps")) {
        pc.nodal_bumps = parse_bumps(simplex.at("nodal_bumps"), "simplex.nodal_bumps", pc.nodal_bumps);
    }
    if (simplex.contains("ground_bump")) {
        pc.ground_bump = parse_bumps(simplex.at("ground_bump"), "simplex.ground_bump", pc.ground_bump);
    }

    const json study = root.value("study", json::object());
    only_keys(study, {"b_values", "limit_b_values", "decay", "floor", "shoot_tol", "multi_bump", "cone_eps",
                      "cone_samples", "descent_samples"},
              "study");
    StudyConfig& s = c.study;
    s.b_values = numbers(study, "b_values", "study", s.b_values);
    s.limit_b_values = numbers(study, "limit_b_values", "study", s.limit_b_values);
    pc.schedule.decay = number(study, "decay", "study", pc.schedule.decay);
    pc.schedule.floor = number(study, "floor", "study", pc.schedule.floor);
    pc.shoot.tol = number(study, "shoot_tol", "study", pc.shoot.tol);
    s.cone_eps = numbers(study, "cone_eps", "study", s.cone_eps);
    s.cone_samples = count(study, "cone_samples", "study", s.cone_samples);
    s.descent_samples = count(study, "descent_samples", "study", s.descent_samples);
    if (study.contains("multi_bump")) {
        const json& mb = study.at("multi_bump");
        const std::string w = "study.multi_bump";
        only_keys(mb, {"n", "samples", "inner", "outer", "amplitude"}, w);
        s.multi_bump_n = count(mb, "n", w, s.multi_bump_n);
        s.multi_bump.samples = count(mb, "samples", w, s.multi_bump.samples);
        s.multi_bump.inner = number(mb, "inner", w, s.multi_bump.inner);
        s.multi_bump.outer = number(mb, "outer", w, s.multi_bump.outer);
        s.multi_bump.amplitude = number(mb, "amplitude", w, s.multi_bump.amplitude);
    }
    s.multi_bump.schedule = pc.schedule;

    if (root.contains("seed")) {
        const json& sd = root.at("seed");
        if (!sd.is_number_unsigned()) throw ConfigError("seed", "must be a nonnegative integer");
        c.seed = sd.get<std::uint64_t>();
    }
    if (root.contains("output_dir")) {
        if (!root.at("output_dir").is_string()) throw ConfigError("output_dir", "must be a string");
        c.output_dir = root.at("output_dir").get<std::string>();
    }

    pc.validate();
    if (s.b_values.empty()) throw ConfigError("study.b_values", "must not be empty");
    for (double b : s.b_values) {
        if (!(b >= 0.0)) throw ConfigError("study.b_values", "entries must be nonnegative");
    }
    for (double b : s.limit_b_values) {
        if (!(b > 0.0)) throw ConfigError("study.limit_b_values", "entries must be positive");
    }
    if (s.multi_bump_n < 2) throw ConfigError("study.multi_bump.n", "must be at least 2");
    if (s.cone_eps.empty()) throw ConfigError("study.cone_eps", "must not be empty");
    for (double e : s.cone_eps) {
        if (!(e > 0.0)) throw ConfigError("study.cone_eps", "entries must be positive");
    }
    if (!(pc.shoot.tol > 0.0)) throw ConfigError("study.shoot_tol", "must be positive");

    c.validation = validate_model(m, pc.pert0, build_grid(pc.r_max, pc.n));
    return c;
}

Config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string(), "cannot read file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

ordered_json to_json(const Config& c) {
    const PipelineConfig& pc = c.pipeline;
    const ModelParams& m = pc.model;
    ordered_json pot;
    switch (m.potential.kind) {
    case PotentialKind::constant:
        pot = {{"kind", "constant"}, {"c0", m.potential.c0}};
        break;
    case PotentialKind::rational:
        pot = {{"kind", "rational"}, {"c0", m.potential.c0}, {"c1", m.potential.c1}, {"k", m.potential.k}};
        break;
    case PotentialKind::tabulated:
        pot = {{"kind", "tabulated"}, {"rho", m.potential.table_rho}, {"values", m.potential.table_v}};
        break;
    }
    ordered_json terms = ordered_json::array();
    for (const auto& t : m.nonlinearity.terms) terms.push_back({{"coeff", t.coeff}, {"exponent", t.exponent}});

    ordered_json j;
    j["model"] = {{"a", m.a}, {"b", m.b}, {"mu", m.mu}, {"potential", pot}, {"nonlinearity", {{"terms", terms}}}};
    j["perturbation"] = {{"lambda", pc.pert0.lambda},
                         {"beta", pc.pert0.beta},
                         {"alpha", pc.pert0.alpha},
                         {"r_exp", pc.pert0.r_exp}};
    j["grid"] = {{"r_max", pc.r_max}, {"n", pc.n}, {"auto_scale", pc.auto_scale}};
    const FlowConfig& f = pc.minimax.flow;
    j["flow"] = {{"tol", f.tol},         {"max_iter", f.max_iter}, {"step0", f.step0},
                 {"backtrack", f.backtrack}, {"armijo", f.armijo},     {"eps_cone", f.eps_cone}};
    j["simplex"] = {{"resolution", pc.resolution},
                    {"R", pc.R ? ordered_json(*pc.R) : ordered_json("auto")},
                    {"sweeps", pc.minimax.sweeps},
                    {"nodal_bumps", bumps_json(pc.nodal_bumps)},
                    {"ground_bump", bumps_json(pc.ground_bump)}};
    const StudyConfig& s = c.study;
    j["study"] = {{"b_values", s.b_values},
                  {"limit_b_values", s.limit_b_values},
                  {"decay", pc.schedule.decay},
                  {"floor", pc.schedule.floor},
                  {"shoot_tol", pc.shoot.tol},
                  {"multi_bump",
                   {{"n", s.multi_bump_n},
                    {"samples", s.multi_bump.samples},
                    {"inner", s.multi_bump.inner},
                    {"outer", s.multi_bump.outer},
                    {"amplitude", s.multi_bump.amplitude}}},
                  {"cone_eps", s.cone_eps},
                  {"cone_samples", s.cone_samples},
                  {"descent_samples", s.descent_samples}};
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    return j;
}

} // namespace kirchhoff
