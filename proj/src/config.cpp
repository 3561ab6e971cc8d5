#include "rdlab/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "rdlab/errors.hpp"

namespace rdlab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw config_error(path + ": " + what); }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::string at_index(const std::string& path, std::size_t k) { return path + "[" + std::to_string(k) + "]"; }

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
    if (!j.is_object()) fail(path.empty() ? "config" : path, "expected an object");
    const std::set<std::string> known(keys.begin(), keys.end());
    for (const auto& [k, v] : j.items())
        if (!known.contains(k)) fail(join(path, k), "unknown field");
}

const json* find(const json& j, const char* key) {
    auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

// Accepts a JSON number or a rational/decimal string such as "3/4".
double literal(const json& v, const std::string& path) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            return parse_rational(v.get<std::string>());
        } catch (const config_error& e) {
            fail(path, e.what());
        }
    }
    fail(path, "expected a number or a rational string");
}

double number(const json& j, const std::string& path, const char* key, double def) {
    const json* v = find(j, key);
    return v ? literal(*v, join(path, key)) : def;
}

double positive(const json& j, const std::string& path, const char* key, double def) {
    const double x = number(j, path, key, def);
    if (!(x > 0.0) || !std::isfinite(x)) fail(join(path, key), "must be a positive finite number");
    return x;
}

long integer(const json& j, const std::string& path, const char* key, long def, long min) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number_integer()) fail(join(path, key), "expected an integer");
    const auto x = v->get<long>();
    if (x < min) fail(join(path, key), "must be >= " + std::to_string(min));
    return x;
}

std::uint64_t unsigned_integer(const json& j, const std::string& path, const char* key, std::uint64_t def,
                               std::uint64_t min) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0))
        fail(join(path, key), "expected a nonnegative integer");
    const auto x = v->get<std::uint64_t>();
    if (x < min) fail(join(path, key), "must be >= " + std::to_string(min));
    return x;
}

bool boolean(const json& j, const std::string& path, const char* key, bool def) {
    const json* v = find(j, key);
    if (!v) return def;
    if (!v->is_boolean()) fail(join(path, key), "expected true or false");
    return v->get<bool>();
}

std::vector<double> numbers(const json& j, const std::string& path, const char* key, std::vector<double> def) {
    const json* v = find(j, key);
    if (!v) return def;
    const auto p = join(path, key);
    if (!v->is_array() || v->empty()) fail(p, "expected a nonempty array");
    std::vector<double> out;
    for (std::size_t k = 0; k < v->size(); ++k) out.push_back(literal((*v)[k], at_index(p, k)));
    return out;
}

std::vector<long> integers(const json& j, const std::string& path, const char* key, std::vector<long> def, long min) {
    const json* v = find(j, key);
    if (!v) return def;
    const auto p = join(path, key);
    if (!v->is_array() || v->empty()) fail(p, "expected a nonempty array");
    std::vector<long> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
        const auto& e = (*v)[k];
        if (!e.is_number_integer() || e.get<long>() < min)
            fail(at_index(p, k), "expected an integer >= " + std::to_string(min));
        out.push_back(e.get<long>());
    }
    return out;
}

base_spec read_base(const json& j, const std::string& path) {
    only_keys(j, path, {"kind", "weights", "delta", "symbol_cap"});
    const json* kind = find(j, "kind");
    const std::string k = kind && kind->is_string() ? kind->get<std::string>() : "";
    base_spec s;
    if (k == "iid") {
        s = base_spec::finite(numbers(j, path, "weights", {1.0}));
        for (std::size_t i = 0; i < s.weights.size(); ++i)
            if (!(s.weights[i] >= 0.0)) fail(at_index(join(path, "weights"), i), "must be nonnegative");
    } else if (k == "heavy_tail" || k == "suspension") {
        const double delta = number(j, path, "delta", 0.5);
        if (!(delta > 0.0 && delta <= 1.0)) fail(join(path, "delta"), "must lie in (0, 1]");
        const auto cap = unsigned_integer(j, path, "symbol_cap", 1'000'000, 1);
        s = base_spec::heavy_tail(delta, cap);
        if (k == "suspension") s = base_spec::suspension_over(s);
    } else {
        fail(join(path, "kind"), "expected \"iid\", \"heavy_tail\" or \"suspension\"");
    }
    try {
        s.validate();
    } catch (const config_error& e) {
        fail(path, e.what());
    }
    return s;
}

piecewise_linear_map read_map(const json& j, const std::string& path) {
    if (j.is_string()) {
        try {
            return catalog_map(j.get<std::string>());
        } catch (const config_error& e) {
            fail(path, e.what());
        }
    }
    only_keys(j, path, {"name", "branches", "circle"});
    const json* name = find(j, "name");
    if (!name || !name->is_string()) fail(join(path, "name"), "expected a string");
    const json* br = find(j, "branches");
    const auto bp = join(path, "branches");
    if (!br || !br->is_array() || br->empty()) fail(bp, "expected a nonempty array");
    std::vector<branch> branches;
    for (std::size_t k = 0; k < br->size(); ++k) {
        const auto& b = (*br)[k];
        const auto p = at_index(bp, k);
        only_keys(b, p, {"domain", "slope", "intercept"});
        const json* dom = find(b, "domain");
        if (!dom || !dom->is_array() || dom->size() != 2) fail(join(p, "domain"), "expected [lo, hi]");
        if (!find(b, "slope")) fail(join(p, "slope"), "missing");
        branch x;
        x.lo = literal((*dom)[0], join(p, "domain[0]"));
        x.hi = literal((*dom)[1], join(p, "domain[1]"));
        x.slope = number(b, p, "slope", 0.0);
        x.intercept = number(b, p, "intercept", 0.0);
        branches.push_back(x);
    }
    try {
        return piecewise_linear_map(name->get<std::string>(), std::move(branches), boolean(j, path, "circle", false));
    } catch (const config_error& e) {
        fail(path, e.what());
    }
}

std::size_t map_ref(const json& v, const std::string& path, const std::vector<piecewise_linear_map>& maps) {
    if (v.is_number_integer() && v.get<long long>() >= 0) {
        const auto k = v.get<std::size_t>();
        if (k >= maps.size()) fail(path, "map index out of range");
        return k;
    }
    if (v.is_string()) {
        for (std::size_t k = 0; k < maps.size(); ++k)
            if (maps[k].name() == v.get<std::string>()) return k;
        fail(path, "no map named \"" + v.get<std::string>() + "\"");
    }
    fail(path, "expected a map index or name");
}

step_function read_step(const json& j, const std::string& path) {
    if (j.is_string() && j.get<std::string>() == "psi") return step_function::from_pieces({0.5}, {1.0, -1.0});
    only_keys(j, path, {"cuts", "values"});
    try {
        return step_function::from_pieces(numbers(j, path, "cuts", {}), numbers(j, path, "values", {}));
    } catch (const config_error& e) {
        fail(path, e.what());
    }
}

std::vector<step_function> read_components(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array");
    std::vector<step_function> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(read_step(j[k], at_index(path, k)));
    return out;
}

json step_json(const step_function& f) {
    return json{{"cuts", f.cuts()}, {"values", f.values()}};
}

json map_json(const piecewise_linear_map& m) {
    for (const auto& name : catalog_names())
        if (name == m.name()) return name;
    json br = json::array();
    for (const auto& b : m.branches())
        br.push_back({{"domain", {b.lo, b.hi}}, {"slope", b.slope}, {"intercept", b.intercept}});
    return {{"name", m.name()}, {"branches", br}, {"circle", m.is_circle_map()}};
}

json base_json(const base_spec& s) {
    switch (s.variant) {
    case base_spec::kind::iid_finite:
        return {{"kind", "iid"}, {"weights", s.weights}};
    case base_spec::kind::iid_heavy_tail:
        return {{"kind", "heavy_tail"}, {"delta", s.delta}, {"symbol_cap", s.symbol_cap}};
    case base_spec::kind::suspension:
        return {{"kind", "suspension"}, {"delta", s.inner->delta}, {"symbol_cap", s.inner->symbol_cap}};
    }
    return {};
}

json canonical(const experiment_config& c) {
    json d;
    d["schema_version"] = 1;
    d["seed"] = c.seed;
    d["output"] = c.output;
    d["base"] = base_json(c.base);
    d["maps"] = json::array();
    for (const auto& m : c.maps) d["maps"].push_back(map_json(m));
    if (c.assignment.variant == map_assignment::kind::suspension_roof) {
        d["assignment"] = {{"interior", c.assignment.interior}, {"roof_top", c.assignment.roof_top}};
    } else {
        json t = json::object();
        for (const auto& [s, k] : c.assignment.table) t[std::to_string(s)] = k;
        d["assignment"] = {{"by_symbol", t}};
        if (c.assignment.fallback) d["assignment"]["fallback"] = *c.assignment.fallback;
    }
    json comps = json::array();
    for (const auto& f : c.observable.components) comps.push_back(step_json(f));
    d["observable"] = {{"components", comps}, {"centered", c.observable.centered}};
    if (!c.observable.by_symbol.empty()) {
        json bs = json::object();
        for (const auto& [s, fs] : c.observable.by_symbol) {
            json a = json::array();
            for (const auto& f : fs) a.push_back(step_json(f));
            bs[std::to_string(s)] = a;
        }
        d["observable"]["by_symbol"] = bs;
    }
    const auto& t = c.tolerances;
    d["tolerances"] = {{"pullback", t.pullback}, {"series", t.series}, {"sigma_tail", t.sigma_tail},
                       {"coalesce", t.coalesce}, {"clt_ks", t.clt_ks}};
    const auto& g = c.grids;
    d["grids"] = {{"n_max", g.n_max},         {"decay_n_max", g.decay_n_max}, {"N_grid", g.n_grid},
                  {"t_grid", g.t_grid},       {"rho", g.rho},                 {"twisted_n", g.twisted_n},
                  {"twisted_trace", g.twisted_trace}};
    d["window"] = {{"first", c.window.first}, {"fibers", c.window.fibers}};
    const auto& m = c.monte_carlo;
    d["monte_carlo"] = {{"trials", m.trials},         {"n", m.n},
                        {"lil_trials", m.lil_trials}, {"lil_n", m.lil_n},
                        {"lil_epsilon", m.lil_epsilon}, {"twisted_trials", m.twisted_trials}};
    const auto& x = c.counterexample;
    d["counterexample"] = {{"delta", x.delta},
                           {"symbol_cap", x.symbol_cap},
                           {"identity_interior", x.identity_interior},
                           {"base_samples", x.base_samples},
                           {"levels", x.levels},
                           {"tail_samples", x.tail_samples}};
    const auto& k = c.kestimate;
    d["kestimate"] = {{"a", k.a},           {"lambda1", k.lambda1},
                      {"C", k.constant},    {"n_max", k.n_max},
                      {"paths", k.paths},   {"fit_k_max", k.fit_k_max},
                      {"decay_fibers", k.decay_fibers}, {"decay_n_max", k.decay_n_max}};
    return d;
}

} // namespace

experiment_config parse_config(const json& doc) {
    only_keys(doc, "", {"schema_version", "seed", "output", "base", "maps", "assignment", "observable", "tolerances",
                        "grids", "window", "monte_carlo", "counterexample", "kestimate"});
    if (const json* v = find(doc, "schema_version"); v && !(v->is_number_integer() && v->get<int>() == 1))
        fail("schema_version", "only version 1 is supported");

    experiment_config c;
    c.seed = unsigned_integer(doc, "", "seed", 0, 0);
    if (const json* o = find(doc, "output")) {
        if (!o->is_string() || o->get<std::string>().empty()) fail("output", "expected a nonempty path");
        c.output = o->get<std::string>();
    }

    const json* base = find(doc, "base");
    if (!base) fail("base", "missing");
    c.base = read_base(*base, "base");
    const bool suspension = c.base.variant == base_spec::kind::suspension;

    if (const json* maps = find(doc, "maps")) {
        if (!maps->is_array() || maps->empty()) fail("maps", "expected a nonempty array");
        for (std::size_t k = 0; k < maps->size(); ++k) c.maps.push_back(read_map((*maps)[k], at_index("maps", k)));
    } else if (suspension) {
        c.maps = {buzzi_t1_map(), doubling_map()};
    } else {
        fail("maps", "missing");
    }

    const json* asg = find(doc, "assignment");
    if (suspension) {
        c.assignment.variant = map_assignment::kind::suspension_roof;
        c.assignment.interior = 0;
        c.assignment.roof_top = c.maps.size() > 1 ? 1 : 0;
        if (asg) {
            only_keys(*asg, "assignment", {"interior", "roof_top"});
            if (const json* v = find(*asg, "interior")) c.assignment.interior = map_ref(*v, "assignment.interior", c.maps);
            if (const json* v = find(*asg, "roof_top")) c.assignment.roof_top = map_ref(*v, "assignment.roof_top", c.maps);
        }
    } else {
        c.assignment.variant = map_assignment::kind::by_symbol;
        if (asg) {
            only_keys(*asg, "assignment", {"by_symbol", "fallback"});
            if (const json* t = find(*asg, "by_symbol")) {
                if (!t->is_object()) fail("assignment.by_symbol", "expected an object");
                for (const auto& [key, v] : t->items()) {
                    const auto p = "assignment.by_symbol." + key;
                    std::int64_t s = 0;
                    if (std::sscanf(key.c_str(), "%ld", &s) != 1) fail(p, "symbol keys must be integers");
                    c.assignment.table[s] = map_ref(v, p, c.maps);
                }
            }
            if (const json* f = find(*asg, "fallback")) c.assignment.fallback = map_ref(*f, "assignment.fallback", c.maps);
        } else if (c.base.variant == base_spec::kind::iid_finite) {
            for (std::size_t k = 0; k < c.base.weights.size(); ++k)
                c.assignment.table[static_cast<std::int64_t>(k)] = std::min(k, c.maps.size() - 1);
        } else {
            c.assignment.fallback = 0;
        }
        if (c.base.variant == base_spec::kind::iid_finite) {
            for (std::size_t k = 0; k < c.base.weights.size(); ++k)
                if (c.base.weights[k] > 0.0 && !c.assignment.table.contains(static_cast<std::int64_t>(k)) &&
                    !c.assignment.fallback)
                    fail("assignment.by_symbol", "symbol " + std::to_string(k) + " has no map");
        } else if (!c.assignment.fallback) {
            fail("assignment.fallback", "heavy-tailed bases need a fallback map");
        }
    }

    if (const json* obs = find(doc, "observable")) {
        only_keys(*obs, "observable", {"components", "centered", "by_symbol"});
        if (const json* comps = find(*obs, "components")) c.observable.components = read_components(*comps, "observable.components");
        else c.observable.components = {read_step("psi", "")};
        c.observable.centered = boolean(*obs, "observable", "centered", true);
        if (const json* bs = find(*obs, "by_symbol")) {
            if (!bs->is_object()) fail("observable.by_symbol", "expected an object");
            for (const auto& [key, v] : bs->items()) {
                const auto p = "observable.by_symbol." + key;
                std::int64_t s = 0;
                if (std::sscanf(key.c_str(), "%ld", &s) != 1) fail(p, "symbol keys must be integers");
                c.observable.by_symbol[s] = read_components(v, p);
            }
        }
        try {
            c.observable.validate();
        } catch (const config_error& e) {
            fail("observable", e.what());
        }
    } else {
        c.observable = observable_spec::scalar(read_step("psi", ""), true);
    }

    if (const json* t = find(doc, "tolerances")) {
        only_keys(*t, "tolerances", {"pullback", "series", "sigma_tail", "coalesce", "clt_ks"});
        auto& x = c.tolerances;
        x.pullback = positive(*t, "tolerances", "pullback", x.pullback);
        x.series = positive(*t, "tolerances", "series", x.series);
        x.sigma_tail = positive(*t, "tolerances", "sigma_tail", x.sigma_tail);
        x.coalesce = positive(*t, "tolerances", "coalesce", x.coalesce);
        x.clt_ks = positive(*t, "tolerances", "clt_ks", x.clt_ks);
    }

    if (const json* g = find(doc, "grids")) {
        only_keys(*g, "grids", {"n_max", "decay_n_max", "N_grid", "t_grid", "rho", "twisted_n", "twisted_trace"});
        auto& x = c.grids;
        x.n_max = integer(*g, "grids", "n_max", x.n_max, 1);
        x.decay_n_max = integer(*g, "grids", "decay_n_max", x.decay_n_max, 4);
        x.n_grid = integers(*g, "grids", "N_grid", x.n_grid, 1);
        x.t_grid = numbers(*g, "grids", "t_grid", x.t_grid);
        x.rho = positive(*g, "grids", "rho", x.rho);
        x.twisted_n = integer(*g, "grids", "twisted_n", x.twisted_n, 1);
        x.twisted_trace = integer(*g, "grids", "twisted_trace", x.twisted_trace, 10);
        for (std::size_t k = 0; k < x.t_grid.size(); ++k)
            if (std::abs(x.t_grid[k]) > x.rho) fail(at_index("grids.t_grid", k), "|t| exceeds grids.rho");
    }

    if (const json* w = find(doc, "window")) {
        only_keys(*w, "window", {"first", "fibers"});
        c.window.first = integer(*w, "window", "first", c.window.first, -1'000'000);
        c.window.fibers = integer(*w, "window", "fibers", c.window.fibers, 1);
    }

    if (const json* m = find(doc, "monte_carlo")) {
        only_keys(*m, "monte_carlo", {"trials", "n", "lil_trials", "lil_n", "lil_epsilon", "twisted_trials"});
        auto& x = c.monte_carlo;
        x.trials = unsigned_integer(*m, "monte_carlo", "trials", x.trials, 1);
        x.n = integer(*m, "monte_carlo", "n", x.n, 1);
        x.lil_trials = unsigned_integer(*m, "monte_carlo", "lil_trials", x.lil_trials, 1);
        x.lil_n = integer(*m, "monte_carlo", "lil_n", x.lil_n, 16);
        x.lil_epsilon = positive(*m, "monte_carlo", "lil_epsilon", x.lil_epsilon);
        x.twisted_trials = unsigned_integer(*m, "monte_carlo", "twisted_trials", x.twisted_trials, 1);
    }

    if (const json* e = find(doc, "counterexample")) {
        only_keys(*e, "counterexample", {"delta", "symbol_cap", "identity_interior", "base_samples", "levels", "tail_samples"});
        auto& x = c.counterexample;
        x.delta = number(*e, "counterexample", "delta", x.delta);
        if (!(x.delta > 0.0 && x.delta <= 1.0)) fail("counterexample.delta", "must lie in (0, 1]");
        x.symbol_cap = unsigned_integer(*e, "counterexample", "symbol_cap", x.symbol_cap, 1);
        x.identity_interior = boolean(*e, "counterexample", "identity_interior", x.identity_interior);
        x.base_samples = unsigned_integer(*e, "counterexample", "base_samples", x.base_samples, 100);
        x.levels = integers(*e, "counterexample", "levels", x.levels, 1);
        x.tail_samples = unsigned_integer(*e, "counterexample", "tail_samples", x.tail_samples, 1);
    }

    if (const json* k = find(doc, "kestimate")) {
        only_keys(*k, "kestimate", {"a", "lambda1", "C", "n_max", "paths", "fit_k_max", "decay_fibers", "decay_n_max"});
        auto& x = c.kestimate;
        x.a = number(*k, "kestimate", "a", x.a);
        if (x.a >= 0.0 && !(x.a > 0.0 && x.a <= 1.0)) fail("kestimate.a", "must lie in (0, 1]");
        x.lambda1 = positive(*k, "kestimate", "lambda1", x.lambda1);
        x.constant = positive(*k, "kestimate", "C", x.constant);
        x.n_max = integer(*k, "kestimate", "n_max", x.n_max, 1);
        x.paths = unsigned_integer(*k, "kestimate", "paths", x.paths, 1);
        x.fit_k_max = integer(*k, "kestimate", "fit_k_max", x.fit_k_max, 3);
        x.decay_fibers = unsigned_integer(*k, "kestimate", "decay_fibers", x.decay_fibers, 1);
        x.decay_n_max = integer(*k, "kestimate", "decay_n_max", x.decay_n_max, 4);
    }

    c.base.seed = c.seed;
    c.source = canonical(c);
    return c;
}

experiment_config load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error(path.string() + ": cannot open");
    json doc;
    try {
        doc = json::parse(in, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw config_error(path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

cocycle experiment_config::make_cocycle() const { return cocycle(base, maps, assignment); }

void experiment_config::set_seed(std::uint64_t s) {
    seed = s;
    base.seed = s;
    source["seed"] = s;
}

std::string experiment_config::hash() const {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : source.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

json default_config_document() {
    return json{{"schema_version", 1},
                {"seed", 1},
                {"base", {{"kind", "iid"}, {"weights", {0.5, 0.5}}}},
                {"maps", {"doubling", "buzzi_t1"}},
                {"observable", {{"components", {"psi"}}, {"centered", true}}}};
}

} // namespace rdlab
