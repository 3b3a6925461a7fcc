#include "stabledrift/config.hpp"

#include "stabledrift/errors.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace sdrift::cli {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>> kKeys = {
    {"model", {"d", "alpha"}},
    {"drift",
     {"kind", "value", "amplitude", "frequency", "phase", "sigma", "center", "direction", "gamma", "reg_radius", "table"}},
    {"grid", {"L", "h", "horizon", "slice_dt", "dt"}},
    {"series", {"max_order", "ratio_threshold", "tail_tolerance", "fixed_order"}},
    {"density", {"t", "points", "x_min", "x_max", "n_points"}},
    {"resolvent", {"lambda", "g", "probes", "max_terms", "lambda0_scan"}},
    {"simulate", {"method", "dt", "horizon", "n_paths", "x0", "storage", "jump_threshold", "csv_paths", "levy_rho"}},
    {"validate",
     {"suites", "inject_failure", "lambda", "euler_dt", "euler_paths", "chain_dt", "chain_paths", "noise_paths"}},
    {"run", {"seed", "threads"}},
};

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

class Reader {
public:
    Reader(pt::ptree t, std::map<std::string, std::string> where) : t_(std::move(t)), where_(std::move(where)) {}

    std::string raw(const std::string& key, const std::string& fallback) const {
        const auto v = t_.get_optional<std::string>(key);
        return v ? trim(*v) : fallback;
    }
    bool has(const std::string& key) const { return t_.get_optional<std::string>(key).has_value(); }

    [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
        const auto it = where_.find(key);
        throw ConfigError(key + ": " + msg + (it != where_.end() ? " (" + it->second + ")" : ""));
    }

    double num(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        return parse_num(key, raw(key, ""));
    }
    long long integer(const std::string& key, long long fallback) const {
        if (!has(key)) return fallback;
        const auto s = raw(key, "");
        long long v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an integer, got '" + s + "'");
        return v;
    }
    std::uint64_t u64(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const auto s = raw(key, "");
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected an unsigned integer, got '" + s + "'");
        return v;
    }
    std::size_t count(const std::string& key, std::size_t fallback) const {
        const long long v = integer(key, static_cast<long long>(fallback));
        if (v < 0) fail(key, "must be >= 0");
        return static_cast<std::size_t>(v);
    }
    bool flag(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const auto s = raw(key, "");
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        fail(key, "expected true or false, got '" + s + "'");
    }
    std::vector<std::string> words(const std::string& key, const std::vector<std::string>& fallback) const {
        if (!has(key)) return fallback;
        std::vector<std::string> out;
        std::stringstream ss(raw(key, ""));
        for (std::string item; std::getline(ss, item, ',');)
            if (!trim(item).empty()) out.push_back(trim(item));
        return out;
    }
    std::vector<double> nums(const std::string& key, const std::vector<double>& fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        for (const auto& w : words(key, {})) out.push_back(parse_num(key, w));
        return out;
    }

private:
    double parse_num(const std::string& key, const std::string& s) const {
        double v = 0.0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) fail(key, "expected a number, got '" + s + "'");
        return v;
    }

    pt::ptree t_;
    std::map<std::string, std::string> where_;
};

// section.key -> "origin:line" for keys read from the text.
std::map<std::string, std::string> locate(const std::string& text, const std::string& origin) {
    std::map<std::string, std::string> out;
    std::istringstream is(text);
    std::string section, line;
    for (int n = 1; std::getline(is, line); ++n) {
        line = trim(line);
        if (line.empty() || line[0] == ';' || line[0] == '#') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        out[section.empty() ? trim(line.substr(0, eq)) : section + "." + trim(line.substr(0, eq))] =
            origin + ":" + std::to_string(n);
    }
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    char buf[40];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", v[i]);
        s += (i ? ", " : "") + std::string(buf);
    }
    return s;
}

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + v[i];
    return s;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

kato::Point point(const std::vector<double>& v, int d, const char* what) {
    if (v.size() != 1 && static_cast<int>(v.size()) != d)
        throw ConfigError(std::string("drift.") + what + ": expected 1 or d = " + std::to_string(d) + " entries");
    kato::Point p{};
    for (std::size_t i = 0; i < v.size() && i < 3; ++i) p[i] = v[i];
    return p;
}

}  // namespace

stable::StableParams RunConfig::params() const {
    try {
        return stable::StableParams::make(d, alpha);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("model: ") + e.what());
    }
}

kato::DriftField RunConfig::field() const {
    const auto& s = drift;
    if (s.kind == "zero") return kato::DriftField::zero(d);
    if (s.kind == "constant") return kato::DriftField::constant(d, point(s.value, d, "value"));
    if (s.kind == "sin") return kato::DriftField::sinusoidal(d, s.amplitude, s.frequency, s.phase);
    if (s.kind == "gaussian_bump")
        return kato::DriftField::gaussian_bump(d, s.amplitude, s.sigma, point(s.center, d, "center"),
                                               point(s.direction, d, "direction"));
    if (s.kind == "power")
        return kato::DriftField::power_singularity(d, s.amplitude, s.gamma, point(s.center, d, "center"), s.reg_radius);
    if (s.kind == "table") {
        if (d != 1) throw ConfigError("drift.table: tables are d = 1 only");
        if (s.table.empty()) throw ConfigError("drift.table: path required for kind = table");
        return kato::DriftField::user_table_csv(s.table);
    }
    throw ConfigError("drift.kind: unknown kind '" + s.kind + "'");
}

heat::SeriesOptions RunConfig::series_options() const {
    heat::SeriesOptions o;
    o.max_order = max_order;
    o.ratio_threshold = ratio_threshold;
    o.tail_tolerance = tail_tolerance;
    o.fixed_order = fixed_order;
    o.full_table = d == 1;
    o.threads = threads;
    return o;
}

RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides,
                            const std::string& origin) {
    pt::ptree tree;
    try {
        std::istringstream is(text);
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    auto where = locate(text, origin);
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto key = trim(o.substr(0, eq));
        if (eq == std::string::npos || key.find('.') == std::string::npos)
            throw ConfigError("override '" + o + "': expected section.key=value");
        tree.put(key, trim(o.substr(eq + 1)));
        where[key] = "flag --set";
    }
    for (const auto& [sec, body] : tree) {
        const auto it = kKeys.find(sec);
        if (it == kKeys.end()) {
            const auto w = std::find_if(where.begin(), where.end(), [&](auto& kv) { return kv.first.rfind(sec + ".", 0) == 0; });
            throw ConfigError("unknown section [" + sec + "]" + (w != where.end() ? " (" + w->second + ")" : ""));
        }
        for (const auto& [key, v] : body)
            if (!it->second.count(key)) {
                const auto w = where.find(sec + "." + key);
                throw ConfigError("unknown key " + sec + "." + key + (w != where.end() ? " (" + w->second + ")" : ""));
            }
    }
    const Reader r(tree, where);
    RunConfig c;
    c.d = static_cast<int>(r.integer("model.d", c.d));
    c.alpha = r.num("model.alpha", c.alpha);
    if (c.d < 1 || c.d > 3) r.fail("model.d", "must be 1, 2 or 3");
    if (!(c.alpha > 1.0 && c.alpha < 2.0)) r.fail("model.alpha", "must lie in (1, 2)");

    auto& s = c.drift;
    s.kind = r.raw("drift.kind", s.kind);
    s.value = r.nums("drift.value", s.value);
    s.amplitude = r.num("drift.amplitude", s.amplitude);
    s.frequency = r.num("drift.frequency", s.frequency);
    s.phase = r.num("drift.phase", s.phase);
    s.sigma = r.num("drift.sigma", s.sigma);
    s.center = r.nums("drift.center", s.center);
    s.direction = r.nums("drift.direction", s.direction);
    s.gamma = r.num("drift.gamma", s.gamma);
    s.reg_radius = r.num("drift.reg_radius", s.reg_radius);
    s.table = r.raw("drift.table", s.table);
    static const std::set<std::string> kinds = {"zero", "constant", "sin", "gaussian_bump", "power", "table"};
    if (!kinds.count(s.kind)) r.fail("drift.kind", "unknown kind '" + s.kind + "'");

    auto& g = c.grid;
    g.d = c.d;
    g.L = r.num("grid.L", g.L);
    g.h = r.num("grid.h", g.h);
    g.horizon = r.num("grid.horizon", g.horizon);
    g.slice_dt = r.num("grid.slice_dt", g.slice_dt);
    g.dt = r.num("grid.dt", g.dt);
    if (!(g.L > 0)) r.fail("grid.L", "must be > 0");
    if (!(g.h > 0 && g.h < g.L)) r.fail("grid.h", "must lie in (0, L)");
    if (!(g.horizon > 0)) r.fail("grid.horizon", "must be > 0");
    if (!(g.slice_dt > 0 && g.slice_dt <= g.horizon)) r.fail("grid.slice_dt", "must lie in (0, horizon]");
    if (!(g.dt > 0)) r.fail("grid.dt", "must be > 0");

    c.max_order = static_cast<int>(r.integer("series.max_order", c.max_order));
    c.ratio_threshold = r.num("series.ratio_threshold", c.ratio_threshold);
    c.tail_tolerance = r.num("series.tail_tolerance", c.tail_tolerance);
    c.fixed_order = static_cast<int>(r.integer("series.fixed_order", c.fixed_order));
    if (c.max_order < 1) r.fail("series.max_order", "must be >= 1");
    if (!(c.ratio_threshold > 0 && c.ratio_threshold < 1)) r.fail("series.ratio_threshold", "must lie in (0, 1)");

    auto& de = c.density;
    de.t = r.num("density.t", de.t);
    de.points = r.nums("density.points", de.points);
    de.x_min = r.num("density.x_min", de.x_min);
    de.x_max = r.num("density.x_max", de.x_max);
    de.n_points = static_cast<int>(r.integer("density.n_points", de.n_points));
    if (de.n_points < 1) r.fail("density.n_points", "must be >= 1");
    if (!(de.x_max >= de.x_min)) r.fail("density.x_max", "must be >= x_min");

    auto& rs = c.resolvent;
    rs.lambda = r.num("resolvent.lambda", rs.lambda);
    rs.g = r.raw("resolvent.g", rs.g);
    rs.probes = r.nums("resolvent.probes", rs.probes);
    rs.max_terms = static_cast<int>(r.integer("resolvent.max_terms", rs.max_terms));
    rs.lambda0_scan = r.nums("resolvent.lambda0_scan", rs.lambda0_scan);
    if (rs.lambda < 0) r.fail("resolvent.lambda", "must be >= 0 (0 selects 2 lambda0)");
    if (rs.max_terms < 1) r.fail("resolvent.max_terms", "must be >= 1");

    auto& sm = c.simulate;
    sm.method = r.raw("simulate.method", sm.method);
    sm.dt = r.num("simulate.dt", sm.dt);
    sm.horizon = r.num("simulate.horizon", sm.horizon);
    sm.n_paths = r.count("simulate.n_paths", sm.n_paths);
    sm.x0 = r.nums("simulate.x0", sm.x0);
    sm.storage = r.raw("simulate.storage", sm.storage);
    sm.jump_threshold = r.num("simulate.jump_threshold", sm.jump_threshold);
    sm.csv_paths = r.count("simulate.csv_paths", sm.csv_paths);
    sm.levy_rho = r.nums("simulate.levy_rho", sm.levy_rho);
    if (sm.method != "euler" && sm.method != "chain") r.fail("simulate.method", "expected euler or chain");
    if (sm.storage != "full" && sm.storage != "final_only") r.fail("simulate.storage", "expected full or final_only");
    if (!(sm.dt > 0)) r.fail("simulate.dt", "must be > 0");
    if (!(sm.horizon >= sm.dt)) r.fail("simulate.horizon", "must be >= dt");
    if (sm.n_paths == 0) r.fail("simulate.n_paths", "must be >= 1");
    if (sm.x0.size() != 1 && static_cast<int>(sm.x0.size()) != c.d) r.fail("simulate.x0", "expected 1 or d entries");

    auto& v = c.validate;
    v.suites = r.words("validate.suites", v.suites);
    for (const auto& su : v.suites)
        if (su != "identity" && su != "cross" && su != "noise") r.fail("validate.suites", "unknown suite '" + su + "'");
    v.inject_failure = r.flag("validate.inject_failure", v.inject_failure);
    v.lambda = r.num("validate.lambda", v.lambda);
    v.euler_dt = r.num("validate.euler_dt", v.euler_dt);
    v.euler_paths = r.count("validate.euler_paths", v.euler_paths);
    v.chain_dt = r.num("validate.chain_dt", v.chain_dt);
    v.chain_paths = r.count("validate.chain_paths", v.chain_paths);
    v.noise_paths = r.count("validate.noise_paths", v.noise_paths);

    c.seed = r.u64("run.seed", c.seed);
    c.threads = static_cast<int>(r.integer("run.threads", c.threads));
    if (c.threads < 1) r.fail("run.threads", "must be >= 1");
    c.grid.d = c.d;
    return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), overrides, path);
}

std::string resolved_text(const RunConfig& c) {
    std::ostringstream o;
    o << "[model]\nd = " << c.d << "\nalpha = " << num(c.alpha) << "\n\n";
    const auto& s = c.drift;
    o << "[drift]\nkind = " << s.kind << "\nvalue = " << join(s.value) << "\namplitude = " << num(s.amplitude)
      << "\nfrequency = " << num(s.frequency) << "\nphase = " << num(s.phase) << "\nsigma = " << num(s.sigma)
      << "\ncenter = " << join(s.center) << "\ndirection = " << join(s.direction) << "\ngamma = " << num(s.gamma)
      << "\nreg_radius = " << num(s.reg_radius) << "\n";
    if (!s.table.empty()) o << "table = " << s.table << "\n";
    o << "\n[grid]\nL = " << num(c.grid.L) << "\nh = " << num(c.grid.h) << "\nhorizon = " << num(c.grid.horizon)
      << "\nslice_dt = " << num(c.grid.slice_dt) << "\ndt = " << num(c.grid.dt) << "\n\n";
    o << "[series]\nmax_order = " << c.max_order << "\nratio_threshold = " << num(c.ratio_threshold)
      << "\ntail_tolerance = " << num(c.tail_tolerance) << "\nfixed_order = " << c.fixed_order << "\n\n";
    o << "[density]\nt = " << num(c.density.t) << "\n";
    if (!c.density.points.empty()) o << "points = " << join(c.density.points) << "\n";
    o << "x_min = " << num(c.density.x_min) << "\nx_max = " << num(c.density.x_max)
      << "\nn_points = " << c.density.n_points << "\n\n";
    const auto& rs = c.resolvent;
    o << "[resolvent]\nlambda = " << num(rs.lambda) << "\ng = " << rs.g << "\nprobes = " << join(rs.probes)
      << "\nmax_terms = " << rs.max_terms << "\n";
    if (!rs.lambda0_scan.empty()) o << "lambda0_scan = " << join(rs.lambda0_scan) << "\n";
    const auto& sm = c.simulate;
    o << "\n[simulate]\nmethod = " << sm.method << "\ndt = " << num(sm.dt) << "\nhorizon = " << num(sm.horizon)
      << "\nn_paths = " << sm.n_paths << "\nx0 = " << join(sm.x0) << "\nstorage = " << sm.storage
      << "\njump_threshold = " << num(sm.jump_threshold) << "\ncsv_paths = " << sm.csv_paths
      << "\nlevy_rho = " << join(sm.levy_rho) << "\n\n";
    const auto& v = c.validate;
    o << "[validate]\nsuites = " << join(v.suites) << "\ninject_failure = " << (v.inject_failure ? "true" : "false")
      << "\nlambda = " << num(v.lambda) << "\neuler_dt = " << num(v.euler_dt) << "\neuler_paths = " << v.euler_paths
      << "\nchain_dt = " << num(v.chain_dt) << "\nchain_paths = " << v.chain_paths
      << "\nnoise_paths = " << v.noise_paths << "\n\n";
    o << "[run]\nseed = " << c.seed << "\nthreads = " << c.threads << "\n";
    return o.str();
}

}  // namespace sdrift::cli
