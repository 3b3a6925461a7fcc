#include "stabledrift/cli.hpp"

#include "stabledrift/config.hpp"
#include "stabledrift/errors.hpp"
#include "stabledrift/io.hpp"
#include "stabledrift/resolvent.hpp"
#include "stabledrift/simulate.hpp"
#include "stabledrift/validate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>

namespace sdrift::cli {

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<int> threads;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> set;
};

struct Context {
    RunConfig cfg;
    std::string hash;
    io::RunDirectory dir;
    validate::Provenance prov() const { return {hash, cfg.seed}; }
};

Context open_run(const std::string& command, const Common& c, std::vector<std::string> extra) {
    auto overrides = c.set;
    overrides.insert(overrides.end(), extra.begin(), extra.end());
    if (c.threads) overrides.push_back("run.threads=" + std::to_string(*c.threads));
    if (c.seed) overrides.push_back("run.seed=" + std::to_string(*c.seed));
    RunConfig cfg = c.config.empty() ? parse_config_text("", overrides) : load_config(c.config, overrides);
    const auto text = resolved_text(cfg);
    const auto hash = io::sha256_hex(text);
    Context ctx{cfg, hash, io::RunDirectory(c.out.empty() ? "run-" + command + "-" + hash.substr(0, 12) : c.out)};
    ctx.dir.write_text("config.resolved.ini", text);
    return ctx;
}

std::string num(double v) { return io::format_sci(v); }

void write_report(Context& ctx, const validate::ValidationReport& r, const std::string& stem) {
    validate::write_json(r, ctx.dir.file(stem + ".json"));
    validate::write_text(r, ctx.dir.file(stem + ".txt"));
}

sim::Point point(const std::vector<double>& v) {
    sim::Point p{};
    for (std::size_t i = 0; i < v.size() && i < 3; ++i) p[i] = v[i];
    return p;
}

bool is_constant_drift(const RunConfig& c) { return c.drift.kind == "zero" || c.drift.kind == "constant"; }

heat::SeriesKernel build_kernel(const RunConfig& c) {
    const auto p = c.params();
    return heat::series_sum(p, c.field(), heat::make_grid(p, c.grid), c.series_options());
}

int cmd_density(Context& ctx, std::ostream& out) {
    const auto& c = ctx.cfg;
    const auto p = c.params();
    const double t = c.density.t;
    if (!(t > 0.0)) throw DomainError("density: t must be > 0, got " + num(t));
    std::vector<double> xs = c.density.points;
    if (xs.empty()) {
        const int n = c.density.n_points;
        for (int i = 0; i < n; ++i)
            xs.push_back(n == 1 ? c.density.x_min : c.density.x_min + (c.density.x_max - c.density.x_min) * i / (n - 1));
    }
    io::CsvWriter w(ctx.dir.file("density.csv"), {"x", "p", "grad_norm"});
    std::vector<double> x(c.d, 0.0), g(c.d);
    for (double v : xs) {
        x[0] = v;
        const double pv = stable::density(p, t, x);
        double gn = 0.0;
        if (v != 0.0 || c.d == 1) {
            stable::density_gradient(p, t, x, g);
            for (double gi : g) gn += gi * gi;
        }
        w.row({v, pv, std::sqrt(gn)});
    }
    out << "density: " << xs.size() << " points at t = " << t << " -> " << ctx.dir.file("density.csv") << '\n';
    return kExitOk;
}

int cmd_kernel(Context& ctx, std::ostream& out) {
    const auto& c = ctx.cfg;
    auto k = build_kernel(c);
    heat::write_binary(k.sum, k.grid, c.alpha, ctx.dir.file("kernel.bin"));
    if (k.sum.values.size() <= 200000) heat::write_csv(k.sum, k.grid, ctx.dir.file("kernel.csv"));
    {
        io::CsvWriter w(ctx.dir.file("series_norms.csv"), {"order", "t", "sup_norm"});
        for (std::size_t o = 0; o < k.norms.size(); ++o)
            for (std::size_t s = 0; s < k.norms[o].size(); ++s)
                w.row({static_cast<double>(o), k.grid.times[s], k.norms[o][s]});
    }
    validate::IdentityConfig ic;
    ic.params = k.params;
    ic.grid = c.grid;
    ic.threads = c.threads;
    ic.provenance = ctx.prov();
    ic.inject_negative_cell = c.validate.inject_failure;
    const auto r = validate::run_identity_suite(std::move(k), ic);
    write_report(ctx, r, "report_identity");
    out << validate::render_text(r);
    return r.passed() ? kExitOk : kExitValidationFailure;
}

int cmd_resolvent(Context& ctx, std::ostream& out) {
    const auto& c = ctx.cfg;
    const auto p = c.params();
    const auto b = c.field();
    const auto lgrid = resolvent::geometric_grid(0.01, 1e4, 1.02);
    const double lam0 = b.is_zero() ? 0.0 : resolvent::lambda0_estimate(b, p, lgrid).lambda0;
    const double lambda = c.resolvent.lambda > 0.0 ? c.resolvent.lambda : std::max(2.0 * lam0, 1.0);
    const auto g = parse_test_function(c.resolvent.g, c.d);
    std::vector<resolvent::Point> probes;
    for (double x : c.resolvent.probes) probes.push_back({x, 0, 0});
    resolvent::NeumannOptions no;
    no.max_terms = c.resolvent.max_terms;
    if (lam0 > 0.0) no.lambda0 = lam0;
    const auto st = resolvent::neumann_resolvent(b, p, lambda, g, probes, no);
    resolvent::write_neumann_trace_csv(st, ctx.dir.file("neumann_trace.csv"));
    {
        io::CsvWriter w(ctx.dir.file("resolvent.csv"), {"x", "value", "remainder_bound"});
        for (std::size_t i = 0; i < probes.size(); ++i) w.row({probes[i][0], st.values[i], st.remainder_bound[i]});
    }
    nlohmann::json j;
    j["schema_version"] = validate::kSchemaVersion;
    j["lambda"] = lambda;
    j["lambda0"] = lam0;
    j["terms"] = st.terms.size();
    j["contraction_factor"] = st.contraction_factor;
    j["config_hash"] = ctx.hash;
    if (!c.resolvent.lambda0_scan.empty()) {
        io::CsvWriter w(ctx.dir.file("lambda0_table.csv"), {"c", "lambda0", "ratio_to_previous"});
        double prev = 0.0;
        for (double cc : c.resolvent.lambda0_scan) {
            const double l0 = resolvent::lambda0_estimate(kato::DriftField::constant(c.d, {cc, 0, 0}), p, lgrid).lambda0;
            w.row({cc, l0, prev > 0.0 ? l0 / prev : std::nan("")});
            j["lambda0_scan"].push_back({{"c", cc}, {"lambda0", l0}});
            prev = l0;
        }
    }
    ctx.dir.write_text("summary.json", j.dump(2) + "\n");
    out << "resolvent: lambda = " << lambda << " (lambda0 = " << lam0 << "), " << st.terms.size()
        << " Neumann terms, contraction " << st.contraction_factor << '\n';
    for (std::size_t i = 0; i < probes.size(); ++i)
        out << "  x = " << probes[i][0] << "  R g = " << st.values[i] << "  (+- " << st.remainder_bound[i] << ")\n";
    return kExitOk;
}

int cmd_simulate(Context& ctx, std::ostream& out) {
    const auto& c = ctx.cfg;
    sim::SimConfig sc;
    sc.params = c.params();
    sc.field = c.field();
    sc.x0 = point(c.simulate.x0);
    sc.dt = c.simulate.dt;
    sc.horizon = c.simulate.horizon;
    sc.n_paths = c.simulate.n_paths;
    sc.seed = c.seed;
    sc.threads = c.threads;
    sc.jump_threshold = c.simulate.jump_threshold;
    sc.storage = c.simulate.storage == "full" ? sim::Storage::full : sim::Storage::final_only;
    const auto ps = c.simulate.method == "euler" ? sim::euler_paths(sc) : sim::kernel_chain_paths(build_kernel(c), sc);
    sim::write_paths_binary(ps, ctx.dir.file("paths.bin"));
    sim::write_paths_csv(ps, ctx.dir.file("paths.csv"), c.simulate.csv_paths);

    validate::ValidationReport r;
    r.suite = "simulate";
    r.provenance = ctx.prov();
    r.constants["failed_paths"] = static_cast<double>(ps.failures());
    const auto fin = sim::final_values(ps);
    if (c.d == 1 && is_constant_drift(c)) {
        const double shift = sc.x0[0] + sc.field.eval_1d(0.0) * sc.horizon;
        const double ks = sim::ks_statistic(fin, [&](double x) { return stable::cdf_1d(sc.params, sc.horizon, x, shift); });
        r.add("ks_vs_exact_cdf", ks, sim::ks_critical_one(fin.size()), "<=", "final law vs p(T, . - x0 - c T), level 0.01");
    }
    for (double rho : c.simulate.levy_rho) {
        const double T = std::floor(sc.horizon / sc.dt + 1e-9) * sc.dt;
        try {
            const auto lv = sim::levy_system_check(ps, sc.params, rho, T);
            char tag_buf[32];
            std::snprintf(tag_buf, sizeof tag_buf, "rho=%g", rho);
            const std::string tag = tag_buf;
            r.add("levy_count_z[" + tag + "]", std::fabs(lv.z_score), 3.0, "<=",
                  "observed " + num(lv.observed_mean) + ", expected " + num(lv.expected));
            r.constants["levy_dispersion[" + tag + "]"] = lv.dispersion;
        } catch (const InsufficientSample& e) {
            r.notes.push_back(std::string("Levy check skipped: ") + e.what());
        } catch (const ConfigError& e) {
            r.notes.push_back(std::string("Levy check skipped: ") + e.what());
        }
    }
    {
        io::CsvWriter w(ctx.dir.file("final_states.csv"), {"path", "x"});
        for (std::size_t i = 0; i < fin.size(); ++i) w.row({static_cast<double>(i), fin[i]});
    }
    write_report(ctx, r, "report_simulate");
    out << "simulate: " << ps.size() << " paths (" << ps.method << "), " << ps.failures() << " failed\n"
        << validate::render_text(r);
    return r.passed() ? kExitOk : kExitValidationFailure;
}

int cmd_validate(Context& ctx, std::ostream& out) {
    const auto& c = ctx.cfg;
    const auto b = c.field();
    const auto k = build_kernel(c);
    bool ok = true;
    for (const auto& suite : c.validate.suites) {
        validate::ValidationReport r;
        if (suite == "identity") {
            validate::IdentityConfig ic;
            ic.params = k.params;
            ic.grid = c.grid;
            ic.threads = c.threads;
            ic.provenance = ctx.prov();
            ic.inject_negative_cell = c.validate.inject_failure;
            r = validate::run_identity_suite(k, ic);
        } else if (suite == "cross") {
            validate::CrossConfig cc;
            cc.params = k.params;
            if (c.validate.lambda > 0.0) cc.lambda = c.validate.lambda;
            cc.grid = c.grid;
            cc.euler_dt = c.validate.euler_dt;
            cc.euler_paths = c.validate.euler_paths;
            cc.chain_dt = c.validate.chain_dt;
            cc.chain_paths = c.validate.chain_paths;
            cc.seed = c.seed;
            cc.threads = c.threads;
            cc.provenance = ctx.prov();
            r = validate::cross_validate(b, cc, k);
        } else {
            validate::NoiseConfig nc;
            nc.dt = c.validate.chain_dt;
            nc.n_paths = c.validate.noise_paths;
            nc.seed = c.seed;
            nc.threads = c.threads;
            nc.provenance = ctx.prov();
            r = validate::noise_uniqueness_probe(k, nc);
        }
        write_report(ctx, r, "report_" + suite);
        out << validate::render_text(r) << '\n';
        ok = ok && r.passed();
    }
    return ok ? kExitOk : kExitValidationFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"stabledrift: stable heat kernels with drift, resolvents and SDE simulation"};
    app.require_subcommand(1);
    Common common;
    std::optional<double> t, lambda;
    std::vector<double> xs;
    std::string g;
    auto add_common = [&](CLI::App* s) {
        s->add_option("--config", common.config, "config file (key = value sections)")->check(CLI::ExistingFile);
        s->add_option("--out", common.out, "output directory");
        s->add_option("--threads", common.threads, "worker threads")->check(CLI::PositiveNumber);
        s->add_option("--seed", common.seed, "root seed");
        s->add_option("--set", common.set, "section.key=value override (repeatable)");
    };
    auto* dens = app.add_subcommand("density", "free stable density and gradient norm");
    add_common(dens);
    dens->add_option("--t", t, "time");
    dens->add_option("--x", xs, "points on the first axis")->delimiter(',');
    auto* kern = app.add_subcommand("kernel", "perturbation series kernel plus identity report");
    add_common(kern);
    auto* res = app.add_subcommand("resolvent", "Neumann series resolvent of a test function");
    add_common(res);
    res->add_option("--lambda", lambda, "lambda (default 2 lambda0)");
    res->add_option("--g", g, "test function, e.g. bump:1");
    auto* simc = app.add_subcommand("simulate", "Euler or kernel-chain paths");
    add_common(simc);
    auto* val = app.add_subcommand("validate", "identity, cross-validation and noise suites");
    add_common(val);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfigError;
    }

    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    std::vector<std::string> extra;
    if (t) extra.push_back("density.t=" + io::format_sci(*t));
    if (!xs.empty()) {
        std::string s;
        for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + io::format_sci(xs[i]);
        extra.push_back("density.points=" + s);
    }
    if (lambda) extra.push_back("resolvent.lambda=" + io::format_sci(*lambda));
    if (!g.empty()) extra.push_back("resolvent.g=" + g);

    std::optional<Context> ctx;
    int code = kExitOk;
    try {
        ctx.emplace(open_run(name, common, extra));
        if (name == "density") code = cmd_density(*ctx, out);
        else if (name == "kernel") code = cmd_kernel(*ctx, out);
        else if (name == "resolvent") code = cmd_resolvent(*ctx, out);
        else if (name == "simulate") code = cmd_simulate(*ctx, out);
        else code = cmd_validate(*ctx, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        code = e.exit_code();
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        code = kExitNumericalFailure;
    }
    if (ctx) {
        try {
            ctx->dir.write_manifest(name, ctx->hash, ctx->cfg.seed, code);
        } catch (const Error& e) {
            err << "error: " << e.what() << '\n';
            if (code == kExitOk) code = e.exit_code();
        }
    }
    return code;
}

}  // namespace sdrift::cli
