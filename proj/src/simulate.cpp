#include "stabledrift/simulate.hpp"

#include "stabledrift/errors.hpp"
#include "stabledrift/parallel.hpp"
#include "stabledrift/simd.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sdrift::sim {

namespace {

constexpr double kPi = std::numbers::pi;

double cms_symmetric(double alpha, rng::Stream& s) {
    const double v = kPi * (s.uniform() - 0.5);
    const double w = s.exponential();
    if (alpha == 2.0) return 2.0 * std::sqrt(w) * std::sin(v);
    return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
           std::pow(std::cos((1.0 - alpha) * v) / w, (1.0 - alpha) / alpha);
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool finite_all(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

void check_field(const SimConfig& c) {
    if (c.field.d() != c.params.d) throw ConfigError("drift dimension does not match d");
    if (c.field.singularity_exponent() && !c.field.regularization())
        throw ConfigError("singular drift needs a regularization radius for path simulation");
}

PathSet empty_set(const SimConfig& c, const std::string& method) {
    PathSet out;
    out.d = c.params.d;
    out.dt = c.dt;
    out.steps = c.steps();
    out.storage = c.storage;
    out.jump_threshold = c.threshold();
    out.method = method;
    const std::size_t n = c.n_paths, d = c.params.d;
    if (c.storage == Storage::full) {
        out.states.assign(n * (out.steps + 1) * d, 0.0);
        out.increments.assign(n * out.steps * d, 0.0);
    }
    out.finals.assign(n * d, 0.0);
    out.failed.assign(n, 0);
    out.fallback_steps.assign(n, 0);
    return out;
}

// Per-worker path body writes into the slots of path i; jumps are gathered
// per path and concatenated in index order.
template <class Step>
void run_paths(const SimConfig& c, PathSet& out, Step&& step) {
    const std::size_t n = c.n_paths, d = c.params.d, steps = out.steps;
    std::vector<std::vector<Jump>> jumps(n);
    const double thr = out.jump_threshold;
    parallel_for(n, c.threads, [&](std::size_t i, int) {
        Point x = c.x0, inc{}, nx{};
        const bool full = c.storage == Storage::full;
        double* st = full ? out.states.data() + i * (steps + 1) * d : nullptr;
        double* in = full ? out.increments.data() + i * steps * d : nullptr;
        if (full) std::copy(x.begin(), x.begin() + d, st);
        auto rs = step.stream(i);
        for (std::size_t k = 0; k < steps; ++k) {
            if (!step(rs, i, std::span<const double>(x.data(), d), std::span<double>(inc.data(), d),
                      std::span<double>(nx.data(), d))) {
                out.failed[i] = 1;
                if (full)
                    std::fill(st + (k + 1) * d, st + (steps + 1) * d, std::numeric_limits<double>::quiet_NaN());
                std::fill(x.begin(), x.end(), std::numeric_limits<double>::quiet_NaN());
                break;
            }
            if (norm(std::span<const double>(inc.data(), d)) >= thr) jumps[i].push_back({static_cast<std::uint32_t>(k), inc});
            x = nx;
            if (full) {
                std::copy(inc.begin(), inc.begin() + d, in + k * d);
                std::copy(x.begin(), x.begin() + d, st + (k + 1) * d);
            }
        }
        std::copy(x.begin(), x.begin() + d, out.finals.data() + i * d);
    });
    out.jump_offsets.assign(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) out.jump_offsets[i + 1] = out.jump_offsets[i] + jumps[i].size();
    out.jumps.reserve(out.jump_offsets[n]);
    for (auto& j : jumps) out.jumps.insert(out.jumps.end(), j.begin(), j.end());
}

void draw_increment(const stable::StableParams& p, double dt, int sub, rng::Stream& s, std::span<double> out) {
    if (sub <= 1) {
        sample_stable_increment(p, dt, s, out);
        return;
    }
    double tmp[3];
    std::fill(out.begin(), out.end(), 0.0);
    for (int j = 0; j < sub; ++j) {
        sample_stable_increment(p, dt / sub, s, std::span<double>(tmp, out.size()));
        for (std::size_t a = 0; a < out.size(); ++a) out[a] += tmp[a];
    }
}

// b(x) into out; false when the field is not finite there.
bool eval_field(const kato::DriftField& f, std::span<const double> x, std::span<double> out) {
    try {
        f.eval(x, out);
    } catch (const DomainError&) {
        return false;
    }
    return finite_all(out);
}

struct EulerStep {
    const SimConfig& c;
    rng::Stream stream(std::size_t i) const { return rng::Stream(c.seed, i); }
    bool operator()(rng::Stream& s, std::size_t, std::span<const double> x, std::span<double> inc,
                    std::span<double> nx) const {
        double b[3];
        draw_increment(c.params, c.dt, c.substeps, s, inc);
        if (!finite_all(x) || !eval_field(c.field, x, std::span<double>(b, x.size()))) return false;
        for (std::size_t a = 0; a < x.size(); ++a) nx[a] = (x[a] + inc[a]) + b[a] * c.dt;
        return finite_all(nx);
    }
};

}  // namespace

void sample_stable_increment(const stable::StableParams& p, double dt, rng::Stream& s, std::span<double> out) {
    if (p.d == 1) {
        out[0] = std::pow(dt, 1.0 / p.alpha) * cms_symmetric(p.alpha, s);
        return;
    }
    const double S = sample_one_sided(0.5 * p.alpha, dt, s);
    const double r = std::sqrt(2.0 * S);
    for (int a = 0; a < p.d; ++a) out[a] = r * s.normal();
}

std::vector<double> sample_stable_increment(const stable::StableParams& p, double dt, rng::Stream& s) {
    std::vector<double> out(p.d);
    sample_stable_increment(p, dt, s, out);
    return out;
}

double sample_one_sided(double a, double scale, rng::Stream& s) {
    const double u = kPi * s.uniform();
    const double w = s.exponential();
    const double A = std::pow(std::sin(a * u), a / (1.0 - a)) * std::sin((1.0 - a) * u) /
                     std::pow(std::sin(u), 1.0 / (1.0 - a));
    return std::pow(scale, 1.0 / a) * std::pow(A / w, (1.0 - a) / a);
}

std::size_t SimConfig::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }

double SimConfig::threshold() const {
    return jump_threshold > 0.0 ? jump_threshold : 4.0 * std::pow(dt, 1.0 / params.alpha);
}

void SimConfig::validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(horizon >= dt)) throw ConfigError("horizon must be >= dt");
    if (n_paths < 1) throw ConfigError("n_paths must be >= 1");
    if (substeps < 1) throw ConfigError("substeps must be >= 1");
    if (std::fabs(static_cast<double>(steps()) * dt - horizon) > 1e-9 * horizon)
        throw ConfigError("horizon must be a whole number of steps");
}

std::size_t PathSet::failures() const { return static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1)); }

std::span<const double> PathSet::state(std::size_t path, std::size_t k) const {
    if (storage != Storage::full) throw DomainError("path states are not stored");
    return {states.data() + (path * (steps + 1) + k) * d, static_cast<std::size_t>(d)};
}

std::span<const double> PathSet::increment(std::size_t path, std::size_t k) const {
    if (storage != Storage::full) throw DomainError("path increments are not stored");
    return {increments.data() + (path * steps + k) * d, static_cast<std::size_t>(d)};
}

std::span<const double> PathSet::final_state(std::size_t path) const {
    return {finals.data() + path * d, static_cast<std::size_t>(d)};
}

std::span<const Jump> PathSet::jump_log(std::size_t path) const {
    return {jumps.data() + jump_offsets[path], static_cast<std::size_t>(jump_offsets[path + 1] - jump_offsets[path])};
}

PathRecord path_record(const PathSet& s, std::size_t path) {
    PathRecord r;
    r.d = s.d;
    for (std::size_t k = 0; k <= s.steps; ++k) r.times.push_back(s.time(k));
    const std::size_t d = s.d;
    r.states.assign(s.states.begin() + path * (s.steps + 1) * d, s.states.begin() + (path + 1) * (s.steps + 1) * d);
    r.increments.assign(s.increments.begin() + path * s.steps * d, s.increments.begin() + (path + 1) * s.steps * d);
    const auto j = s.jump_log(path);
    r.jump_log.assign(j.begin(), j.end());
    return r;
}

PathSet euler_paths(const SimConfig& c) {
    c.validate();
    check_field(c);
    PathSet out = empty_set(c, "euler");
    run_paths(c, out, EulerStep{c});
    return out;
}

std::vector<double> reconstruct_noise(const PathRecord& path, const kato::DriftField& field) {
    const std::size_t d = path.d, n = path.times.size();
    std::vector<double> z(n * d, 0.0), drift(d, 0.0), b(d);
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = path.times[k] - path.times[k - 1];
        field.eval(std::span<const double>(path.states.data() + (k - 1) * d, d), b);
        for (std::size_t a = 0; a < d; ++a) {
            drift[a] += b[a] * dt;
            z[k * d + a] = path.states[k * d + a] - path.states[a] - drift[a];
        }
    }
    return z;
}

std::vector<double> noise_increments(const PathSet& s, const kato::DriftField& field) {
    if (s.storage != Storage::full) throw DomainError("noise reconstruction needs stored paths");
    const std::size_t d = s.d;
    std::vector<double> out;
    out.reserve(s.size() * s.steps * d);
    std::vector<double> b(d);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.failed[i]) continue;
        for (std::size_t k = 0; k < s.steps; ++k) {
            const auto x = s.state(i, k), y = s.state(i, k + 1);
            field.eval(x, b);
            for (std::size_t a = 0; a < d; ++a) out.push_back(y[a] - x[a] - b[a] * s.dt);
        }
    }
    return out;
}

PathSet kernel_chain_paths(const heat::SeriesKernel& k, const SimConfig& c, const ChainOptions& o) {
    c.validate();
    if (k.params.d != 1 || c.params.d != 1) throw DomainError("kernel chain sampling is implemented for d = 1");
    if (!k.full_table()) throw ConfigError("kernel chain needs a full kernel table");
    if (c.substeps != 1) throw ConfigError("kernel chain does not take substeps");
    const auto& g = k.grid;
    const auto ti = g.find_slice(c.dt);
    if (!ti) throw ConfigError("chain dt is not a stored kernel slice");
    if (!k.certified[*ti]) throw ConvergenceError("kernel is not certified at the chain step");
    if (std::fabs(k.params.alpha - c.params.alpha) > 1e-15) throw ConfigError("kernel and simulation alpha differ");
    const std::size_t nt = g.nodes();
    const double L = g.L, h = g.h, edge = L - o.edge_margin;
    if (!(edge > 0.0)) throw ConfigError("edge margin leaves no chain region");

    // Row j as cells of width h centered at the nodes. A uniform position
    // inside a cell adds variance h^2/12 per step, so the cell masses are
    // sharpened by w - (second difference of w)/24, which cancels it to
    // leading order. C holds the cumulative masses, C[nt] the box mass.
    std::vector<double> cdf(nt * (nt + 1)), outside(nt), w(nt);
    std::vector<char> usable(nt, 0);
    for (std::size_t j = 0; j < nt; ++j) {
        const double xj = g.node(j)[0];
        if (std::fabs(xj) > edge + 0.5 * h) continue;
        const auto row = k.sum.row(*ti, j);
        for (std::size_t m = 0; m < nt; ++m) w[m] = h * std::max(row[m], 0.0);
        double* C = cdf.data() + j * (nt + 1);
        C[0] = 0.0;
        for (std::size_t m = 0; m < nt; ++m) {
            const double lo = m > 0 ? w[m - 1] : 0.0, hi = m + 1 < nt ? w[m + 1] : 0.0;
            C[m + 1] = C[m] + std::max(w[m] - (lo - 2.0 * w[m] + hi) / 24.0, 0.0);
        }
        outside[j] = std::max(k.outside_mass[*ti * k.sum.sources.size() + j], 0.0);
        const double err = std::fabs(heat::row_sum(k, *ti, j) - 1.0);
        if (err > o.max_row_error)
            throw AccuracyError("kernel row at x = " + std::to_string(xj) + " has mass error " + std::to_string(err));
        usable[j] = 1;
    }

    struct ChainStep {
        const SimConfig& c;
        const heat::SeriesKernel& k;
        const std::vector<double>& cdf;
        const std::vector<double>& outside;
        const std::vector<char>& usable;
        PathSet& out;
        double L, h, edge;
        std::size_t nt;
        rng::Stream stream(std::size_t i) const { return rng::Stream(c.seed, rng::kChainStreamBase + i); }
        bool operator()(rng::Stream& s, std::size_t i, std::span<const double> x, std::span<double> inc,
                        std::span<double> nx) const {
            if (!std::isfinite(x[0])) return false;
            const long jl = std::lround((x[0] + L) / h);
            if (std::fabs(x[0]) > edge || jl < 0 || jl >= static_cast<long>(nt) || !usable[jl]) {
                double b;
                draw_increment(c.params, c.dt, 1, s, inc);
                if (!eval_field(c.field, x, std::span<double>(&b, 1))) return false;
                nx[0] = (x[0] + inc[0]) + b * c.dt;
                ++out.fallback_steps[i];
                return std::isfinite(nx[0]);
            }
            const std::size_t j = static_cast<std::size_t>(jl);
            const double xj = -L + h * static_cast<double>(j);
            const double* C = cdf.data() + j * (nt + 1);
            const double box = C[nt];
            const double u = s.uniform() * (box + outside[j]);
            double y;
            if (u < box) {
                const std::size_t m = static_cast<std::size_t>(std::upper_bound(C, C + nt + 1, u) - C) - 1;
                const double w = C[m + 1] - C[m];
                y = -L + h * (static_cast<double>(m) - 0.5) + (w > 0.0 ? h * (u - C[m]) / w : 0.5 * h);
            } else {
                double b;
                if (!eval_field(c.field, std::span<const double>(&xj, 1), std::span<double>(&b, 1))) return false;
                int tries = 0;
                do {
                    double z;
                    sample_stable_increment(c.params, c.dt, s, std::span<double>(&z, 1));
                    y = xj + z + b * c.dt;
                    if (++tries > 100000) throw AccuracyError("kernel chain tail rejection did not terminate");
                } while (std::fabs(y) <= L + 0.5 * h);
            }
            inc[0] = y - xj;
            nx[0] = x[0] + inc[0];
            return std::isfinite(nx[0]);
        }
    };
    PathSet out = empty_set(c, "kernel_chain");
    run_paths(c, out, ChainStep{c, k, cdf, outside, usable, out, L, h, edge, nt});
    return out;
}

double levy_expected_count(const stable::StableParams& p, double rho, double T) {
    if (!(rho > 0.0)) throw DomainError("jump threshold must be > 0");
    return T * p.normalizer * p.sphere_area * std::pow(rho, -p.alpha) / p.alpha;
}

namespace {

std::vector<double> jump_counts(const PathSet& s, double rho, double T) {
    if (s.jump_threshold > rho * (1.0 + 1e-12)) throw ConfigError("paths were logged with a threshold above rho");
    if (static_cast<double>(s.steps) * s.dt < T * (1.0 - 1e-12)) throw ConfigError("path horizon is shorter than T");
    const std::size_t kmax = static_cast<std::size_t>(std::llround(T / s.dt));
    std::vector<double> counts;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.failed[i]) continue;
        std::size_t n = 0;
        for (const auto& j : s.jump_log(i))
            if (j.step < kmax && norm(std::span<const double>(j.increment.data(), s.d)) >= rho) ++n;
        counts.push_back(static_cast<double>(n));
    }
    return counts;
}

void mean_var(const std::vector<double>& v, double& mean, double& var) {
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= static_cast<double>(v.size() > 1 ? v.size() - 1 : 1);
}

}  // namespace

LevySystemReport levy_system_check(const PathSet& paths, const stable::StableParams& p, double rho, double T,
                                   const PathSet* coarse) {
    LevySystemReport r;
    r.rho = rho;
    r.T = T;
    r.expected = levy_expected_count(p, rho, T);
    const auto counts = jump_counts(paths, rho, T);
    r.n_paths = counts.size();
    if (static_cast<double>(r.n_paths) * r.expected < 25.0)
        throw InsufficientSample("expected total jump count " + std::to_string(r.n_paths * r.expected) +
                                 " is below 25; a 3-sigma test needs more paths");
    double var;
    mean_var(counts, r.observed_mean, var);
    r.std_error = std::sqrt(var / static_cast<double>(r.n_paths));
    r.z_score = r.std_error > 0.0 ? (r.observed_mean - r.expected) / r.std_error : 0.0;
    r.dispersion = r.observed_mean > 0.0 ? var / r.observed_mean : 0.0;
    if (coarse) {
        const auto cc = jump_counts(*coarse, rho, T);
        double mc, vc;
        mean_var(cc, mc, vc);
        r.extrapolated = 2.0 * r.observed_mean - mc;
    }
    return r;
}

EmpiricalResolvent empirical_resolvent(const PathSet& paths, double lambda, const TestFunction& g,
                                       std::optional<double> tolerance) {
    if (!(lambda > 0.0)) throw DomainError("lambda must be > 0");
    if (paths.storage != Storage::full) throw ConfigError("empirical resolvent needs stored paths");
    if (g.d != paths.d) throw ConfigError("test function dimension does not match the paths");
    EmpiricalResolvent r;
    const double T = static_cast<double>(paths.steps) * paths.dt;
    r.truncation_bound = std::exp(-lambda * T) * sup_scan(g) / lambda;
    if (tolerance && r.truncation_bound > 0.5 * *tolerance)
        throw ConfigError("horizon too short: truncation bound " + std::to_string(r.truncation_bound) +
                          " exceeds half the tolerance");
    const double dt = paths.dt, a = lambda * dt;
    const double w0 = -std::expm1(-a) / lambda;                       // int_0^dt e^{-lambda s} ds
    const double w1 = (-std::expm1(-a) - a * std::exp(-a)) / (lambda * lambda) / dt;  // int s/dt e^{-lambda s}
    std::vector<double> vals;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (paths.failed[i]) continue;
        double sum = 0.0, gk = g(paths.state(i, 0));
        for (std::size_t k = 0; k < paths.steps; ++k) {
            const double gn = g(paths.state(i, k + 1));
            sum += std::exp(-lambda * paths.time(k)) * (gk * w0 + (gn - gk) * w1);
            gk = gn;
        }
        vals.push_back(sum);
    }
    if (vals.size() < 2) throw InsufficientSample("empirical resolvent needs at least two valid paths");
    double var;
    mean_var(vals, r.value, var);
    r.n_used = vals.size();
    r.std_error = std::sqrt(var / static_cast<double>(vals.size()));
    return r;
}

double EmpiricalDensity::cdf(double x) const {
    if (sorted.empty()) return 0.0;
    const auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
    return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

EmpiricalDensity empirical_density(std::vector<double> samples, double lo, double hi, std::size_t bins) {
    if (!(hi > lo) || bins == 0) throw ConfigError("histogram needs hi > lo and bins > 0");
    EmpiricalDensity e;
    e.lo = lo;
    e.hi = hi;
    e.counts.assign(bins, 0);
    for (double x : samples) {
        if (x < lo) {
            ++e.below;
        } else if (x >= hi) {
            ++e.above;
        } else {
            const auto b = std::min<std::size_t>(bins - 1, static_cast<std::size_t>((x - lo) / e.bin_width()));
            ++e.counts[b];
        }
    }
    std::sort(samples.begin(), samples.end());
    e.sorted = std::move(samples);
    return e;
}

std::vector<double> final_values(const PathSet& s, int axis) {
    std::vector<double> v;
    v.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i)
        if (!s.failed[i]) v.push_back(s.finals[i * s.d + axis]);
    return v;
}

double ks_statistic(std::vector<double> x, const std::function<double(double)>& cdf) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double D = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double F = cdf(x[i]);
        D = std::max({D, (i + 1) / n - F, F - i / n});
    }
    return D;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double D = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        D = std::max(D, std::fabs(i / na - j / nb));
    }
    return D;
}

double ks_critical_one(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

double ks_critical_two(std::size_t n, std::size_t m) {
    const double a = static_cast<double>(n), b = static_cast<double>(m);
    return 1.628 * std::sqrt((a + b) / (a * b));
}

std::complex<double> empirical_cf_1d(std::span<const double> x, double xi) {
    const auto s = simd::active().sincos_sum(x.data(), xi, x.size());
    const double n = static_cast<double>(x.size());
    return {s.cos_sum / n, s.sin_sum / n};
}

std::complex<double> empirical_cf(std::span<const double> samples, int d, std::span<const double> xi) {
    if (d == 1) return empirical_cf_1d(samples, xi[0]);
    const std::size_t n = samples.size() / d;
    std::vector<double> proj(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (int a = 0; a < d; ++a) s += xi[a] * samples[j * d + a];
        proj[j] = s;
    }
    return empirical_cf_1d(proj, 1.0);
}

CfCheck cf_check(std::span<const double> samples, int d, double dt, double alpha, int n_xi) {
    CfCheck r;
    r.n = samples.size() / d;
    if (r.n == 0) throw InsufficientSample("no samples for the characteristic function check");
    r.bound = 3.0 / std::sqrt(static_cast<double>(r.n));
    const double scale = std::pow(dt, -1.0 / alpha);
    for (int j = 0; j < n_xi; ++j) {
        const double m = scale * (0.1 + 2.9 * j / std::max(1, n_xi - 1));
        double xi[3] = {m, 0.0, 0.0};
        if (d >= 2) {
            const double th = 2.399963229728653 * j;  // golden angle: spread directions
            xi[0] = m * std::cos(th);
            xi[1] = m * std::sin(th);
        }
        const auto phi = empirical_cf(samples, d, std::span<const double>(xi, d));
        const double dev = std::abs(phi - std::exp(-dt * std::pow(m, alpha)));
        r.xi.push_back(m);
        r.deviation.push_back(dev);
        r.max_deviation = std::max(r.max_deviation, dev);
    }
    return r;
}

WeakErrorLadder weak_error_ladder(const SimConfig& c, const std::function<double(double)>& f, int levels) {
    c.validate();
    check_field(c);
    if (c.params.d != 1) throw DomainError("weak error ladder is implemented for d = 1");
    if (levels < 2) throw ConfigError("weak error ladder needs at least two levels");
    const std::size_t nl = static_cast<std::size_t>(levels) + 1;
    const std::size_t finest = c.steps() << levels;
    const double dtf = c.dt / std::ldexp(1.0, levels);
    std::vector<double> fx(c.n_paths * nl, 0.0);
    parallel_for(c.n_paths, c.threads, [&](std::size_t i, int) {
        rng::Stream s(c.seed, i);
        std::vector<double> x(nl, c.x0[0]), acc(nl, 0.0);
        for (std::size_t k = 0; k < finest; ++k) {
            double z;
            sample_stable_increment(c.params, dtf, s, std::span<double>(&z, 1));
            for (std::size_t l = 0; l < nl; ++l) {
                acc[l] += z;
                const std::size_t every = std::size_t{1} << (nl - 1 - l);
                if ((k + 1) % every == 0) {
                    const double dtl = dtf * static_cast<double>(every);
                    x[l] = (x[l] + acc[l]) + c.field.eval_1d(x[l]) * dtl;
                    acc[l] = 0.0;
                }
            }
        }
        for (std::size_t l = 0; l < nl; ++l) fx[i * nl + l] = f(x[l]);
    });
    WeakErrorLadder w;
    const double n = static_cast<double>(c.n_paths);
    for (std::size_t l = 0; l < nl; ++l) {
        w.dts.push_back(c.dt / std::ldexp(1.0, static_cast<int>(l)));
        double m = 0.0;
        for (std::size_t i = 0; i < c.n_paths; ++i) m += fx[i * nl + l];
        w.means.push_back(m / n);
    }
    for (std::size_t l = 0; l + 1 < nl; ++l) {
        double m = 0.0, v = 0.0;
        for (std::size_t i = 0; i < c.n_paths; ++i) m += fx[i * nl + l] - fx[i * nl + l + 1];
        m /= n;
        for (std::size_t i = 0; i < c.n_paths; ++i) {
            const double e = fx[i * nl + l] - fx[i * nl + l + 1] - m;
            v += e * e;
        }
        w.diffs.push_back(m);
        w.diff_errors.push_back(std::sqrt(v / (n - 1) / n));
    }
    w.monotone = true;
    for (std::size_t l = 0; l + 1 < w.diffs.size(); ++l)
        if (!(std::fabs(w.diffs[l + 1]) < std::fabs(w.diffs[l]))) w.monotone = false;
    return w;
}

namespace {

constexpr char kPathMagic[8] = {'S', 'D', 'P', 'A', 'T', 'H', 'S', '1'};

template <class T>
void put(std::ostream& o, const T& v) {
    o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& in) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ConfigError("truncated path file");
    return v;
}

}  // namespace

void write_paths_binary(const PathSet& s, const std::string& path) {
    static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");
    std::ofstream o(path, std::ios::binary);
    if (!o) throw ConfigError("cannot write " + path);
    o.write(kPathMagic, 8);
    put<std::uint32_t>(o, 1);
    put<std::uint32_t>(o, static_cast<std::uint32_t>(s.d));
    put<std::uint64_t>(o, s.size());
    put<std::uint64_t>(o, s.steps);
    put<double>(o, s.dt);
    put<std::uint32_t>(o, s.storage == Storage::full ? 0u : 1u);
    put<std::uint32_t>(o, 0);
    const std::uint64_t rows = s.storage == Storage::full ? s.steps + 1 : 1;
    for (std::size_t i = 0; i <= s.size(); ++i) put<std::uint64_t>(o, i * rows);
    const auto& st = s.storage == Storage::full ? s.states : s.finals;
    o.write(reinterpret_cast<const char*>(st.data()), static_cast<std::streamsize>(st.size() * sizeof(double)));
    if (s.storage == Storage::full)
        o.write(reinterpret_cast<const char*>(s.increments.data()),
                static_cast<std::streamsize>(s.increments.size() * sizeof(double)));
    o.write(reinterpret_cast<const char*>(s.failed.data()), static_cast<std::streamsize>(s.failed.size()));
    if (!o) throw ConfigError("write failed: " + path);
}

PathSet read_paths_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kPathMagic, 8) != 0) throw ConfigError(path + " is not a path file");
    if (get<std::uint32_t>(in) != 1) throw ConfigError("unsupported path file version");
    PathSet s;
    s.d = static_cast<int>(get<std::uint32_t>(in));
    const auto n = get<std::uint64_t>(in);
    s.steps = get<std::uint64_t>(in);
    s.dt = get<double>(in);
    s.storage = get<std::uint32_t>(in) == 0 ? Storage::full : Storage::final_only;
    get<std::uint32_t>(in);
    std::vector<std::uint64_t> off(n + 1);
    for (auto& v : off) v = get<std::uint64_t>(in);
    const std::size_t d = s.d;
    auto& st = s.storage == Storage::full ? s.states : s.finals;
    st.resize(off[n] * d);
    in.read(reinterpret_cast<char*>(st.data()), static_cast<std::streamsize>(st.size() * sizeof(double)));
    if (s.storage == Storage::full) {
        s.increments.resize(n * s.steps * d);
        in.read(reinterpret_cast<char*>(s.increments.data()),
                static_cast<std::streamsize>(s.increments.size() * sizeof(double)));
        s.finals.resize(n * d);
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(s.states.begin() + ((i + 1) * (s.steps + 1) - 1) * d, d, s.finals.begin() + i * d);
    }
    s.failed.resize(n);
    in.read(reinterpret_cast<char*>(s.failed.data()), static_cast<std::streamsize>(n));
    if (!in) throw ConfigError("truncated path file " + path);
    s.jump_offsets.assign(n + 1, 0);
    s.fallback_steps.assign(n, 0);
    return s;
}

void write_paths_csv(const PathSet& s, const std::string& path, std::size_t max_paths) {
    std::ofstream o(path);
    if (!o) throw ConfigError("cannot write " + path);
    o.precision(16);
    o << std::scientific;
    const bool full = s.storage == Storage::full;
    o << (full ? "path,t" : "path");
    for (int a = 0; a < s.d; ++a) o << ",x" << a;
    o << '\n';
    const std::size_t n = std::min(max_paths, s.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t rows = full ? s.steps + 1 : 1;
        for (std::size_t k = 0; k < rows; ++k) {
            o << i;
            if (full) o << ',' << s.time(k);
            const auto x = full ? s.state(i, k) : s.final_state(i);
            for (double v : x) o << ',' << v;
            o << '\n';
        }
    }
}

}  // namespace sdrift::sim
