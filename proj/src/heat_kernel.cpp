#include "stabledrift/heat_kernel.hpp"

#include "stabledrift/errors.hpp"
#include "stabledrift/parallel.hpp"
#include "stabledrift/quadrature.hpp"
#include "stabledrift/simd.hpp"
#include "stabledrift/spectral_grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <map>
#include <numbers>
#include <sstream>

namespace sdrift::heat {
namespace {

constexpr double kTimeTol = 1e-10;

int auto_internal_n(int d, int n_side) {
    const int want = d == 1 ? std::max(2048, 5 * n_side) : std::max(128, (5 * n_side) / 2);
    return static_cast<int>(std::bit_ceil(static_cast<unsigned>(want)));
}

std::string where(double t, const Point& x, const Point& y, int d) {
    std::ostringstream os;
    os << "(t=" << t << ", x=(" << x[0];
    for (int i = 1; i < d; ++i) os << "," << x[i];
    os << "), y=(" << y[0];
    for (int i = 1; i < d; ++i) os << "," << y[i];
    os << "))";
    return os.str();
}

}  // namespace

std::size_t SpaceTimeGrid::nodes() const {
    std::size_t n = 1;
    for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(n_side);
    return n;
}

Point SpaceTimeGrid::node(std::size_t i) const {
    Point x{};
    if (d == 1) {
        x[0] = -L + static_cast<double>(i) * h;
    } else {
        x[0] = -L + static_cast<double>(i / n_side) * h;
        x[1] = -L + static_cast<double>(i % n_side) * h;
    }
    return x;
}

std::size_t SpaceTimeGrid::nearest_node(const Point& x) const {
    auto axis = [&](double v) {
        const long k = std::lround((v + L) / h);
        return static_cast<std::size_t>(std::clamp<long>(k, 0, n_side - 1));
    };
    if (d == 1) return axis(x[0]);
    return axis(x[0]) * n_side + axis(x[1]);
}

std::optional<std::size_t> SpaceTimeGrid::find_slice(double t) const {
    for (std::size_t i = 0; i < times.size(); ++i)
        if (std::fabs(times[i] - t) <= kTimeTol * std::max(1.0, t)) return i;
    return std::nullopt;
}

std::size_t SpaceTimeGrid::slice(double t) const {
    const auto s = find_slice(t);
    if (!s) {
        std::ostringstream os;
        os << "time " << t << " is not a stored slice of the kernel grid";
        throw DomainError(os.str());
    }
    return *s;
}

double SpaceTimeGrid::weight(std::size_t i) const {
    auto w1 = [&](std::size_t k) { return (k == 0 || k + 1 == static_cast<std::size_t>(n_side)) ? 0.5 * h : h; };
    if (d == 1) return w1(i);
    return w1(i / n_side) * w1(i % n_side);
}

double free_tail_mass(const stable::StableParams& p, double t, double L) {
    const double r = L * std::pow(t, -1.0 / p.alpha);
    if (p.d == 1) return 2.0 * stable::unit_cdf(p.alpha).upper_tail(r);
    return stable::profile(p.d, p.alpha).mass_beyond(r);
}

SpaceTimeGrid make_grid(const stable::StableParams& p, const GridSpec& spec) {
    if (spec.d != p.d) throw ConfigError("kernel grid dimension does not match the stable parameters");
    if (spec.d != 1 && spec.d != 2) throw ConfigError("kernel tables support d = 1 and d = 2");
    if (!(spec.L > 0.0) || !(spec.h > 0.0)) throw ConfigError("kernel grid needs L > 0 and h > 0");
    const double cells = spec.L / spec.h;
    if (std::fabs(cells - std::round(cells)) > 1e-9 * cells)
        throw ConfigError("kernel grid needs L to be an integer multiple of h");
    if (!(spec.horizon > 0.0) || !(spec.slice_dt > 0.0) || !(spec.dt > 0.0))
        throw ConfigError("kernel grid needs positive horizon, slice spacing and time step");
    if (spec.graded_until < 0.0 || spec.graded_steps < 1) throw ConfigError("invalid graded start mesh");

    SpaceTimeGrid g;
    g.spec = spec;
    g.d = spec.d;
    g.L = spec.L;
    g.h = spec.h;
    g.n_side = 2 * static_cast<int>(std::lround(cells)) + 1;

    std::vector<double> ts;
    for (long k = 1;; ++k) {
        const double t = static_cast<double>(k) * spec.slice_dt;
        if (t > spec.horizon * (1.0 + kTimeTol)) break;
        ts.push_back(t);
    }
    for (double t : spec.extra_times) {
        if (!(t > 0.0) || t > spec.horizon * (1.0 + kTimeTol))
            throw ConfigError("extra kernel times must lie in (0, horizon]");
        ts.push_back(t);
    }
    ts.push_back(spec.horizon);
    std::sort(ts.begin(), ts.end());
    for (double t : ts)
        if (g.times.empty() || t - g.times.back() > kTimeTol * std::max(1.0, t)) g.times.push_back(t);

    g.internal_n = spec.internal_n > 0 ? spec.internal_n : auto_internal_n(g.d, g.n_side);
    if (g.internal_n % 2 != 0) throw ConfigError("internal FFT size must be even");
    g.period = g.internal_n * g.h;
    if (g.period < 2.0 * (2.0 * g.L)) throw ConfigError("internal FFT domain must be at least twice the box width");

    // Internal mesh: graded start, then uniform, with every slice inserted.
    std::vector<double> mesh{0.0};
    const double tau0 = std::min(spec.graded_until, spec.horizon);
    if (tau0 > 0.0)
        for (int j = 1; j <= spec.graded_steps; ++j) {
            const double u = static_cast<double>(j) / spec.graded_steps;
            mesh.push_back(tau0 * u * u * u);
        }
    for (long m = 1;; ++m) {
        const double t = tau0 + static_cast<double>(m) * spec.dt;
        if (t >= spec.horizon * (1.0 - kTimeTol)) break;
        mesh.push_back(t);
    }
    // Drop uniform nodes that nearly coincide with a slice, then insert slices.
    std::vector<double> merged;
    for (double t : mesh) {
        bool near = false;
        for (double s : g.times) near = near || (std::fabs(t - s) < 1e-3 * spec.dt && t != 0.0);
        if (!near) merged.push_back(t);
    }
    merged.insert(merged.end(), g.times.begin(), g.times.end());
    std::sort(merged.begin(), merged.end());
    g.steps.clear();
    for (double t : merged)
        if (g.steps.empty() || t - g.steps.back() > kTimeTol * std::max(1.0, t)) g.steps.push_back(t);
    for (double s : g.times) {
        std::size_t best = 0;
        for (std::size_t i = 0; i < g.steps.size(); ++i)
            if (std::fabs(g.steps[i] - s) < std::fabs(g.steps[best] - s)) best = i;
        g.steps[best] = s;
        g.slice_step.push_back(best);
    }

    const double measured = free_tail_mass(p, spec.horizon, spec.L);
    if (spec.tail_bound && measured > *spec.tail_bound) {
        std::ostringstream os;
        os << "free tail mass outside [-L, L]^d at the horizon is " << measured << ", above the declared bound "
           << *spec.tail_bound << "; increase L";
        throw ConfigError(os.str());
    }
    g.tail_bound = spec.tail_bound.value_or(measured);
    return g;
}

std::vector<Point> default_probes(const SpaceTimeGrid& g) {
    std::vector<Point> pts;
    const double r = 0.25 * g.L;
    if (g.d == 1) {
        for (double x : {-2.0 * r, -r, 0.0, r, 2.0 * r}) pts.push_back({x, 0.0, 0.0});
    } else {
        pts.push_back({});
        pts.push_back({r, 0.0, 0.0});
        pts.push_back({-r, r, 0.0});
    }
    return pts;
}

std::optional<std::size_t> KernelTable::source_slot(std::size_t node) const {
    for (std::size_t i = 0; i < sources.size(); ++i)
        if (sources[i] == node) return i;
    return std::nullopt;
}

void KernelTable::update_sup_norms() {
    sup_norm.assign(times.size(), 0.0);
    const std::size_t per = sources.size() * n_targets;
    for (std::size_t t = 0; t < times.size(); ++t) sup_norm[t] = simd::active().max_abs(values.data() + t * per, per);
}

namespace {

// Exponential trapezoid for one step of length dt: the source is taken as
// e^{-(s - t_n) lambda} times a linear function, which is exact for the
// free-order-0 source of a constant drift,
//   X(t+dt) = e^{-z} (X(t) + dt/2 S(t)) + dt/2 S(t+dt),  z = dt |xi|^alpha.
// Arrays are doubled to act on interleaved complex data.
struct StepWeights {
    std::vector<double> e2, wa2, wb2;
};

struct Trace {
    std::vector<std::vector<double>> source_sum;  // per internal step, complex
    std::vector<std::vector<double>> x_sum;       // per slice, complex
    std::vector<double> x0_phase;                 // order-0 coefficients at t = 0
};

struct Work {
    explicit Work(const spectral::Grid& g) : ws(g) {}
    spectral::Workspace ws;
    std::vector<double> tmp_r, tmp_c, s_new, u, u_sum, x0, box;
    std::vector<std::vector<double>> x, s_old;
};

class Stepper {
public:
    Stepper(const stable::StableParams& p, const kato::DriftField& b, const SpaceTimeGrid& g)
        : p_(p), g_(g), sg_(g.d, g.internal_n, g.h, -0.5 * g.internal_n * g.h) {
        const std::size_t M = sg_.complex_size(), R = sg_.real_size();
        lambda_.resize(M);
        for (std::size_t c = 0; c < M; ++c) lambda_[c] = std::pow(sg_.xi_norm()[c], p.alpha);
        zero_ = b.is_zero();
        // Drift sampled on the internal grid; exact singular nodes get the
        // symmetric cell average 0.
        bfield_.assign(g.d, std::vector<double>(R, 0.0));
        if (!zero_) {
            std::vector<double> y(g.d), out(3);
            for (std::size_t i = 0; i < R; ++i) {
                const std::size_t i0 = g.d == 1 ? i : i / g.internal_n;
                const std::size_t i1 = g.d == 1 ? 0 : i % g.internal_n;
                y[0] = sg_.origin() + static_cast<double>(i0) * g.h;
                if (g.d == 2) y[1] = sg_.origin() + static_cast<double>(i1) * g.h;
                try {
                    b.eval(y, out);
                } catch (const DomainError&) {
                    out.assign(3, 0.0);
                }
                for (int a = 0; a < g.d; ++a) bfield_[a][i] = out[a];
            }
        }
        // Box node -> internal linear index.
        const int offset = g.internal_n / 2 - (g.n_side - 1) / 2;
        box_.resize(g.nodes());
        for (std::size_t j = 0; j < g.nodes(); ++j) {
            if (g.d == 1) {
                box_[j] = static_cast<std::size_t>(offset) + j;
            } else {
                const std::size_t j0 = j / g.n_side, j1 = j % g.n_side;
                box_[j] = (offset + j0) * g.internal_n + (offset + j1);
            }
        }
        cell_ = std::pow(g.h, g.d);
        {
            const double R = 0.25 * sg_.period();
            std::vector<char> in_box(R_size(), 0);
            for (std::size_t j : box_) in_box[j] = 1;
            for (std::size_t i = 0; i < R_size(); ++i) {
                if (in_box[i]) continue;
                Point y{};
                y[0] = sg_.origin() + static_cast<double>(g.d == 1 ? i : i / g.internal_n) * g.h;
                if (g.d == 2) y[1] = sg_.origin() + static_cast<double>(i % g.internal_n) * g.h;
                bool inside = true;
                for (int a = 0; a < g.d; ++a) inside = inside && std::fabs(y[a]) <= R;
                if (inside) {
                    outer_.push_back(i);
                    outer_pos_.push_back(y);
                }
            }
        }
        // Weights per distinct step length.
        std::map<double, int> index;
        for (std::size_t n = 0; n + 1 < g.steps.size(); ++n) {
            const double dt = g.steps[n + 1] - g.steps[n];
            auto it = index.find(dt);
            if (it == index.end()) {
                it = index.emplace(dt, static_cast<int>(weights_.size())).first;
                StepWeights w;
                w.e2.resize(2 * M);
                w.wa2.resize(2 * M);
                w.wb2.assign(2 * M, 0.5 * dt);
                for (std::size_t c = 0; c < M; ++c) {
                    const double e = std::exp(-dt * lambda_[c]);
                    w.e2[2 * c] = w.e2[2 * c + 1] = e;
                    w.wa2[2 * c] = w.wa2[2 * c + 1] = 0.5 * dt * e;
                }
                weights_.push_back(std::move(w));
            }
            step_w_.push_back(it->second);
        }
        is_slice_.assign(g.steps.size(), -1);
        for (std::size_t s = 0; s < g.slice_step.size(); ++s) is_slice_[g.slice_step[s]] = static_cast<int>(s);
    }

    const spectral::Grid& spectral_grid() const { return sg_; }
    const std::vector<double>& lambda() const { return lambda_; }
    std::size_t box_index(std::size_t j) const { return box_[j]; }
    bool zero_drift() const { return zero_; }

    std::unique_ptr<Work> make_work(int K) const {
        auto w = std::make_unique<Work>(sg_);
        const std::size_t M2 = 2 * sg_.complex_size(), R = sg_.real_size();
        w->tmp_r.resize(R);
        w->u.resize(R);
        w->u_sum.resize(R);
        w->tmp_c.resize(M2);
        w->s_new.resize(M2);
        w->x0.resize(M2);
        w->x.assign(K + 1, std::vector<double>(M2));
        w->s_old.assign(K + 1, std::vector<double>(M2));
        return w;
    }

    // S = -div(b u) in Fourier space.
    void source(Work& w, const double* u, double* s) const {
        const auto& k = simd::active();
        const std::size_t R = sg_.real_size(), M = sg_.complex_size();
        for (int a = 0; a < g_.d; ++a) {
            k.mul(w.tmp_r.data(), bfield_[a].data(), u, R);
            w.ws.forward(w.tmp_r.data(), w.tmp_c.data());
            k.mul_neg_i_xi(s, w.tmp_c.data(), sg_.xi(a).data(), M, a > 0);
        }
    }

    // Order-0 coefficients at t = 0: h^{-d} e^{-i xi.(x - origin)}.
    void initial_order0(std::size_t src_node, double* x0) const {
        const std::size_t M = sg_.complex_size();
        const std::size_t ii = box_[src_node];
        const long n = g_.internal_n;
        const long i0 = g_.d == 1 ? static_cast<long>(ii) : static_cast<long>(ii / n);
        const long i1 = g_.d == 1 ? 0 : static_cast<long>(ii % n);
        const double scale = std::pow(g_.h, -g_.d);
        for (std::size_t c = 0; c < M; ++c) {
            long m = static_cast<long>(sg_.wavenumber(0)[c]) * i0;
            if (g_.d == 2) m += static_cast<long>(sg_.wavenumber(1)[c]) * i1;
            m %= n;
            if (m < 0) m += n;
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
            x0[2 * c] = scale * std::cos(ang);
            x0[2 * c + 1] = scale * std::sin(ang);
        }
    }

    // `outside` is the mass of the order in the part of the internal domain
// beyond the box, up to the outer cube [-P/4, P/4]^d (well clear of the
// periodic wrap), plus the free tail beyond that cube for order 0.
    using Sink = std::function<void(std::size_t slice, int order, const double* box_values, double outside)>;

    // Runs orders 0..K for one source; sink receives box values per slice
    // and order (order 0 is the exact density; zero orders are not sent).
    void run(std::size_t src_node, int K, Work& w, const Sink& sink, Trace* tr) const {
        const auto& kern = simd::active();
        const std::size_t M2 = 2 * sg_.complex_size(), R = sg_.real_size();
        const std::size_t nt = g_.nodes(), ns = g_.times.size();
        const Point x = g_.node(src_node);
        initial_order0(src_node, w.x0.data());
        if (tr) {
            tr->x0_phase = w.x0;
            tr->source_sum.assign(g_.steps.size(), std::vector<double>(M2, 0.0));
            tr->x_sum.assign(ns, std::vector<double>(M2, 0.0));
        }
        w.box.resize(nt);
        auto emit = [&](std::size_t slice, int k, const double* u) {
            if (!sink) return;
            for (std::size_t j = 0; j < nt; ++j) {
                const double v = u[box_[j]];
                if (!std::isfinite(v))
                    throw AccuracyError("non-finite perturbation term of order " + std::to_string(k) + " at " +
                                        where(g_.times[slice], x, g_.node(j), g_.d));
                w.box[j] = v;
            }
            double outside = 0.0;
            for (std::size_t i : outer_) outside += u[i];
            sink(slice, k, w.box.data(), outside * cell_);
        };
        auto emit_exact = [&](std::size_t slice) {
            if (!sink) return;
            const double t = g_.times[slice];
            double dy[3];
            for (std::size_t j = 0; j < nt; ++j) {
                const Point y = g_.node(j);
                for (int a = 0; a < g_.d; ++a) dy[a] = y[a] - x[a];
                w.box[j] = stable::density(p_, t, std::span<const double>(dy, g_.d));
            }
            double outside = 0.0;
            for (std::size_t m = 0; m < outer_.size(); ++m) {
                for (int a = 0; a < g_.d; ++a) dy[a] = outer_pos_[m][a] - x[a];
                outside += stable::density(p_, t, std::span<const double>(dy, g_.d));
            }
            outside *= cell_;
            const double R = 0.25 * sg_.period();
            if (g_.d == 1) {
                outside += stable::cdf_1d(p_, t, -R, x[0]) + 1.0 - stable::cdf_1d(p_, t, R, x[0]);
            } else {
                const double gap = R - std::max(std::fabs(x[0]), std::fabs(x[1]));
                outside += free_tail_mass(p_, t, gap);
            }
            sink(slice, 0, w.box.data(), outside);
        };

        for (int k = 1; k <= K; ++k) {
            std::fill(w.x[k].begin(), w.x[k].end(), 0.0);
            std::fill(w.s_old[k].begin(), w.s_old[k].end(), 0.0);
        }
        if (!zero_ && K >= 1) {
            // u_0(0) is the discrete delta at the source node.
            std::fill(w.u.begin(), w.u.end(), 0.0);
            w.u[box_[src_node]] = std::pow(g_.h, -g_.d);
            source(w, w.u.data(), w.s_old[1].data());
            if (tr) tr->source_sum[0] = w.s_old[1];
        }
        for (std::size_t n = 0; n + 1 < g_.steps.size(); ++n) {
            const StepWeights& sw = weights_[step_w_[n]];
            kern.mul(w.x0.data(), sw.e2.data(), w.x0.data(), M2);
            const int slice = is_slice_[n + 1];
            if (slice >= 0) emit_exact(static_cast<std::size_t>(slice));
            if (zero_ || K == 0) {
                if (tr && slice >= 0) tr->x_sum[static_cast<std::size_t>(slice)] = w.x0;
                continue;
            }
            const bool need_sum = tr != nullptr;
            w.ws.backward(w.x0.data(), w.u.data());
            if (need_sum) w.u_sum = w.u;
            for (int k = 1; k <= K; ++k) {
                source(w, w.u.data(), w.s_new.data());
                kern.etd_triad(w.x[k].data(), sw.e2.data(), sw.wa2.data(), w.s_old[k].data(), sw.wb2.data(),
                               w.s_new.data(), M2);
                std::swap(w.s_old[k], w.s_new);
                if (k < K || slice >= 0 || need_sum) {
                    w.ws.backward(w.x[k].data(), w.u.data());
                    if (slice >= 0) emit(static_cast<std::size_t>(slice), k, w.u.data());
                    if (need_sum) kern.axpy(w.u_sum.data(), 1.0, w.u.data(), R);
                }
            }
            if (tr) {
                source(w, w.u_sum.data(), tr->source_sum[n + 1].data());
                if (slice >= 0) {
                    auto& xs = tr->x_sum[static_cast<std::size_t>(slice)];
                    xs = w.x0;
                    for (int k = 1; k <= K; ++k) kern.axpy(xs.data(), 1.0, w.x[k].data(), M2);
                }
            }
        }
    }

private:
    const stable::StableParams& p_;
    const SpaceTimeGrid& g_;
    spectral::Grid sg_;
    std::vector<double> lambda_;
    bool zero_ = false;
    std::vector<std::vector<double>> bfield_;
    std::vector<std::size_t> box_;
    std::vector<StepWeights> weights_;
    std::vector<int> step_w_;
    std::vector<int> is_slice_;
    std::vector<std::size_t> outer_;
    std::vector<Point> outer_pos_;
    double cell_ = 1.0;

    std::size_t R_size() const { return sg_.real_size(); }
};

}  // namespace


namespace {

std::vector<std::size_t> snap_sources(const SpaceTimeGrid& g, const std::vector<Point>& pts) {
    std::vector<std::size_t> out;
    for (const Point& x : pts) {
        for (int a = 0; a < g.d; ++a)
            if (std::fabs(x[a]) > g.L) throw ConfigError("kernel probe source lies outside the box");
        const std::size_t j = g.nearest_node(x);
        if (std::find(out.begin(), out.end(), j) == out.end()) out.push_back(j);
    }
    return out;
}

using SourceSink =
    std::function<void(std::size_t source_slot, std::size_t slice, int order, const double* v, double outside)>;

void run_all(const Stepper& st, const std::vector<std::size_t>& sources, int K, int threads, const SourceSink& sink) {
    const int w = std::max(1, threads);
    std::vector<std::unique_ptr<Work>> work(static_cast<std::size_t>(w));
    parallel_for(sources.size(), w, [&](std::size_t i, int id) {
        if (!work[id]) work[id] = st.make_work(K);
        st.run(sources[i], K, *work[id],
               [&](std::size_t slice, int k, const double* v, double o) { sink(i, slice, k, v, o); }, nullptr);
    });
}

double ratio_of(double next, double cur) {
    if (cur == 0.0) return next == 0.0 ? 0.0 : HUGE_VAL;
    return next / cur;
}

KernelTable empty_table(const SpaceTimeGrid& g, const std::vector<std::size_t>& sources, int order) {
    KernelTable t;
    t.order = order;
    t.times = g.times;
    t.sources = sources;
    t.n_targets = g.nodes();
    t.values.assign(t.times.size() * sources.size() * t.n_targets, 0.0);
    return t;
}

bool interior(const SpaceTimeGrid& g, const Point& x) {
    for (int a = 0; a < g.d; ++a)
        if (std::fabs(x[a]) > 0.5 * g.L + 1e-12) return false;
    return true;
}

}  // namespace

SeriesKernel series_sum(const stable::StableParams& p, const kato::DriftField& b, const SpaceTimeGrid& g,
                        const SeriesOptions& opts) {
    if (opts.max_order < 2) throw ConfigError("series needs max_order >= 2");
    if (!(opts.ratio_threshold > 0.0 && opts.ratio_threshold < 1.0))
        throw ConfigError("series ratio threshold must lie in (0, 1)");
    if (b.d() != p.d) throw ConfigError("drift dimension does not match the stable parameters");
    kato::check_admissible(b, p);
    const Stepper st(p, b, g);
    const std::size_t ns = g.times.size(), nt = g.nodes();
    const int Kmax = opts.fixed_order > 0 ? std::min(opts.max_order, opts.fixed_order + 1) : opts.max_order;
    const double theta = opts.ratio_threshold;

    // Pass 1: sup norms of every order on the probe sources.
    const auto probes = snap_sources(g, opts.probes.empty() ? default_probes(g) : opts.probes);
    std::vector<std::vector<double>> pilot(probes.size(), std::vector<double>((Kmax + 1) * ns, 0.0));
    const auto& kern = simd::active();
    run_all(st, probes, Kmax, opts.threads, [&](std::size_t i, std::size_t s, int k, const double* v, double) {
        pilot[i][k * ns + s] = kern.max_abs(v, nt);
    });
    std::vector<std::vector<double>> pn(Kmax + 1, std::vector<double>(ns, 0.0));
    for (const auto& pi : pilot)
        for (int k = 0; k <= Kmax; ++k)
            for (std::size_t s = 0; s < ns; ++s) pn[k][s] = std::max(pn[k][s], pi[k * ns + s]);

    // Summation depth: per slice the first K with two consecutive ratios
    // <= theta and a geometric remainder below tail_tolerance * |p|.
    int K = 0;
    bool any = false, all = true;
    for (std::size_t s = 0; s < ns; ++s) {
        int ks = -1;
        for (int k = 2; k <= Kmax && ks < 0; ++k) {
            const double r1 = ratio_of(pn[k - 1][s], pn[k - 2][s]), r2 = ratio_of(pn[k][s], pn[k - 1][s]);
            if (r1 <= theta && r2 <= theta && pn[k][s] / (1.0 - r2) <= opts.tail_tolerance * pn[0][s]) ks = k;
        }
        if (ks < 0) {
            all = false;
        } else {
            any = true;
            K = std::max(K, ks);
        }
    }
    if (opts.fixed_order > 0) {
        K = std::min(opts.fixed_order, Kmax);
        any = true;
        all = false;
    }
    if (!any)
        throw ConvergenceError("perturbation series shows no geometric decay on any time slice up to order " +
                               std::to_string(Kmax) + "; reduce the horizon");

    // Pass 2: materialize the summed kernel on the chosen sources.
    SeriesKernel out;
    out.params = p;
    out.field = b;
    out.grid = g;
    out.theta = theta;
    out.orders = K;
    out.stopped_by_rule = all;
    std::vector<std::size_t> sources = probes;
    if (opts.full_table) {
        sources.resize(nt);
        for (std::size_t j = 0; j < nt; ++j) sources[j] = j;
    }
    out.sum = empty_table(g, sources, K);
    const int store = std::clamp(opts.store_orders, 0, K);
    for (int k = 0; k <= store; ++k) out.terms.push_back(empty_table(g, sources, k));
    std::vector<std::vector<double>> sn(sources.size(), std::vector<double>((K + 1) * ns, 0.0));
    out.outside_mass.assign(ns * sources.size(), 0.0);
    run_all(st, sources, K, opts.threads, [&](std::size_t i, std::size_t s, int k, const double* v, double o) {
        out.outside_mass[s * sources.size() + i] += o;
        auto row = out.sum.row(s, i);
        kern.axpy(row.data(), 1.0, v, nt);
        if (k <= store) std::copy(v, v + nt, out.terms[k].row(s, i).begin());
        sn[i][k * ns + s] = kern.max_abs(v, nt);
    });
    out.sum.update_sup_norms();
    for (auto& t : out.terms) t.update_sup_norms();
    out.norms.assign(K + 1, std::vector<double>(ns, 0.0));
    for (const auto& si : sn)
        for (int k = 0; k <= K; ++k)
            for (std::size_t s = 0; s < ns; ++s) out.norms[k][s] = std::max(out.norms[k][s], si[k * ns + s]);

    out.decay_ratio.assign(ns, 0.0);
    out.tail_bound.assign(ns, 0.0);
    out.row_sum_error.assign(ns, 0.0);
    out.certified.assign(ns, 0);
    bool prefix = true;
    double first_min = 0.0;
    for (std::size_t s = 0; s < ns; ++s) {
        for (int k = 0; k < K; ++k)
            out.decay_ratio[s] = std::max(out.decay_ratio[s], ratio_of(out.norms[k + 1][s], out.norms[k][s]));
        const double r = K >= 1 ? ratio_of(out.norms[K][s], out.norms[K - 1][s]) : 0.0;
        out.tail_bound[s] = r < 1.0 ? out.norms[K][s] / (1.0 - r) : HUGE_VAL;
        const std::size_t per = sources.size() * nt;
        const double* slice = out.sum.values.data() + s * per;
        const double min_value = *std::min_element(slice, slice + per);
        const bool positive = min_value > 0.0;
        if (s == 0) first_min = min_value;
        for (std::size_t i = 0; i < sources.size(); ++i)
            if (interior(g, g.node(sources[i])))
                out.row_sum_error[s] = std::max(out.row_sum_error[s], std::fabs(row_sum(out, s, i) - 1.0));
        prefix = prefix && out.decay_ratio[s] <= theta && positive && std::isfinite(out.tail_bound[s]);
        out.certified[s] = prefix ? 1 : 0;
        if (prefix) {
            out.t0_slice = s;
            out.t0_estimate = g.times[s];
        }
    }
    if (!out.certified[0])
        throw ConvergenceError("perturbation series is not certified on the first time slice (ratio " +
                               std::to_string(out.decay_ratio[0]) + ", min value " + std::to_string(first_min) +
                               "); reduce the horizon or refine the grid");
    return out;
}

KernelTable perturbation_term(const stable::StableParams& p, const KernelTable& prev, const kato::DriftField& b,
                              const SpaceTimeGrid& g) {
    if (prev.order < 0) throw DomainError("perturbation_term needs a table of order >= 0");
    if (prev.times.size() != g.times.size() || prev.n_targets != g.nodes())
        throw DomainError("perturbation_term: table does not match the grid");
    for (std::size_t i = 0; i < g.times.size(); ++i)
        if (std::fabs(prev.times[i] - g.times[i]) > kTimeTol) throw DomainError("perturbation_term: slice mismatch");
    for (double v : prev.values)
        if (!std::isfinite(v)) throw DomainError("perturbation_term: previous table is not finite");
    kato::check_admissible(b, p);
    const Stepper st(p, b, g);
    const int K = prev.order + 1;
    KernelTable out = empty_table(g, prev.sources, K);
    const std::size_t nt = g.nodes();
    run_all(st, prev.sources, K, 1, [&](std::size_t i, std::size_t s, int k, const double* v, double) {
        if (k == K) std::copy(v, v + nt, out.row(s, i).begin());
    });
    out.update_sup_norms();
    return out;
}

double row_sum(const SeriesKernel& k, std::size_t ti, std::size_t si) {
    const auto& g = k.grid;
    const auto row = k.sum.row(ti, si);
    double box = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) box += g.weight(j) * row[j];
    return box + k.outside_mass[ti * k.sum.sources.size() + si];
}

namespace {

struct TailRule {
    std::vector<double> z, w;
};

// Nodes for int over |z| > L, the region outside the box.
TailRule outside_box_rule(double L) {
    TailRule r;
    std::vector<double> gn, gw;
    quad::gauss_legendre(20, gn, gw);
    auto panel = [&](double a, double b) {
        for (std::size_t i = 0; i < gn.size(); ++i) {
            const double u = 0.5 * (a + b) + 0.5 * (b - a) * gn[i];
            for (double s : {-1.0, 1.0}) {
                r.z.push_back(s * (L + u));
                r.w.push_back(0.5 * (b - a) * gw[i]);
            }
        }
    };
    panel(0.0, 0.5);
    panel(0.5, 2.0);
    panel(2.0, 8.0);
    for (std::size_t i = 0; i < gn.size(); ++i) {  // u = 8 / v on (0, 1]
        const double v = 0.5 + 0.5 * gn[i];
        const double u = 8.0 / v;
        for (double s : {-1.0, 1.0}) {
            r.z.push_back(s * (L + u));
            r.w.push_back(0.5 * gw[i] * 8.0 / (v * v));
        }
    }
    return r;
}

void require_full_1d(const SeriesKernel& k, const char* what) {
    if (k.grid.d != 1) throw DomainError(std::string(what) + " is implemented for d = 1 kernel tables");
    if (!k.full_table()) throw DomainError(std::string(what) + " needs a full kernel table (every box node a source)");
}

double interior_relative_gap(const SeriesKernel& k, std::span<const double> a, std::span<const double> b) {
    const auto& g = k.grid;
    const std::size_t n = g.nodes();
    double gap = 0.0, scale = 0.0;
    for (std::size_t x = 0; x < n; ++x) {
        if (!interior(g, g.node(x))) continue;
        for (std::size_t y = 0; y < n; ++y) {
            if (!interior(g, g.node(y))) continue;
            gap = std::max(gap, std::fabs(a[x * n + y] - b[x * n + y]));
            scale = std::max(scale, std::fabs(b[x * n + y]));
        }
    }
    return scale > 0.0 ? gap / scale : gap;
}

std::span<const double> slice_values(const SeriesKernel& k, std::size_t s) {
    const std::size_t per = k.sum.sources.size() * k.sum.n_targets;
    return {k.sum.values.data() + s * per, per};
}

}  // namespace

std::vector<double> compose(const SeriesKernel& k, std::span<const double> a, double ta, std::span<const double> b,
                            double tb) {
    require_full_1d(k, "composition");
    const auto& g = k.grid;
    const std::size_t n = g.nodes();
    if (a.size() != n * n || b.size() != n * n) throw DomainError("composition: table size mismatch");
    const auto& kern = simd::active();
    std::vector<double> bt(n * n);
    for (std::size_t z = 0; z < n; ++z) {
        const double w = g.weight(z);
        for (std::size_t y = 0; y < n; ++y) bt[y * n + z] = w * b[z * n + y];
    }
    // Outside the box both factors are replaced by free kernels.
    const TailRule tr = outside_box_rule(g.L);
    const std::size_t m = tr.z.size();
    std::vector<double> pa(n * m), pb(n * m);
    for (std::size_t x = 0; x < n; ++x) {
        const double xv = g.node(x)[0];
        for (std::size_t j = 0; j < m; ++j) {
            pa[x * m + j] = stable::density_1d(k.params, ta, tr.z[j] - xv);
            pb[x * m + j] = tr.w[j] * stable::density_1d(k.params, tb, xv - tr.z[j]);
        }
    }
    std::vector<double> out(n * n);
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y)
            out[x * n + y] = kern.dot(a.data() + x * n, bt.data() + y * n, n) +
                             kern.dot(pa.data() + x * m, pb.data() + y * m, m);
    return out;
}

KernelTable extend_semigroup(const SeriesKernel& k, double t, int max_depth) {
    require_full_1d(k, "semigroup extension");
    const auto& g = k.grid;
    if (!(t > 0.0)) throw DomainError("extension time must be positive");
    KernelTable out;
    out.order = k.orders;
    out.times = {t};
    out.sources = k.sum.sources;
    out.n_targets = k.sum.n_targets;
    if (const auto s = g.find_slice(t); s && k.certified[*s]) {
        const auto v = slice_values(k, *s);
        out.values.assign(v.begin(), v.end());
        out.update_sup_norms();
        return out;
    }
    std::optional<std::size_t> base;
    int parts = 0;
    for (int nparts = 2; nparts <= max_depth && !base; ++nparts) {
        const auto s = g.find_slice(t / nparts);
        if (s && k.certified[*s]) {
            base = s;
            parts = nparts;
        }
    }
    if (!base) {
        std::ostringstream os;
        os << "cannot extend to t = " << t << ": no certified slice t/n with n <= " << max_depth
           << " (t0 = " << k.t0_estimate << ")";
        throw DomainError(os.str());
    }
    const double tau = g.times[*base];
    std::map<int, std::vector<double>> memo;
    const auto b0 = slice_values(k, *base);
    memo[1].assign(b0.begin(), b0.end());
    std::function<const std::vector<double>&(int)> rec = [&](int m) -> const std::vector<double>& {
        if (auto it = memo.find(m); it != memo.end()) return it->second;
        const int lo = m / 2, hi = m - lo;
        const auto& A = rec(lo);
        const auto& B = rec(hi);
        auto C = compose(k, A, lo * tau, B, hi * tau);
        return memo[m] = std::move(C);
    };
    out.values = rec(parts);
    out.update_sup_norms();
    return out;
}

CompositionCheck chapman_kolmogorov(const SeriesKernel& k, double s, double t) {
    require_full_1d(k, "Chapman-Kolmogorov check");
    const auto& g = k.grid;
    const auto A = compose(k, slice_values(k, g.slice(s)), s, slice_values(k, g.slice(t)), t);
    CompositionCheck c;
    c.s = s;
    c.t = t;
    c.residual = interior_relative_gap(k, A, slice_values(k, g.slice(s + t)));
    return c;
}

CompositionCheck extension_consistency(const SeriesKernel& k) {
    require_full_1d(k, "extension consistency check");
    const auto& g = k.grid;
    const double t0 = k.t0_estimate;
    std::optional<std::size_t> a;
    for (std::size_t i = 0; i < k.t0_slice; ++i) {
        if (!g.find_slice(t0 - g.times[i])) continue;
        if (!a || std::fabs(g.times[i] - 0.5 * t0) < std::fabs(g.times[*a] - 0.5 * t0)) a = i;
    }
    if (!a) throw DomainError("extension consistency needs two certified slices summing to t0");
    const double ta = g.times[*a], tb = t0 - ta;
    const auto q0 = slice_values(k, k.t0_slice);
    const auto left = compose(k, q0, t0, q0, t0);
    const auto mid = compose(k, slice_values(k, g.slice(tb)), tb, q0, t0);
    const auto right = compose(k, slice_values(k, *a), ta, mid, tb + t0);
    CompositionCheck c;
    c.s = ta;
    c.t = tb + t0;
    c.residual = interior_relative_gap(k, right, left);
    return c;
}

ComparabilityReport comparability_check(const SeriesKernel& k, const stable::StableParams& p) {
    const auto& g = k.grid;
    ComparabilityReport rep;
    rep.c_hat = 1.0;
    rep.min_value = HUGE_VAL;
    for (std::size_t s = 0; s < g.times.size(); ++s) {
        if (!k.certified[s]) continue;
        const double t = g.times[s];
        for (std::size_t i = 0; i < k.sum.sources.size(); ++i) {
            const Point x = g.node(k.sum.sources[i]);
            const auto row = k.sum.row(s, i);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const Point y = g.node(j);
                const double q = row[j];
                if (!(q > 0.0))
                    throw BoundViolation("kernel value " + std::to_string(q) + " is not positive at " +
                                         where(t, x, y, g.d));
                double r2 = 0.0;
                for (int a = 0; a < g.d; ++a) r2 += (y[a] - x[a]) * (y[a] - x[a]);
                const double phi = stable::comparison_function(p, t, std::sqrt(r2));
                const double c = std::max(q / phi, phi / q);
                rep.min_value = std::min(rep.min_value, q);
                if (c > rep.c_hat) {
                    rep.c_hat = c;
                    rep.t = t;
                    rep.x = x;
                    rep.y = y;
                }
            }
        }
    }
    return rep;
}

GeneratorReport generator_check(const SeriesKernel& k, const kato::DriftField& b, const TestFunction& f,
                                const TestFunction& g_fn, int n_times) {
    const auto& g = k.grid;
    if (g.d != 1 || f.d != 1 || g_fn.d != 1) throw DomainError("generator check is implemented for d = 1");
    for (const TestFunction* fn : {&f, &g_fn})
        if (!(std::fabs(fn->center[0]) + fn->support_radius <= g.L))
            throw DomainError("generator check needs compactly supported test functions inside the box");
    if (n_times < 2) throw DomainError("generator check needs at least two times");
    const std::size_t n = g.nodes();
    std::vector<double> fv(n), gv(n);
    for (std::size_t j = 0; j < n; ++j) {
        fv[j] = f(g.node(j)[0]);
        gv[j] = g_fn(g.node(j)[0]);
    }
    std::vector<std::size_t> slots(n, SIZE_MAX);
    for (std::size_t j = 0; j < n; ++j) {
        if (gv[j] == 0.0) continue;
        const auto s = k.sum.source_slot(j);
        if (!s) throw DomainError("generator check needs kernel rows for every node in the support of g");
        slots[j] = *s;
    }
    GeneratorReport rep;
    for (std::size_t s = 0; s < g.times.size() && static_cast<int>(rep.ts.size()) < n_times; ++s) {
        if (!k.certified[s]) break;
        const double t = g.times[s];
        double acc = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            if (slots[x] == SIZE_MAX) continue;
            const auto row = k.sum.row(s, slots[x]);
            double tf = 0.0;
            for (std::size_t y = 0; y < n; ++y) tf += g.weight(y) * row[y] * fv[y];
            acc += g.weight(x) * gv[x] * (tf - fv[x]);
        }
        rep.ts.push_back(t);
        rep.a_t.push_back(acc / t);
    }
    if (rep.ts.size() < 2) throw DomainError("generator check found fewer than two certified slices");
    // Least-squares polynomial in t (degree up to 2), evaluated at t = 0.
    const std::size_t m = rep.ts.size();
    const int deg = m >= 3 ? 2 : 1;
    double A[3][3] = {}, rhs[3] = {};
    for (std::size_t i = 0; i < m; ++i) {
        double pw[3] = {1.0, rep.ts[i], rep.ts[i] * rep.ts[i]};
        for (int r = 0; r <= deg; ++r) {
            rhs[r] += pw[r] * rep.a_t[i];
            for (int c = 0; c <= deg; ++c) A[r][c] += pw[r] * pw[c];
        }
    }
    for (int c = 0; c <= deg; ++c)  // Gaussian elimination
        for (int r = c + 1; r <= deg; ++r) {
            const double f_ = A[r][c] / A[c][c];
            for (int j = c; j <= deg; ++j) A[r][j] -= f_ * A[c][j];
            rhs[r] -= f_ * rhs[c];
        }
    double coef[3] = {};
    for (int r = deg; r >= 0; --r) {
        double v = rhs[r];
        for (int j = r + 1; j <= deg; ++j) v -= A[r][j] * coef[j];
        coef[r] = v / A[r][r];
    }
    rep.limit = coef[0];
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < m; ++i) {
        inc = inc && rep.a_t[i] >= rep.a_t[i - 1];
        dec = dec && rep.a_t[i] <= rep.a_t[i - 1];
    }
    rep.inconclusive = !(inc || dec);

    const double c = g_fn.center[0], R = g_fn.support_radius;
    rep.free_part = quad::gauss20_panels(
        [&](double x) { return stable::fractional_laplacian_1d(k.params, f, x) * g_fn(x); }, c - R, c + R, 8);
    rep.drift_part = quad::gauss20_panels(
        [&](double x) {
            double gr = 0.0;
            f.gradient(std::span<const double>(&x, 1), std::span<double>(&gr, 1));
            return b.eval_1d(x) * gr * g_fn(x);
        },
        c - R, c + R, 16);
    rep.predicted = rep.free_part + rep.drift_part;
    rep.limit_error = std::fabs(rep.limit - rep.predicted);
    return rep;
}

DuhamelReport duhamel_residual(const SeriesKernel& k, const kato::DriftField& b, const SpaceTimeGrid& g,
                               std::size_t max_sources) {
    std::vector<std::size_t> slots;
    for (std::size_t i = 0; i < k.sum.sources.size() && slots.size() < max_sources; ++i)
        if (interior(g, g.node(k.sum.sources[i]))) slots.push_back(i);
    if (slots.empty()) slots.push_back(0);
    const Stepper st(k.params, b, g);
    const auto& sg = st.spectral_grid();
    const auto& lam = st.lambda();
    const std::size_t M = sg.complex_size(), M2 = 2 * M, nt = g.nodes();
    auto work = st.make_work(k.orders);
    DuhamelReport rep;
    rep.per_slice.assign(g.times.size(), 0.0);
    std::vector<double> I(M2), Rc(M2), Rr(sg.real_size());
    for (std::size_t slot : slots) {
        Trace tr;
        st.run(k.sum.sources[slot], k.orders, *work, nullptr, &tr);
        const auto& S = tr.source_sum;
        std::fill(I.begin(), I.end(), 0.0);
        std::size_t n = 0;
        for (std::size_t s = 0; s < g.times.size(); ++s) {
            const std::size_t target = g.slice_step[s];
            while (n < target) {
                if (n + 2 <= target) {
                    // Exponential Simpson over two steps: the source times
                    // e^{(s - t_n) lambda} is interpolated quadratically.
                    const double h1 = g.steps[n + 1] - g.steps[n], h2 = g.steps[n + 2] - g.steps[n + 1];
                    const double H = h1 + h2;
                    const double w0 = H / 6.0 * (2.0 - h2 / h1), w1 = H * H * H / (6.0 * h1 * h2),
                                 w2 = H / 6.0 * (2.0 - h1 / h2);
                    for (std::size_t c = 0; c < M; ++c) {
                        const double eH = std::exp(-H * lam[c]), e2 = std::exp(-h2 * lam[c]);
                        for (int r = 0; r < 2; ++r) {
                            const std::size_t q = 2 * c + r;
                            I[q] = eH * (I[q] + w0 * S[n][q]) + e2 * w1 * S[n + 1][q] + w2 * S[n + 2][q];
                        }
                    }
                    n += 2;
                } else {
                    const double h1 = g.steps[n + 1] - g.steps[n];
                    for (std::size_t c = 0; c < M; ++c) {
                        const double e = std::exp(-h1 * lam[c]);
                        for (int r = 0; r < 2; ++r) {
                            const std::size_t q = 2 * c + r;
                            I[q] = e * (I[q] + 0.5 * h1 * S[n][q]) + 0.5 * h1 * S[n + 1][q];
                        }
                    }
                    n += 1;
                }
            }
            const double t = g.times[s];
            for (std::size_t c = 0; c < M; ++c) {
                const double e = std::exp(-t * lam[c]);
                for (int r = 0; r < 2; ++r) {
                    const std::size_t q = 2 * c + r;
                    Rc[q] = tr.x_sum[s][q] - e * tr.x0_phase[q] - I[q];
                }
            }
            work->ws.backward(Rc.data(), Rr.data());
            double rmax = 0.0;
            for (std::size_t j = 0; j < nt; ++j) rmax = std::max(rmax, std::fabs(Rr[st.box_index(j)]));
            const auto row = k.sum.row(s, slot);
            const double qmax = simd::active().max_abs(row.data(), row.size());
            rep.per_slice[s] = std::max(rep.per_slice[s], qmax > 0.0 ? rmax / qmax : rmax);
        }
    }
    for (std::size_t s = 0; s < g.times.size(); ++s)
        if (k.certified[s] && rep.per_slice[s] > rep.max_residual) {
            rep.max_residual = rep.per_slice[s];
            rep.t = g.times[s];
        }
    return rep;
}

namespace {

constexpr char kMagic[8] = {'S', 'D', 'K', 'T', 'B', 'L', '0', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
std::uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("truncated kernel table file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

// Layout (little endian): magic[8], u64 d, u64 order, f64 alpha, f64 L, f64 h,
// u64 n_side, u64 n_times, u64 n_sources, f64 times[n_times],
// u64 source_nodes[n_sources], f64 values[n_times][n_sources][n_side^d].
void write_binary(const KernelTable& t, const SpaceTimeGrid& g, double alpha, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write kernel table '" + path + "'");
    os.write(kMagic, 8);
    put_u64(os, static_cast<std::uint64_t>(g.d));
    put_u64(os, static_cast<std::uint64_t>(t.order));
    put_f64(os, alpha);
    put_f64(os, g.L);
    put_f64(os, g.h);
    put_u64(os, static_cast<std::uint64_t>(g.n_side));
    put_u64(os, t.times.size());
    put_u64(os, t.sources.size());
    for (double v : t.times) put_f64(os, v);
    for (std::size_t s : t.sources) put_u64(os, s);
    for (double v : t.values) put_f64(os, v);
    if (!os) throw ConfigError("failed writing kernel table '" + path + "'");
}

KernelTable read_binary(const std::string& path, SpaceTimeGrid* grid_out, double* alpha_out) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open kernel table '" + path + "'");
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("not a kernel table file");
    SpaceTimeGrid g;
    KernelTable t;
    g.d = static_cast<int>(get_u64(is));
    t.order = static_cast<int>(get_u64(is));
    const double alpha = get_f64(is);
    g.L = get_f64(is);
    g.h = get_f64(is);
    g.n_side = static_cast<int>(get_u64(is));
    const std::uint64_t nt = get_u64(is), nsrc = get_u64(is);
    if (g.d < 1 || g.d > 2 || g.n_side < 1 || nt > (1u << 24) || nsrc > (1u << 26))
        throw ConfigError("corrupt kernel table header");
    for (std::uint64_t i = 0; i < nt; ++i) t.times.push_back(get_f64(is));
    for (std::uint64_t i = 0; i < nsrc; ++i) t.sources.push_back(get_u64(is));
    t.n_targets = g.nodes();
    t.values.resize(nt * nsrc * t.n_targets);
    for (double& v : t.values) v = get_f64(is);
    g.times = t.times;
    t.update_sup_norms();
    if (grid_out) *grid_out = g;
    if (alpha_out) *alpha_out = alpha;
    return t;
}

void write_csv(const KernelTable& t, const SpaceTimeGrid& g, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot write kernel CSV '" + path + "'");
    os << (g.d == 1 ? "t,x,y,q\n" : "t,x1,x2,y1,y2,q\n");
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.16e", v);
        return std::string(buf);
    };
    for (std::size_t ti = 0; ti < t.times.size(); ++ti)
        for (std::size_t si = 0; si < t.sources.size(); ++si) {
            const Point x = g.node(t.sources[si]);
            const auto row = t.row(ti, si);
            for (std::size_t j = 0; j < row.size(); ++j) {
                const Point y = g.node(j);
                os << num(t.times[ti]);
                for (int a = 0; a < g.d; ++a) os << ',' << num(x[a]);
                for (int a = 0; a < g.d; ++a) os << ',' << num(y[a]);
                os << ',' << num(row[j]) << '\n';
            }
        }
}

}  // namespace sdrift::heat
