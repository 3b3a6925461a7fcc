#include "stabledrift/resolvent.hpp"

#include "stabledrift/errors.hpp"
#include "stabledrift/quadrature.hpp"
#include "stabledrift/simd.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

namespace sdrift::resolvent {
namespace {

double robust(const std::function<double(double)>& f, double a, double b, double tol, double abs_tol = 1e-300) {
    try {
        return quad::kronrod(f, a, b, tol, 20);
    } catch (const AccuracyError&) {
        return quad::tanh_sinh(f, a, b, tol, abs_tol);
    }
}

// int_0^inf e^{-t} t^{-(d+m)/alpha} F(rho t^{-1/alpha}) dt with F = f_d (m = 0)
// or f_d' (m = 1). For t < rho^alpha the variable is u = rho t^{-1/alpha} > 1.
double unit_integral(int d, double alpha, double rho, bool deriv) {
    const auto& prof = stable::profile(d, alpha);
    auto F = [&](double u) { return deriv ? prof.derivative(u) : prof.value(u); };
    const int m = deriv ? 1 : 0;
    const double tol = 1e-10;

    const double q = d + m - alpha - 1.0;
    auto left = [&](double u) {
        if (!std::isfinite(u)) return 0.0;
        const double v = std::exp(-std::pow(rho / u, alpha));
        return v == 0.0 ? 0.0 : v * std::pow(u, q) * F(u);
    };
    const double uc = std::max(1.0, rho);
    double lsum = 0.0;
    if (uc > 1.0)
        lsum += robust([&](double v) {
            const double u = std::exp(v);
            return left(u) * u;
        }, 0.0, std::log(uc), tol);
    lsum += quad::exp_sinh(left, uc, tol);
    lsum *= alpha * std::pow(rho, alpha - d - m);

    const double tc = std::pow(rho, alpha);
    const double s = -(d + m) / alpha;
    auto right = [&](double t) {
        const double v = std::exp(-t);
        return v == 0.0 ? 0.0 : v * std::pow(t, s) * F(rho * std::pow(t, -1.0 / alpha));
    };
    double rsum = 0.0;
    if (tc < 1.0)
        rsum += robust([&](double w) {
            const double t = std::exp(w);
            return right(t) * t;
        }, std::log(tc), 0.0, tol);
    if (tc < 700.0) rsum += quad::exp_sinh(right, std::max(1.0, tc), tol);
    return lsum + rsum;
}

}  // namespace

double unit_value_quadrature(int d, double alpha, double rho) {
    if (!(rho > 0.0)) throw DomainError("unit resolvent quadrature needs rho > 0");
    return unit_integral(d, alpha, rho, false);
}

double unit_derivative_quadrature(int d, double alpha, double rho) {
    if (!(rho > 0.0)) throw DomainError("unit resolvent quadrature needs rho > 0");
    return unit_integral(d, alpha, rho, true);
}

struct UnitProfile::Impl {
    using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
    std::unique_ptr<Spline> log_value, log_slope;
    double s0 = 0.0, s1 = 0.0;
    double r_lo = 0.0, d_lo = 0.0, r_hi = 0.0, d_hi = 0.0;
    std::optional<double> r0;
};

UnitProfile::UnitProfile(int d, double alpha) : d_(d), alpha_(alpha), impl_(new Impl) {
    auto& I = *impl_;
    I.s0 = std::log(kRhoMin);
    const int n = static_cast<int>(std::lround((std::log(kRhoMax) - I.s0) / kLogStep)) + 1;
    I.s1 = I.s0 + (n - 1) * kLogStep;
    std::vector<double> lv(n), ld(n);
    for (int i = 0; i < n; ++i) {
        const double rho = std::exp(I.s0 + i * kLogStep);
        const double v = unit_value_quadrature(d, alpha, rho);
        const double dv = unit_derivative_quadrature(d, alpha, rho);
        if (!(v > 0.0) || !(dv < 0.0)) {
            delete impl_;
            throw AccuracyError("resolvent profile lost positivity or monotonicity at rho = " + std::to_string(rho));
        }
        lv[i] = std::log(v);
        ld[i] = std::log(-dv);
        if (i == 0) I.r_lo = v, I.d_lo = dv;
        if (i == n - 1) I.r_hi = v, I.d_hi = dv;
    }
    I.log_value = std::make_unique<Impl::Spline>(lv.begin(), lv.end(), I.s0, kLogStep);
    I.log_slope = std::make_unique<Impl::Spline>(ld.begin(), ld.end(), I.s0, kLogStep);
    if (d < alpha)
        I.r0 = boost::math::tgamma(1.0 - 1.0 / alpha) * boost::math::tgamma(1.0 + 1.0 / alpha) / std::numbers::pi;
}

UnitProfile::~UnitProfile() { delete impl_; }

std::optional<double> UnitProfile::at_zero() const { return impl_->r0; }

double UnitProfile::value(double rho) const {
    const auto& I = *impl_;
    if (rho <= 0.0) return I.r0 ? *I.r0 : std::numeric_limits<double>::infinity();
    const double s = std::log(rho);
    if (s < I.s0) {
        // r ~ A rho^e + B with A from the slope at the table start.
        const double e = alpha_ - d_;
        const double A = I.d_lo / (e * std::pow(kRhoMin, e - 1.0));
        const double B = I.r0 ? *I.r0 : I.r_lo - A * std::pow(kRhoMin, e);
        return A * std::pow(rho, e) + B;
    }
    if (s > I.s1) {
        const double a = -d_ - alpha_, c = -d_ - 2.0 * alpha_;
        const double R = std::exp(I.s1);
        const double C = (R * I.d_hi - a * I.r_hi) / (c - a), A = I.r_hi - C;
        const double x = rho / R;
        return A * std::pow(x, a) + C * std::pow(x, c);
    }
    return std::exp((*I.log_value)(s));
}

double UnitProfile::derivative(double rho) const {
    const auto& I = *impl_;
    if (!(rho > 0.0)) throw DomainError("resolvent gradient is undefined at the origin");
    const double s = std::log(rho);
    if (s < I.s0) return I.d_lo * std::pow(rho / kRhoMin, alpha_ - d_ - 1.0);
    if (s > I.s1) {
        const double a = -d_ - alpha_, c = -d_ - 2.0 * alpha_;
        const double R = std::exp(I.s1);
        const double C = (R * I.d_hi - a * I.r_hi) / (c - a), A = I.r_hi - C;
        const double x = rho / R;
        return (a * A * std::pow(x, a) + c * C * std::pow(x, c)) / rho;
    }
    return -std::exp((*I.log_slope)(s));
}

const UnitProfile& unit_profile(int d, double alpha) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::unique_ptr<UnitProfile>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{d, alpha}];
    if (!slot) slot = std::make_unique<UnitProfile>(d, alpha);
    return *slot;
}

ResolventKernel::ResolventKernel(const stable::StableParams& p, double lambda) : p_(p), lambda_(lambda) {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw DomainError("resolvent requires lambda > 0");
    unit_ = &unit_profile(p.d, p.alpha);
    arg_scale_ = std::pow(lambda, 1.0 / p.alpha);
    value_scale_ = std::pow(lambda, p.d / p.alpha - 1.0);
    deriv_scale_ = std::pow(lambda, (p.d + 1.0) / p.alpha - 1.0);
}

double ResolventKernel::radial(double rho) const { return value_scale_ * unit_->value(arg_scale_ * rho); }

double ResolventKernel::radial_derivative(double rho) const {
    if (!(rho > 0.0)) throw DomainError("resolvent gradient is undefined at the origin");
    return deriv_scale_ * unit_->derivative(arg_scale_ * rho);
}

double ResolventKernel::value(std::span<const double> x) const {
    double r2 = 0.0;
    for (int i = 0; i < p_.d; ++i) r2 += x[i] * x[i];
    return radial(std::sqrt(r2));
}

void ResolventKernel::gradient(std::span<const double> x, std::span<double> out) const {
    double r2 = 0.0;
    for (int i = 0; i < p_.d; ++i) r2 += x[i] * x[i];
    const double rho = std::sqrt(r2);
    if (!(rho > 0.0)) throw DomainError("resolvent gradient is undefined at the origin");
    const double g = radial_derivative(rho) / rho;
    for (int i = 0; i < p_.d; ++i) out[i] = g * x[i];
}

double ResolventKernel::gradient_1d(double x) const {
    if (x == 0.0) throw DomainError("resolvent gradient is undefined at the origin");
    return (x > 0 ? 1.0 : -1.0) * radial_derivative(std::fabs(x));
}

double resolvent_kernel(const stable::StableParams& p, double lambda, std::span<const double> x) {
    return ResolventKernel(p, lambda).value(x);
}

void resolvent_gradient(const stable::StableParams& p, double lambda, std::span<const double> x, std::span<double> out) {
    ResolventKernel(p, lambda).gradient(x, out);
}

double resolvent_direct(const stable::StableParams& p, double lambda, double rho) {
    if (!(lambda > 0.0)) throw DomainError("resolvent requires lambda > 0");
    if (rho < 0.0) throw DomainError("radius must be nonnegative");
    if (rho == 0.0 && p.d > p.alpha) return std::numeric_limits<double>::infinity();
    const double x[3] = {rho, 0.0, 0.0};
    auto f = [&](double t) {
        const double v = std::exp(-lambda * t);
        return v == 0.0 ? 0.0 : v * stable::density(p, t, std::span<const double>(x, p.d));
    };
    // Logarithmic time below t = 1 / lambda, where the integrand changes scale.
    const double t1 = 1.0 / lambda;
    const double tc = rho > 0.0 ? std::min(std::pow(rho, p.alpha), t1) : t1;
    auto in_log = [&](double v) {
        const double t = tc * std::exp(-v);
        const double r = t > 1e-200 ? t * f(t) : 0.0;
        return std::isfinite(r) ? r : 0.0;
    };
    double s = quad::exp_sinh(in_log, 0.0, 1e-11);
    if (tc < t1)
        s += robust([&](double w) {
            const double t = std::exp(w);
            return t * f(t);
        }, std::log(tc), std::log(t1), 1e-11);
    return s + quad::exp_sinh(f, t1, 1e-11);
}

namespace {

// int_0^inf phi over [0, first break] (integrable singularity at 0), the
// remaining breaks, then doubling panels when rho_max is infinite.
double radial_integral(const std::function<double(double)>& phi, std::vector<double> breaks, double rho_max) {
    const double tol = 1e-10;
    const bool infinite = !std::isfinite(rho_max);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> pts{0.0};
    for (double r : breaks)
        if (r > 1e-14 && (infinite || r < rho_max) && r > pts.back()) pts.push_back(r);
    if (!infinite) pts.push_back(rho_max);
    else if (pts.size() == 1) pts.push_back(1.0);
    double total = quad::tanh_sinh(phi, 0.0, pts[1], tol, 1e-300);
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) total += robust(phi, pts[i], pts[i + 1], tol);
    if (infinite) {
        double a = pts.back();
        int small = 0;
        for (int k = 0; k < 200 && small < 2; ++k, a *= 2.0) {
            const double v = robust(phi, a, 2.0 * a, tol, 1e-4 * tol * std::fabs(total));
            total += v;
            small = std::fabs(v) <= 1e-4 * tol * std::fabs(total) ? small + 1 : 0;
        }
    }
    return total;
}

struct Support {
    Point center{};
    double radius = HUGE_VAL;
};

Support support_of(const TestFunction& g) {
    Support s;
    s.center = g.center;
    s.radius = std::isfinite(g.support_radius) ? g.support_radius : g.effective_radius;
    return s;
}

// Positive crossings of the support sphere along x +- rho theta.
void crossings(const Support& s, std::span<const double> x, const Point& th, int d, std::vector<double>& out) {
    if (!std::isfinite(s.radius)) return;
    double along = 0.0, dist2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double e = s.center[i] - x[i];
        along += e * th[i];
        dist2 += e * e;
    }
    const double disc = s.radius * s.radius - (dist2 - along * along);
    if (disc <= 0.0) return;
    const double q = std::sqrt(disc);
    for (double v : {along - q, along + q, -along - q, -along + q})
        if (v > 0.0) out.push_back(v);
}

double support_reach(const Support& s, std::span<const double> x, int d) {
    if (!std::isfinite(s.radius)) return HUGE_VAL;
    double r2 = 0.0;
    for (int i = 0; i < d; ++i) r2 += (x[i] - s.center[i]) * (x[i] - s.center[i]);
    return std::sqrt(r2) + s.radius;
}

// Symmetrized ray integrals: sum over directions of
// int rho^{d-1} K(rho) (g(x + rho th) +- g(x - rho th)) / 2 drho.
template <class Acc>
void ray_sum(const ResolventKernel& k, const TestFunction& g, std::span<const double> x, bool odd, Acc&& acc) {
    const int d = k.params().d;
    if (g.d != d) throw DomainError("test function dimension does not match the kernel");
    const auto sph = quad::sphere_rule(d, 32);
    const Support sup = support_of(g);
    const double reach = support_reach(sup, x, d);
    for (std::size_t j = 0; j < sph.dirs.size(); ++j) {
        const Point& th = sph.dirs[j];
        std::vector<double> br;
        crossings(sup, x, th, d, br);
        if (std::isfinite(sup.radius) && br.empty()) continue;
        auto phi = [&](double rho) {
            double yp[3], ym[3];
            for (int i = 0; i < d; ++i) {
                yp[i] = x[i] + rho * th[i];
                ym[i] = x[i] - rho * th[i];
            }
            const double gp = g(std::span<const double>(yp, d)), gm = g(std::span<const double>(ym, d));
            const double kern = odd ? -k.radial_derivative(rho) : k.radial(rho);
            return std::pow(rho, d - 1) * kern * 0.5 * (odd ? gp - gm : gp + gm);
        };
        acc(sph.weights[j], th, radial_integral(phi, br, reach));
    }
}

}  // namespace

double apply_resolvent(const ResolventKernel& k, const TestFunction& g, std::span<const double> x) {
    double s = 0.0;
    ray_sum(k, g, x, false, [&](double w, const Point&, double v) { s += w * v; });
    return s;
}

void apply_resolvent_gradient(const ResolventKernel& k, const TestFunction& g, std::span<const double> x,
                              std::span<double> out) {
    const int d = k.params().d;
    for (int i = 0; i < d; ++i) out[i] = 0.0;
    ray_sum(k, g, x, true, [&](double w, const Point& th, double v) {
        for (int i = 0; i < d; ++i) out[i] += w * th[i] * v;
    });
}

double drift_apply(const kato::DriftField& b, const GradientFn& grad_f, std::span<const double> x) {
    const int d = b.d();
    double bv[3] = {0, 0, 0}, gv[3] = {0, 0, 0};
    b.eval(x, std::span<double>(bv, d));
    for (int i = 0; i < d; ++i)
        if (!std::isfinite(bv[i])) throw DomainError("drift is not finite at the evaluation point");
    grad_f(x, std::span<double>(gv, d));
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += bv[i] * gv[i];
    return s;
}

namespace {

constexpr double kRhoFloor = 1e-100;

std::vector<Point> with_field_points(const kato::DriftField& b, std::vector<Point> probes) {
    if (probes.empty()) probes = kato::default_probes(b);
    for (const Point& q : b.extremal_points()) probes.push_back(q);
    return probes;
}

// Max of f over the points, refined by a coordinate pattern search.
double sup_search(const std::function<double(const Point&)>& f, const std::vector<Point>& pts, int d, double step) {
    double best = -HUGE_VAL;
    Point arg{};
    for (const Point& q : pts) {
        const double v = f(q);
        if (v > best) best = v, arg = q;
    }
    for (int level = 0; level < 4; ++level, step *= 0.5) {
        bool moved = true;
        for (int it = 0; it < 8 && moved; ++it) {
            moved = false;
            for (int i = 0; i < d; ++i)
                for (double sgn : {-1.0, 1.0}) {
                    Point q = arg;
                    q[i] += sgn * step;
                    const double v = f(q);
                    if (v > best * (1.0 + 1e-12)) best = v, arg = q, moved = true;
                }
        }
    }
    return best;
}

}  // namespace

double gradient_drift_integral(const kato::DriftField& b, const ResolventKernel& k, std::span<const double> x) {
    if (b.is_zero()) return 0.0;
    const auto& p = k.params();
    const double e = p.d + 1.0 - p.alpha;
    auto w = [&](double rho) {
        rho = std::max(rho, kRhoFloor);
        return -k.radial_derivative(rho) * std::pow(rho, e);
    };
    return kato::singular_shell_integral(b, p, x, w, HUGE_VAL, 1e-9);
}

double gradient_drift_sup(const kato::DriftField& b, const ResolventKernel& k, const std::vector<Point>& probes) {
    if (b.is_zero()) return 0.0;
    kato::check_admissible(b, k.params());
    const int d = b.d();
    return sup_search([&](const Point& q) { return gradient_drift_integral(b, k, std::span<const double>(q.data(), d)); },
                      with_field_points(b, probes), d, 0.5);
}

std::vector<double> geometric_grid(double lo, double hi, double ratio) {
    if (!(lo > 0.0) || !(hi >= lo) || !(ratio > 1.0)) throw ConfigError("lambda grid needs 0 < lo <= hi and ratio > 1");
    std::vector<double> g;
    for (double v = lo; v <= hi * (1.0 + 1e-12); v *= ratio) g.push_back(v);
    return g;
}

Lambda0Report lambda0_estimate(const kato::DriftField& b, const stable::StableParams& p,
                               const std::vector<double>& lambda_grid, const std::vector<Point>& probes) {
    if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
    for (std::size_t i = 0; i < lambda_grid.size(); ++i)
        if (!(lambda_grid[i] > 0.0) || (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])))
            throw ConfigError("lambda grid must be positive and strictly increasing");
    kato::check_admissible(b, p);
    Lambda0Report rep;
    if (b.is_zero()) {
        rep.lambda0 = lambda_grid.front();
        rep.lambdas = {rep.lambda0};
        rep.integrals = {0.0};
        return rep;
    }
    std::map<std::size_t, double> seen;
    auto eval = [&](std::size_t i) {
        auto it = seen.find(i);
        if (it != seen.end()) return it->second;
        const double v = gradient_drift_sup(b, ResolventKernel(p, lambda_grid[i]), probes);
        seen[i] = v;
        return v;
    };
    const std::size_t n = lambda_grid.size();
    if (eval(n - 1) > 0.5) {
        std::ostringstream os;
        os << "no lambda up to " << lambda_grid.back() << " brings sup int |grad r_lambda| |b| below 1/2 (value "
           << seen[n - 1] << "); extend the lambda grid";
        throw ConvergenceError(os.str());
    }
    long lo = -1, hi = static_cast<long>(n) - 1;
    while (hi - lo > 1) {
        const long mid = lo + (hi - lo) / 2;
        if (eval(static_cast<std::size_t>(mid)) <= 0.5) hi = mid;
        else lo = mid;
    }
    rep.lambda0 = lambda_grid[hi];
    for (const auto& [i, v] : seen) {
        rep.lambdas.push_back(lambda_grid[i]);
        rep.integrals.push_back(v);
    }
    return rep;
}

double abs_drift_resolvent(const kato::DriftField& b, const ResolventKernel& k, const std::vector<Point>& probes) {
    if (b.is_zero()) return 0.0;
    const auto& p = k.params();
    kato::check_admissible(b, p);
    const double e = p.d + 1.0 - p.alpha;
    auto w = [&](double rho) {
        rho = std::max(rho, kRhoFloor);
        return k.radial(rho) * std::pow(rho, e);
    };
    const int d = b.d();
    return sup_search(
        [&](const Point& q) {
            return kato::singular_shell_integral(b, p, std::span<const double>(q.data(), d), w, HUGE_VAL, 1e-6);
        },
        with_field_points(b, probes), d, 0.5);
}

GradientKatoReport gradient_kato_constant(const kato::DriftField& b, const stable::StableParams& p,
                                          const std::vector<double>& ts, const std::vector<Point>& probes) {
    kato::check_admissible(b, p);
    GradientKatoReport rep;
    const int d = b.d();
    const auto pts = with_field_points(b, probes);
    for (double t : ts) {
        if (!(t > 0.0)) throw DomainError("gradient bound needs t > 0");
        const double s = std::pow(t, 1.0 / p.alpha);
        auto w = [&](double rho) { return rho <= s ? 1.0 : t * t * std::pow(rho, -2.0 * p.alpha); };
        double lhs = 0.0, mod = 0.0;
        if (!b.is_zero()) {
            lhs = sup_search(
                [&](const Point& q) {
                    return kato::singular_shell_integral(b, p, std::span<const double>(q.data(), d), w, HUGE_VAL, 1e-9,
                                                         {s});
                },
                pts, d, 0.5 * s);
            mod = kato::kato_modulus(b, p, s, pts).value;
        }
        rep.ts.push_back(t);
        rep.lhs.push_back(lhs);
        rep.modulus.push_back(mod);
        rep.ratio.push_back(mod > 0.0 ? lhs / mod : 0.0);
        rep.constant = std::max(rep.constant, rep.ratio.back());
    }
    return rep;
}

namespace {

// int_{-h}^{h} K(s - y) (1 - |y|/h) dy, split at the kernel singularity y = s.
double hat_weight(const std::function<double(double)>& K, double s, double h) {
    std::vector<double> pts{-h, 0.0, h};
    const double eps = 1e-12 * h;
    if (std::fabs(s) < eps) s = 0.0;
    if (std::fabs(s - h) < eps) s = h;
    if (std::fabs(s + h) < eps) s = -h;
    if (s > -h && s < h && s != 0.0) pts.push_back(s);
    std::sort(pts.begin(), pts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const double a = pts[i], b = pts[i + 1];
        auto f = [&](double y) {
            const double u = s - y;
            return u == 0.0 ? 0.0 : K(u) * (1.0 - std::fabs(y) / h);
        };
        const double dist = s < a ? a - s : (s > b ? s - b : 0.0);
        if (dist < 2.0 * (b - a)) total += quad::tanh_sinh(f, a, b, 1e-9, 1e-300);
        else total += quad::gauss20(f, a, b);
    }
    return total;
}

// u_i = sum_j w[i - j] f_j as u_i = dot(rev + N - 1 - i, f), where rev[k]
// is the weight of offset (N - 1) - k.
struct GridConvolution {
    std::size_t n = 0;
    std::vector<double> rev;  // size 2N - 1

    GridConvolution(const std::function<double(double)>& K, double h, std::size_t nodes, bool odd) : n(nodes) {
        std::vector<double> w(n);
        for (std::size_t m = 0; m < n; ++m) w[m] = hat_weight(K, m * h, h);
        if (odd) w[0] = 0.0;
        rev.assign(2 * n - 1, 0.0);
        for (std::size_t k = 0; k < 2 * n - 1; ++k) {
            const long m = static_cast<long>(n) - 1 - static_cast<long>(k);
            const double v = w[static_cast<std::size_t>(std::labs(m))];
            rev[k] = (odd && m < 0) ? -v : v;
        }
    }

    void apply(const std::vector<double>& f, std::vector<double>& u) const {
        const auto& kern = simd::active();
        u.resize(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = kern.dot(rev.data() + (n - 1 - i), f.data(), n);
    }
};

}  // namespace

NeumannSeriesState neumann_resolvent(const kato::DriftField& b, const stable::StableParams& p, double lambda,
                                     const TestFunction& g, const std::vector<Point>& probes, const NeumannOptions& opts) {
    if (p.d != 1 || b.d() != 1 || g.d != 1) throw DomainError("the Neumann series is implemented in d = 1");
    if (!(lambda > 0.0)) throw DomainError("resolvent requires lambda > 0");
    if (opts.lambda0 && !(lambda > *opts.lambda0))
        throw DomainError("lambda must exceed the contraction threshold lambda0");
    if (!(opts.h > 0.0) || !(opts.padding >= 0.0) || opts.max_terms < 0)
        throw ConfigError("Neumann options need h > 0, padding >= 0 and max_terms >= 0");
    if (probes.empty()) throw ConfigError("Neumann series needs at least one probe");
    kato::check_admissible(b, p);
    const Support sup = support_of(g);
    if (!std::isfinite(sup.radius)) throw ConfigError("Neumann series needs a compactly supported test function");

    const ResolventKernel k(p, lambda);
    const double h = opts.h;
    const double a = sup.center[0] - sup.radius - opts.padding;
    const std::size_t n = static_cast<std::size_t>(std::ceil(2.0 * (sup.radius + opts.padding) / h)) + 1;

    NeumannSeriesState st;
    st.lambda = lambda;
    st.lambda0 = opts.lambda0;
    st.probes = probes;
    st.grid_origin = a;
    st.grid_h = h;
    st.grid_nodes = n;

    std::function<double(double)> K0 = [&](double s) { return k.radial(std::fabs(s)); };
    std::function<double(double)> K1 = [&](double s) { return k.gradient_1d(s); };
    const GridConvolution conv0(K0, h, n, false), conv1(K1, h, n, true);

    std::vector<double> bj(n), f(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double x = a + j * h;
        try {
            bj[j] = b.eval_1d(x);
        } catch (const DomainError&) {
            bj[j] = 0.0;  // exact singular point on a node
        }
        if (!std::isfinite(bj[j])) bj[j] = 0.0;
        f[j] = g(x);
    }
    // Probe weights for R_lambda f(x) with f the hat interpolant.
    std::vector<std::vector<double>> pw(probes.size(), std::vector<double>(n));
    for (std::size_t q = 0; q < probes.size(); ++q)
        for (std::size_t j = 0; j < n; ++j) pw[q][j] = hat_weight(K0, probes[q][0] - (a + j * h), h);

    const auto& kern = simd::active();
    st.values.assign(probes.size(), 0.0);
    std::vector<double> u, gu;
    for (int kk = 0; kk <= opts.max_terms; ++kk) {
        conv0.apply(f, u);
        st.term_sup.push_back(kern.max_abs(u.data(), n));
        std::vector<double> at(probes.size());
        for (std::size_t q = 0; q < probes.size(); ++q) {
            at[q] = kern.dot(pw[q].data(), f.data(), n);
            st.values[q] += at[q];
        }
        st.terms.push_back(at);
        if (kk > 0 && st.term_sup[kk - 1] > 0.0) {
            const double r = st.term_sup[kk] / st.term_sup[kk - 1];
            st.term_ratio.push_back(r);
            if (r > opts.violation_ratio) {
                std::ostringstream os;
                os << "Neumann term ratio " << r << " at k = " << kk << " exceeds " << opts.violation_ratio
                   << "; lambda = " << lambda << " is not above the contraction threshold";
                throw ConvergenceError(os.str());
            }
        }
        if (b.is_zero() || kk == opts.max_terms) break;
        if (!(st.term_sup[kk] > opts.stop_fraction * st.term_sup[0])) break;
        conv1.apply(f, gu);
        const double fn = kern.max_abs(f.data(), n);
        for (std::size_t j = 0; j < n; ++j) f[j] = bj[j] * gu[j];
        if (fn > 0.0) st.contraction_factor = std::max(st.contraction_factor, kern.max_abs(f.data(), n) / fn);
    }
    const double rho = st.contraction_factor;
    st.remainder_bound.resize(probes.size());
    for (std::size_t q = 0; q < probes.size(); ++q)
        st.remainder_bound[q] = b.is_zero() ? 0.0
                                : rho < 1.0 ? std::fabs(st.terms.back()[q]) * rho / (1.0 - rho)
                                            : HUGE_VAL;
    return st;
}

void write_neumann_trace_csv(const NeumannSeriesState& s, const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw ConfigError("cannot open " + path + " for writing");
    std::fprintf(f, "k,term_sup");
    for (std::size_t q = 0; q < s.probes.size(); ++q) std::fprintf(f, ",partial_sum_%zu", q);
    std::fprintf(f, "\n");
    std::vector<double> partial(s.probes.size(), 0.0);
    for (std::size_t k = 0; k < s.terms.size(); ++k) {
        std::fprintf(f, "%zu,%.16e", k, s.term_sup[k]);
        for (std::size_t q = 0; q < s.probes.size(); ++q) {
            partial[q] += s.terms[k][q];
            std::fprintf(f, ",%.16e", partial[q]);
        }
        std::fprintf(f, "\n");
    }
    std::fclose(f);
}

}  // namespace sdrift::resolvent
