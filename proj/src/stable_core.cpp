#include "stabledrift/stable_core.hpp"

#include "stabledrift/errors.hpp"
#include "stabledrift/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/bessel.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>

namespace sdrift::stable {
namespace {

using std::numbers::pi;

// Spherical average of exp(i xi.x) in R^m at |xi||x| = z:
// Gamma(nu+1) (2/z)^nu J_nu(z), nu = m/2 - 1. Equals 1 at z = 0.
double bessel_series_tail(int m, double z) {
    // sum_{k>=1} (-z^2/4)^k Gamma(nu+1) / (k! Gamma(nu+k+1))
    const double nu = 0.5 * m - 1.0;
    const double q = -0.25 * z * z;
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 60; ++k) {
        term *= q / (k * (nu + k));
        sum += term;
        if (std::fabs(term) < 1e-18 * std::fabs(sum)) break;
    }
    return sum;
}

double normalized_bessel(int m, double z) {
    z = std::fabs(z);
    if (z < 1.0) return 1.0 + bessel_series_tail(m, z);
    switch (m) {
        case 1: return std::cos(z);
        case 2: return boost::math::cyl_bessel_j(0, z);
        case 3: return std::sin(z) / z;
        case 4: return 2.0 * boost::math::cyl_bessel_j(1, z) / z;
        case 5: return 3.0 * (std::sin(z) - z * std::cos(z)) / (z * z * z);
        case 6: return 8.0 * boost::math::cyl_bessel_j(2, z) / (z * z);
        case 7: {
            const double z2 = z * z;
            return 15.0 * ((3.0 - z2) * std::sin(z) - 3.0 * z * std::cos(z)) / (z2 * z2 * z);
        }
        default: {
            const double nu = 0.5 * m - 1.0;
            return std::tgamma(nu + 1.0) * std::pow(2.0 / z, nu) * boost::math::cyl_bessel_j(nu, z);
        }
    }
}

double normalized_bessel_minus_one(int m, double z) {
    z = std::fabs(z);
    if (z < 1.0) return bessel_series_tail(m, z);
    return normalized_bessel(m, z) - 1.0;
}

// (2 pi)^{-m} * area(S^{m-1}) = 2^{1-m} pi^{-m/2} / Gamma(m/2)
double inversion_constant(int m) {
    return std::pow(2.0, 1.0 - m) * std::pow(pi, -0.5 * m) / std::tgamma(0.5 * m);
}

// int_0^inf exp(-s^alpha) K(s) ds for a bounded kernel K that oscillates at
// frequency r. Geometric panels resolve the s^alpha branch point at 0.
template <class Kernel>
double laplace_type_integral(double alpha, double r, Kernel&& kernel) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const double s_end = std::pow(45.0, 1.0 / alpha);
    const double s1 = std::min(1.0, 2.0 / (1.0 + r));
    auto f = [&](double s) { return std::exp(-std::pow(s, alpha)) * kernel(s); };
    double total = 0.0;
    double hi = s1;
    for (int j = 0; j < 50; ++j) {
        const double lo = 0.5 * hi;
        total += GL::integrate(f, lo, hi);
        hi = lo;
    }
    const double width = std::min(0.5, 2.0 / (1.0 + r));
    const int n = static_cast<int>(std::ceil((s_end - s1) / width));
    const double w = (s_end - s1) / n;
    for (int i = 0; i < n; ++i) total += GL::integrate(f, s1 + i * w, s1 + (i + 1) * w);
    return total;
}

std::vector<double> tail_coefficients(int m, double alpha) {
    // f_m(r) ~ sum_k c_k r^{-m - alpha k}
    std::vector<double> c;
    for (int k = 1; k <= 60; ++k) {
        const double ak = alpha * k;
        const double lmag = ak * std::log(2.0) + std::lgamma(0.5 * (m + ak)) + std::lgamma(1.0 + 0.5 * ak) -
                            std::lgamma(k + 1.0) - (0.5 * m + 1.0) * std::log(pi);
        const double s = std::sin(0.5 * pi * ak) * ((k % 2 == 1) ? 1.0 : -1.0);
        c.push_back(s * std::exp(lmag));
    }
    return c;
}

// Sum of c_k r^{-pow0 - alpha k} * scale_k, stopping when terms stop shrinking.
template <class Scale>
double tail_sum(const std::vector<double>& c, double alpha, double r, double pow0, Scale&& scale) {
    const double ra = std::pow(r, -alpha);
    double rk = std::pow(r, -pow0) * ra;
    double sum = 0.0, last = HUGE_VAL;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double term = c[k] * scale(static_cast<int>(k + 1)) * rk;
        if (std::fabs(term) > last && k > 2) break;
        sum += term;
        last = std::fabs(term);
        if (last < 1e-18 * std::fabs(sum)) break;
        rk *= ra;
    }
    return sum;
}

double tail_start_for(int m) {
    if (m <= 2) return RadialProfile::kTailStart;
    if (m == 3) return 30.0;
    return 20.0;
}

struct Hermite {
    // Cubic Hermite on [x0, x0 + h] with values y0, y1 and slopes d0, d1.
    static double value(double t, double h, double y0, double y1, double d0, double d1) {
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 +
               (t3 - t2) * h * d1;
    }
    static double slope(double t, double h, double y0, double y1, double d0, double d1) {
        const double t2 = t * t;
        return ((6 * t2 - 6 * t) * y0 + (-6 * t2 + 6 * t) * y1) / h + (3 * t2 - 4 * t + 1) * d0 +
               (3 * t2 - 2 * t) * d1;
    }
};

}  // namespace

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

StableParams StableParams::make(int d, double alpha) {
    if (!(alpha > 1.0 && alpha < 2.0)) {
        std::ostringstream os;
        os << "alpha must lie in (1, 2), got " << alpha;
        throw DomainError(os.str());
    }
    if (d < 1 || d > 3) throw DomainError("dimension d must be 1, 2 or 3, got " + std::to_string(d));
    StableParams p;
    p.d = d;
    p.alpha = alpha;
    p.sphere_area = stable::sphere_area(d);
    p.normalizer = levy_normalizer(p);
    return p;
}

double char_function(const StableParams& p, std::span<const double> xi, double t) {
    double n2 = 0.0;
    for (double v : xi) n2 += v * v;
    return std::exp(-t * std::pow(n2, 0.5 * p.alpha));
}

double levy_normalizer(const StableParams& p) {
    const double a = p.alpha;
    return a * std::pow(2.0, a - 1.0) * std::pow(pi, -0.5 * p.d) * std::tgamma(0.5 * (p.d + a)) /
           std::tgamma(1.0 - 0.5 * a);
}

double normalizer_identity_quadrature(const StableParams& p, double xi) {
    const int m = p.d;
    const double a = p.alpha;
    auto inner = [&](double rho) {
        const double z = xi * rho;
        if (z < 1e-4) return -xi * xi / (2.0 * m) * std::pow(rho, 1.0 - a);
        return normalized_bessel_minus_one(m, z) * std::pow(rho, -1.0 - a);
    };
    double near = quad::tanh_sinh(inner, 0.0, 1.0, 1e-12);
    // [1, R]: oscillatory part, then the -1 part analytically.
    const double R = 1000.0;
    const double width = std::min(1.0, pi / std::max(xi, 1e-3));
    const int n = static_cast<int>(std::ceil((R - 1.0) / width));
    auto osc = [&](double rho) { return normalized_bessel(m, xi * rho) * std::pow(rho, -1.0 - a); };
    double far = quad::gauss20_panels(osc, 1.0, R, n);
    if (m == 1) {
        const double beta = 1.0 + a;
        far += -std::sin(xi * R) * std::pow(R, -beta) / xi + beta * std::cos(xi * R) * std::pow(R, -beta - 1.0) / (xi * xi);
    }
    far -= 1.0 / a;
    return p.normalizer * p.sphere_area * (near + far);
}

double radial_inversion(int m, double alpha, double r) {
    r = std::fabs(r);
    const double c = inversion_constant(m);
    auto kernel = [&](double s) { return std::pow(s, m - 1) * normalized_bessel(m, r * s); };
    return c * laplace_type_integral(alpha, r, kernel);
}

RadialProfile::RadialProfile(int m, double alpha) : m_(m), alpha_(alpha) {
    if (m < 1 || m > 7) throw DomainError("radial profile dimension index out of range");
    tail_coef_ = tail_coefficients(m, alpha);
    const int nu = static_cast<int>(std::lround(kUniformEnd / kUniformStep));
    for (int j = 0; j <= nu; ++j) {
        const double r = j * kUniformStep;
        grid_.push_back(r);
        values_.push_back(radial_inversion(m, alpha, r));
        slopes_.push_back(-2.0 * pi * r * radial_inversion(m + 2, alpha, r));
    }
    const double rc = tail_start_for(m);
    u0_ = std::log(kUniformEnd);
    const int nl = static_cast<int>(std::ceil(std::log(rc / kUniformEnd) / kLogStep));
    const double du = std::log(rc / kUniformEnd) / nl;
    for (int j = 0; j <= nl; ++j) {
        const double r = (j == nl) ? rc : std::exp(u0_ + j * du);
        const double f = (j == 0) ? values_.back() : radial_inversion(m, alpha, r);
        const double g = (j == 0) ? slopes_.back() : -2.0 * pi * r * radial_inversion(m + 2, alpha, r);
        if (!(f > 0.0)) throw AccuracyError("radial profile lost positivity at r = " + std::to_string(r));
        log_f_.push_back(std::log(f));
        log_slope_.push_back(r * g / f);
    }
}

double RadialProfile::value(double r) const {
    r = std::fabs(r);
    if (r <= kUniformEnd) {
        const double x = r / kUniformStep;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), grid_.size() - 2);
        return Hermite::value(x - j, kUniformStep, values_[j], values_[j + 1], slopes_[j], slopes_[j + 1]);
    }
    const double rc = tail_start_for(m_);
    if (r <= rc) {
        const std::size_t n = log_f_.size() - 1;
        const double du = std::log(rc / kUniformEnd) / n;
        const double x = (std::log(r) - u0_) / du;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), n - 1);
        return std::exp(Hermite::value(x - j, du, log_f_[j], log_f_[j + 1], log_slope_[j], log_slope_[j + 1]));
    }
    return value_tail(r);
}

double RadialProfile::derivative(double r) const {
    const double sgn = r < 0 ? -1.0 : 1.0;
    r = std::fabs(r);
    if (r <= kUniformEnd) {
        const double x = r / kUniformStep;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), grid_.size() - 2);
        return sgn * Hermite::slope(x - j, kUniformStep, values_[j], values_[j + 1], slopes_[j], slopes_[j + 1]);
    }
    const double rc = tail_start_for(m_);
    if (r <= rc) {
        const std::size_t n = log_f_.size() - 1;
        const double du = std::log(rc / kUniformEnd) / n;
        const double x = (std::log(r) - u0_) / du;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), n - 1);
        const double t = x - j;
        const double lf = Hermite::value(t, du, log_f_[j], log_f_[j + 1], log_slope_[j], log_slope_[j + 1]);
        const double ls = Hermite::slope(t, du, log_f_[j], log_f_[j + 1], log_slope_[j], log_slope_[j + 1]);
        return sgn * std::exp(lf) * ls / r;
    }
    return sgn * derivative_tail(r);
}

double RadialProfile::tail_start() const { return tail_start_for(m_); }

double RadialProfile::value_direct(double r) const { return radial_inversion(m_, alpha_, r); }

double RadialProfile::value_tail(double r) const {
    return tail_sum(tail_coef_, alpha_, std::fabs(r), m_, [](int) { return 1.0; });
}

double RadialProfile::derivative_tail(double r) const {
    const double a = alpha_;
    const int m = m_;
    return tail_sum(tail_coef_, a, std::fabs(r), m + 1, [&](int k) { return -(m + a * k); });
}

double RadialProfile::mass_beyond(double R) const {
    const double rc = tail_start_for(m_);
    const double area = sphere_area(m_);
    const double a = alpha_;
    auto tail_part = [&](double from) {
        return area * tail_sum(tail_coef_, a, from, 0.0, [&](int k) { return 1.0 / (a * k); });
    };
    if (R >= rc) return tail_part(R);
    auto integrand = [&](double r) { return area * value(r) * std::pow(r, m_ - 1); };
    double s = 0.0;
    double lo = R;
    // Pieces aligned with the table regions keep the integrand smooth per call.
    for (double edge : {kUniformEnd, rc}) {
        if (lo < edge) {
            s += quad::kronrod(integrand, lo, edge, 1e-12);
            lo = edge;
        }
    }
    return s + tail_part(rc);
}

const RadialProfile& profile(int m, double alpha) {
    static std::mutex mu;
    static std::map<std::pair<int, double>, std::unique_ptr<RadialProfile>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[{m, alpha}];
    if (!slot) slot = std::make_unique<RadialProfile>(m, alpha);
    return *slot;
}

UnitCdf::UnitCdf(double alpha) : alpha_(alpha) {
    tail_coef_ = tail_coefficients(1, alpha);
    const RadialProfile& f = profile(1, alpha);
    auto upper = [&](double r) {
        if (r == 0.0) return 0.5;
        auto kernel = [&](double s) { return std::sin(r * s) / s; };
        return 0.5 - laplace_type_integral(alpha, r, kernel) / pi;
    };
    const int nu = static_cast<int>(std::lround(RadialProfile::kUniformEnd / RadialProfile::kUniformStep));
    for (int j = 0; j <= nu; ++j) half_minus_.push_back(upper(j * RadialProfile::kUniformStep));
    const double rc = RadialProfile::kTailStart;
    u0_ = std::log(RadialProfile::kUniformEnd);
    const int nl = static_cast<int>(std::ceil(std::log(rc / RadialProfile::kUniformEnd) / RadialProfile::kLogStep));
    const double du = std::log(rc / RadialProfile::kUniformEnd) / nl;
    for (int j = 0; j <= nl; ++j) {
        const double r = (j == nl) ? rc : std::exp(u0_ + j * du);
        const double T = (j == 0) ? half_minus_.back() : upper(r);
        log_tail_.push_back(std::log(T));
        log_tail_slope_.push_back(-r * f.value(r) / T);
    }
}

double UnitCdf::upper_tail(double r) const {
    r = std::fabs(r);
    const RadialProfile& f = profile(1, alpha_);
    const double h = RadialProfile::kUniformStep;
    if (r <= RadialProfile::kUniformEnd) {
        const double x = r / h;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), half_minus_.size() - 2);
        return Hermite::value(x - j, h, half_minus_[j], half_minus_[j + 1], -f.values()[j], -f.values()[j + 1]);
    }
    const double rc = RadialProfile::kTailStart;
    if (r <= rc) {
        const std::size_t n = log_tail_.size() - 1;
        const double du = std::log(rc / RadialProfile::kUniformEnd) / n;
        const double x = (std::log(r) - u0_) / du;
        std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(x), n - 1);
        return std::exp(Hermite::value(x - j, du, log_tail_[j], log_tail_[j + 1], log_tail_slope_[j],
                                       log_tail_slope_[j + 1]));
    }
    const double a = alpha_;
    return tail_sum(tail_coef_, a, r, 0.0, [&](int k) { return 1.0 / (a * k); });
}

double UnitCdf::cdf(double x) const {
    const double T = upper_tail(x);
    return x >= 0 ? 1.0 - T : T;
}

const UnitCdf& unit_cdf(double alpha) {
    static std::mutex mu;
    static std::map<double, std::unique_ptr<UnitCdf>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[alpha];
    if (!slot) slot = std::make_unique<UnitCdf>(alpha);
    return *slot;
}

double cdf_1d(const StableParams& p, double t, double x, double shift) {
    if (!(t > 0.0)) throw DomainError("cdf requires t > 0");
    return unit_cdf(p.alpha).cdf((x - shift) * std::pow(t, -1.0 / p.alpha));
}

namespace {
double norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}
void require_time(double t) {
    if (!(t > 0.0)) {
        std::ostringstream os;
        os << "density requires t > 0, got t = " << t;
        throw DomainError(os.str());
    }
}
}  // namespace

double density(const StableParams& p, double t, std::span<const double> x) {
    require_time(t);
    const double s = std::pow(t, -1.0 / p.alpha);
    return std::pow(s, p.d) * profile(p.d, p.alpha).value(s * norm(x));
}

double density_1d(const StableParams& p, double t, double x) {
    require_time(t);
    const double s = std::pow(t, -1.0 / p.alpha);
    return s * profile(1, p.alpha).value(s * x);
}

double density_direct(const StableParams& p, double t, std::span<const double> x) {
    require_time(t);
    const double s = std::pow(t, -1.0 / p.alpha);
    const double r = s * norm(x);
    const RadialProfile& prof = profile(p.d, p.alpha);
    const double f = (r <= tail_start_for(p.d)) ? prof.value_direct(r) : prof.value_tail(r);
    return std::pow(s, p.d) * f;
}

void density_gradient(const StableParams& p, double t, std::span<const double> x, std::span<double> grad) {
    require_time(t);
    const double s = std::pow(t, -1.0 / p.alpha);
    const double r = norm(x);
    // grad p = -2 pi s^{d+2} f_{d+2}(s|x|) x
    const double c = -2.0 * pi * std::pow(s, p.d + 2) * profile(p.d + 2, p.alpha).value(s * r);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = c * x[i];
}

double density_gradient_1d(const StableParams& p, double t, double x) {
    require_time(t);
    const double s = std::pow(t, -1.0 / p.alpha);
    return -2.0 * pi * s * s * s * profile(3, p.alpha).value(s * x) * x;
}

double levy_intensity(const StableParams& p, std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    if (s == 0.0) throw DomainError("Levy intensity is undefined on the diagonal x = y");
    return p.normalizer * std::pow(s, -0.5 * (p.d + p.alpha));
}

double levy_tail_mass(const StableParams& p, double rho) {
    if (!(rho > 0.0)) throw DomainError("Levy tail mass requires rho > 0");
    return p.normalizer * p.sphere_area * std::pow(rho, -p.alpha) / p.alpha;
}

double fractional_laplacian(const StableParams& p, const TestFunction& f, std::span<const double> x) {
    const int d = p.d;
    const double a = p.alpha;
    const quad::SphereRule sph = quad::sphere_rule(d, 24);
    std::array<double, 3> y{};
    auto at = [&](double rho, const std::array<double, 3>& dir, double sign) {
        for (int i = 0; i < d; ++i) y[i] = x[i] + sign * rho * dir[i];
        return f.value(std::span<const double>(y.data(), d));
    };
    const double fx = f.value(x);
    if (!std::isfinite(fx)) throw Error("test function is not finite at the evaluation point");

    // [0, delta]: second-order Taylor term, spherical average of z^T H z = |z|^2 tr H / d.
    const double delta = 1e-3;
    double lap = 0.0;
    {
        const double h = 1e-3;
        for (int i = 0; i < d; ++i) {
            std::array<double, 3> e{};
            e[i] = 1.0;
            lap += (at(h, e, 1.0) + at(h, e, -1.0) - 2.0 * fx) / (h * h);
        }
    }
    double total = p.sphere_area * lap / (2.0 * d) * std::pow(delta, 2.0 - a) / (2.0 - a);

    // Radii where some ray x +- rho theta crosses the support boundary; the
    // integrands are only piecewise analytic across them.
    std::vector<double> breaks;
    if (std::isfinite(f.effective_radius)) {
        double dist = 0.0;
        for (int i = 0; i < d; ++i) dist += (x[i] - f.center[i]) * (x[i] - f.center[i]);
        dist = std::sqrt(dist);
        for (double b : {dist - f.effective_radius, dist + f.effective_radius, f.effective_radius - dist})
            if (b > 0.0) breaks.push_back(b);
    }
    auto piecewise = [&](const std::function<double(double)>& g, double a, double b,
                         const std::function<double(double)>& to_var) {
        std::vector<double> pts{a};
        for (double r : breaks) {
            const double v = to_var(r);
            if (v > a && v < b) pts.push_back(v);
        }
        pts.push_back(b);
        std::sort(pts.begin(), pts.end());
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i)
            if (pts[i + 1] > pts[i]) s += quad::gauss20_panels(g, pts[i], pts[i + 1], 24);
        return s;
    };

    // Symmetrized second difference averaged over the sphere, in u = rho^{2-alpha}
    // so that the O(rho^{1-alpha}) weight becomes flat.
    const double beta = 2.0 - a;
    auto second_diff = [&](double u) {
        const double rho = std::pow(u, 1.0 / beta);
        double s = 0.0;
        for (std::size_t k = 0; k < sph.dirs.size(); ++k)
            s += sph.weights[k] * (0.5 * (at(rho, sph.dirs[k], 1.0) + at(rho, sph.dirs[k], -1.0)) - fx);
        return s / (rho * rho * beta);
    };
    total += piecewise(second_diff, std::pow(delta, beta), 1.0, [&](double r) { return std::pow(r, beta); });

    // [1, inf): -f(x) part analytically, shifted values numerically.
    total -= p.sphere_area * fx / a;
    auto shifted = [&](double rho) {
        double s = 0.0;
        for (std::size_t k = 0; k < sph.dirs.size(); ++k)
            s += sph.weights[k] * 0.5 * (at(rho, sph.dirs[k], 1.0) + at(rho, sph.dirs[k], -1.0));
        return s * std::pow(rho, -1.0 - a);
    };
    if (std::isfinite(f.effective_radius)) {
        const double hi = *std::max_element(breaks.begin(), breaks.end());
        if (hi > 1.0) total += piecewise(shifted, 1.0, hi, [](double r) { return r; });
    } else {
        total += quad::exp_sinh(shifted, 1.0, 1e-12);
    }
    const double r = p.normalizer * total;
    if (!std::isfinite(r)) throw Error("fractional Laplacian evaluation produced a non-finite value");
    return r;
}

double fractional_laplacian_1d(const StableParams& p, const TestFunction& f, double x) {
    return fractional_laplacian(p, f, std::span<const double>(&x, 1));
}

double comparison_function(const StableParams& p, double t, double r) {
    const double a = std::pow(t, -static_cast<double>(p.d) / p.alpha);
    if (r == 0.0) return a;
    return std::min(a, t * std::pow(r, -p.d - p.alpha));
}

double free_comparability_constant(const StableParams& p, double r_min, double r_max, int n) {
    const RadialProfile& f = profile(p.d, p.alpha);
    double c = std::max(f.value(0.0), 1.0 / f.value(0.0));
    for (int i = 0; i < n; ++i) {
        const double r = r_min * std::pow(r_max / r_min, static_cast<double>(i) / (n - 1));
        const double q = f.value(r) / comparison_function(p, 1.0, r);
        c = std::max(c, std::max(q, 1.0 / q));
    }
    return c;
}

}  // namespace sdrift::stable
