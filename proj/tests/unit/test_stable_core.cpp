#include "doctest.h"
#include "stabledrift/errors.hpp"
#include "stabledrift/quadrature.hpp"
#include "stabledrift/stable_core.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <fftw3.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

using namespace sdrift;
using namespace sdrift::stable;
using std::numbers::pi;

namespace {
const StableParams P1 = StableParams::make(1, 1.5);
const StableParams P2 = StableParams::make(2, 1.5);

double rel(double a, double b) { return std::fabs(a - b) / std::fabs(b); }
}  // namespace

TEST_CASE("parameters are validated") {
    CHECK_THROWS_AS(StableParams::make(1, 2.0), DomainError);
    CHECK_THROWS_AS(StableParams::make(1, 1.0), DomainError);
    CHECK_THROWS_AS(StableParams::make(0, 1.5), DomainError);
    CHECK(P2.sphere_area == doctest::Approx(2.0 * pi));
}

TEST_CASE("characteristic function") {
    const double z[] = {0.0};
    CHECK(char_function(P1, z, 5.0) == 1.0);
    const double one[] = {1.0};
    CHECK(char_function(P1, one, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
    const double two[] = {0.0, 2.0};
    CHECK(char_function(P2, two, 0.5) == doctest::Approx(std::exp(-std::sqrt(2.0))).epsilon(1e-15));
}

TEST_CASE("Levy normalizer closed form") {
    CHECK(levy_normalizer(P1) == doctest::Approx(0.299206).epsilon(1e-5));
    const double expect = 1.5 * std::sqrt(2.0) / pi * boost::math::tgamma(1.75) / boost::math::tgamma(0.25);
    CHECK(rel(levy_normalizer(P2), expect) < 1e-12);
}

TEST_CASE("Levy normalizer agrees with the Fourier identity by quadrature") {
    for (double xi : {0.5, 1.0, 2.0}) {
        CHECK(std::fabs(normalizer_identity_quadrature(P1, xi) + std::pow(xi, 1.5)) < 1e-6);
        CHECK(std::fabs(normalizer_identity_quadrature(P2, xi) + std::pow(xi, 1.5)) < 1e-6);
    }
    for (double a : {1.2, 1.8}) {
        const StableParams p = StableParams::make(1, a);
        CHECK(std::fabs(normalizer_identity_quadrature(p, 1.0) + 1.0) < 1e-6);
    }
}

TEST_CASE("density at the origin matches Gamma-function closed forms") {
    const double x0[] = {0.0};
    CHECK(rel(density(P1, 1.0, x0), boost::math::tgamma(5.0 / 3.0) / pi) < 1e-8);
    const double x00[] = {0.0, 0.0};
    const double expect2 = std::pow(2.0 * pi, -2.0) * 2.0 * pi * boost::math::tgamma(2.0 / 1.5) / 1.5;
    CHECK(rel(density(P2, 1.0, x00), expect2) < 1e-8);
    CHECK(density(P2, 1.0, x00) == doctest::Approx(0.094750).epsilon(1e-5));
    CHECK(rel(density(P1, 2.0, x0), std::pow(2.0, -2.0 / 3.0) * density(P1, 1.0, x0)) < 1e-14);
    CHECK_THROWS_AS(density(P1, 0.0, x0), DomainError);
    CHECK_THROWS_AS(density(P1, -1.0, x0), DomainError);
}

TEST_CASE("interpolated profile matches direct quadrature") {
    for (int d : {1, 2, 3}) {
        const RadialProfile& f = profile(d, 1.5);
        for (double r : {0.013, 0.5, 1.37, 1.999, 2.3, 7.77, 19.3, 33.3, 49.9})
            if (r <= f.tail_start()) CHECK(rel(f.value(r), f.value_direct(r)) < 1e-8);
    }
}

TEST_CASE("tail series and quadrature branches agree at the crossover") {
    for (int d : {1, 2, 3}) {
        const RadialProfile& f = profile(d, 1.5);
        const double r = f.tail_start();
        CHECK(rel(f.value_tail(r), f.value_direct(r)) < 1e-6);
    }
    // leading tail coefficient is the Levy normalizer
    const RadialProfile& f = profile(1, 1.5);
    CHECK(rel(f.value_tail(1e6) * std::pow(1e6, 2.5), P1.normalizer) < 1e-6);
}

TEST_CASE("self-similarity through two independent evaluation paths") {
    std::mt19937_64 g(7);
    std::uniform_real_distribution<double> ut(0.05, 5.0), ux(-6.0, 6.0);
    for (int i = 0; i < 10; ++i) {
        const double t = ut(g), x = ux(g);
        const double lhs = density_1d(P1, t, x);
        const double y[] = {x * std::pow(t, -1.0 / 1.5)};
        const double rhs = std::pow(t, -1.0 / 1.5) * density_direct(P1, 1.0, y);
        CHECK(rel(lhs, rhs) < 1e-8);
    }
}

TEST_CASE("normalization with analytic tail") {
    for (int d : {1, 2}) {
        const RadialProfile& f = profile(d, 1.5);
        const double area = sphere_area(d);
        for (double t : {0.1, 1.0, 10.0}) {
            // int p(t, x) dx over |x| <= R equals the unit-time mass within R t^{-1/alpha}
            const double R = 30.0 * std::pow(t, 1.0 / 1.5);
            auto integrand = [&](double r) {
                const double s = std::pow(t, -1.0 / 1.5);
                return area * std::pow(s, d) * f.value(s * r) * std::pow(r, d - 1);
            };
            double inner = quad::kronrod(integrand, 0.0, 2.0 * std::pow(t, 1.0 / 1.5), 1e-12) +
                           quad::kronrod(integrand, 2.0 * std::pow(t, 1.0 / 1.5), R, 1e-12);
            const double tail = f.mass_beyond(R * std::pow(t, -1.0 / 1.5));
            CHECK(std::fabs(inner + tail - 1.0) < 1e-6);
        }
    }
}

TEST_CASE("two-sided comparison constant is finite and grid-stable") {
    const double c1 = free_comparability_constant(P1, 1e-3, 1e3, 200);
    const double c2 = free_comparability_constant(P1, 1e-3, 1e3, 400);
    CHECK(std::isfinite(c1));
    CHECK(c1 > 1.0);
    CHECK(std::fabs(c1 - c2) / c1 < 0.05);
    const double c3 = free_comparability_constant(P2, 1e-3, 1e3, 200);
    CHECK(std::isfinite(c3));
}

TEST_CASE("density is positive, radially non-increasing, and comparable to r^{-d-alpha}") {
    for (int d : {1, 2, 3}) {
        const RadialProfile& f = profile(d, 1.5);
        double prev = f.value(0.0);
        double lo = HUGE_VAL, hi = 0.0;
        for (double r = 0.01; r < 400.0; r *= 1.05) {
            const double v = f.value(r);
            CHECK(v > 0.0);
            CHECK(v <= prev * (1.0 + 1e-12));
            prev = v;
            const double s = v * std::pow(1.0 + r, d + 1.5);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        CHECK(lo > 0.0);
        CHECK(hi / lo < 100.0);
    }
}

TEST_CASE("gradient: zero at origin, odd, matches finite differences") {
    const double x0[] = {0.0, 0.0};
    double g[2];
    density_gradient(P2, 1.0, x0, g);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    for (double x : {0.3, 1.0, 2.5, 7.0, 40.0, 80.0}) {
        CHECK(density_gradient_1d(P1, 1.0, -x) == -density_gradient_1d(P1, 1.0, x));
        const double h = 1e-4 * std::max(1.0, x);
        const double fd = (density_1d(P1, 1.0, x + h) - density_1d(P1, 1.0, x - h)) / (2 * h);
        CHECK(rel(density_gradient_1d(P1, 1.0, x), fd) < 1e-4);
    }
    const double x[] = {0.7, -1.1};
    density_gradient(P2, 0.5, x, g);
    for (int i = 0; i < 2; ++i) {
        double xp[] = {x[0], x[1]}, xm[] = {x[0], x[1]};
        xp[i] += 1e-4;
        xm[i] -= 1e-4;
        const double fd = (density(P2, 0.5, xp) - density(P2, 0.5, xm)) / 2e-4;
        CHECK(rel(g[i], fd) < 1e-4);
    }
}

TEST_CASE("Levy intensity") {
    const double x[] = {0.3}, y[] = {1.3}, xs[] = {5.3}, ys[] = {6.3};
    CHECK(levy_intensity(P1, x, y) == doctest::Approx(0.299206).epsilon(1e-5));
    CHECK(levy_intensity(P1, x, y) == doctest::Approx(levy_intensity(P1, xs, ys)).epsilon(1e-14));
    CHECK_THROWS_AS(levy_intensity(P1, x, x), DomainError);
    CHECK(levy_tail_mass(P1, 1.0) == doctest::Approx(0.398941).epsilon(1e-5));
    CHECK(levy_tail_mass(P1, 4.0) == doctest::Approx(levy_tail_mass(P1, 1.0) / 8.0).epsilon(1e-13));
}

TEST_CASE("1-d distribution function") {
    CHECK(cdf_1d(P1, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    for (double x : {0.3, 1.9, 2.1, 10.0, 60.0}) {
        auto f = [&](double y) { return density_1d(P1, 1.0, y); };
        const double inner = quad::kronrod(f, 0.0, std::min(x, 2.0), 1e-13) +
                             (x > 2.0 ? quad::kronrod(f, 2.0, x, 1e-13) : 0.0);
        CHECK(std::fabs(cdf_1d(P1, 1.0, x) - 0.5 - inner) < 1e-9);
        CHECK(cdf_1d(P1, 1.0, -x) == doctest::Approx(1.0 - cdf_1d(P1, 1.0, x)).epsilon(1e-14));
    }
}

namespace {
// -F^{-1}(|xi|^alpha F f) on a periodic grid of period 2L, evaluated at grid
// node x. The periodic images contribute A int f(y) |x + 2Ln - y|^{-1-alpha} dy
// each; those are removed by direct quadrature.
double spectral_fractional_laplacian(const TestFunction& f, const StableParams& p, double x, double L, int n) {
    const double h = 2.0 * L / n;
    std::vector<double> v(n);
    for (int j = 0; j < n; ++j) v[j] = f(-L + j * h);
    std::vector<std::complex<double>> c(n / 2 + 1);
    fftw_plan fw = fftw_plan_dft_r2c_1d(n, v.data(), reinterpret_cast<fftw_complex*>(c.data()), FFTW_ESTIMATE);
    fftw_execute(fw);
    fftw_destroy_plan(fw);
    for (int k = 0; k <= n / 2; ++k) c[k] *= -std::pow(2.0 * pi * k / (2.0 * L), p.alpha) / n;
    std::vector<double> out(n);
    fftw_plan bw = fftw_plan_dft_c2r_1d(n, reinterpret_cast<fftw_complex*>(c.data()), out.data(), FFTW_ESTIMATE);
    fftw_execute(bw);
    fftw_destroy_plan(bw);
    const int j = static_cast<int>(std::lround((x + L) / h));
    double images = 0.0;
    const double R = f.effective_radius, c0 = f.center[0];
    for (int m = 1; m <= 4000; ++m) {
        for (int sgn : {-1, 1}) {
            const double shift = x + sgn * 2.0 * L * m;
            auto g = [&](double y) { return f(y) * std::pow(std::fabs(shift - y), -1.0 - p.alpha); };
            images += p.normalizer * quad::gauss20_panels(g, c0 - R, c0 + R, 8);
        }
    }
    return out[j] - images;
}
}  // namespace

TEST_CASE("fractional Laplacian against the spectral oracle") {
    const TestFunction b = bump(1, 3.0);
    const double L = 40.0;
    const int n = 1 << 15;
    const double h = 2.0 * L / n;
    for (double x : {0.0, 0.4, 1.2, 2.9, 5.0}) {
        const double xg = std::round(x / h) * h;
        const double q = fractional_laplacian_1d(P1, b, xg);
        const double s = spectral_fractional_laplacian(b, P1, xg, L, n);
        CHECK(std::fabs(q - s) <= 1e-5 * std::fabs(s));
    }
}

TEST_CASE("fractional Laplacian is linear and scales like lambda^{-alpha}") {
    const TestFunction f = bump(1, 1.0), g = gaussian(1, 0.7);
    const TestFunction h = linear_combination(2.0, f, -0.5, g);
    for (double x : {0.0, 0.5}) {
        const double lhs = fractional_laplacian_1d(P1, h, x);
        const double rhs = 2.0 * fractional_laplacian_1d(P1, f, x) - 0.5 * fractional_laplacian_1d(P1, g, x);
        CHECK(std::fabs(lhs - rhs) < 1e-10);
    }
    const double lam = 2.5;
    CHECK(rel(fractional_laplacian_1d(P1, dilate(f, lam), 0.0), std::pow(lam, -1.5) * fractional_laplacian_1d(P1, f, 0.0)) < 1e-8);
    const TestFunction f2 = bump(2, 1.0);
    const TestFunction f2l = dilate(f2, lam);
    const double z[] = {0.0, 0.0};
    CHECK(rel(fractional_laplacian(P2, f2l, z), std::pow(lam, -1.5) * fractional_laplacian(P2, f2, z)) < 1e-7);
}
