#pragma once

// The free rotationally symmetric alpha-stable process in R^d: characteristic
// function exp(-t|xi|^alpha), transition density, its gradient, the Levy
// intensity and the fractional Laplacian.

#include "stabledrift/functions.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace sdrift::stable {

struct StableParams {
    int d = 1;
    double alpha = 1.5;
    double normalizer = 0.0;   // A(d, -alpha)
    double sphere_area = 0.0;  // 2 pi^{d/2} / Gamma(d/2)

    // Validates 1 < alpha < 2 and 1 <= d <= 3; throws DomainError otherwise.
    static StableParams make(int d, double alpha);
};

double sphere_area(int d);

double char_function(const StableParams& p, std::span<const double> xi, double t);

// Closed Gamma-function form of A(d, -alpha).
double levy_normalizer(const StableParams& p);

// Independent quadrature of int (cos(xi.z) - 1) A |z|^{-d-alpha} dz at |xi| = xi_norm.
// Equals -|xi|^alpha when the normalizer is right.
double normalizer_identity_quadrature(const StableParams& p, double xi_norm);

// Unit-time radial profile f_m(r) of the m-dimensional density,
// p_m(1, x) = f_m(|x|). Built once per (m, alpha) and shared.
//
// [0, 2]: cubic Hermite on a uniform grid with exact derivatives.
// [2, 50]: cubic Hermite of log f against log r.
// beyond 50: asymptotic series in r^{-alpha k}.
class RadialProfile {
public:
    static constexpr double kUniformEnd = 2.0;
    static constexpr double kUniformStep = 0.02;
    static constexpr double kLogStep = 0.01;
    static constexpr double kTailStart = 50.0;

    RadialProfile(int m, double alpha);

    int dimension() const { return m_; }
    double alpha() const { return alpha_; }
    double tail_exponent() const { return m_ + alpha_; }
    // Radius where the table hands over to the asymptotic series (50 for m <= 2;
    // smaller for higher m, whose quadrature loses relative digits sooner).
    double tail_start() const;

    // Interpolated value and derivative.
    double value(double r) const;
    double derivative(double r) const;

    // Direct quadrature of the Fourier inversion (slow oracle path).
    double value_direct(double r) const;
    // Asymptotic tail series (accurate for r >= kTailStart / 2).
    double value_tail(double r) const;
    // Tail series of the derivative.
    double derivative_tail(double r) const;

    // Mass of the m-dimensional unit-time density outside the ball of radius R.
    double mass_beyond(double R) const;

    const std::vector<double>& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }

private:
    int m_;
    double alpha_;
    std::vector<double> grid_, values_, slopes_;        // uniform part: r, f, f'
    std::vector<double> log_f_, log_slope_;             // log part on u = log r
    double u0_ = 0.0;
    std::vector<double> tail_coef_;                     // coefficients of r^{-m - alpha k}
};

// Shared cached profile for dimension index m (1 <= m <= 7).
const RadialProfile& profile(int m, double alpha);

// Raw radial Fourier inversion: f_m(r) by quadrature. Exposed for tests.
double radial_inversion(int m, double alpha, double r);

// 1-d distribution function of the unit-time law and its complement, tabulated.
class UnitCdf {
public:
    explicit UnitCdf(double alpha);
    double cdf(double x) const;
    double upper_tail(double r) const;  // P(Y_1 > r), r >= 0
private:
    double alpha_;
    std::vector<double> half_minus_;     // 1/2 - G(r) on the uniform grid
    std::vector<double> log_tail_;       // log(1/2 - G) on the log grid
    std::vector<double> log_tail_slope_;
    std::vector<double> tail_coef_;
    double u0_ = 0.0;
};
const UnitCdf& unit_cdf(double alpha);

// CDF in d = 1 of p(t, . - shift).
double cdf_1d(const StableParams& p, double t, double x, double shift = 0.0);

double density(const StableParams& p, double t, std::span<const double> x);
double density_1d(const StableParams& p, double t, double x);
// Gradient written into grad (size d).
void density_gradient(const StableParams& p, double t, std::span<const double> x,
                      std::span<double> grad);
double density_gradient_1d(const StableParams& p, double t, double x);
// p(t, x) through the direct quadrature path (oracle).
double density_direct(const StableParams& p, double t, std::span<const double> x);

// A(d,-alpha) |x - y|^{-d-alpha}.
double levy_intensity(const StableParams& p, std::span<const double> x, std::span<const double> y);
// nu({|z| >= rho}) = A omega_{d-1} rho^{-alpha} / alpha.
double levy_tail_mass(const StableParams& p, double rho);

// Delta^{alpha/2} f(x) by the symmetrized second-difference integral.
double fractional_laplacian(const StableParams& p, const TestFunction& f, std::span<const double> x);
double fractional_laplacian_1d(const StableParams& p, const TestFunction& f, double x);

// phi(t, x) = min(t^{-d/alpha}, t |x|^{-d-alpha}).
double comparison_function(const StableParams& p, double t, double r);

// max over the probes of max(p/phi, phi/p) on a log-spaced grid of
// r = |x| t^{-1/alpha} in [r_min, r_max] with n points.
double free_comparability_constant(const StableParams& p, double r_min, double r_max, int n);

}  // namespace sdrift::stable
