#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <vector>

namespace sdrift::quad {

// 20-point Gauss-Legendre on [a, b].
double gauss20(const std::function<double(double)>& f, double a, double b);

// Sum of gauss20 over n equal panels.
double gauss20_panels(const std::function<double(double)>& f, double a, double b, int n);

// Double-exponential rule on [a, b]; tolerates integrable endpoint
// singularities. Throws AccuracyError when the error estimate exceeds
// max(abs_tol, rel_tol * |result|).
double tanh_sinh(const std::function<double(double)>& f, double a, double b,
                 double rel_tol = 1e-10, double abs_tol = 1e-300);

// Integral over [a, inf).
double exp_sinh(const std::function<double(double)>& f, double a, double rel_tol = 1e-10,
                double abs_tol = 1e-300);

// Adaptive Gauss-Kronrod (61 points) for smooth integrands on [a, b].
double kronrod(const std::function<double(double)>& f, double a, double b, double rel_tol = 1e-11,
               int max_depth = 15);

// int_0^R rho^(beta-1) h(rho) drho through u = rho^beta, which turns an
// algebraic endpoint singularity into a bounded integrand.
double power_substituted(const std::function<double(double)>& h, double beta, double R,
                         double rel_tol = 1e-10);

// Quadrature on the unit sphere of R^d (d = 1, 2, 3). Weights sum to the
// surface area; directions come in antipodal pairs.
struct SphereRule {
    int d = 1;
    std::vector<std::array<double, 3>> dirs;
    std::vector<double> weights;
};
SphereRule sphere_rule(int d, int resolution = 32);

// Gauss-Legendre nodes/weights on [-1, 1] (Golub-Welsch free, Newton on P_n).
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

}  // namespace sdrift::quad
