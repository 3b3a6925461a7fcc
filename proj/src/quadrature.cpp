#include "stabledrift/quadrature.hpp"

#include "stabledrift/errors.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace sdrift::quad {

double gauss20(const std::function<double(double)>& f, double a, double b) {
    return boost::math::quadrature::gauss<double, 20>::integrate(f, a, b);
}

double gauss20_panels(const std::function<double(double)>& f, double a, double b, int n) {
    const double w = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += gauss20(f, a + i * w, a + (i + 1) * w);
    return s;
}

namespace {
void check_error(const char* rule, double result, double err, double rel_tol, double abs_tol,
                 double a, double b) {
    if (!std::isfinite(result) || err > std::max(abs_tol, rel_tol * std::fabs(result)) * 100.0) {
        std::ostringstream os;
        os << rule << " quadrature on [" << a << ", " << b << "] did not converge: result "
           << result << ", error estimate " << err;
        throw AccuracyError(os.str());
    }
}
}  // namespace

double tanh_sinh(const std::function<double(double)>& f, double a, double b, double rel_tol,
                 double abs_tol) {
    thread_local boost::math::quadrature::tanh_sinh<double> rule(12);
    double err = 0.0, l1 = 0.0;
    const double r = rule.integrate(f, a, b, rel_tol, &err, &l1);
    check_error("tanh-sinh", r, err, rel_tol, std::max(abs_tol, 1e-15 * l1), a, b);
    return r;
}

double exp_sinh(const std::function<double(double)>& f, double a, double rel_tol, double abs_tol) {
    thread_local boost::math::quadrature::exp_sinh<double> rule(12);
    double err = 0.0, l1 = 0.0;
    const double r = rule.integrate(f, a, std::numeric_limits<double>::infinity(), rel_tol, &err, &l1);
    check_error("exp-sinh", r, err, rel_tol, std::max(abs_tol, 1e-15 * l1), a, HUGE_VAL);
    return r;
}

double kronrod(const std::function<double(double)>& f, double a, double b, double rel_tol,
               int max_depth) {
    double err = 0.0, l1 = 0.0;
    const double r = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, a, b, static_cast<unsigned>(max_depth), rel_tol, &err, &l1);
    check_error("Gauss-Kronrod", r, err, rel_tol, 1e-15 * l1, a, b);
    return r;
}

double power_substituted(const std::function<double(double)>& h, double beta, double R,
                         double rel_tol) {
    if (R <= 0.0) return 0.0;
    const double inv = 1.0 / beta;
    auto g = [&](double u) { return h(std::pow(u, inv)); };
    return tanh_sinh(g, 0.0, std::pow(R, beta), rel_tol) * inv;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(n, 0.0);
    weights.assign(n, 0.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p1 = x, p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-16) break;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

SphereRule sphere_rule(int d, int resolution) {
    SphereRule s;
    s.d = d;
    if (d == 1) {
        s.dirs = {{1.0, 0.0, 0.0}, {-1.0, 0.0, 0.0}};
        s.weights = {1.0, 1.0};
    } else if (d == 2) {
        const int n = 2 * resolution;
        for (int i = 0; i < n; ++i) {
            const double th = 2.0 * std::numbers::pi * (i + 0.5) / n;
            s.dirs.push_back({std::cos(th), std::sin(th), 0.0});
            s.weights.push_back(2.0 * std::numbers::pi / n);
        }
    } else if (d == 3) {
        std::vector<double> z, wz;
        gauss_legendre(resolution, z, wz);
        const int nphi = 2 * resolution;
        for (int i = 0; i < resolution; ++i) {
            const double sr = std::sqrt(1.0 - z[i] * z[i]);
            for (int j = 0; j < nphi; ++j) {
                const double ph = 2.0 * std::numbers::pi * (j + 0.5) / nphi;
                s.dirs.push_back({sr * std::cos(ph), sr * std::sin(ph), z[i]});
                s.weights.push_back(wz[i] * 2.0 * std::numbers::pi / nphi);
            }
        }
    } else {
        throw DomainError("sphere quadrature supports d = 1, 2, 3");
    }
    return s;
}

}  // namespace sdrift::quad
