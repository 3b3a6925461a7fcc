#pragma once

// Smooth test functions used as inputs to the fractional Laplacian, the
// resolvent and the generator checks.

#include <array>
#include <functional>
#include <limits>
#include <span>
#include <string>

namespace sdrift {

struct TestFunction {
    std::string name;
    int d = 1;
    std::function<double(std::span<const double>)> value;
    // Writes grad f(x) into g (size d).
    std::function<void(std::span<const double>, std::span<double>)> gradient;
    std::array<double, 3> center{0.0, 0.0, 0.0};
    // f vanishes outside the ball of this radius around center (infinity if not compact).
    double support_radius = std::numeric_limits<double>::infinity();
    // Radius beyond which |f| < 1e-17 * sup|f|; equals support_radius for compact f.
    double effective_radius = std::numeric_limits<double>::infinity();

    double operator()(std::span<const double> x) const { return value(x); }
    double operator()(double x) const { return value(std::span<const double>(&x, 1)); }
};

// amp * exp(1 - 1/(1 - |x-c|^2/R^2)) inside the ball, 0 outside (peak value amp).
TestFunction bump(int d, double radius, double amp = 1.0, std::array<double, 3> center = {});
// amp * exp(-|x-c|^2 / (2 sigma^2)).
TestFunction gaussian(int d, double sigma, double amp = 1.0, std::array<double, 3> center = {});
// (x_1 - c_1) / R * bump(x): odd about the center along the first axis.
TestFunction odd_bump(int d, double radius, double amp = 1.0, std::array<double, 3> center = {});
TestFunction constant_function(int d, double value);
// a*f + b*g
TestFunction linear_combination(double a, const TestFunction& f, double b, const TestFunction& g);
// f(x / lambda)
TestFunction dilate(const TestFunction& f, double lambda);

// max |f| over a lattice on the support ball (on the effective radius, or
// radius 10, when f is not compact).
double sup_scan(const TestFunction& f);

// Parse "bump:R", "bump:R:amp:c", "gaussian:sigma", "odd_bump:R", "const:v".
TestFunction parse_test_function(const std::string& spec, int d);

}  // namespace sdrift
