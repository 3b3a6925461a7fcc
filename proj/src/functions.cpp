#include "stabledrift/functions.hpp"

#include "stabledrift/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace sdrift {
namespace {

double dist2(std::span<const double> x, const std::array<double, 3>& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - c[i]) * (x[i] - c[i]);
    return s;
}

}  // namespace

TestFunction bump(int d, double radius, double amp, std::array<double, 3> center) {
    TestFunction f;
    f.name = "bump";
    f.d = d;
    f.center = center;
    f.support_radius = f.effective_radius = radius;
    const double r2inv = 1.0 / (radius * radius);
    f.value = [=](std::span<const double> x) {
        const double u = dist2(x, center) * r2inv;
        if (u >= 1.0) return 0.0;
        return amp * std::exp(1.0 - 1.0 / (1.0 - u));
    };
    f.gradient = [=](std::span<const double> x, std::span<double> g) {
        const double u = dist2(x, center) * r2inv;
        if (u >= 1.0) {
            for (auto& v : g) v = 0.0;
            return;
        }
        const double w = 1.0 - u;
        const double e = amp * std::exp(1.0 - 1.0 / w);
        // d/dx_i exp(1 - 1/w) = exp(.) * (-1/w^2) * 2 (x_i - c_i) / R^2
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -e * 2.0 * (x[i] - center[i]) * r2inv / (w * w);
    };
    return f;
}

TestFunction gaussian(int d, double sigma, double amp, std::array<double, 3> center) {
    TestFunction f;
    f.name = "gaussian";
    f.d = d;
    f.center = center;
    f.effective_radius = sigma * std::sqrt(2.0 * 39.2);
    const double k = 0.5 / (sigma * sigma);
    f.value = [=](std::span<const double> x) { return amp * std::exp(-k * dist2(x, center)); };
    f.gradient = [=](std::span<const double> x, std::span<double> g) {
        const double e = amp * std::exp(-k * dist2(x, center));
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = -2.0 * k * (x[i] - center[i]) * e;
    };
    return f;
}

TestFunction odd_bump(int d, double radius, double amp, std::array<double, 3> center) {
    TestFunction b = bump(d, radius, amp, center);
    TestFunction f = b;
    f.name = "odd_bump";
    const double inv = 1.0 / radius;
    f.value = [=](std::span<const double> x) { return (x[0] - center[0]) * inv * b.value(x); };
    f.gradient = [=](std::span<const double> x, std::span<double> g) {
        b.gradient(x, g);
        const double v = b.value(x);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] *= (x[0] - center[0]) * inv;
        g[0] += inv * v;
    };
    return f;
}

TestFunction constant_function(int d, double value) {
    TestFunction f;
    f.name = "const";
    f.d = d;
    f.value = [=](std::span<const double>) { return value; };
    f.gradient = [](std::span<const double>, std::span<double> g) {
        for (auto& v : g) v = 0.0;
    };
    return f;
}

TestFunction linear_combination(double a, const TestFunction& f, double b, const TestFunction& g) {
    TestFunction h;
    h.name = "combination";
    h.d = f.d;
    h.center = f.center;
    h.support_radius = std::max(f.support_radius, g.support_radius);
    h.effective_radius = std::max(f.effective_radius, g.effective_radius);
    h.value = [=](std::span<const double> x) { return a * f.value(x) + b * g.value(x); };
    h.gradient = [=](std::span<const double> x, std::span<double> out) {
        std::vector<double> tmp(out.size());
        f.gradient(x, out);
        g.gradient(x, tmp);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * out[i] + b * tmp[i];
    };
    return h;
}

TestFunction dilate(const TestFunction& f, double lambda) {
    TestFunction h = f;
    h.name = f.name + "_dilated";
    for (auto& c : h.center) c *= lambda;
    h.support_radius = f.support_radius * lambda;
    h.effective_radius = f.effective_radius * lambda;
    h.value = [=](std::span<const double> x) {
        std::array<double, 3> y{};
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / lambda;
        return f.value(std::span<const double>(y.data(), x.size()));
    };
    h.gradient = [=](std::span<const double> x, std::span<double> g) {
        std::array<double, 3> y{};
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] / lambda;
        f.gradient(std::span<const double>(y.data(), x.size()), g);
        for (auto& v : g) v /= lambda;
    };
    return h;
}

TestFunction parse_test_function(const std::string& spec, int d) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    if (parts.empty()) throw ConfigError("empty test-function spec");
    auto num = [&](std::size_t i, double def) {
        if (i >= parts.size()) return def;
        try {
            return std::stod(parts[i]);
        } catch (const std::exception&) {
            throw ConfigError("test function '" + spec + "': '" + parts[i] + "' is not a number");
        }
    };
    const std::array<double, 3> c{num(3, 0.0), 0.0, 0.0};
    const std::string& kind = parts[0];
    if (kind == "bump") return bump(d, num(1, 1.0), num(2, 1.0), c);
    if (kind == "gaussian") return gaussian(d, num(1, 1.0), num(2, 1.0), c);
    if (kind == "odd_bump") return odd_bump(d, num(1, 1.0), num(2, 1.0), c);
    if (kind == "const") return constant_function(d, num(1, 1.0));
    throw ConfigError("unknown test function kind '" + kind + "'");
}

double sup_scan(const TestFunction& g) {
    const double R = std::isfinite(g.support_radius) ? g.support_radius
                     : std::isfinite(g.effective_radius) ? g.effective_radius
                                                       : 10.0;
    const int n = g.d == 1 ? 4001 : g.d == 2 ? 201 : 41;
    double best = std::fabs(g(std::span<const double>(g.center.data(), g.d)));
    std::vector<double> x(g.d);
    std::vector<int> idx(g.d, 0);
    for (;;) {
        for (int a = 0; a < g.d; ++a) x[a] = g.center[a] - R + 2.0 * R * idx[a] / (n - 1);
        best = std::max(best, std::fabs(g(std::span<const double>(x))));
        int a = 0;
        while (a < g.d && ++idx[a] == n) idx[a++] = 0;
        if (a == g.d) break;
    }
    return best;
}

}  // namespace sdrift
