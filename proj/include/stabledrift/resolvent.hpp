#pragma once

// The lambda-resolvent of the free process, r_lambda(x) = int_0^inf e^{-lambda t} p(t, x) dt,
// its gradient, the drift operator B f = b . grad f and the Neumann series
// sum_k R_lambda (B R_lambda)^k g.

#include "stabledrift/functions.hpp"
#include "stabledrift/kato.hpp"
#include "stabledrift/stable_core.hpp"

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrift::resolvent {

using kato::Point;

// Radial profile of r_1 and r_1' for one (d, alpha), from cubic B-splines of
// log r_1 and log |r_1'| on a uniform grid in log rho over [1e-5, 1e4].
// Outside the table: a two-term power law fitted to value and slope at the
// table end (rho^{alpha-d} + const near 0, rho^{-d-alpha} + rho^{-d-2alpha}
// at infinity).
class UnitProfile {
public:
    static constexpr double kRhoMin = 1e-5;
    static constexpr double kRhoMax = 1e4;
    static constexpr double kLogStep = 0.02;

    UnitProfile(int d, double alpha);
    ~UnitProfile();
    UnitProfile(const UnitProfile&) = delete;
    UnitProfile& operator=(const UnitProfile&) = delete;

    // r_1(rho); +infinity at rho = 0 when d > alpha.
    double value(double rho) const;
    // d/drho r_1(rho) (negative); requires rho > 0.
    double derivative(double rho) const;
    // r_1(0) when finite (d = 1).
    std::optional<double> at_zero() const;

private:
    struct Impl;
    int d_;
    double alpha_;
    Impl* impl_;
};

const UnitProfile& unit_profile(int d, double alpha);

// Time-integral quadrature of r_1 and r_1' at rho > 0 (table construction path).
double unit_value_quadrature(int d, double alpha, double rho);
double unit_derivative_quadrature(int d, double alpha, double rho);

class ResolventKernel {
public:
    ResolventKernel(const stable::StableParams& p, double lambda);

    double lambda() const { return lambda_; }
    const stable::StableParams& params() const { return p_; }

    // r_lambda at radius rho; +infinity at 0 when d > alpha.
    double radial(double rho) const;
    // d/drho r_lambda (negative), rho > 0.
    double radial_derivative(double rho) const;
    double value(std::span<const double> x) const;
    // grad r_lambda(x), x != 0.
    void gradient(std::span<const double> x, std::span<double> out) const;
    double gradient_1d(double x) const;

private:
    stable::StableParams p_;
    double lambda_;
    const UnitProfile* unit_;
    double value_scale_, deriv_scale_, arg_scale_;
};

inline bool is_infinite(double v) { return v == std::numeric_limits<double>::infinity(); }

double resolvent_kernel(const stable::StableParams& p, double lambda, std::span<const double> x);
void resolvent_gradient(const stable::StableParams& p, double lambda, std::span<const double> x,
                        std::span<double> out);
// int_0^inf e^{-lambda t} p(t, x) dt straight from density(): no scaling
// reduction and no cached table (oracle path).
double resolvent_direct(const stable::StableParams& p, double lambda, double rho);

// R_lambda g(x) by adaptive quadrature along rays from x.
double apply_resolvent(const ResolventKernel& k, const TestFunction& g, std::span<const double> x);
// grad R_lambda g(x) = int grad r_lambda(x - y) g(y) dy.
void apply_resolvent_gradient(const ResolventKernel& k, const TestFunction& g, std::span<const double> x,
                              std::span<double> out);

using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;
// b(x) . grad f(x); DomainError at a singular point of b.
double drift_apply(const kato::DriftField& b, const GradientFn& grad_f, std::span<const double> x);

// int |grad r_lambda(x - y)| |b(y)| dy at one x.
double gradient_drift_integral(const kato::DriftField& b, const ResolventKernel& k, std::span<const double> x);
// sup over probes (plus extremal points of b, refined by pattern search).
double gradient_drift_sup(const kato::DriftField& b, const ResolventKernel& k, const std::vector<Point>& probes);

struct Lambda0Report {
    double lambda0 = 0.0;
    std::vector<double> lambdas;    // grid points evaluated
    std::vector<double> integrals;  // sup_x int |grad r_lambda| |b| at those points
};
// Smallest grid lambda with gradient_drift_sup <= 1/2. The integral is
// decreasing in lambda, so the grid is bisected. ConvergenceError when even
// the largest grid value fails.
Lambda0Report lambda0_estimate(const kato::DriftField& b, const stable::StableParams& p,
                               const std::vector<double>& lambda_grid, const std::vector<Point>& probes = {});
// Geometric grid lo * ratio^k up to hi.
std::vector<double> geometric_grid(double lo, double hi, double ratio);

// sup over probes of R_lambda |b|(x) to relative 1e-6: finiteness diagnostic
// run before Monte Carlo.
double abs_drift_resolvent(const kato::DriftField& b, const ResolventKernel& k, const std::vector<Point>& probes = {});

struct GradientKatoReport {
    std::vector<double> ts;
    std::vector<double> lhs;       // sup_x int min(|z|^{-(d+1-alpha)}, t^2 |z|^{-(d+1+alpha)}) |b(x-z)| dz
    std::vector<double> modulus;   // M(t^{1/alpha})
    std::vector<double> ratio;     // lhs / modulus
    double constant = 0.0;         // max ratio
};
GradientKatoReport gradient_kato_constant(const kato::DriftField& b, const stable::StableParams& p,
                                          const std::vector<double>& ts, const std::vector<Point>& probes = {});

struct NeumannOptions {
    int max_terms = 20;
    double h = 0.025;
    // Grid = support of g padded by this much on each side.
    double padding = 20.0;
    // Stop once a term's sup-norm falls below this fraction of term 0.
    double stop_fraction = 1e-13;
    // Ratio above which the series is declared non-contracting.
    double violation_ratio = 0.9;
    // When set, lambda must exceed it.
    std::optional<double> lambda0;
};

struct NeumannSeriesState {
    double lambda = 0.0;
    std::optional<double> lambda0;
    std::vector<Point> probes;
    std::vector<std::vector<double>> terms;  // [k][probe]: R (B R)^k g at the probe
    std::vector<double> values;              // partial sums at the probes
    std::vector<double> term_sup;            // sup over the grid of R (B R)^k g
    std::vector<double> term_ratio;          // term_sup[k+1] / term_sup[k]
    double contraction_factor = 0.0;         // max_k sup|B R f_k| / sup|f_k|
    std::vector<double> remainder_bound;     // per probe
    // Grid used for the compositions.
    double grid_origin = 0.0, grid_h = 0.0;
    std::size_t grid_nodes = 0;
};

// d = 1 only: compositions are grid convolutions with hat-function weights.
NeumannSeriesState neumann_resolvent(const kato::DriftField& b, const stable::StableParams& p, double lambda,
                                     const TestFunction& g, const std::vector<Point>& probes,
                                     const NeumannOptions& opts = {});

// Rows k, term_sup, then the partial sum at each probe.
void write_neumann_trace_csv(const NeumannSeriesState& s, const std::string& path);

}  // namespace sdrift::resolvent
