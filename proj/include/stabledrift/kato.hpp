#pragma once

// Drift fields b: R^d -> R^d and their Kato-class modulus
// M(r) = sup_x int_{B(x,r)} |b(y)| |x-y|^{alpha-1-d} dy.

#include "stabledrift/stable_core.hpp"

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrift::kato {

using Point = std::array<double, 3>;

enum class DriftKind { constant, sinusoidal, gaussian_bump, power_singularity, user_table, sum };

std::string kind_name(DriftKind k);

struct DriftComponent {
    DriftKind kind = DriftKind::constant;
    double weight = 1.0;          // scalar multiplier
    Point vec{};                  // constant value / direction of a bump
    double amplitude = 0.0;
    double frequency = 1.0;       // sinusoidal
    double phase = 0.0;
    double sigma = 1.0;           // gaussian_bump
    Point center{};               // gaussian_bump, power_singularity
    double gamma = 0.0;           // power_singularity exponent
    double reg_radius = 0.0;      // power_singularity cap radius (0 = exact singular field)
    std::vector<double> nodes;    // user_table (d = 1): nearest-node cells
    std::vector<double> values;
};

class DriftField {
public:
    DriftField() = default;
    explicit DriftField(int d) : d_(d) {}

    static DriftField zero(int d);
    static DriftField constant(int d, Point c);
    // b_i(x) = amp sin(freq x_i + phase)
    static DriftField sinusoidal(int d, double amp, double freq = 1.0, double phase = 0.0);
    // amp exp(-|x-c|^2 / (2 sigma^2)) e, e a unit direction (first axis by default)
    static DriftField gaussian_bump(int d, double amp, double sigma, Point center = {}, Point direction = {1, 0, 0});
    // amp |x-c|^{-gamma} (x-c)/|x-c|; capped at amp reg^{-gamma} inside |x-c| < reg when reg > 0
    static DriftField power_singularity(int d, double amp, double gamma, Point center = {}, double reg_radius = 0.0);
    // d = 1 piecewise constant: value[i] on the nearest-node cell of nodes[i]; 0 outside the table.
    static DriftField user_table(std::vector<double> nodes, std::vector<double> values);
    // Rows "x,b" (header allowed).
    static DriftField user_table_csv(const std::string& path);

    DriftField operator+(const DriftField& o) const;
    DriftField scaled(double c) const;
    // Same field with the cap radius of every singular component replaced.
    DriftField with_regularization(double radius) const;

    int d() const { return d_; }
    DriftKind kind() const;
    bool is_zero() const;
    const std::vector<DriftComponent>& components() const { return parts_; }

    void eval(std::span<const double> x, std::span<double> out) const;
    double eval_1d(double x) const;
    double magnitude(std::span<const double> x) const;

    std::optional<double> sup_bound() const;
    std::optional<double> support_radius() const;
    std::optional<double> singularity_exponent() const;
    // B_max and radius of the cap, when the field is regularized.
    std::optional<std::pair<double, double>> regularization() const;

    // Points where |b| attains its sup (declared by the families).
    std::vector<Point> extremal_points() const;
    // Points where b is not finite (exact power singularities).
    std::vector<Point> singular_points() const;
    // Discontinuity locations in d = 1 (table cell edges).
    std::vector<double> jump_points_1d() const;

    std::string describe() const;

private:
    int d_ = 1;
    std::vector<DriftComponent> parts_;
};

// Throws DomainError when a power singularity violates gamma < alpha - 1.
void check_admissible(const DriftField& b, const stable::StableParams& p);

struct KatoEstimate {
    double value = 0.0;
    Point argmax{};
    // A probe maximum is a lower bound on the true supremum over R^d.
    bool lower_bound = true;
    int evaluations = 0;
};

// Integral over the ball B(x, r) at one point x.
double kato_integral(const DriftField& b, const stable::StableParams& p, std::span<const double> x, double r);

KatoEstimate kato_modulus(const DriftField& b, const stable::StableParams& p, double r,
                          const std::vector<Point>& probes);

struct KatoModulusCurve {
    std::vector<double> radii;
    std::vector<double> modulus;
    double decay_fit = 0.0;       // beta in M(r) ~ C r^beta
    double fit_prefactor = 0.0;   // C
    bool fit_valid = false;       // false when some modulus is 0
    bool decaying = false;        // modulus(smallest) <= 0.05 modulus(largest)
    bool monotone = true;
    bool lower_bound = true;
};

KatoModulusCurve kato_check(const DriftField& b, const stable::StableParams& p, std::vector<double> radii,
                            const std::vector<Point>& probes);

// Default probe set: origin, unit points on each axis, and the field's declared points.
std::vector<Point> default_probes(const DriftField& b);

// sum over sphere directions of int_0^R |b(x + rho theta)| rho^{alpha-2} w(rho) drho,
// where w is bounded near 0. The rho^{alpha-2} factor is removed by u = rho^{alpha-1}.
// R may be +infinity (w must then be integrable against rho^{alpha-2}); the
// tail is summed over doubling panels. w_breaks lists radii where w has kinks.
double singular_shell_integral(const DriftField& b, const stable::StableParams& p, std::span<const double> x,
                               const std::function<double(double)>& w, double R, double rel_tol = 1e-9,
                               const std::vector<double>& w_breaks = {});

}  // namespace sdrift::kato
