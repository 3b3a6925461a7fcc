#pragma once

// Perturbation series q^b = sum_k q_k for the drifted fractional Laplacian,
//   q_0 = p,  q_k(t,x,y) = int_0^t int q_{k-1}(s,x,z) b(z).grad_z p(t-s,z,y) dz ds.
//
// For a fixed source x, v_k = q_k(., x, .) solves the forward equation
//   d/dt v_k = Lap^{alpha/2} v_k - div(b v_{k-1}),  v_k(0) = 0  (k >= 1),
// which is integrated for all orders at once on a periodic FFT grid with
// exponential time stepping: the free semigroup is applied exactly in
// Fourier space and only the source term is interpolated in time. Order 0 is
// stored as the exact density. Tables hold box targets [-L, L]^d for a set
// of source nodes (a few probes, or every box node for compositions).

#include "stabledrift/functions.hpp"
#include "stabledrift/kato.hpp"
#include "stabledrift/stable_core.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrift::heat {

using kato::Point;

struct GridSpec {
    int d = 1;
    double L = 10.0;
    double h = 0.05;
    double horizon = 1.0;
    // Stored slices at multiples of slice_dt (plus extra_times).
    double slice_dt = 0.025;
    std::vector<double> extra_times;
    // Declared bound on the free tail mass outside the box at the horizon;
    // when unset the measured value is recorded.
    std::optional<double> tail_bound;
    // FFT nodes per axis; 0 picks a power of two well above the box size.
    int internal_n = 0;
    // Uniform internal time step, preceded by a start mesh graded as
    // tau0 (j/J)^3 on [0, tau0].
    double dt = 1.0 / 160.0;
    double graded_until = 0.0125;
    int graded_steps = 20;
};

struct SpaceTimeGrid {
    int d = 1;
    double L = 10.0, h = 0.05;
    int n_side = 0;                    // box nodes per axis
    std::vector<double> times;         // stored slices
    double tail_bound = 0.0;
    GridSpec spec;
    int internal_n = 0;
    double period = 0.0;
    std::vector<double> steps;         // internal mesh, steps[0] = 0
    std::vector<std::size_t> slice_step;  // index into steps per slice

    std::size_t nodes() const;
    Point node(std::size_t i) const;
    // Nearest box node to x.
    std::size_t nearest_node(const Point& x) const;
    // Slice index of t (within 1e-12), or nullopt.
    std::optional<std::size_t> find_slice(double t) const;
    std::size_t slice(double t) const;  // throws DomainError when absent
    double horizon() const { return times.back(); }
    // Trapezoid weight of box node i.
    double weight(std::size_t i) const;
};

SpaceTimeGrid make_grid(const stable::StableParams& p, const GridSpec& spec);

// P(x + Y_t leaves [-L, L]^d) for x = 0 (exact in d = 1, ball bound in d = 2).
double free_tail_mass(const stable::StableParams& p, double t, double L);

struct KernelTable {
    int order = 0;
    std::vector<double> times;
    std::vector<std::size_t> sources;  // box node indices
    std::size_t n_targets = 0;
    std::vector<double> values;        // [time][source][target]
    std::vector<double> sup_norm;      // per time slice

    double at(std::size_t ti, std::size_t si, std::size_t yi) const {
        return values[(ti * sources.size() + si) * n_targets + yi];
    }
    std::span<const double> row(std::size_t ti, std::size_t si) const {
        return {values.data() + (ti * sources.size() + si) * n_targets, n_targets};
    }
    std::span<double> row(std::size_t ti, std::size_t si) {
        return {values.data() + (ti * sources.size() + si) * n_targets, n_targets};
    }
    std::optional<std::size_t> source_slot(std::size_t node) const;
    void update_sup_norms();
};

struct SeriesOptions {
    int max_order = 24;
    double ratio_threshold = 0.5;
    // Relative remainder below which summation stops once the ratio test holds.
    double tail_tolerance = 1e-9;
    // When > 0, sum exactly orders 0..fixed_order (no stopping rule).
    int fixed_order = 0;
    // Probe sources (snapped to box nodes); empty selects default_probes().
    std::vector<Point> probes;
    // Materialize every box node as a source (needed for compositions).
    bool full_table = false;
    // Orders 0..store_orders are kept as separate tables.
    int store_orders = 1;
    int threads = 1;
};

std::vector<Point> default_probes(const SpaceTimeGrid& g);

struct SeriesKernel {
    stable::StableParams params;
    kato::DriftField field;
    SpaceTimeGrid grid;
    KernelTable sum;
    std::vector<KernelTable> terms;          // orders 0..store_orders
    std::vector<std::vector<double>> norms;  // [order][slice], sup over sources and targets
    std::vector<double> decay_ratio;         // per slice: max_k norms[k+1]/norms[k], k < orders
    std::vector<double> tail_bound;          // per slice: geometric remainder bound
    std::vector<double> row_sum_error;       // per slice: max_x |int q dy - 1| over interior sources
    std::vector<double> outside_mass;        // [slice][source], see row_sum()
    std::vector<char> certified;             // per slice
    int orders = 0;                          // highest order summed
    bool stopped_by_rule = false;            // false when max_order was reached
    double t0_estimate = 0.0;
    std::size_t t0_slice = 0;
    double theta = 0.5;

    bool full_table() const { return sum.sources.size() == grid.nodes(); }
};

// q_k from the order k-1 table: same sources and slices, field b.
KernelTable perturbation_term(const stable::StableParams& p, const KernelTable& prev,
                              const kato::DriftField& b, const SpaceTimeGrid& g);

SeriesKernel series_sum(const stable::StableParams& p, const kato::DriftField& b,
                        const SpaceTimeGrid& g, const SeriesOptions& opts = {});

// int q(x, .) dy: box trapezoid, plus the mass between the box and the outer
// cube [-P/4, P/4]^d from the internal grid, plus the analytic free tail
// beyond it.
double row_sum(const SeriesKernel& k, std::size_t ti, std::size_t si);

// A(x,y) = int A1(x,z) A2(z,y) dz for full tables (source-major rows).
std::vector<double> compose(const SeriesKernel& k, std::span<const double> a, double ta,
                            std::span<const double> b, double tb);

// q^b(t, ., .) for t <= depth * t0 by balanced binary compositions of
// a certified slice tau = t / n.
KernelTable extend_semigroup(const SeriesKernel& k, double t, int max_depth = 16);

struct CompositionCheck {
    double residual = 0.0;  // max |A - B| / max |B| on interior pairs
    double s = 0.0, t = 0.0;
};
// Table slice at s + t versus composition of slices s and t.
CompositionCheck chapman_kolmogorov(const SeriesKernel& k, double s, double t);
// q(t0) o q(t0) versus q(a) o [q(t0 - a) o q(t0)], a the slice nearest t0/2.
CompositionCheck extension_consistency(const SeriesKernel& k);

struct ComparabilityReport {
    double c_hat = 0.0;
    double min_value = 0.0;
    double t = 0.0;
    Point x{}, y{};
};
ComparabilityReport comparability_check(const SeriesKernel& k, const stable::StableParams& p);

struct GeneratorReport {
    std::vector<double> ts, a_t;
    double limit = 0.0;       // extrapolated t -> 0
    double predicted = 0.0;   // int (Lap f + b.grad f) g
    double free_part = 0.0;   // int (Lap f) g
    double drift_part = 0.0;  // int (b.grad f) g
    double limit_error = 0.0;
    bool inconclusive = false;
};
GeneratorReport generator_check(const SeriesKernel& k, const kato::DriftField& b, const TestFunction& f,
                                const TestFunction& g, int n_times = 4);

struct DuhamelReport {
    double max_residual = 0.0;         // sup_t max|R| / max|q| over probes
    std::vector<double> per_slice;
    double t = 0.0;
};
// Re-evaluates the Duhamel integral with the summed kernel and an
// independent (exponential Simpson) time rule on the probe sources.
DuhamelReport duhamel_residual(const SeriesKernel& k, const kato::DriftField& b, const SpaceTimeGrid& g,
                               std::size_t max_sources = 3);

void write_binary(const KernelTable& t, const SpaceTimeGrid& g, double alpha, const std::string& path);
KernelTable read_binary(const std::string& path, SpaceTimeGrid* grid_out = nullptr, double* alpha_out = nullptr);
void write_csv(const KernelTable& t, const SpaceTimeGrid& g, const std::string& path);

}  // namespace sdrift::heat
