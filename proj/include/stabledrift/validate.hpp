#pragma once

// Cross-checks between independent constructions of the drifted kernel and
// its resolvent, collected into machine-checkable reports.

#include "stabledrift/functions.hpp"
#include "stabledrift/heat_kernel.hpp"
#include "stabledrift/kato.hpp"
#include "stabledrift/resolvent.hpp"
#include "stabledrift/simulate.hpp"
#include "stabledrift/stable_core.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sdrift::validate {

inline constexpr int kSchemaVersion = 1;

struct CheckRecord {
    std::string name;
    double measured = 0.0;
    double tolerance = 0.0;
    // "<=": measured <= tolerance; ">=": measured >= tolerance.
    std::string relation = "<=";
    bool passed = false;
    double runtime_s = 0.0;
    std::string detail;
};

struct Provenance {
    std::string config_hash;
    std::uint64_t seed = 0;
};

struct ValidationReport {
    std::string suite;
    std::vector<CheckRecord> records;
    std::map<std::string, double> constants;
    std::vector<std::string> notes;
    Provenance provenance;

    bool passed() const;
    std::size_t failures() const;
    const CheckRecord* find(const std::string& name) const;
    // Appends a record; the verdict is computed from relation.
    CheckRecord& add(std::string name, double measured, double tolerance, std::string relation = "<=",
                     std::string detail = {}, double runtime_s = 0.0);
};

// Runs fn and appends its record with the elapsed time. Numerical errors
// thrown by fn are rethrown with the check name prefixed.
void timed_check(ValidationReport& r, const std::string& name, const std::function<CheckRecord()>& fn);

std::string to_json_string(const ValidationReport& r);
ValidationReport from_json_string(const std::string& s);
void write_json(const ValidationReport& r, const std::string& path);
std::string render_text(const ValidationReport& r);
void write_text(const ValidationReport& r, const std::string& path);

struct IdentityConfig {
    stable::StableParams params = stable::StableParams::make(1, 1.5);
    heat::GridSpec grid;  // L = 10, h = 0.05 by default; horizon 0.5 here
    double row_sum_tol = 1e-3;
    double ck_tol = 5e-3;
    double duhamel_tol = 1e-3;
    double generator_rel_tol = 2e-2;
    double comparability_max = 1e6;
    double oracle_tol = 1e-3;  // translation oracle, constant drifts only
    TestFunction f = bump(1, 2.0), g = bump(1, 2.5);
    // Test mode: one negative cell is written into the summed kernel before the checks.
    bool inject_negative_cell = false;
    int threads = 1;
    Provenance provenance;

    IdentityConfig() { grid.horizon = 0.5; }
};

// Normalization, positivity, Chapman-Kolmogorov (plus one extension step),
// Duhamel residual, comparability and the generator weak limit on one
// kernel. Throws the first hard numerical failure with the check named.
ValidationReport run_identity_suite(const kato::DriftField& b, const IdentityConfig& c);
// Variant on a kernel that was already built (d = 1 full table).
ValidationReport run_identity_suite(heat::SeriesKernel k, const IdentityConfig& c);

struct ComparabilityFit {
    std::vector<double> ts, ratio;  // sup over interior pairs of max(q/p, p/q)
    double C2 = 0.0, C3 = 0.0;      // ratio(t) <= C2 e^{C3 t}
};
ComparabilityFit fit_comparability(const heat::SeriesKernel& k);

// int_0^T e^{-lambda t} int q(t, x, y) g(y) dy dt from a d = 1 full table:
// slices up to the certified T0 directly, later times by propagating
// Q(tau) g with the largest certified slice tau. Exponential trapezoid in t
// with one Richardson step; error = Richardson difference + truncation.
struct KernelLaplace {
    double value = 0.0;
    double error = 0.0;
    double truncation = 0.0;
    double horizon = 0.0;
};
KernelLaplace kernel_laplace(const heat::SeriesKernel& k, double x, const TestFunction& g, double lambda,
                             double tol);

struct CrossConfig {
    stable::StableParams params = stable::StableParams::make(1, 1.5);
    // Unset: 2 lambda0 (at least lambda_min).
    std::optional<double> lambda;
    double lambda_min = 1.0;
    double lambda_grid_ratio = 1.02;
    std::vector<TestFunction> functions;  // empty: bump(1,1), gaussian(0.5) at 0.5, odd_bump(1,1.5)
    std::vector<double> probes = {0.0, 0.5, -1.0};
    heat::GridSpec grid;                  // horizon 0.5, slice_dt 0.025
    resolvent::NeumannOptions neumann;
    double euler_dt = 0.005;
    std::size_t euler_paths = 20000;
    double chain_dt = 0.025;
    std::size_t chain_paths = 20000;
    double deterministic_tol = 2e-3;
    double n_sigma = 3.0;
    std::uint64_t seed = 1;
    int threads = 1;
    Provenance provenance;

    CrossConfig() { grid.horizon = 0.5; }
};

// (a) kernel Laplace transform, (b) Neumann series, (c) Euler Monte Carlo,
// (d) kernel-chain Monte Carlo, for every (g, x); every pair is one record
// with tolerance n_sigma * combined standard error + deterministic_tol.
ValidationReport cross_validate(const kato::DriftField& b, const CrossConfig& c);
ValidationReport cross_validate(const kato::DriftField& b, const CrossConfig& c, const heat::SeriesKernel& k);

struct NoiseConfig {
    double dt = 0.025;  // chain step; 2 dt must also be a certified slice
    double horizon = 1.0;
    std::size_t n_paths = 20000;
    double x0 = 0.0;
    std::uint64_t seed = 1;
    int threads = 1;
    Provenance provenance;
};

// Reconstructed noise from kernel-chain paths: increment CF against
// exp(-dt|xi|^alpha) at 3/sqrt(N) plus the dt-bias estimated from the 2 dt
// run, and lag-1 factorization of the joint CF.
ValidationReport noise_uniqueness_probe(const heat::SeriesKernel& k, const NoiseConfig& c);

}  // namespace sdrift::validate
