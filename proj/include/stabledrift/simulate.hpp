#pragma once

// Monte Carlo for dX = dY + b(X) dt with Y the standard isotropic alpha-stable
// process (E e^{i xi.Y_t} = e^{-t|xi|^alpha}).

#include "stabledrift/functions.hpp"
#include "stabledrift/heat_kernel.hpp"
#include "stabledrift/kato.hpp"
#include "stabledrift/rng.hpp"
#include "stabledrift/stable_core.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdrift::sim {

using kato::Point;

// One increment with characteristic function exp(-dt |xi|^alpha). d = 1:
// Chambers-Mallows-Stuck, scale dt^{1/alpha}. d >= 2: sqrt(2 S) * N(0, I) with
// S one-sided alpha/2-stable, E e^{-u S} = e^{-dt u^{alpha/2}}.
void sample_stable_increment(const stable::StableParams& p, double dt, rng::Stream& s, std::span<double> out);
std::vector<double> sample_stable_increment(const stable::StableParams& p, double dt, rng::Stream& s);
// Positive a-stable variable with Laplace transform exp(-scale u^a), 0 < a < 1 (Kanter).
double sample_one_sided(double a, double scale, rng::Stream& s);

enum class Storage { full, final_only };

struct SimConfig {
    stable::StableParams params = stable::StableParams::make(1, 1.5);
    kato::DriftField field = kato::DriftField::zero(1);
    Point x0{};
    double dt = 0.01;
    double horizon = 1.0;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    // Increments with |dY| >= jump_threshold are logged; 0 selects 4 dt^{1/alpha}.
    double jump_threshold = 0.0;
    Storage storage = Storage::full;
    int threads = 1;
    // Substeps drawn per recorded step; the recorded increment is their sum
    // (used to couple a coarse scheme to a finer one).
    int substeps = 1;

    std::size_t steps() const;
    double threshold() const;
    void validate() const;
};

struct Jump {
    std::uint32_t step = 0;
    Point increment{};
};

// Columnar path storage. Path i occupies rows [offset(i), offset(i+1)) of the
// state and increment columns; every stored path has steps + 1 states and
// steps increments (final_only keeps only the last state).
struct PathSet {
    int d = 1;
    double dt = 0.0;
    std::size_t steps = 0;
    Storage storage = Storage::full;
    std::vector<double> states;       // row-major [path][k][axis]
    std::vector<double> increments;   // [path][k][axis], full storage only
    std::vector<double> finals;       // [path][axis]
    std::vector<std::uint64_t> jump_offsets;  // size n + 1
    std::vector<Jump> jumps;
    std::vector<std::uint8_t> failed;         // field evaluation failed mid-path
    std::vector<std::uint32_t> fallback_steps;  // kernel chain: steps taken by Euler
    double jump_threshold = 0.0;
    std::string method;

    std::size_t size() const { return failed.size(); }
    std::size_t failures() const;
    std::span<const double> state(std::size_t path, std::size_t k) const;
    std::span<const double> increment(std::size_t path, std::size_t k) const;
    std::span<const double> final_state(std::size_t path) const;
    std::span<const Jump> jump_log(std::size_t path) const;
    double time(std::size_t k) const { return dt * static_cast<double>(k); }
};

struct PathRecord {
    std::vector<double> times;
    std::vector<double> states;
    std::vector<double> increments;
    std::vector<Jump> jump_log;
    int d = 1;
};
PathRecord path_record(const PathSet& s, std::size_t path);

// X_{k+1} = (X_k + dY_k) + b(X_k) dt, one counter-based stream per path.
// Singular fields need a regularization radius (ConfigError otherwise).
PathSet euler_paths(const SimConfig& c);

// Z_k = X_k - X_0 - sum_{j<k} b(X_j) dt, k = 0..n (size (n + 1) d).
std::vector<double> reconstruct_noise(const PathRecord& path, const kato::DriftField& field);
// Per-step increments Z_{k+1} - Z_k for every stored path (rows of d).
std::vector<double> noise_increments(const PathSet& s, const kato::DriftField& field);

// d = 1 Markov chain with steps from the summed kernel row q^b(dt, x_i, .),
// x_i the box node nearest the state, by inverse CDF with linear interpolation;
// the mass outside the box is drawn from the free tail. States farther than
// edge_margin from the box boundary take an Euler step (counted).
struct ChainOptions {
    double edge_margin = 2.0;
    double max_row_error = 1e-2;
};
PathSet kernel_chain_paths(const heat::SeriesKernel& k, const SimConfig& c, const ChainOptions& o = {});

// T A omega rho^{-alpha} / alpha.
double levy_expected_count(const stable::StableParams& p, double rho, double T);

struct LevySystemReport {
    double rho = 0.0, T = 0.0;
    std::size_t n_paths = 0;
    double observed_mean = 0.0;
    double expected = 0.0;
    double std_error = 0.0;
    double z_score = 0.0;
    double dispersion = 0.0;          // sample variance / mean of per-path counts
    std::optional<double> extrapolated;  // 2 m(dt) - m(2 dt) when a coarse set is supplied
};
LevySystemReport levy_system_check(const PathSet& paths, const stable::StableParams& p, double rho, double T,
                                   const PathSet* coarse = nullptr);

struct EmpiricalResolvent {
    double value = 0.0;
    double std_error = 0.0;
    double truncation_bound = 0.0;  // e^{-lambda T} sup|g| / lambda
    std::size_t n_used = 0;
};
// Mean over paths of int_0^T e^{-lambda t} g(X_t) dt, with t -> g(X_t)
// interpolated linearly between stored steps and e^{-lambda t} integrated
// exactly. HorizonError (ConfigError) when tolerance is set and the
// truncation bound exceeds half of it.
EmpiricalResolvent empirical_resolvent(const PathSet& paths, double lambda, const TestFunction& g,
                                       std::optional<double> tolerance = {});

struct EmpiricalDensity {
    double lo = 0.0, hi = 0.0;
    std::vector<std::size_t> counts;
    std::size_t below = 0, above = 0;
    std::vector<double> sorted;  // samples, ascending
    std::size_t n_samples() const { return sorted.size(); }
    double cdf(double x) const;
    double bin_width() const { return (hi - lo) / static_cast<double>(counts.size()); }
};
EmpiricalDensity empirical_density(std::vector<double> samples, double lo, double hi, std::size_t bins);

// First axis of the final states of non-failed paths.
std::vector<double> final_values(const PathSet& s, int axis = 0);

// sup_x |F_n(x) - F(x)| for a continuous F.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);
double ks_two_sample(std::vector<double> a, std::vector<double> b);
// Asymptotic critical values at level 0.01.
double ks_critical_one(std::size_t n);
double ks_critical_two(std::size_t n, std::size_t m);

// (1/N) sum_j exp(i xi . x_j), samples as rows of d.
std::complex<double> empirical_cf(std::span<const double> samples, int d, std::span<const double> xi);
// d = 1 form (SIMD reduction).
std::complex<double> empirical_cf_1d(std::span<const double> samples, double xi);

struct CfCheck {
    std::vector<double> xi;         // frequency magnitudes probed (along the first axis in d > 1)
    std::vector<double> deviation;  // |phi_hat - exp(-dt |xi|^alpha)|
    double max_deviation = 0.0;
    double bound = 0.0;             // 3 / sqrt(N)
    std::size_t n = 0;
};
// xi grid: n_xi points spanning |xi| dt^{1/alpha} in [0.1, 3].
CfCheck cf_check(std::span<const double> samples, int d, double dt, double alpha, int n_xi = 20);

struct WeakErrorLadder {
    std::vector<double> dts;
    std::vector<double> means;        // E f(X_T) per level
    std::vector<double> diffs;        // means[l] - means[l+1], coupled
    std::vector<double> diff_errors;  // standard errors of diffs
    bool monotone = false;            // |diffs| strictly decreasing
};
// Levels dt, dt/2, ..., dt/2^levels driven by the same finest increments.
WeakErrorLadder weak_error_ladder(const SimConfig& c, const std::function<double(double)>& f, int levels);

// Columnar binary: magic "SDPATHS1", u32 version, u32 d, u64 n_paths,
// u64 steps, f64 dt, u32 storage, u32 reserved, u64 offsets[n + 1] (state
// rows), f64 states, f64 increments (full only), u8 failed[n].
void write_paths_binary(const PathSet& s, const std::string& path);
PathSet read_paths_binary(const std::string& path);
// path,t,x... rows (full storage) or path,x... (final only).
void write_paths_csv(const PathSet& s, const std::string& path, std::size_t max_paths = 100);

}  // namespace sdrift::sim
