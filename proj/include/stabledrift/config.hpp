#pragma once

// Run configuration: INI-style "key = value" sections, every field defaulted.
//
//   [model]     d, alpha
//   [drift]     kind = zero | constant | sin | gaussian_bump | power | table
//               value (constant, d comma-separated entries), amplitude,
//               frequency, phase, sigma, center, direction, gamma,
//               reg_radius, table (CSV path, d = 1)
//   [grid]      L, h, horizon, slice_dt, dt
//   [series]    max_order, ratio_threshold, tail_tolerance, fixed_order
//   [density]   t, points | (x_min, x_max, n_points)
//   [resolvent] lambda (0: 2 lambda0), g, probes, max_terms, lambda0_scan
//   [simulate]  method = euler | chain, dt, horizon, n_paths, x0, storage,
//               jump_threshold, csv_paths, levy_rho
//   [validate]  suites, inject_failure, lambda, euler_dt, euler_paths,
//               chain_dt, chain_paths, noise_paths
//   [run]       seed, threads
//
// Flags given on the command line are applied on top of the file.

#include "stabledrift/heat_kernel.hpp"
#include "stabledrift/kato.hpp"
#include "stabledrift/stable_core.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sdrift::cli {

struct DriftSpec {
    std::string kind = "zero";
    std::vector<double> value = {0.0};
    double amplitude = 0.5;
    double frequency = 1.0;
    double phase = 0.0;
    double sigma = 1.0;
    std::vector<double> center = {0.0};
    std::vector<double> direction = {1.0};
    double gamma = 0.25;
    double reg_radius = 0.0;
    std::string table;
};

struct DensitySpec {
    double t = 1.0;
    std::vector<double> points;  // empty: x_min..x_max
    double x_min = -5.0, x_max = 5.0;
    int n_points = 101;
};

struct ResolventSpec {
    double lambda = 0.0;
    std::string g = "bump:1";
    std::vector<double> probes = {0.0, 0.5, -1.0};
    int max_terms = 20;
    std::vector<double> lambda0_scan;  // constant drifts c e_1 tabulated with lambda0
};

struct SimulateSpec {
    std::string method = "euler";
    double dt = 0.01;
    double horizon = 1.0;
    std::size_t n_paths = 10000;
    std::vector<double> x0 = {0.0};
    std::string storage = "full";
    double jump_threshold = 0.0;
    std::size_t csv_paths = 20;
    std::vector<double> levy_rho = {1.0};
};

struct ValidateSpec {
    std::vector<std::string> suites = {"identity"};
    bool inject_failure = false;
    double lambda = 0.0;
    double euler_dt = 0.005;
    std::size_t euler_paths = 20000;
    double chain_dt = 0.025;
    std::size_t chain_paths = 20000;
    std::size_t noise_paths = 20000;
};

struct RunConfig {
    int d = 1;
    double alpha = 1.5;
    DriftSpec drift;
    heat::GridSpec grid;
    int max_order = 24;
    double ratio_threshold = 0.5;
    double tail_tolerance = 1e-9;
    int fixed_order = 0;
    DensitySpec density;
    ResolventSpec resolvent;
    SimulateSpec simulate;
    ValidateSpec validate;
    std::uint64_t seed = 1;
    int threads = 1;

    stable::StableParams params() const;
    kato::DriftField field() const;
    heat::SeriesOptions series_options() const;
};

// "section.key=value" overrides are applied before conversion. Errors
// (ConfigError) name the field and, for file values, the line.
RunConfig parse_config_text(const std::string& text, const std::vector<std::string>& overrides = {},
                            const std::string& origin = "<config>");
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

// Every field with its resolved value; parse_config_text(resolved_text(c)) == c.
std::string resolved_text(const RunConfig& c);

}  // namespace sdrift::cli
