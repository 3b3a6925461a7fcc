#include "stabledrift/heat_kernel.hpp"
#include "stabledrift/errors.hpp"
#include "stabledrift/simd.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

using namespace sdrift;
using kato::DriftField;

namespace {

const auto P = stable::StableParams::make(1, 1.5);

heat::SpaceTimeGrid small_grid(double horizon = 0.5, double h = 0.05, double L = 10.0) {
    heat::GridSpec gs;
    gs.horizon = horizon;
    gs.h = h;
    gs.L = L;
    return heat::make_grid(P, gs);
}

// Cached kernels shared between test cases.
const heat::SeriesKernel& constant_full() {
    static const heat::SeriesKernel k = [] {
        heat::SeriesOptions o;
        o.full_table = true;
        return heat::series_sum(P, DriftField::constant(1, {0.5, 0, 0}), small_grid(), o);
    }();
    return k;
}

const heat::SeriesKernel& zero_full() {
    static const heat::SeriesKernel k = [] {
        heat::SeriesOptions o;
        o.full_table = true;
        return heat::series_sum(P, DriftField::zero(1), small_grid(), o);
    }();
    return k;
}

double translated_error(const heat::SeriesKernel& k, double c, double tmin, double tmax) {
    const auto& g = k.grid;
    double err = 0.0;
    for (std::size_t s = 0; s < g.times.size(); ++s) {
        const double t = g.times[s];
        if (t < tmin - 1e-12 || t > tmax + 1e-12) continue;
        for (std::size_t i = 0; i < k.sum.sources.size(); ++i) {
            const double x = g.node(k.sum.sources[i])[0];
            if (std::fabs(x) > 0.5 * g.L) continue;
            for (std::size_t j = 0; j < g.nodes(); ++j) {
                const double y = g.node(j)[0];
                if (std::fabs(y) > 0.5 * g.L) continue;
                const double ex = stable::density_1d(P, t, y - x - c * t);
                err = std::max(err, std::fabs(k.sum.at(s, i, j) - ex) / ex);
            }
        }
    }
    return err;
}

}  // namespace

TEST_CASE("grid construction and validation") {
    const auto g = small_grid(1.0);
    CHECK(g.n_side == 401);
    CHECK(g.times.size() == 40);
    CHECK(g.times.back() == doctest::Approx(1.0));
    CHECK(g.internal_n == 2048);
    for (std::size_t s = 0; s < g.times.size(); ++s) CHECK(g.steps[g.slice_step[s]] == g.times[s]);
    for (std::size_t n = 1; n < g.steps.size(); ++n) CHECK(g.steps[n] > g.steps[n - 1]);
    CHECK(g.node(0)[0] == doctest::Approx(-10.0));
    CHECK(g.node(200)[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(g.nearest_node({0.26, 0, 0}) == 205);
    CHECK(g.tail_bound == doctest::Approx(heat::free_tail_mass(P, 1.0, 10.0)));

    heat::GridSpec bad;
    bad.h = 0.03;
    CHECK_THROWS_AS(heat::make_grid(P, bad), ConfigError);
    heat::GridSpec tight;
    tight.tail_bound = 1e-6;
    CHECK_THROWS_AS(heat::make_grid(P, tight), ConfigError);
    heat::GridSpec extra;
    extra.horizon = 0.2;
    extra.extra_times = {0.0333};
    const auto ge = heat::make_grid(P, extra);
    CHECK(ge.find_slice(0.0333).has_value());
    extra.extra_times = {0.5};
    CHECK_THROWS_AS(heat::make_grid(P, extra), ConfigError);
}

TEST_CASE("free tail mass matches the distribution function") {
    CHECK(heat::free_tail_mass(P, 1.0, 3.0) == doctest::Approx(2.0 * (1.0 - stable::cdf_1d(P, 1.0, 3.0))));
    const auto p2 = stable::StableParams::make(2, 1.5);
    CHECK(heat::free_tail_mass(p2, 0.5, 2.0) > 0.0);
    CHECK(heat::free_tail_mass(p2, 0.5, 2.0) < heat::free_tail_mass(p2, 0.5, 1.0));
}

TEST_CASE("zero drift: every perturbation term vanishes and the series is p") {
    const auto& k = zero_full();
    for (std::size_t o = 1; o < k.norms.size(); ++o)
        for (double n : k.norms[o]) CHECK(n <= 1e-12);
    CHECK(k.t0_estimate == doctest::Approx(k.grid.horizon()));
    double err = 0.0;
    for (std::size_t s = 0; s < k.grid.times.size(); ++s)
        for (std::size_t i = 0; i < k.sum.sources.size(); i += 7)
            for (std::size_t j = 0; j < k.grid.nodes(); ++j) {
                const double ex =
                    stable::density_1d(P, k.grid.times[s], k.grid.node(j)[0] - k.grid.node(k.sum.sources[i])[0]);
                err = std::max(err, std::fabs(k.sum.at(s, i, j) - ex) / ex);
            }
    CHECK(err <= 1e-10);
    const auto d = heat::duhamel_residual(k, k.field, k.grid);
    CHECK(d.max_residual < 1e-10);
}

TEST_CASE("order-zero table is the exact density") {
    const auto& k = constant_full();
    const auto& t0 = k.terms.at(0);
    for (std::size_t s = 0; s < t0.times.size(); s += 5)
        for (std::size_t i = 0; i < t0.sources.size(); i += 40)
            for (std::size_t j = 0; j < t0.n_targets; j += 3) {
                const double ex = stable::density_1d(P, t0.times[s], k.grid.node(j)[0] - k.grid.node(t0.sources[i])[0]);
                CHECK(std::fabs(t0.at(s, i, j) - ex) <= 1e-10 * ex);
            }
}

TEST_CASE("constant drift: first-order term is -t c dp") {
    const auto& k = constant_full();
    const auto& q1 = k.terms.at(1);
    const std::size_t s = k.grid.slice(0.5);
    double err = 0.0;
    for (std::size_t i = 0; i < q1.sources.size(); i += 10) {
        const double x = k.grid.node(q1.sources[i])[0];
        if (std::fabs(x) > 5.0) continue;
        for (std::size_t j = 0; j < q1.n_targets; ++j) {
            const double y = k.grid.node(j)[0];
            if (std::fabs(y) > 5.0) continue;
            const double ex = -0.5 * 0.5 * stable::density_gradient_1d(P, 0.5, y - x);
            if (std::fabs(ex) < 1e-3 * q1.sup_norm[s]) continue;  // skip the zero of dp
            err = std::max(err, std::fabs(q1.at(s, i, j) - ex) / std::fabs(ex));
        }
    }
    CHECK(err <= 1e-3);
}

TEST_CASE("constant drift: series equals the translated free kernel") {
    const auto& k = constant_full();
    CHECK(translated_error(k, 0.5, 0.1, 0.5) <= 1e-3);
    CHECK(k.stopped_by_rule);
    CHECK(k.orders >= 2);
    for (std::size_t s = 0; s <= k.t0_slice; ++s) {
        CHECK(k.decay_ratio[s] < 1.0);
        CHECK(k.row_sum_error[s] <= 1e-3);
        CHECK(k.tail_bound[s] < 1e-6);
    }
}

TEST_CASE("perturbation_term recomputes the stored first-order table") {
    const auto& k = constant_full();
    heat::KernelTable prev = k.terms.at(0);
    // Restrict to two sources to keep this cheap.
    const std::vector<std::size_t> keep = {100, 200};
    heat::KernelTable small;
    small.order = 0;
    small.times = prev.times;
    small.sources = keep;
    small.n_targets = prev.n_targets;
    for (std::size_t s = 0; s < prev.times.size(); ++s)
        for (std::size_t node : keep) {
            const auto row = prev.row(s, *prev.source_slot(node));
            small.values.insert(small.values.end(), row.begin(), row.end());
        }
    const auto q1 = heat::perturbation_term(P, small, k.field, k.grid);
    CHECK(q1.order == 1);
    for (std::size_t s = 0; s < q1.times.size(); s += 3)
        for (std::size_t si = 0; si < keep.size(); ++si) {
            const auto a = q1.row(s, si);
            const auto b = k.terms[1].row(s, *k.terms[1].source_slot(keep[si]));
            for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-12).scale(1e-14));
        }
    const auto z = heat::perturbation_term(P, small, DriftField::zero(1), k.grid);
    for (double n : z.sup_norm) CHECK(n == 0.0);
    small.values[3] = NAN;
    CHECK_THROWS_AS(heat::perturbation_term(P, small, k.field, k.grid), DomainError);
}

TEST_CASE("Duhamel residual: small for constant drift, shrinks with truncation order") {
    const auto& k = constant_full();
    CHECK(heat::duhamel_residual(k, k.field, k.grid).max_residual <= 1e-3);
    const auto g = small_grid(0.25);
    const auto b = DriftField::sinusoidal(1, 0.5, 1.0, 0.0);
    double prev = HUGE_VAL;
    for (int K : {1, 2, 3}) {
        heat::SeriesOptions o;
        o.fixed_order = K;
        const auto kk = heat::series_sum(P, b, g, o);
        const double r = heat::duhamel_residual(kk, b, g).max_residual;
        double ratio = 0.0;
        for (double v : kk.decay_ratio) ratio = std::max(ratio, v);
        CHECK(r <= prev * std::max(ratio, 0.5));
        prev = r;
    }
}

TEST_CASE("Chapman-Kolmogorov and semigroup extension") {
    const auto& k = constant_full();
    CHECK(heat::chapman_kolmogorov(k, 0.1, 0.2).residual <= 5e-3);
    CHECK(heat::chapman_kolmogorov(k, 0.025, 0.35).residual <= 5e-3);
    const auto ext = heat::extension_consistency(k);
    CHECK(ext.residual <= 5e-3);

    const double T = 2.0 * k.t0_estimate;
    for (const auto* kern : {&zero_full(), &constant_full()}) {
        const double c = kern == &zero_full() ? 0.0 : 0.5;
        const auto e = heat::extend_semigroup(*kern, T);
        double err = 0.0;
        for (std::size_t i = 0; i < e.sources.size(); i += 4) {
            const double x = k.grid.node(e.sources[i])[0];
            if (std::fabs(x) > 5.0) continue;
            for (std::size_t j = 0; j < e.n_targets; ++j) {
                const double y = k.grid.node(j)[0];
                if (std::fabs(y) > 5.0) continue;
                const double ex = stable::density_1d(P, T, y - x - c * T);
                err = std::max(err, std::fabs(e.at(0, i, j) - ex) / ex);
            }
        }
        CHECK(err <= (c == 0.0 ? 1e-3 : 5e-3));
    }
    CHECK_THROWS_AS(heat::extend_semigroup(k, 40.0 * k.t0_estimate, 16), DomainError);
    CHECK_THROWS_AS(heat::extend_semigroup(k, 0.0), DomainError);
}

TEST_CASE("compositions need full tables") {
    const auto k = heat::series_sum(P, DriftField::constant(1, {0.5, 0, 0}), small_grid(0.1));
    CHECK_FALSE(k.full_table());
    CHECK_THROWS_AS(heat::extend_semigroup(k, 0.2), DomainError);
    CHECK_THROWS_AS(heat::chapman_kolmogorov(k, 0.025, 0.05), DomainError);
}

TEST_CASE("comparability: free constant recovered, drifted constant refinement-stable") {
    const auto& z = zero_full();
    const auto rz = heat::comparability_check(z, P);
    const double r_max = 20.0 / std::pow(z.grid.times.front(), 1.0 / 1.5);
    const double c_free = stable::free_comparability_constant(P, 1e-3, r_max, 400);
    CHECK(std::fabs(rz.c_hat / c_free - 1.0) <= 0.1);
    CHECK(rz.min_value > 0.0);

    for (const auto& b : {DriftField::constant(1, {0.5, 0, 0}), DriftField::sinusoidal(1, 0.5, 1.0, 0.0)}) {
        const auto k1 = heat::series_sum(P, b, small_grid(0.5, 0.05));
        const auto k2 = heat::series_sum(P, b, small_grid(0.5, 0.025));
        const double c1 = heat::comparability_check(k1, P).c_hat, c2 = heat::comparability_check(k2, P).c_hat;
        CHECK(std::isfinite(c1));
        CHECK(std::fabs(c1 / c2 - 1.0) <= 0.05);
    }
}

TEST_CASE("generator check") {
    const auto f = bump(1, 2.0), g = bump(1, 2.5);
    SUBCASE("zero drift: limit matches the fractional Laplacian pairing") {
        const auto r = heat::generator_check(zero_full(), DriftField::zero(1), f, g);
        CHECK(r.limit_error <= 1e-2 * std::fabs(r.free_part));
        CHECK(r.drift_part == 0.0);
        CHECK_FALSE(r.inconclusive);
    }
    SUBCASE("constant drift: drift part equals c int f' g") {
        const auto gs = bump(1, 2.0, 1.0, {0.7, 0, 0});
        const auto& k = constant_full();
        const auto r = heat::generator_check(k, k.field, f, gs);
        const auto r0 = heat::generator_check(zero_full(), DriftField::zero(1), f, gs);
        CHECK(std::fabs(r.drift_part) > 0.05);
        CHECK(std::fabs((r.limit - r0.limit) - r.drift_part) <= 1e-2 * std::fabs(r.drift_part));
    }
    SUBCASE("even drift and f = g: drift contribution cancels") {
        heat::SeriesOptions o;
        o.probes.clear();
        for (double x = -2.5; x <= 2.5 + 1e-9; x += 0.05) o.probes.push_back({x, 0, 0});
        const auto b = DriftField::sinusoidal(1, 0.5, 1.0, std::numbers::pi / 2);  // 0.5 cos x
        const auto k = heat::series_sum(P, b, small_grid(0.1), o);
        const auto r = heat::generator_check(k, b, f, f);
        CHECK(std::fabs(r.drift_part) < 1e-12);
        CHECK(std::fabs(r.limit - r.free_part) <= 1e-2 * std::fabs(r.free_part));
    }
    SUBCASE("missing rows are reported") {
        const auto k = heat::series_sum(P, DriftField::zero(1), small_grid(0.1));
        CHECK_THROWS_AS(heat::generator_check(k, DriftField::zero(1), f, g), DomainError);
    }
}

TEST_CASE("positivity on certified slices for a sinusoidal drift") {
    const auto k = heat::series_sum(P, DriftField::sinusoidal(1, 0.5, 1.0, 0.0), small_grid(1.0));
    CHECK(k.t0_estimate > 0.0);
    for (std::size_t s = 0; s <= k.t0_slice; ++s) {
        const std::size_t per = k.sum.sources.size() * k.sum.n_targets;
        for (std::size_t i = 0; i < per; ++i) REQUIRE(k.sum.values[s * per + i] > 0.0);
        CHECK(k.row_sum_error[s] <= 1e-3);
    }
}

TEST_CASE("strong drift over a long horizon does not certify") {
    heat::SeriesOptions o;
    o.max_order = 6;
    CHECK_THROWS_AS(heat::series_sum(P, DriftField::constant(1, {60.0, 0, 0}), small_grid(0.5), o), ConvergenceError);
}

TEST_CASE("d = 2 constant drift on a small box") {
    const auto p2 = stable::StableParams::make(2, 1.5);
    heat::GridSpec gs;
    gs.d = 2;
    gs.L = 2.0;
    gs.h = 0.05;
    gs.horizon = 0.2;
    const auto g = heat::make_grid(p2, gs);
    heat::SeriesOptions o;
    o.probes = {{0.0, 0.0, 0.0}};
    const auto k = heat::series_sum(p2, DriftField::constant(2, {0.3, -0.4, 0}), g, o);
    const std::size_t s = g.slice(0.2);
    double err = 0.0;
    for (std::size_t j = 0; j < g.nodes(); ++j) {
        const auto y = g.node(j);
        if (std::hypot(y[0], y[1]) > 1.0) continue;
        const double dy[2] = {y[0] - 0.3 * 0.2, y[1] + 0.4 * 0.2};
        const double ex = stable::density(p2, 0.2, dy);
        err = std::max(err, std::fabs(k.sum.at(s, 0, j) - ex) / ex);
    }
    CHECK(err <= 1e-3);
    CHECK(k.t0_estimate == doctest::Approx(0.2));
}

TEST_CASE("scalar and vector kernels give the same series") {
    const auto g = small_grid(0.1);
    const auto b = DriftField::sinusoidal(1, 0.5, 1.0, 0.3);
    const auto ka = heat::series_sum(P, b, g);
    const auto isa = simd::active().isa;
    REQUIRE(simd::force_isa(simd::Isa::scalar));
    const auto ks = heat::series_sum(P, b, g);
    simd::force_isa(isa);
    REQUIRE(ka.sum.values.size() == ks.sum.values.size());
    double gap = 0.0;
    for (std::size_t i = 0; i < ka.sum.values.size(); ++i)
        gap = std::max(gap, std::fabs(ka.sum.values[i] - ks.sum.values[i]));
    CHECK(gap <= 1e-12 * ka.sum.sup_norm.back());
}

TEST_CASE("binary and CSV export") {
    const auto k = heat::series_sum(P, DriftField::constant(1, {0.5, 0, 0}), small_grid(0.05));
    const std::string path = "heat_table_test.bin";
    heat::write_binary(k.sum, k.grid, 1.5, path);
    heat::SpaceTimeGrid g2;
    double alpha = 0.0;
    const auto back = heat::read_binary(path, &g2, &alpha);
    CHECK(alpha == 1.5);
    CHECK(g2.n_side == k.grid.n_side);
    CHECK(back.values == k.sum.values);
    CHECK(back.sources == k.sum.sources);
    CHECK(back.times == k.sum.times);
    {
        std::ifstream in(path, std::ios::binary | std::ios::ate);
        const auto size = static_cast<std::size_t>(in.tellg());
        const std::size_t header = 8 + 8 * 8 + 8 * back.times.size() + 8 * back.sources.size();
        CHECK(size == header + 8 * back.values.size());
    }
    std::remove(path.c_str());
    {
        std::ofstream junk(path);
        junk << "nope";
    }
    CHECK_THROWS_AS(heat::read_binary(path), ConfigError);
    std::remove(path.c_str());

    const std::string csv = "heat_table_test.csv";
    heat::write_csv(k.terms[0], k.grid, csv);
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x,y,q");
    std::getline(in, line);
    CHECK(line.find('e') != std::string::npos);
    std::remove(csv.c_str());
}
