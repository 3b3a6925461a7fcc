#include "doctest.h"
#include "stabledrift/simd.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace sdrift::simd;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed, double scale = 1.0) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> v(n);
    for (auto& x : v) x = u(g);
    return v;
}

// Every non-scalar table against the scalar reference, odd lengths included
// so the remainder loops are exercised.
template <class F>
void for_each_vector_isa(F&& f) {
    for (Isa isa : supported_isas()) {
        if (isa == Isa::scalar) continue;
#if defined(SDRIFT_BUILD_AVX2)
        if (isa == Isa::avx2) f(avx2_kernels());
#endif
    }
}

const std::size_t kLengths[] = {0, 1, 3, 4, 7, 16, 17, 31, 64, 1001};

}  // namespace

TEST_CASE("scalar kernels compute their definitions") {
    const KernelTable& s = scalar_kernels();
    std::vector<double> a{1, 2, 3}, b{4, -5, 6};
    CHECK(s.dot(a.data(), b.data(), 3) == doctest::Approx(12.0));
    s.axpy(a.data(), 2.0, b.data(), 3);
    CHECK(a[1] == doctest::Approx(-8.0));
    CHECK(s.max_abs(b.data(), 3) == 6.0);
    std::vector<double> in{1.0, 2.0}, out(2), xi{3.0};
    s.mul_neg_i_xi(out.data(), in.data(), xi.data(), 1, false);
    // -i * 3 * (1 + 2i) = 6 - 3i
    CHECK(out[0] == doctest::Approx(6.0));
    CHECK(out[1] == doctest::Approx(-3.0));
}

TEST_CASE("vector dot and max_abs agree with the scalar reference") {
    const KernelTable& ref = scalar_kernels();
    for_each_vector_isa([&](const KernelTable& k) {
        for (std::size_t n : kLengths) {
            auto a = random_vec(n, 1 + n), b = random_vec(n, 100 + n);
            const double r = ref.dot(a.data(), b.data(), n);
            CHECK(std::fabs(k.dot(a.data(), b.data(), n) - r) <= 1e-13 * (1.0 + std::fabs(r)) * std::sqrt(n + 1.0));
            CHECK(k.max_abs(a.data(), n) == ref.max_abs(a.data(), n));
        }
    });
}

TEST_CASE("vector elementwise kernels agree with the scalar reference") {
    const KernelTable& ref = scalar_kernels();
    for_each_vector_isa([&](const KernelTable& k) {
        for (std::size_t n : kLengths) {
            auto x = random_vec(n, 2 + n), y0 = random_vec(n, 3 + n), e = random_vec(n, 4 + n);
            auto wa = random_vec(n, 5 + n), sa = random_vec(n, 6 + n), wb = random_vec(n, 7 + n),
                 sb = random_vec(n, 8 + n);
            auto y1 = y0, y2 = y0;
            ref.axpy(y1.data(), 0.7, x.data(), n);
            k.axpy(y2.data(), 0.7, x.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
            ref.mul(y1.data(), e.data(), x.data(), n);
            k.mul(y2.data(), e.data(), x.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);
            y1 = y0;
            y2 = y0;
            ref.etd_triad(y1.data(), e.data(), wa.data(), sa.data(), wb.data(), sb.data(), n);
            k.etd_triad(y2.data(), e.data(), wa.data(), sa.data(), wb.data(), sb.data(), n);
            for (std::size_t i = 0; i < n; ++i) CHECK(std::fabs(y1[i] - y2[i]) <= 4e-16 * 3.0);
        }
    });
}

TEST_CASE("vector complex derivative kernel agrees with the scalar reference") {
    const KernelTable& ref = scalar_kernels();
    for_each_vector_isa([&](const KernelTable& k) {
        for (std::size_t m : kLengths) {
            auto in = random_vec(2 * m, 9 + m), xi = random_vec(m, 10 + m, 50.0), base = random_vec(2 * m, 11 + m);
            for (bool acc : {false, true}) {
                auto o1 = base, o2 = base;
                ref.mul_neg_i_xi(o1.data(), in.data(), xi.data(), m, acc);
                k.mul_neg_i_xi(o2.data(), in.data(), xi.data(), m, acc);
                for (std::size_t i = 0; i < 2 * m; ++i) CHECK(o1[i] == o2[i]);
            }
        }
    });
}

TEST_CASE("vector sincos sums agree with libm") {
    const KernelTable& ref = scalar_kernels();
    for_each_vector_isa([&](const KernelTable& k) {
        for (double scale : {1.0, 30.0, 1e4, 5e6}) {
            for (std::size_t n : kLengths) {
                auto x = random_vec(n, 12 + n, scale);
                for (double w : {0.1, 1.0, 7.3}) {
                    const SinCosSum a = ref.sincos_sum(x.data(), w, n);
                    const SinCosSum b = k.sincos_sum(x.data(), w, n);
                    const double tol = 2e-15 * (n + 1.0);
                    CHECK(std::fabs(a.cos_sum - b.cos_sum) <= tol);
                    CHECK(std::fabs(a.sin_sum - b.sin_sum) <= tol);
                }
            }
        }
    });
}

TEST_CASE("dispatch honours force_isa and reports names") {
    const Isa before = active().isa;
    CHECK(force_isa(Isa::scalar));
    CHECK(active().isa == Isa::scalar);
    CHECK(isa_name(Isa::scalar) == "scalar");
    CHECK(force_isa(before));
    CHECK(isa_supported(Isa::scalar));
}
