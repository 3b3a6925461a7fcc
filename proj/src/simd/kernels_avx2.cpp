#include "stabledrift/simd.hpp"

#include <immintrin.h>

#include <cmath>

namespace sdrift::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    __m256d acc2 = _mm256_setzero_pd(), acc3 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
        acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 8), _mm256_loadu_pd(b + i + 8), acc2);
        acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 12), _mm256_loadu_pd(b + i + 12), acc3);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum(_mm256_add_pd(_mm256_add_pd(acc0, acc1), _mm256_add_pd(acc2, acc3)));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void mul_avx2(double* y, const double* a, const double* x, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(x + i)));
    for (; i < n; ++i) y[i] = a[i] * x[i];
}

void etd_triad_avx2(double* y, const double* e, const double* wa, const double* sa,
                    const double* wb, const double* sb, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d r = _mm256_mul_pd(_mm256_loadu_pd(e + i), _mm256_loadu_pd(y + i));
        r = _mm256_fmadd_pd(_mm256_loadu_pd(wa + i), _mm256_loadu_pd(sa + i), r);
        r = _mm256_fmadd_pd(_mm256_loadu_pd(wb + i), _mm256_loadu_pd(sb + i), r);
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < n; ++i) y[i] = e[i] * y[i] + wa[i] * sa[i] + wb[i] * sb[i];
}

void mul_neg_i_xi_avx2(double* out, const double* in, const double* xi, std::size_t m,
                       bool accumulate) {
    // Two complex values per register: [re0 im0 re1 im1].
    const __m256d sign = _mm256_set_pd(-1.0, 1.0, -1.0, 1.0);
    std::size_t k = 0;
    for (; k + 2 <= m; k += 2) {
        const __m256d v = _mm256_loadu_pd(in + 2 * k);
        const __m256d swapped = _mm256_permute_pd(v, 0b0101);  // [im0 re0 im1 re1]
        const __m128d x2 = _mm_loadu_pd(xi + k);
        const __m256d xx = _mm256_permute4x64_pd(_mm256_castpd128_pd256(x2), 0b01010000);
        __m256d r = _mm256_mul_pd(_mm256_mul_pd(swapped, xx), sign);
        if (accumulate) r = _mm256_add_pd(r, _mm256_loadu_pd(out + 2 * k));
        _mm256_storeu_pd(out + 2 * k, r);
    }
    for (; k < m; ++k) {
        const double re = xi[k] * in[2 * k + 1];
        const double im = -xi[k] * in[2 * k];
        if (accumulate) {
            out[2 * k] += re;
            out[2 * k + 1] += im;
        } else {
            out[2 * k] = re;
            out[2 * k + 1] = im;
        }
    }
}

double max_abs_avx2(const double* x, std::size_t n) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) m = _mm256_max_pd(m, _mm256_and_pd(_mm256_loadu_pd(x + i), mask));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, m);
    double r = std::fmax(std::fmax(lanes[0], lanes[1]), std::fmax(lanes[2], lanes[3]));
    for (; i < n; ++i) r = std::fmax(r, std::fabs(x[i]));
    return r;
}

// sin/cos on [-pi/4, pi/4] (Cephes minimax coefficients) after a three-part
// Cody-Waite reduction by pi/2. Valid while |arg| < kReduceLimit; larger
// lanes fall back to libm.
constexpr double kReduceLimit = 1.0e6;
constexpr double kPio2_1 = 1.57079632673412561417e+00;
constexpr double kPio2_2 = 6.07710050630396597660e-11;
constexpr double kPio2_3 = 2.02226624871116645580e-21;
constexpr double kTwoOverPi = 6.36619772367581382433e-01;

inline __m256d poly_sin(__m256d r, __m256d r2) {
    __m256d p = _mm256_set1_pd(1.58962301576546568060e-10);
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-2.50507477628578072866e-8));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.75573136213857245213e-6));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-1.98412698295895385996e-4));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(8.33333333332211858878e-3));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-1.66666666666666307295e-1));
    return _mm256_fmadd_pd(_mm256_mul_pd(p, r2), r, r);
}

inline __m256d poly_cos(__m256d r2) {
    __m256d p = _mm256_set1_pd(-1.13585365213876817300e-11);
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.08757008419747316778e-9));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-2.75573141792967388112e-7));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(2.48015872888517045348e-5));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(-1.38888888888730564116e-3));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(4.16666666666665929218e-2));
    const __m256d r4 = _mm256_mul_pd(r2, r2);
    return _mm256_fmadd_pd(p, r4, _mm256_fnmadd_pd(_mm256_set1_pd(0.5), r2, _mm256_set1_pd(1.0)));
}

SinCosSum sincos_sum_avx2(const double* x, double w, std::size_t n) {
    const __m256d vw = _mm256_set1_pd(w);
    const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    const __m256d limit = _mm256_set1_pd(kReduceLimit);
    const __m256d one = _mm256_set1_pd(1.0), two = _mm256_set1_pd(2.0), three = _mm256_set1_pd(3.0);
    const __m256d quarter = _mm256_set1_pd(0.25), four = _mm256_set1_pd(4.0);
    const __m256d neg_zero = _mm256_set1_pd(-0.0);
    __m256d cacc = _mm256_setzero_pd(), sacc = _mm256_setzero_pd();
    SinCosSum tail;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_mul_pd(vw, _mm256_loadu_pd(x + i));
        const __m256d big = _mm256_cmp_pd(_mm256_and_pd(a, abs_mask), limit, _CMP_GE_OQ);
        if (!_mm256_testz_pd(big, big)) {
            alignas(32) double lanes[4];
            _mm256_store_pd(lanes, a);
            for (double v : lanes) {
                tail.cos_sum += std::cos(v);
                tail.sin_sum += std::sin(v);
            }
            continue;
        }
        const __m256d q = _mm256_round_pd(_mm256_mul_pd(a, _mm256_set1_pd(kTwoOverPi)),
                                          _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
        __m256d r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2_1), a);
        r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2_2), r);
        r = _mm256_fnmadd_pd(q, _mm256_set1_pd(kPio2_3), r);
        const __m256d r2 = _mm256_mul_pd(r, r);
        const __m256d s = poly_sin(r, r2);
        const __m256d c = poly_cos(r2);
        // quadrant = q mod 4 in {0,1,2,3}
        const __m256d quad = _mm256_sub_pd(q, _mm256_mul_pd(four, _mm256_floor_pd(_mm256_mul_pd(q, quarter))));
        const __m256d is1 = _mm256_cmp_pd(quad, one, _CMP_EQ_OQ);
        const __m256d is2 = _mm256_cmp_pd(quad, two, _CMP_EQ_OQ);
        const __m256d is3 = _mm256_cmp_pd(quad, three, _CMP_EQ_OQ);
        const __m256d swap = _mm256_or_pd(is1, is3);
        __m256d sin_v = _mm256_blendv_pd(s, c, swap);
        __m256d cos_v = _mm256_blendv_pd(c, s, swap);
        const __m256d sin_neg = _mm256_or_pd(is2, is3);
        const __m256d cos_neg = _mm256_or_pd(is1, is2);
        sin_v = _mm256_xor_pd(sin_v, _mm256_and_pd(sin_neg, neg_zero));
        cos_v = _mm256_xor_pd(cos_v, _mm256_and_pd(cos_neg, neg_zero));
        cacc = _mm256_add_pd(cacc, cos_v);
        sacc = _mm256_add_pd(sacc, sin_v);
    }
    SinCosSum out{hsum(cacc) + tail.cos_sum, hsum(sacc) + tail.sin_sum};
    for (; i < n; ++i) {
        const double a = w * x[i];
        out.cos_sum += std::cos(a);
        out.sin_sum += std::sin(a);
    }
    return out;
}

}  // namespace

const KernelTable& avx2_kernels() {
    static const KernelTable table{Isa::avx2,     dot_avx2,         axpy_avx2,
                                   mul_avx2,      etd_triad_avx2,   mul_neg_i_xi_avx2,
                                   max_abs_avx2,  sincos_sum_avx2};
    return table;
}

}  // namespace sdrift::simd
