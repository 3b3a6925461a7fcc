#include "stabledrift/simd.hpp"

#include <cmath>

namespace sdrift::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void mul_scalar(double* y, const double* a, const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * x[i];
}

void etd_triad_scalar(double* y, const double* e, const double* wa, const double* sa,
                      const double* wb, const double* sb, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = e[i] * y[i] + wa[i] * sa[i] + wb[i] * sb[i];
}

void mul_neg_i_xi_scalar(double* out, const double* in, const double* xi, std::size_t m,
                         bool accumulate) {
    for (std::size_t k = 0; k < m; ++k) {
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

double max_abs_scalar(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::fmax(m, std::fabs(x[i]));
    return m;
}

SinCosSum sincos_sum_scalar(const double* x, double w, std::size_t n) {
    SinCosSum s;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = w * x[i];
        s.cos_sum += std::cos(a);
        s.sin_sum += std::sin(a);
    }
    return s;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{Isa::scalar,      dot_scalar,          axpy_scalar,
                                   mul_scalar,       etd_triad_scalar,    mul_neg_i_xi_scalar,
                                   max_abs_scalar,   sincos_sum_scalar};
    return table;
}

}  // namespace sdrift::simd
