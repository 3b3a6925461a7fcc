#pragma once

// Data-parallel inner loops used by the spectral time stepper, the grid
// compositions and the Monte Carlo statistics.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2+FMA
// variant is compiled into a separate translation unit and selected at
// runtime when the CPU supports it. Results agree with the scalar reference
// to rounding (reductions are reassociated, so they are not bitwise equal
// across ISAs; within one ISA every kernel is deterministic).

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sdrift::simd {

enum class Isa { scalar, avx2 };

struct SinCosSum {
    double cos_sum = 0.0;
    double sin_sum = 0.0;
};

struct KernelTable {
    Isa isa;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
    // y[i] = a[i] * x[i]
    void (*mul)(double* y, const double* a, const double* x, std::size_t n);
    // y[i] = e[i] * y[i] + wa[i] * sa[i] + wb[i] * sb[i]
    void (*etd_triad)(double* y, const double* e, const double* wa, const double* sa,
                      const double* wb, const double* sb, std::size_t n);
    // Interleaved complex: out[k] (+)= -i * xi[k] * in[k], k < m complex entries.
    void (*mul_neg_i_xi)(double* out, const double* in, const double* xi, std::size_t m,
                         bool accumulate);
    // max_i |x[i]|
    double (*max_abs)(const double* x, std::size_t n);
    // sum_i cos(w * x[i]), sum_i sin(w * x[i])
    SinCosSum (*sincos_sum)(const double* x, double w, std::size_t n);
};

const KernelTable& scalar_kernels();
#if defined(SDRIFT_BUILD_AVX2)
const KernelTable& avx2_kernels();
#endif

// Kernels chosen for this process: the best ISA the CPU supports unless
// overridden with force_isa() or the SDRIFT_ISA=scalar environment variable.
const KernelTable& active();

bool isa_supported(Isa isa);
// Returns false (and changes nothing) when the ISA is unavailable.
bool force_isa(Isa isa);
std::vector<Isa> supported_isas();
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

inline double max_abs(std::span<const double> x) { return active().max_abs(x.data(), x.size()); }

}  // namespace sdrift::simd
