#include "stabledrift/spectral_grid.hpp"

#include "stabledrift/errors.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>
#include <numbers>

namespace sdrift::spectral {
namespace {
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

Grid::Grid(int d, int n, double h, double origin) : d_(d), n_(n), h_(h), origin_(origin) {
    if (d != 1 && d != 2) throw DomainError("spectral grid supports d = 1, 2");
    if (n < 4 || n % 2 != 0) throw DomainError("spectral grid size must be even and >= 4");
    if (!(h > 0.0)) throw DomainError("spectral grid spacing must be positive");
    const std::size_t half = static_cast<std::size_t>(n / 2 + 1);
    real_size_ = d == 1 ? static_cast<std::size_t>(n) : static_cast<std::size_t>(n) * n;
    complex_size_ = d == 1 ? half : static_cast<std::size_t>(n) * half;
    const double dk = 2.0 * std::numbers::pi / (n * h);
    auto signed_k = [&](int k) { return k <= n / 2 ? k : k - n; };
    for (int a = 0; a < d; ++a) {
        xi_[a].resize(complex_size_);
        kint_[a].resize(complex_size_);
    }
    xi_norm_.resize(complex_size_);
    for (std::size_t c = 0; c < complex_size_; ++c) {
        int k[2] = {0, 0};
        if (d == 1) {
            k[0] = static_cast<int>(c);
        } else {
            k[0] = signed_k(static_cast<int>(c / half));
            k[1] = static_cast<int>(c % half);
        }
        double r2 = 0.0;
        for (int a = 0; a < d; ++a) {
            kint_[a][c] = k[a];
            const double x = dk * k[a];
            r2 += x * x;
            xi_[a][c] = (std::abs(k[a]) == n / 2) ? 0.0 : x;
        }
        xi_norm_[c] = std::sqrt(r2);
    }
}

struct Workspace::Impl {
    std::size_t nr, nc;
    double scale;
    double* rbuf;
    fftw_complex* cbuf;
    fftw_plan fwd, bwd;
};

Workspace::Workspace(const Grid& g) : impl_(std::make_unique<Impl>()) {
    auto& s = *impl_;
    s.nr = g.real_size();
    s.nc = g.complex_size();
    s.scale = 1.0 / static_cast<double>(s.nr);
    std::lock_guard<std::mutex> lock(planner_mutex());
    s.rbuf = fftw_alloc_real(s.nr);
    s.cbuf = fftw_alloc_complex(s.nc);
    if (g.d() == 1) {
        s.fwd = fftw_plan_dft_r2c_1d(g.n(), s.rbuf, s.cbuf, FFTW_ESTIMATE);
        s.bwd = fftw_plan_dft_c2r_1d(g.n(), s.cbuf, s.rbuf, FFTW_ESTIMATE);
    } else {
        s.fwd = fftw_plan_dft_r2c_2d(g.n(), g.n(), s.rbuf, s.cbuf, FFTW_ESTIMATE);
        s.bwd = fftw_plan_dft_c2r_2d(g.n(), g.n(), s.cbuf, s.rbuf, FFTW_ESTIMATE);
    }
}

Workspace::~Workspace() {
    auto& s = *impl_;
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(s.fwd);
    fftw_destroy_plan(s.bwd);
    fftw_free(s.rbuf);
    fftw_free(s.cbuf);
}

void Workspace::forward(const double* in, double* out_complex) {
    auto& s = *impl_;
    std::memcpy(s.rbuf, in, s.nr * sizeof(double));
    fftw_execute(s.fwd);
    std::memcpy(out_complex, s.cbuf, s.nc * sizeof(fftw_complex));
}

void Workspace::backward(const double* in_complex, double* out) {
    auto& s = *impl_;
    std::memcpy(s.cbuf, in_complex, s.nc * sizeof(fftw_complex));
    fftw_execute(s.bwd);
    for (std::size_t i = 0; i < s.nr; ++i) out[i] = s.rbuf[i] * s.scale;
}

}  // namespace sdrift::spectral
