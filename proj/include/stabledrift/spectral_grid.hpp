#pragma once

// Periodic FFT grid on [origin, origin + n h)^d for d = 1, 2, with real-to-
// complex transforms (FFTW). Complex arrays are interleaved (re, im).

#include <cstddef>
#include <memory>
#include <vector>

namespace sdrift::spectral {

class Grid {
public:
    Grid(int d, int n, double h, double origin);

    int d() const { return d_; }
    int n() const { return n_; }
    double h() const { return h_; }
    double origin() const { return origin_; }
    double period() const { return n_ * h_; }
    std::size_t real_size() const { return real_size_; }
    // Number of complex coefficients (n/2+1 in d=1, n*(n/2+1) in d=2).
    std::size_t complex_size() const { return complex_size_; }

    // Angular frequency along an axis per complex index; zero on Nyquist
    // planes so spectral derivatives of real data stay real.
    const std::vector<double>& xi(int axis) const { return xi_[axis]; }
    const std::vector<double>& xi_norm() const { return xi_norm_; }
    // Integer wavenumber along an axis per complex index (signed).
    const std::vector<int>& wavenumber(int axis) const { return kint_[axis]; }

private:
    int d_, n_;
    double h_, origin_;
    std::size_t real_size_, complex_size_;
    std::vector<double> xi_[2];
    std::vector<int> kint_[2];
    std::vector<double> xi_norm_;
};

// Per-thread FFTW plans and aligned buffers for one grid.
class Workspace {
public:
    explicit Workspace(const Grid& g);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    // Unnormalized DFT of real samples.
    void forward(const double* in, double* out_complex);
    // Inverse DFT divided by n^d, so backward(forward(u)) == u.
    void backward(const double* in_complex, double* out);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sdrift::spectral
