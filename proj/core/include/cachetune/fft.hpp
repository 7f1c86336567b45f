#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace cachetune {

// Exact-length complex DFT, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
// Powers of two use an iterative radix-2 kernel; every other length goes
// through Bluestein's chirp-z reformulation onto a padded power of two.
class ComplexFft {
public:
    explicit ComplexFft(std::size_t n);
    ~ComplexFft();
    ComplexFft(ComplexFft&&) noexcept;
    ComplexFft& operator=(ComplexFft&&) noexcept;

    std::size_t size() const { return n_; }

    void forward(std::span<std::complex<double>> data) const;
    // Unnormalized inverse (sign flipped); callers divide by N.
    void inverse(std::span<std::complex<double>> data) const;

private:
    void radix2(std::span<std::complex<double>> data, bool inverse) const;
    void bluestein(std::span<std::complex<double>> data) const;

    std::size_t n_ = 0;
    bool pow2_ = false;
    std::vector<std::complex<double>> twiddles_;  // radix-2: e^{-2 pi i k / n}, k < n/2
    std::vector<std::size_t> bitrev_;
    // Bluestein state
    std::vector<std::complex<double>> chirp_;     // e^{-i pi k^2 / n}
    std::vector<std::complex<double>> kernel_fft_;
    std::unique_ptr<ComplexFft> inner_;
};

// Real-input transform returning the floor(N/2)+1 non-redundant bins.
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n), fft_(n), work_(n) {}

    std::size_t size() const { return n_; }
    std::size_t n_bins() const { return n_ / 2 + 1; }

    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    // Hermitian completion of the half spectrum; the imaginary parts of bin 0
    // and (for even N) the Nyquist bin are ignored.
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    std::size_t n_;
    ComplexFft fft_;
    std::vector<std::complex<double>> work_;
};

}  // namespace cachetune
