#include "cachetune/fft.hpp"

#include <bit>
#include <numbers>

#include "cachetune/error.hpp"

namespace cachetune {

namespace {

// std::complex operator* goes through __muldc3 for C99 inf/nan handling, which
// dominates the butterfly loop; inputs here are always finite
inline std::complex<double> mul(std::complex<double> a, std::complex<double> b) {
    return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

}  // namespace

ComplexFft::ComplexFft(std::size_t n) : n_(n), pow2_(std::has_single_bit(n)) {
    if (n == 0) {
        throw InvalidParam("ComplexFft: length must be >= 1");
    }
    if (pow2_) {
        twiddles_.resize(n / 2);
        for (std::size_t k = 0; k < n / 2; ++k) {
            const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
            twiddles_[k] = std::polar(1.0, angle);
        }
        const int bits = std::countr_zero(n);
        bitrev_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t r = 0;
            for (int b = 0; b < bits; ++b) {
                r |= ((i >> b) & 1u) << (bits - 1 - b);
            }
            bitrev_[i] = r;
        }
        return;
    }

    const std::size_t m = std::bit_ceil(2 * n - 1);
    chirp_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // k^2 mod 2n keeps the angle argument small for long transforms.
        const std::size_t k2 = (k * k) % (2 * n);
        chirp_[k] = std::polar(1.0, -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n));
    }
    kernel_fft_.assign(m, {0.0, 0.0});
    kernel_fft_[0] = std::conj(chirp_[0]);
    for (std::size_t k = 1; k < n; ++k) {
        kernel_fft_[k] = std::conj(chirp_[k]);
        kernel_fft_[m - k] = std::conj(chirp_[k]);
    }
    inner_ = std::make_unique<ComplexFft>(m);
    inner_->forward(kernel_fft_);
}

ComplexFft::~ComplexFft() = default;
ComplexFft::ComplexFft(ComplexFft&&) noexcept = default;
ComplexFft& ComplexFft::operator=(ComplexFft&&) noexcept = default;

void ComplexFft::forward(std::span<std::complex<double>> data) const {
    if (data.size() != n_) {
        throw ShapeError("ComplexFft: buffer length does not match plan length");
    }
    if (pow2_) {
        radix2(data, false);
    } else {
        bluestein(data);
    }
}

void ComplexFft::inverse(std::span<std::complex<double>> data) const {
    if (data.size() != n_) {
        throw ShapeError("ComplexFft: buffer length does not match plan length");
    }
    if (pow2_) {
        radix2(data, true);
        return;
    }
    for (auto& v : data) v = std::conj(v);
    bluestein(data);
    for (auto& v : data) v = std::conj(v);
}

void ComplexFft::radix2(std::span<std::complex<double>> data, bool inverse) const {
    const std::size_t n = n_;
    for (std::size_t i = 0; i < n; ++i) {
        if (i < bitrev_[i]) std::swap(data[i], data[bitrev_[i]]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        const std::size_t stride = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < half; ++k) {
                std::complex<double> w = twiddles_[k * stride];
                if (inverse) w = std::conj(w);
                const std::complex<double> u = data[start + k];
                const std::complex<double> v = mul(data[start + k + half], w);
                data[start + k] = u + v;
                data[start + k + half] = u - v;
            }
        }
    }
}

void ComplexFft::bluestein(std::span<std::complex<double>> data) const {
    const std::size_t m = inner_->size();
    std::vector<std::complex<double>> a(m, {0.0, 0.0});
    for (std::size_t k = 0; k < n_; ++k) {
        a[k] = mul(data[k], chirp_[k]);
    }
    inner_->forward(a);
    for (std::size_t k = 0; k < m; ++k) {
        a[k] = mul(a[k], kernel_fft_[k]);
    }
    inner_->inverse(a);
    const double scale = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n_; ++k) {
        data[k] = mul(a[k] * scale, chirp_[k]);
    }
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    if (in.size() != n_ || out.size() != n_bins()) {
        throw ShapeError("RealFft::forward: buffer sizes do not match plan");
    }
    for (std::size_t i = 0; i < n_; ++i) {
        work_[i] = {in[i], 0.0};
    }
    fft_.forward(work_);
    for (std::size_t k = 0; k < n_bins(); ++k) {
        out[k] = work_[k];
    }
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    if (in.size() != n_bins() || out.size() != n_) {
        throw ShapeError("RealFft::inverse: buffer sizes do not match plan");
    }
    work_[0] = {in[0].real(), 0.0};
    for (std::size_t k = 1; k < n_bins(); ++k) {
        work_[k] = in[k];
        if (n_ - k != k) {
            work_[n_ - k] = std::conj(in[k]);
        } else {
            work_[k] = {in[k].real(), 0.0};
        }
    }
    fft_.inverse(work_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        out[i] = work_[i].real() * scale;
    }
}

}  // namespace cachetune
