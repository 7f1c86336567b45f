#include "oracles.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <string>

#include <unistd.h>

namespace cachetune::testing {

std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            // reduce k*t mod n first so the angle stays small and exact-ish
            const double ang = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = acc;
    }
    return out;
}

std::vector<double> naive_idft_real(const std::vector<std::complex<double>>& X) {
    const std::size_t n = X.size();
    std::vector<double> out(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double ang = 2.0 * std::numbers::pi * static_cast<double>((k * t) % n) / static_cast<double>(n);
            acc += X[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[t] = acc.real() / static_cast<double>(n);
    }
    return out;
}

std::vector<double> naive_low_freq_scores(const SeqTensor& keys, const SeqTensor& values, double alpha) {
    const std::size_t n = keys.n_tokens();
    const std::size_t lanes = keys.row_size();
    const auto c = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n / 2 + 1) + 1e-9));
    std::vector<double> sk(n, 0.0), sv(n, 0.0);
    for (int part = 0; part < 2; ++part) {
        const SeqTensor& t = part == 0 ? keys : values;
        std::vector<double>& acc = part == 0 ? sk : sv;
        for (std::size_t lane = 0; lane < lanes; ++lane) {
            std::vector<double> x(n);
            for (std::size_t i = 0; i < n; ++i) x[i] = t.data()[i * lanes + lane];
            std::vector<std::complex<double>> X = naive_dft(x);
            for (std::size_t k = 0; k < n; ++k) {
                if (std::min(k, n - k) >= c) X[k] = 0.0;
            }
            const std::vector<double> y = naive_idft_real(X);
            for (std::size_t i = 0; i < n; ++i) acc[i] += y[i] * y[i];
        }
    }
    std::vector<double> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = 0.5 * (std::sqrt(sk[i]) + std::sqrt(sv[i]));
    return s;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

SeqTensor random_tensor(std::mt19937_64& rng, std::size_t n, std::size_t h, std::size_t d, double scale) {
    std::vector<float> v(n * h * d);
    for (float& x : v) x = static_cast<float>(uniform(rng, -scale, scale));
    return SeqTensor(n, h, d, std::move(v));
}

KvChunk random_chunk(std::mt19937_64& rng, std::size_t l, std::size_t n, std::size_t h, std::size_t d,
                     std::string id) {
    KvChunk c;
    c.chunk_id = std::move(id);
    for (std::size_t i = 0; i < l; ++i) {
        c.keys_raw.push_back(random_tensor(rng, n, h, d));
        c.values.push_back(random_tensor(rng, n, h, d));
    }
    return c;
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cachetune-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace cachetune::testing
