#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "cachetune/error.hpp"
#include "cachetune/fft.hpp"
#include "cachetune/spectral.hpp"
#include "oracles.hpp"

using namespace cachetune;
namespace ct = cachetune::testing;

namespace {

SeqTensor lane(std::vector<float> v) {
    const std::size_t n = v.size();
    return SeqTensor(n, 1, 1 * 2, [&] {
        std::vector<float> d(n * 2, 0.0f);
        for (std::size_t i = 0; i < n; ++i) d[i * 2] = v[i];
        return d;
    }());
}

double max_abs(const SeqTensor& a, const SeqTensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
    return m;
}

}  // namespace

TEST(Fft, MatchesNaiveDftAllSmallLengths) {
    std::mt19937_64 rng(11);
    for (std::size_t n = 1; n <= 70; ++n) {
        std::vector<std::complex<double>> x(n);
        std::vector<double> re(n);
        for (std::size_t i = 0; i < n; ++i) re[i] = ct::uniform(rng, -1, 1);
        for (std::size_t i = 0; i < n; ++i) x[i] = re[i];
        ComplexFft fft(n);
        fft.forward(x);
        const auto ref = ct::naive_dft(re);
        for (std::size_t k = 0; k < n; ++k) ASSERT_LT(std::abs(x[k] - ref[k]), 1e-9) << "n=" << n << " k=" << k;
    }
}

TEST(Fft, RealInverseRoundTrip) {
    std::mt19937_64 rng(12);
    for (std::size_t n : {1u, 2u, 3u, 7u, 16u, 100u, 257u}) {
        RealFft fft(n);
        std::vector<double> x(n), y(n);
        for (double& v : x) v = ct::uniform(rng, -3, 3);
        std::vector<std::complex<double>> s(fft.n_bins());
        fft.forward(x, s);
        fft.inverse(s, y);
        for (std::size_t i = 0; i < n; ++i) ASSERT_NEAR(x[i], y[i], 1e-12) << n;
    }
}

TEST(RfftSeq, ConstantLaneIsDcOnly) {
    const ComplexSpectrum s = rfft_seq(lane({1, 1, 1, 1}));
    ASSERT_EQ(s.n_freqs, 3u);
    EXPECT_NEAR(s.re[0], 4.0, 1e-12);
    EXPECT_NEAR(s.im[0], 0.0, 1e-12);
    for (std::size_t k = 1; k < 3; ++k) {
        EXPECT_NEAR(s.re[k * 2], 0.0, 1e-12);
        EXPECT_NEAR(s.im[k * 2], 0.0, 1e-12);
    }
}

TEST(RfftSeq, AlternatingLaneIsNyquistOnly) {
    const ComplexSpectrum s = rfft_seq(lane({1, -1, 1, -1}));
    EXPECT_NEAR(s.re[0], 0.0, 1e-12);
    EXPECT_NEAR(std::hypot(s.re[2], s.im[2]), 0.0, 1e-12);
    EXPECT_NEAR(s.re[4], 4.0, 1e-12);
    EXPECT_NEAR(s.im[4], 0.0, 1e-12);
}

TEST(RfftSeq, OddLengthMatchesNaive) {
    std::mt19937_64 rng(13);
    const SeqTensor t = ct::random_tensor(rng, 7, 2, 2);
    const ComplexSpectrum s = rfft_seq(t);
    ASSERT_EQ(s.n_freqs, 4u);
    for (std::size_t c = 0; c < 4; ++c) {
        std::vector<double> x(7);
        for (std::size_t i = 0; i < 7; ++i) x[i] = t.data()[i * 4 + c];
        const auto ref = ct::naive_dft(x);
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_NEAR(s.re[k * 4 + c], ref[k].real(), 1e-9);
            EXPECT_NEAR(s.im[k * 4 + c], ref[k].imag(), 1e-9);
        }
    }
}

TEST(RfftSeq, BinZeroIsLaneSum) {
    std::mt19937_64 rng(14);
    const SeqTensor t = ct::random_tensor(rng, 13, 1, 4);
    const ComplexSpectrum s = rfft_seq(t);
    for (std::size_t c = 0; c < 4; ++c) {
        double sum = 0;
        for (std::size_t i = 0; i < 13; ++i) sum += t.data()[i * 4 + c];
        EXPECT_NEAR(s.re[c], sum, 1e-9);
    }
}

TEST(Lowpass, Cutoffs) {
    std::mt19937_64 rng(15);
    const ComplexSpectrum s = rfft_seq(ct::random_tensor(rng, 10, 1, 2));
    const ComplexSpectrum same = lowpass(s, 1.0);
    EXPECT_EQ(same.re, s.re);
    EXPECT_EQ(same.im, s.im);
    const ComplexSpectrum none = lowpass(s, 0.0);
    for (double v : none.re) EXPECT_EQ(v, 0.0);
    for (double v : none.im) EXPECT_EQ(v, 0.0);

    EXPECT_EQ(lowpass_cutoff(10, 0.5), 3u);
    const ComplexSpectrum half = lowpass(s, 0.5);
    for (std::size_t k = 0; k < 6; ++k) {
        for (std::size_t c = 0; c < 2; ++c) {
            const double want_re = k < 3 ? s.re[k * 2 + c] : 0.0;
            const double want_im = k < 3 ? s.im[k * 2 + c] : 0.0;
            EXPECT_EQ(half.re[k * 2 + c], want_re);
            EXPECT_EQ(half.im[k * 2 + c], want_im);
        }
    }
    EXPECT_EQ(half.origin_len, 10u);
    EXPECT_THROW(lowpass(s, -0.1), InvalidParam);
    EXPECT_THROW(lowpass(s, 1.1), InvalidParam);
}

TEST(Lowpass, Idempotent) {
    std::mt19937_64 rng(16);
    for (double alpha : {0.1, 0.3, 0.5, 0.77}) {
        const ComplexSpectrum s = lowpass(rfft_seq(ct::random_tensor(rng, 19, 2, 2)), alpha);
        const ComplexSpectrum s2 = lowpass(s, alpha);
        EXPECT_EQ(s.re, s2.re);
        EXPECT_EQ(s.im, s2.im);
    }
}

TEST(Irfft, RoundTripAndErrors) {
    std::mt19937_64 rng(17);
    const SeqTensor t = ct::random_tensor(rng, 16, 2, 4);
    EXPECT_LT(max_abs(irfft_seq(rfft_seq(t), 16), t), 1e-6);
    EXPECT_THROW(irfft_seq(rfft_seq(t), 15), ShapeError);

    ComplexSpectrum zero = rfft_seq(t);
    std::fill(zero.re.begin(), zero.re.end(), 0.0);
    std::fill(zero.im.begin(), zero.im.end(), 0.0);
    const SeqTensor z = irfft_seq(zero, 16);
    for (float v : z.data()) EXPECT_EQ(v, 0.0f);

    ComplexSpectrum dc = zero;
    for (std::size_t c = 0; c < dc.lanes(); ++c) dc.re[c] = 16.0;
    const SeqTensor ones = irfft_seq(dc, 16);
    for (float v : ones.data()) EXPECT_NEAR(v, 1.0f, 1e-6);
}

TEST(Spectral, ParsevalHolds) {
    std::mt19937_64 rng(18);
    for (std::size_t n : {5u, 8u, 31u, 64u}) {
        const SeqTensor t = ct::random_tensor(rng, n, 1, 2);
        const ComplexSpectrum s = rfft_seq(t);
        for (std::size_t c = 0; c < 2; ++c) {
            double time_e = 0.0, freq_e = 0.0;
            for (std::size_t i = 0; i < n; ++i) time_e += double(t.data()[i * 2 + c]) * t.data()[i * 2 + c];
            for (std::size_t k = 0; k < s.n_freqs; ++k) {
                const bool single = k == 0 || (n % 2 == 0 && k == n / 2);
                const double e = s.re[k * 2 + c] * s.re[k * 2 + c] + s.im[k * 2 + c] * s.im[k * 2 + c];
                freq_e += single ? e : 2 * e;
            }
            EXPECT_NEAR(freq_e, n * time_e, 1e-6 * n * time_e);
        }
    }
}

TEST(Scores, AlphaOneIsRawNorms) {
    std::mt19937_64 rng(19);
    const SeqTensor k = ct::random_tensor(rng, 9, 2, 2);
    const SeqTensor v = ct::random_tensor(rng, 9, 2, 2);
    const auto s = low_freq_scores(k, v, 1.0);
    for (std::size_t i = 0; i < 9; ++i) {
        double nk = 0, nv = 0;
        for (float x : k.row(i)) nk += double(x) * x;
        for (float x : v.row(i)) nv += double(x) * x;
        EXPECT_NEAR(s[i], 0.5 * (std::sqrt(nk) + std::sqrt(nv)), 1e-6);
    }
}

TEST(Scores, KeysEqualValues) {
    std::mt19937_64 rng(20);
    const SeqTensor k = ct::random_tensor(rng, 11, 1, 4);
    const auto both = low_freq_scores(k, k, 0.5);
    const auto ref = ct::naive_low_freq_scores(k, k, 0.5);
    for (std::size_t i = 0; i < 11; ++i) EXPECT_NEAR(both[i], ref[i], 1e-6);
}

TEST(Scores, MatchesComposedNaiveOracle) {
    std::mt19937_64 rng(21);
    const SeqTensor k = ct::random_tensor(rng, 12, 2, 4);
    const SeqTensor v = ct::random_tensor(rng, 12, 2, 4);
    const auto s = low_freq_scores(k, v, 0.5);
    const auto ref = ct::naive_low_freq_scores(k, v, 0.5);
    for (std::size_t i = 0; i < 12; ++i) EXPECT_NEAR(s[i], ref[i], 1e-6);
    EXPECT_THROW(low_freq_scores(k, ct::random_tensor(rng, 11, 2, 4), 0.5), ShapeError);
}

TEST(Rank, SingleLayerAggregateEqualsLayerOrder) {
    std::mt19937_64 rng(22);
    const ImportanceRanking r = rank_chunk(ct::random_chunk(rng, 1, 20, 2, 4));
    EXPECT_EQ(r.aggregate_order, r.per_layer_order[0]);
    EXPECT_NO_THROW(r.validate());
}

TEST(Rank, DominantTokenFirst) {
    std::mt19937_64 rng(23);
    KvChunk c = ct::random_chunk(rng, 3, 16, 2, 4);
    for (std::size_t l = 0; l < 3; ++l) {
        for (float& x : c.keys_raw[l].row(3)) x *= 10.0f;
        for (float& x : c.values[l].row(3)) x *= 10.0f;
    }
    const ImportanceRanking r = rank_chunk(c, 1.0);
    EXPECT_EQ(r.aggregate_order.front(), 3u);
    // same answer from the raw scores
    const std::vector<double> agg = r.aggregate_scores();
    EXPECT_EQ(std::max_element(agg.begin(), agg.end()) - agg.begin(), 3);
}

TEST(Rank, TiesGoToLowerIndex) {
    std::mt19937_64 rng(24);
    KvChunk c = ct::random_chunk(rng, 2, 8, 1, 2);
    for (std::size_t l = 0; l < 2; ++l) {
        std::copy(c.keys_raw[l].row(2).begin(), c.keys_raw[l].row(2).end(), c.keys_raw[l].row(6).begin());
        std::copy(c.values[l].row(2).begin(), c.values[l].row(2).end(), c.values[l].row(6).begin());
    }
    const ImportanceRanking r = rank_chunk(c, 1.0);
    const auto pos = [&](TokenIndex t) {
        return std::find(r.aggregate_order.begin(), r.aggregate_order.end(), t) - r.aggregate_order.begin();
    };
    EXPECT_EQ(pos(6), pos(2) + 1);
}

TEST(Ratio, BoundariesAndCount) {
    std::mt19937_64 rng(25);
    const ImportanceRanking r = rank_chunk(ct::random_chunk(rng, 2, 20, 1, 2));
    EXPECT_TRUE(indices_for_ratio(r, 0.0).empty());
    EXPECT_EQ(indices_for_ratio(r, 1.0).size(), 20u);
    EXPECT_EQ(indices_for_ratio(r, 0.15).size(), 3u);
    EXPECT_EQ(complement_for_ratio(r, 0.15).size(), 17u);
    EXPECT_THROW(indices_for_ratio(r, 1.5), InvalidParam);
    EXPECT_THROW(indices_for_ratio(r, -0.01), InvalidParam);
    const auto sel = indices_for_ratio(r, 0.4);
    EXPECT_TRUE(std::is_sorted(sel.begin(), sel.end()));
}

TEST(Ratio, PrefixMonotone) {
    std::mt19937_64 rng(26);
    for (int trial = 0; trial < 50; ++trial) {
        const ImportanceRanking r = rank_chunk(ct::random_chunk(rng, 2, 5 + rng() % 40, 1, 2));
        double r1 = ct::uniform(rng, 0, 1), r2 = ct::uniform(rng, 0, 1);
        if (r1 > r2) std::swap(r1, r2);
        const auto a = indices_for_ratio(r, r1);
        const auto b = indices_for_ratio(r, r2);
        ASSERT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));
    }
}

TEST(Rank, PositiveScalingInvariance) {
    std::mt19937_64 rng(27);
    for (int trial = 0; trial < 10; ++trial) {
        const KvChunk c = ct::random_chunk(rng, 2, 24, 2, 4);
        const ImportanceRanking base = rank_chunk(c);
        for (float scale : {0.01f, 3.0f, 1000.0f}) {
            KvChunk s = c;
            for (auto* ts : {&s.keys_raw, &s.values})
                for (SeqTensor& t : *ts)
                    for (float& x : t.data()) x *= scale;
            const ImportanceRanking rs = rank_chunk(s);
            EXPECT_EQ(rs.aggregate_order, base.aggregate_order);
            EXPECT_EQ(rs.per_layer_order, base.per_layer_order);
        }
    }
}

TEST(Jaccard, Basics) {
    const std::vector<TokenIndex> a{1, 2, 3}, b{2, 3, 4}, e{};
    EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
    EXPECT_DOUBLE_EQ(jaccard(e, e), 1.0);
    EXPECT_DOUBLE_EQ(jaccard(a, a), 1.0);
}
