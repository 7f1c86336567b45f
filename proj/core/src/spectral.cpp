#include "cachetune/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "cachetune/error.hpp"
#include "cachetune/fft.hpp"

namespace cachetune {

namespace {

// Guards floor/ceil against products like 0.15 * 20 landing a hair above 3.
constexpr double kRatioSlack = 1e-9;

void check_ratio(double v, const char* what) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidParam(std::string(what) + " must lie in [0, 1], got " + std::to_string(v));
    }
}

double row_norm(std::span<const double> row) {
    double acc = 0.0;
    for (double v : row) acc += v * v;
    return std::sqrt(acc);
}

// Low-pass reconstruction of a tensor, kept in 64-bit.
std::vector<double> lowpass_reconstruct(const SeqTensor& t, double alpha, RealFft& fft) {
    const std::size_t n = t.n_tokens();
    const std::size_t lanes = t.row_size();
    const std::size_t bins = n / 2 + 1;
    const std::size_t cutoff = lowpass_cutoff(n, alpha);

    std::vector<double> lane(n);
    std::vector<double> rec(n);
    std::vector<std::complex<double>> spec(bins);
    std::vector<double> out(n * lanes);
    for (std::size_t c = 0; c < lanes; ++c) {
        for (std::size_t i = 0; i < n; ++i) lane[i] = t.data()[i * lanes + c];
        fft.forward(lane, spec);
        for (std::size_t k = cutoff; k < bins; ++k) spec[k] = {0.0, 0.0};
        fft.inverse(spec, rec);
        for (std::size_t i = 0; i < n; ++i) out[i * lanes + c] = rec[i];
    }
    return out;
}

}  // namespace

std::size_t lowpass_cutoff(std::size_t n_tokens, double alpha) {
    check_ratio(alpha, "alpha");
    const std::size_t bins = n_tokens / 2 + 1;
    const auto c = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(bins) + kRatioSlack));
    return std::min(c, bins);
}

std::size_t selection_count(std::size_t n_tokens, double r) {
    check_ratio(r, "ratio");
    const double raw = std::ceil(r * static_cast<double>(n_tokens) - kRatioSlack);
    return std::min(static_cast<std::size_t>(std::max(raw, 0.0)), n_tokens);
}

ComplexSpectrum rfft_seq(const SeqTensor& t) {
    const std::size_t n = t.n_tokens();
    if (n == 0) {
        throw ShapeError("rfft_seq: tensor has no tokens");
    }
    ComplexSpectrum s;
    s.n_freqs = n / 2 + 1;
    s.n_heads = t.n_heads();
    s.head_dim = t.head_dim();
    s.origin_len = n;
    const std::size_t lanes = s.lanes();
    s.re.assign(s.n_freqs * lanes, 0.0);
    s.im.assign(s.n_freqs * lanes, 0.0);

    RealFft fft(n);
    std::vector<double> lane(n);
    std::vector<std::complex<double>> spec(s.n_freqs);
    for (std::size_t c = 0; c < lanes; ++c) {
        for (std::size_t i = 0; i < n; ++i) lane[i] = t.data()[i * lanes + c];
        fft.forward(lane, spec);
        for (std::size_t k = 0; k < s.n_freqs; ++k) {
            s.re[k * lanes + c] = spec[k].real();
            s.im[k * lanes + c] = spec[k].imag();
        }
    }
    return s;
}

ComplexSpectrum lowpass(const ComplexSpectrum& s, double alpha) {
    ComplexSpectrum out = s;
    const std::size_t cutoff = lowpass_cutoff(s.origin_len, alpha);
    const std::size_t lanes = s.lanes();
    for (std::size_t k = cutoff; k < s.n_freqs; ++k) {
        std::fill_n(out.re.begin() + static_cast<std::ptrdiff_t>(k * lanes), lanes, 0.0);
        std::fill_n(out.im.begin() + static_cast<std::ptrdiff_t>(k * lanes), lanes, 0.0);
    }
    return out;
}

SeqTensor irfft_seq(const ComplexSpectrum& s, std::size_t n) {
    if (n != s.origin_len || s.n_freqs != n / 2 + 1) {
        throw ShapeError("irfft_seq: n = " + std::to_string(n) + " does not match spectrum origin length " +
                         std::to_string(s.origin_len));
    }
    const std::size_t lanes = s.lanes();
    SeqTensor out(n, s.n_heads, s.head_dim);
    RealFft fft(n);
    std::vector<std::complex<double>> spec(s.n_freqs);
    std::vector<double> lane(n);
    for (std::size_t c = 0; c < lanes; ++c) {
        for (std::size_t k = 0; k < s.n_freqs; ++k) {
            spec[k] = {s.re[k * lanes + c], s.im[k * lanes + c]};
        }
        fft.inverse(spec, lane);
        for (std::size_t i = 0; i < n; ++i) {
            out.data()[i * lanes + c] = static_cast<float>(lane[i]);
        }
    }
    return out;
}

std::vector<double> low_freq_scores(const SeqTensor& keys, const SeqTensor& values, double alpha) {
    if (keys.n_tokens() != values.n_tokens() || !keys.same_geometry(values)) {
        throw ShapeError("low_freq_scores: keys and values must share (N, H, D)");
    }
    if (keys.n_tokens() == 0) {
        throw ShapeError("low_freq_scores: empty tensors");
    }
    check_ratio(alpha, "alpha");
    const std::size_t n = keys.n_tokens();
    const std::size_t lanes = keys.row_size();
    RealFft fft(n);
    const std::vector<double> k_rec = lowpass_reconstruct(keys, alpha, fft);
    const std::vector<double> v_rec = lowpass_reconstruct(values, alpha, fft);

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sk = row_norm({k_rec.data() + i * lanes, lanes});
        const double sv = row_norm({v_rec.data() + i * lanes, lanes});
        scores[i] = 0.5 * (sk + sv);
    }
    return scores;
}

std::vector<TokenIndex> order_by_score(std::span<const double> scores) {
    std::vector<TokenIndex> order(scores.size());
    std::iota(order.begin(), order.end(), TokenIndex{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](TokenIndex a, TokenIndex b) { return scores[a] > scores[b]; });
    return order;
}

std::vector<double> ImportanceRanking::aggregate_scores() const {
    std::vector<double> mean(n_tokens, 0.0);
    if (per_layer_scores.empty()) return mean;
    for (const auto& layer : per_layer_scores) {
        for (std::size_t i = 0; i < n_tokens; ++i) mean[i] += layer[i];
    }
    const double inv = 1.0 / static_cast<double>(per_layer_scores.size());
    for (double& v : mean) v *= inv;
    return mean;
}

void ImportanceRanking::validate() const {
    auto is_permutation = [this](std::span<const TokenIndex> order) {
        if (order.size() != n_tokens) return false;
        std::vector<bool> seen(n_tokens, false);
        for (TokenIndex t : order) {
            if (t >= n_tokens || seen[t]) return false;
            seen[t] = true;
        }
        return true;
    };
    if (per_layer_order.size() != per_layer_scores.size()) {
        throw InvalidParam("ImportanceRanking: per-layer orders and scores disagree on L");
    }
    for (std::size_t l = 0; l < per_layer_order.size(); ++l) {
        if (per_layer_scores[l].size() != n_tokens || !is_permutation(per_layer_order[l])) {
            throw InvalidParam("ImportanceRanking: layer " + std::to_string(l) + " order is not a permutation");
        }
    }
    if (!is_permutation(aggregate_order)) {
        throw InvalidParam("ImportanceRanking: aggregate order is not a permutation");
    }
}

ImportanceRanking rank_chunk(const KvChunk& chunk, double alpha) {
    chunk.validate();
    check_ratio(alpha, "alpha");
    ImportanceRanking ranking;
    ranking.alpha = alpha;
    ranking.n_tokens = chunk.n_tokens();
    for (std::size_t l = 0; l < chunk.n_layers(); ++l) {
        ranking.per_layer_scores.push_back(low_freq_scores(chunk.keys_raw[l], chunk.values[l], alpha));
        ranking.per_layer_order.push_back(order_by_score(ranking.per_layer_scores.back()));
    }
    ranking.aggregate_order = order_by_score(ranking.aggregate_scores());
    return ranking;
}

ImportanceRanking identity_ranking(std::size_t n_tokens, std::size_t n_layers) {
    ImportanceRanking ranking;
    ranking.n_tokens = n_tokens;
    std::vector<TokenIndex> order(n_tokens);
    std::iota(order.begin(), order.end(), TokenIndex{0});
    ranking.per_layer_scores.assign(n_layers, std::vector<double>(n_tokens, 0.0));
    ranking.per_layer_order.assign(n_layers, order);
    ranking.aggregate_order = std::move(order);
    return ranking;
}

std::vector<TokenIndex> indices_for_ratio(const ImportanceRanking& ranking, double r) {
    const std::size_t k = selection_count(ranking.n_tokens, r);
    std::vector<TokenIndex> picked(ranking.aggregate_order.begin(),
                                   ranking.aggregate_order.begin() + static_cast<std::ptrdiff_t>(k));
    std::ranges::sort(picked);
    return picked;
}

std::vector<TokenIndex> complement_for_ratio(const ImportanceRanking& ranking, double r) {
    const std::size_t k = selection_count(ranking.n_tokens, r);
    std::vector<bool> selected(ranking.n_tokens, false);
    for (std::size_t i = 0; i < k; ++i) selected[ranking.aggregate_order[i]] = true;
    std::vector<TokenIndex> rest;
    rest.reserve(ranking.n_tokens - k);
    for (TokenIndex t = 0; t < ranking.n_tokens; ++t) {
        if (!selected[t]) rest.push_back(t);
    }
    return rest;
}

double jaccard(std::span<const TokenIndex> a, std::span<const TokenIndex> b) {
    std::vector<TokenIndex> sa(a.begin(), a.end());
    std::vector<TokenIndex> sb(b.begin(), b.end());
    std::ranges::sort(sa);
    std::ranges::sort(sb);
    std::vector<TokenIndex> inter;
    std::vector<TokenIndex> uni;
    std::ranges::set_intersection(sa, sb, std::back_inserter(inter));
    std::ranges::set_union(sa, sb, std::back_inserter(uni));
    if (uni.empty()) return 1.0;
    return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

}  // namespace cachetune
