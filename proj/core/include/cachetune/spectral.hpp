#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cachetune/tensor.hpp"

namespace cachetune {

inline constexpr double kDefaultAlpha = 0.5;

// Forward real FFT of every (head, dim) lane along the token axis.
ComplexSpectrum rfft_seq(const SeqTensor& t);

// Keeps bins k < floor(alpha * n_freqs); zeroes the rest.
ComplexSpectrum lowpass(const ComplexSpectrum& s, double alpha);

// Inverse of rfft_seq; n must equal s.origin_len.
SeqTensor irfft_seq(const ComplexSpectrum& s, std::size_t n);

// Number of bins kept by lowpass for a given sequence length.
std::size_t lowpass_cutoff(std::size_t n_tokens, double alpha);

// Number of tokens selected at ratio r: ceil(r * n), clamped to [0, n].
std::size_t selection_count(std::size_t n_tokens, double r);

// s_i = (||K~_i|| + ||V~_i||) / 2 over the flattened (H*D) row, where K~ and V~
// are the low-pass reconstructions along the token axis.
std::vector<double> low_freq_scores(const SeqTensor& keys, const SeqTensor& values, double alpha);

// Token indices sorted by score, descending, lower index first on ties.
std::vector<TokenIndex> order_by_score(std::span<const double> scores);

struct ImportanceRanking {
    double alpha = kDefaultAlpha;
    std::size_t n_tokens = 0;
    std::vector<std::vector<double>> per_layer_scores;
    std::vector<std::vector<TokenIndex>> per_layer_order;
    std::vector<TokenIndex> aggregate_order;

    std::size_t n_layers() const { return per_layer_scores.size(); }

    // Mean score over layers, per token.
    std::vector<double> aggregate_scores() const;

    // Throws InvalidParam if an order is not a permutation of [0, N) or the
    // layer count disagrees.
    void validate() const;
};

ImportanceRanking rank_chunk(const KvChunk& chunk, double alpha = kDefaultAlpha);

// Ranking whose aggregate and per-layer orders are 0, 1, ..., N-1 and whose
// scores are all zero; stands in for synthetic requests with no KV content.
ImportanceRanking identity_ranking(std::size_t n_tokens, std::size_t n_layers);

// First ceil(r*N) entries of the aggregate order, returned ascending.
std::vector<TokenIndex> indices_for_ratio(const ImportanceRanking& ranking, double r);

// [0, N) minus indices_for_ratio, ascending.
std::vector<TokenIndex> complement_for_ratio(const ImportanceRanking& ranking, double r);

// Jaccard overlap |A n B| / |A u B| of two index sets (1 when both empty).
double jaccard(std::span<const TokenIndex> a, std::span<const TokenIndex> b);

}  // namespace cachetune
