#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cachetune/rope.hpp"
#include "cachetune/spectral.hpp"
#include "cachetune/tensor.hpp"

namespace cachetune {

using TokenId = std::uint32_t;

struct ToyModelConfig {
    std::uint64_t seed = 0;
    std::size_t n_layers = 4;
    std::size_t n_heads = 2;
    std::size_t head_dim = 8;
    std::size_t vocab_size = 256;
    double rope_base = 10000.0;
    RopePairing rope_pairing = RopePairing::adjacent;
    bool use_mlp = false;

    std::size_t hidden_dim() const { return n_heads * head_dim; }
    RopeParams rope() const { return RopeParams{rope_base, head_dim, 1.0, rope_pairing}; }
    void validate() const;
};

// Seeded causal transformer with fixed random weights: pre-norm attention
// blocks (optionally with an MLP), rotary keys and queries, and a separate
// unembedding matrix. Everything runs in 64-bit except the per-layer KV buffers,
// which are 32-bit like the cache pool.
class ToyModel {
public:
    explicit ToyModel(const ToyModelConfig& config);

    const ToyModelConfig& config() const { return config_; }

    struct Layer {
        std::vector<double> wq, wk, wv, wo;  // [hidden][hidden], row-major [in][out]
        std::vector<double> w1, w2;          // MLP: [hidden][4*hidden], [4*hidden][hidden]
    };

    const std::vector<double>& embedding() const { return embedding_; }
    const Layer& layer(std::size_t l) const { return layers_[l]; }
    const std::vector<double>& unembedding() const { return unembedding_; }

private:
    ToyModelConfig config_;
    std::vector<double> embedding_;    // [vocab][hidden]
    std::vector<Layer> layers_;
    std::vector<double> unembedding_;  // [hidden][vocab]
};

// Attention of the query rows over every key slot, per layer and head,
// laid out [layer][head][query][key]. Masked slots hold exactly 0.
struct AttentionRecord {
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t n_queries = 0;
    std::size_t n_keys = 0;
    std::vector<double> weights;

    double at(std::size_t l, std::size_t h, std::size_t q, std::size_t k) const {
        return weights[((l * n_heads + h) * n_queries + q) * n_keys + k];
    }
    std::span<const double> row(std::size_t l, std::size_t h, std::size_t q) const {
        return {weights.data() + ((l * n_heads + h) * n_queries + q) * n_keys, n_keys};
    }
};

struct PrefillResult {
    std::vector<SeqTensor> keys;    // per layer, post-RoPE
    std::vector<SeqTensor> values;  // per layer
    AttentionRecord attention;
    std::vector<std::vector<double>> logits;  // one row per query token
};

// Standard causal forward over `tokens`. Rows from `query_start` on are the
// queries whose attention and logits are recorded.
PrefillResult full_prefill(const ToyModel& model, std::span<const TokenId> tokens, std::size_t query_start = 0);

// Forward over the chunk alone at positions 0..N-1, keeping pre-RoPE keys.
KvChunk encode_chunk_isolated(const ToyModel& model, std::span<const TokenId> tokens, std::string chunk_id = {});

// A precomputed chunk ready for reuse.
struct ReusableChunk {
    std::vector<TokenId> tokens;
    KvChunk kv;
    ImportanceRanking ranking;
};

struct SelectivePrefillResult {
    std::vector<SeqTensor> keys;    // fused, post-RoPE, per layer over all tokens
    std::vector<SeqTensor> values;
    AttentionRecord attention;      // suffix queries
    std::vector<std::vector<double>> logits;  // suffix rows
    std::vector<TokenIndex> recomputed;       // global indices forwarded through the model
};

// Online path: chunks are concatenated in order, then the suffix. Tokens in
// recompute_sets[j] (chunk-local) and every suffix token are forwarded through
// all layers; at each layer their attention spans the fused KV, in which the
// remaining chunk tokens contribute their stored KV with keys rotated to their
// global positions.
SelectivePrefillResult selective_prefill(const ToyModel& model, std::span<const ReusableChunk> chunks,
                                         std::span<const TokenId> suffix,
                                         std::span<const std::vector<TokenIndex>> recompute_sets);

// Same, selecting ceil(r * N_j) tokens per chunk from its aggregate ranking.
SelectivePrefillResult selective_prefill(const ToyModel& model, std::span<const ReusableChunk> chunks,
                                         std::span<const TokenId> suffix, double r);

// Mean over layers and heads of the Frobenius norm of a - b.
double attention_deviation(const AttentionRecord& a, const AttentionRecord& b);

struct SpectrumReport {
    std::array<double, 10> key_deciles{};
    std::array<double, 10> value_deciles{};
};

// Share of sequence-axis spectral energy per frequency decile, pooled over
// layers, heads and dims. Bin k of n_bins falls in decile floor(10 k / n_bins);
// bins other than DC and Nyquist count twice (their mirrored partners).
SpectrumReport spectrum_report(const KvChunk& chunk);

enum class SelectionStrategy { lowfreq, highfreq, random, none, full };

std::string_view to_string(SelectionStrategy s);
SelectionStrategy parse_selection_strategy(std::string_view text);

// Chunk-local recompute set of size ceil(r * N) (N for `full`, 0 for `none`),
// ascending. highfreq ranks tokens by the norm of their high-pass residual.
std::vector<TokenIndex> select_tokens(const KvChunk& chunk, const ImportanceRanking& ranking,
                                      SelectionStrategy strategy, double r, std::uint64_t rng_seed);

// Uniform random prompt of `n` token ids.
std::vector<TokenId> synthetic_tokens(std::size_t n, std::size_t vocab_size, std::uint64_t seed);

struct AttentionExperimentConfig {
    ToyModelConfig model;
    std::size_t n_chunks = 3;
    std::size_t chunk_tokens = 64;
    std::size_t suffix_tokens = 8;
    double r = 0.15;
    double alpha = kDefaultAlpha;
};

// One seeded trial: builds the model and prompt from `seed`, runs the full
// prefill oracle and one selective prefill per strategy at equal budget, and
// returns the suffix attention deviation for each strategy in order.
std::vector<double> run_attention_trial(std::uint64_t seed, std::span<const SelectionStrategy> strategies,
                                        const AttentionExperimentConfig& cfg);

// Fixed seed list for the seeded attention-recovery experiments.
inline constexpr std::array<std::uint64_t, 25> kCommittedSeeds = {
    3,   7,   11,  19,  23,  31,  42,  57,  64,  77,  89,  101, 128,
    137, 149, 163, 181, 199, 211, 227, 239, 251, 263, 277, 293,
};

// Wall-clock cost of forwarding one token through one layer, measured by
// a full forward over `n_tokens` tokens.
double time_recompute_per_token(const ToyModel& model, std::size_t n_tokens, std::size_t repeats = 3);

// Wall-clock cost of one layer's fusion step on an n-token buffer with
// nothing recomputed.
double time_layer_overhead(const ToyModel& model, std::size_t n_tokens, std::size_t repeats = 3);

}  // namespace cachetune
