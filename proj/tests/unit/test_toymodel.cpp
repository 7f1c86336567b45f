#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "cachetune/error.hpp"
#include "cachetune/pipesim.hpp"
#include "cachetune/rope.hpp"
#include "cachetune/toymodel.hpp"
#include "oracles.hpp"

using namespace cachetune;
namespace ct = cachetune::testing;

namespace {

ToyModel model_with_seed(std::uint64_t seed, bool mlp = false) {
    ToyModelConfig c;
    c.seed = seed;
    c.use_mlp = mlp;
    return ToyModel(c);
}

double max_abs(const SeqTensor& a, const SeqTensor& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a.data()[i]) - b.data()[i]));
    return m;
}

std::vector<std::int64_t> iota_pos(std::size_t n, std::int64_t start = 0) {
    std::vector<std::int64_t> p(n);
    std::iota(p.begin(), p.end(), start);
    return p;
}

ReusableChunk make_chunk(const ToyModel& m, std::size_t n, std::uint64_t seed) {
    ReusableChunk c;
    c.tokens = synthetic_tokens(n, m.config().vocab_size, seed);
    c.kv = encode_chunk_isolated(m, c.tokens, "c" + std::to_string(seed));
    c.ranking = rank_chunk(c.kv);
    return c;
}

}  // namespace

TEST(ToyModel, WeightsAreSeeded) {
    const ToyModel a = model_with_seed(1), b = model_with_seed(1), c = model_with_seed(2);
    EXPECT_EQ(a.embedding(), b.embedding());
    EXPECT_NE(a.embedding(), c.embedding());
    EXPECT_EQ(a.layer(3).wv, b.layer(3).wv);
    ToyModelConfig bad;
    bad.head_dim = 5;
    EXPECT_THROW(ToyModel{bad}, InvalidParam);
}

TEST(FullPrefill, SingleTokenAttendsToItself) {
    const ToyModel m = model_with_seed(3);
    const std::vector<TokenId> t{17};
    const PrefillResult r = full_prefill(m, t);
    for (std::size_t l = 0; l < 4; ++l)
        for (std::size_t h = 0; h < 2; ++h) EXPECT_DOUBLE_EQ(r.attention.at(l, h, 0, 0), 1.0);
}

TEST(FullPrefill, DeterministicRowsSumToOneAndCausal) {
    const ToyModel m = model_with_seed(4);
    const std::vector<TokenId> t = synthetic_tokens(40, 256, 5);
    const PrefillResult a = full_prefill(m, t), b = full_prefill(m, t);
    EXPECT_EQ(a.logits, b.logits);
    EXPECT_EQ(a.attention.weights, b.attention.weights);
    for (std::size_t l = 0; l < 4; ++l) {
        for (std::size_t h = 0; h < 2; ++h) {
            for (std::size_t q = 0; q < 40; ++q) {
                const auto row = a.attention.row(l, h, q);
                double sum = 0;
                for (std::size_t k = 0; k < 40; ++k) {
                    EXPECT_GE(row[k], 0.0);
                    if (k > q) EXPECT_EQ(row[k], 0.0);
                    sum += row[k];
                }
                EXPECT_NEAR(sum, 1.0, 1e-5);
            }
        }
    }
    EXPECT_THROW(full_prefill(m, std::vector<TokenId>{256}), InvalidParam);
}

TEST(EncodeIsolated, LayerOneDeferredRopeEquivalence) {
    const ToyModel m = model_with_seed(6);
    const std::vector<TokenId> prefix = synthetic_tokens(13, 256, 7);
    const std::vector<TokenId> chunk = synthetic_tokens(20, 256, 8);
    const KvChunk kv = encode_chunk_isolated(m, chunk);
    std::vector<TokenId> prompt = prefix;
    prompt.insert(prompt.end(), chunk.begin(), chunk.end());
    const PrefillResult full = full_prefill(m, prompt);
    const SeqTensor rotated = rope_apply(kv.keys_raw[0], iota_pos(20, 13), m.config().rope());
    std::vector<TokenIndex> rows(20);
    std::iota(rows.begin(), rows.end(), 13u);
    EXPECT_LT(max_abs(rotated, tensor_slice_tokens(full.keys[0], rows)), 1e-6);
    // deeper layers miss the cross-chunk context
    EXPECT_GT(max_abs(kv.values[2], tensor_slice_tokens(full.values[2], rows)), 0.0);
}

TEST(EncodeIsolated, SingleTokenMatchesFullPrefill) {
    const ToyModel m = model_with_seed(9);
    const std::vector<TokenId> t{42};
    const KvChunk kv = encode_chunk_isolated(m, t);
    const PrefillResult full = full_prefill(m, t);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(kv.keys_raw[l], full.keys[l]);  // position 0: rotation is the identity
        EXPECT_EQ(kv.values[l], full.values[l]);
    }
}

TEST(SelectivePrefill, FullRecomputeMatchesFullPrefill) {
    for (bool mlp : {false, true}) {
        const ToyModel m = model_with_seed(10, mlp);
        std::vector<ReusableChunk> chunks{make_chunk(m, 24, 1), make_chunk(m, 17, 2)};
        const std::vector<TokenId> suffix = synthetic_tokens(5, 256, 3);
        std::vector<TokenId> prompt;
        for (const auto& c : chunks) prompt.insert(prompt.end(), c.tokens.begin(), c.tokens.end());
        prompt.insert(prompt.end(), suffix.begin(), suffix.end());
        const PrefillResult full = full_prefill(m, prompt, 41);
        const SelectivePrefillResult sel = selective_prefill(m, chunks, suffix, 1.0);
        ASSERT_EQ(sel.logits.size(), full.logits.size());
        for (std::size_t i = 0; i < full.logits.size(); ++i)
            for (std::size_t v = 0; v < 256; ++v) EXPECT_NEAR(sel.logits[i][v], full.logits[i][v], 1e-5);
        EXPECT_LT(attention_deviation(full.attention, sel.attention), 1e-5);
    }
}

TEST(SelectivePrefill, NoRecomputeIsDeferredRopeOfStoredKv) {
    const ToyModel m = model_with_seed(11);
    const std::vector<ReusableChunk> chunks{make_chunk(m, 30, 4)};
    const SelectivePrefillResult r = selective_prefill(m, chunks, {}, 0.0);
    for (std::size_t l = 0; l < 4; ++l) {
        EXPECT_EQ(r.keys[l], rope_apply(chunks[0].kv.keys_raw[l], iota_pos(30), m.config().rope()));
        EXPECT_EQ(r.values[l], chunks[0].kv.values[l]);
    }
    EXPECT_TRUE(r.recomputed.empty());
}

TEST(SelectivePrefill, NoRecomputeWithSuffixLayerOneKeys) {
    const ToyModel m = model_with_seed(12);
    const std::vector<ReusableChunk> chunks{make_chunk(m, 16, 5), make_chunk(m, 16, 6)};
    const std::vector<TokenId> suffix = synthetic_tokens(4, 256, 7);
    std::vector<TokenId> prompt;
    for (const auto& c : chunks) prompt.insert(prompt.end(), c.tokens.begin(), c.tokens.end());
    prompt.insert(prompt.end(), suffix.begin(), suffix.end());
    const PrefillResult full = full_prefill(m, prompt);
    const SelectivePrefillResult sel = selective_prefill(m, chunks, suffix, 0.0);
    EXPECT_LT(max_abs(sel.keys[0], full.keys[0]), 1e-6);
}

TEST(Fuse, FullPrefillOracleSplit) {
    const ToyModel m = model_with_seed(13);
    const ReusableChunk first = make_chunk(m, 12, 7), second = make_chunk(m, 20, 8);
    std::vector<TokenId> prompt = first.tokens;
    prompt.insert(prompt.end(), second.tokens.begin(), second.tokens.end());
    const PrefillResult full = full_prefill(m, prompt);
    std::vector<TokenIndex> rows(20);
    std::iota(rows.begin(), rows.end(), 12u);
    std::mt19937_64 rng(13);
    for (std::size_t l = 0; l < 4; ++l) {
        std::vector<TokenIndex> rec, keep;
        for (TokenIndex t = 0; t < 20; ++t) (rng() % 3 == 0 ? rec : keep).push_back(t);
        std::vector<TokenIndex> rec_global;
        for (TokenIndex t : rec) rec_global.push_back(t + 12);
        const FusedKv f = fuse_layer(tensor_slice_tokens(second.kv.keys_raw[l], keep),
                                     tensor_slice_tokens(second.kv.values[l], keep), keep,
                                     tensor_slice_tokens(full.keys[l], rec_global),
                                     tensor_slice_tokens(full.values[l], rec_global), rec, iota_pos(20, 12),
                                     m.config().rope(), 20);
        for (TokenIndex t : rec) {
            for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(f.values.row(t)[i], full.values[l].row(t + 12)[i]);
        }
        for (TokenIndex t : keep) {
            for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(f.values.row(t)[i], second.kv.values[l].row(t)[i]);
        }
    }
}

TEST(SelectivePrefill, RankingMismatch) {
    const ToyModel m = model_with_seed(14);
    std::vector<ReusableChunk> chunks{make_chunk(m, 10, 9)};
    chunks[0].ranking = identity_ranking(11, 4);
    EXPECT_THROW(selective_prefill(m, chunks, {}, 0.5), InvalidPlan);
    chunks[0].ranking = identity_ranking(10, 4);
    const std::vector<std::vector<TokenIndex>> unsorted{{3, 1}};
    EXPECT_THROW(selective_prefill(m, chunks, {}, unsorted), InvalidPlan);
}

TEST(AttentionDeviation, Basics) {
    AttentionRecord a{1, 1, 2, 2, {0.5, 0.5, 1.0, 0.0}};
    AttentionRecord b{1, 1, 2, 2, {0.25, 0.75, 0.5, 0.5}};
    EXPECT_EQ(attention_deviation(a, a), 0.0);
    EXPECT_DOUBLE_EQ(attention_deviation(a, b), attention_deviation(b, a));
    EXPECT_NEAR(attention_deviation(a, b), std::sqrt(0.0625 + 0.0625 + 0.25 + 0.25), 1e-15);
    AttentionRecord c{1, 2, 1, 2, {0, 0, 0, 0}};
    EXPECT_THROW(attention_deviation(a, c), ShapeError);
}

TEST(SpectrumReport, Normalized) {
    const ToyModel m = model_with_seed(15);
    const SpectrumReport r = spectrum_report(make_chunk(m, 64, 1).kv);
    EXPECT_NEAR(std::accumulate(r.key_deciles.begin(), r.key_deciles.end(), 0.0), 1.0, 1e-9);
    EXPECT_NEAR(std::accumulate(r.value_deciles.begin(), r.value_deciles.end(), 0.0), 1.0, 1e-9);
}

TEST(SpectrumReport, ConstantChunkIsAllDc) {
    KvChunk c;
    c.keys_raw = {SeqTensor::filled(32, 2, 4, 1.5f)};
    c.values = {SeqTensor::filled(32, 2, 4, -0.25f)};
    const SpectrumReport r = spectrum_report(c);
    EXPECT_NEAR(r.key_deciles[0], 1.0, 1e-12);
    EXPECT_NEAR(r.value_deciles[0], 1.0, 1e-12);
}

TEST(SpectrumReport, WhiteNoiseIsFlat) {
    std::mt19937_64 rng(16);
    std::array<double, 10> mean{};
    for (int s = 0; s < 20; ++s) {
        const SpectrumReport r = spectrum_report(ct::random_chunk(rng, 2, 200, 2, 4));
        for (std::size_t i = 0; i < 10; ++i) mean[i] += r.key_deciles[i] / 20;
    }
    for (double v : mean) {
        EXPECT_GE(v, 0.05);
        EXPECT_LE(v, 0.15);
    }
}

TEST(SelectTokens, BudgetsAreEqual) {
    const ToyModel m = model_with_seed(17);
    const ReusableChunk c = make_chunk(m, 64, 3);
    for (auto s : {SelectionStrategy::lowfreq, SelectionStrategy::highfreq, SelectionStrategy::random}) {
        const auto idx = select_tokens(c.kv, c.ranking, s, 0.15, 1);
        EXPECT_EQ(idx.size(), 10u) << to_string(s);
        EXPECT_TRUE(std::is_sorted(idx.begin(), idx.end()));
    }
    EXPECT_TRUE(select_tokens(c.kv, c.ranking, SelectionStrategy::none, 0.15, 1).empty());
    EXPECT_EQ(select_tokens(c.kv, c.ranking, SelectionStrategy::full, 0.15, 1).size(), 64u);
    EXPECT_EQ(select_tokens(c.kv, c.ranking, SelectionStrategy::lowfreq, 0.15, 1), indices_for_ratio(c.ranking, 0.15));
    EXPECT_EQ(parse_selection_strategy("highfreq"), SelectionStrategy::highfreq);
    EXPECT_THROW(parse_selection_strategy("best"), InvalidParam);
}

// Seeded statistical property: low-frequency recompute recovers the suffix
// attention better than plain reuse on most seeds.
TEST(AttentionRecovery, LowFreqBeatsNoRecompute) {
    AttentionExperimentConfig cfg;
    const std::vector<SelectionStrategy> s{SelectionStrategy::lowfreq, SelectionStrategy::none,
                                           SelectionStrategy::full};
    int wins = 0;
    double low = 0, none = 0;
    for (std::uint64_t seed : kCommittedSeeds) {
        const auto d = run_attention_trial(seed, s, cfg);
        wins += d[0] < d[1];
        low += d[0];
        none += d[1];
        EXPECT_LE(d[2], 1e-5);
    }
    EXPECT_GE(wins, 20);
    EXPECT_LT(low, none);
}
