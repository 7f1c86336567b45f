#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "cachetune/error.hpp"
#include "cachetune/tensor.hpp"
#include "oracles.hpp"

using namespace cachetune;
using cachetune::testing::random_tensor;

TEST(SeqTensor, RejectsOddHeadDim) {
    EXPECT_THROW(SeqTensor(4, 2, 3), ShapeError);
    EXPECT_THROW(SeqTensor(4, 0, 2), ShapeError);
    EXPECT_THROW(SeqTensor(2, 1, 2, std::vector<float>(3)), ShapeError);
}

TEST(SeqTensor, LayoutIsTokenHeadDim) {
    std::vector<float> v(2 * 2 * 4);
    std::iota(v.begin(), v.end(), 0.0f);
    const SeqTensor t(2, 2, 4, v);
    EXPECT_EQ(t.at(1, 0, 3), 11.0f);
    EXPECT_EQ(t.at(0, 1, 0), 4.0f);
    EXPECT_EQ(t.row(1)[0], 8.0f);
}

TEST(Slice, IdentityIndices) {
    std::mt19937_64 rng(1);
    const SeqTensor t = random_tensor(rng, 6, 2, 4);
    std::vector<TokenIndex> all(6);
    std::iota(all.begin(), all.end(), 0u);
    EXPECT_EQ(tensor_slice_tokens(t, all), t);
}

TEST(Slice, SingleRow) {
    std::mt19937_64 rng(2);
    const SeqTensor t = random_tensor(rng, 4, 1, 2);
    const std::vector<TokenIndex> idx{2};
    const SeqTensor s = tensor_slice_tokens(t, idx);
    ASSERT_EQ(s.n_tokens(), 1u);
    EXPECT_TRUE(std::equal(s.row(0).begin(), s.row(0).end(), t.row(2).begin()));
}

TEST(Slice, MatchesDirectIndexing) {
    std::mt19937_64 rng(3);
    const SeqTensor t = random_tensor(rng, 8, 2, 4);
    const std::vector<TokenIndex> idx{1, 5, 6};
    const SeqTensor s = tensor_slice_tokens(t, idx);
    for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t h = 0; h < 2; ++h)
            for (std::size_t d = 0; d < 4; ++d) EXPECT_EQ(s.at(i, h, d), t.at(idx[i], h, d));
}

TEST(Slice, OutOfRangeThrows) {
    const SeqTensor t(4, 1, 2);
    const std::vector<TokenIndex> idx{4};
    EXPECT_THROW(tensor_slice_tokens(t, idx), IndexError);
}

TEST(Scatter, RestoresOwnSlice) {
    std::mt19937_64 rng(4);
    const SeqTensor t = random_tensor(rng, 10, 2, 2);
    const std::vector<TokenIndex> idx{0, 3, 9};
    SeqTensor damaged = t;
    for (TokenIndex i : idx) std::fill(damaged.row(i).begin(), damaged.row(i).end(), -7.0f);
    EXPECT_EQ(tensor_scatter_tokens(damaged, tensor_slice_tokens(t, idx), idx), t);
}

TEST(Scatter, EmptyIsNoop) {
    std::mt19937_64 rng(5);
    const SeqTensor t = random_tensor(rng, 5, 1, 2);
    EXPECT_EQ(tensor_scatter_tokens(t, SeqTensor(0, 1, 2), {}), t);
}

TEST(Scatter, Errors) {
    const SeqTensor dst(4, 1, 2);
    const std::vector<TokenIndex> dup{1, 1};
    EXPECT_THROW(tensor_scatter_tokens(dst, SeqTensor(2, 1, 2), dup), InvalidPlan);
    const std::vector<TokenIndex> one{1};
    EXPECT_THROW(tensor_scatter_tokens(dst, SeqTensor(1, 2, 2), one), ShapeError);
    const std::vector<TokenIndex> oob{4};
    EXPECT_THROW(tensor_scatter_tokens(dst, SeqTensor(1, 1, 2), oob), IndexError);
}

// Any partition of the token axis reassembles bit-exactly.
TEST(Scatter, PartitionReassemblyProperty) {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng() % 32;
        const SeqTensor t = random_tensor(rng, n, 1 + rng() % 3, 2 * (1 + rng() % 3));
        std::vector<TokenIndex> a, b;
        for (TokenIndex i = 0; i < n; ++i) (rng() % 2 ? a : b).push_back(i);
        std::shuffle(a.begin(), a.end(), rng);
        SeqTensor out(n, t.n_heads(), t.head_dim());
        out = tensor_scatter_tokens(out, tensor_slice_tokens(t, a), a);
        out = tensor_scatter_tokens(out, tensor_slice_tokens(t, b), b);
        ASSERT_EQ(out, t) << "trial " << trial;
    }
}

TEST(KvChunk, ValidateRejectsMixedGeometry) {
    KvChunk c;
    c.keys_raw = {SeqTensor(4, 1, 2), SeqTensor(4, 1, 2)};
    c.values = {SeqTensor(4, 1, 2), SeqTensor(3, 1, 2)};
    EXPECT_THROW(c.validate(), ShapeError);
    c.values[1] = SeqTensor(4, 1, 2);
    EXPECT_NO_THROW(c.validate());
}
