#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cachetune/error.hpp"
#include "cachetune/rope.hpp"
#include "oracles.hpp"

using namespace cachetune;
namespace ct = cachetune::testing;

TEST(Rope, PositionZeroIsIdentity) {
    std::mt19937_64 rng(31);
    const SeqTensor k = ct::random_tensor(rng, 5, 2, 8);
    const std::vector<std::int64_t> pos(5, 0);
    EXPECT_EQ(rope_apply(k, pos, RopeParams{}), k);
}

TEST(Rope, UnitRotation) {
    const SeqTensor k(1, 1, 2, {1.0f, 0.0f});
    const std::vector<std::int64_t> pos{1};
    const SeqTensor out = rope_apply(k, pos, RopeParams{10000.0, 2});
    EXPECT_NEAR(out.at(0, 0, 0), std::cos(1.0), 1e-7);
    EXPECT_NEAR(out.at(0, 0, 1), std::sin(1.0), 1e-7);
}

TEST(Rope, AdjacentPairFrequencies) {
    // pair j rotates by p * base^{-2j/D}
    const RopeParams p{10000.0, 8};
    SeqTensor k(1, 1, 8);
    for (std::size_t j = 0; j < 4; ++j) k.at(0, 0, 2 * j) = 1.0f;
    const std::vector<std::int64_t> pos{7};
    const SeqTensor out = rope_apply(k, pos, p);
    for (std::size_t j = 0; j < 4; ++j) {
        const double w = std::pow(10000.0, -2.0 * j / 8.0);
        EXPECT_NEAR(out.at(0, 0, 2 * j), std::cos(7 * w), 1e-6);
        EXPECT_NEAR(out.at(0, 0, 2 * j + 1), std::sin(7 * w), 1e-6);
    }
}

TEST(Rope, SplitHalfPairsJWithJPlusHalf) {
    RopeParams p{10000.0, 4};
    p.pairing = RopePairing::split_half;
    const SeqTensor k(1, 1, 4, {1.0f, 0.0f, 0.0f, 0.0f});
    const std::vector<std::int64_t> pos{1};
    const SeqTensor out = rope_apply(k, pos, p);
    EXPECT_NEAR(out.at(0, 0, 0), std::cos(1.0), 1e-7);
    EXPECT_NEAR(out.at(0, 0, 2), std::sin(1.0), 1e-7);
    EXPECT_EQ(out.at(0, 0, 1), 0.0f);
}

TEST(Rope, InverseRecoversInput) {
    std::mt19937_64 rng(32);
    const SeqTensor k = ct::random_tensor(rng, 12, 2, 8);
    std::vector<std::int64_t> pos(12), neg(12);
    for (std::size_t i = 0; i < 12; ++i) {
        pos[i] = static_cast<std::int64_t>(rng() % 5000);
        neg[i] = -pos[i];
    }
    const SeqTensor back = rope_apply(rope_apply(k, pos, RopeParams{}), neg, RopeParams{});
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_NEAR(back.data()[i], k.data()[i], 1e-6);
}

TEST(Rope, PreservesNorms) {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        const SeqTensor k = ct::random_tensor(rng, 8, 2, 8);
        std::vector<std::int64_t> pos(8);
        for (auto& p : pos) p = static_cast<std::int64_t>(rng() % 100000);
        const SeqTensor out = rope_apply(k, pos, RopeParams{});
        for (std::size_t i = 0; i < 8; ++i) {
            double a = 0, b = 0;
            for (float x : k.row(i)) a += double(x) * x;
            for (float x : out.row(i)) b += double(x) * x;
            EXPECT_NEAR(std::sqrt(a), std::sqrt(b), 1e-6);
        }
    }
}

TEST(Rope, Errors) {
    const SeqTensor k(3, 1, 8);
    const std::vector<std::int64_t> two{0, 1};
    EXPECT_THROW(rope_apply(k, two, RopeParams{}), ShapeError);
    const std::vector<std::int64_t> three{0, 1, 2};
    EXPECT_THROW(rope_apply(k, three, RopeParams{10000.0, 4}), ShapeError);
    EXPECT_THROW((RopeParams{1.0, 8}.validate()), InvalidParam);
    EXPECT_THROW((RopeParams{10000.0, 7}.validate()), InvalidParam);
}
