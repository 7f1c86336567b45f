#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "cachetune/tensor.hpp"

namespace cachetune {

enum class RopePairing {
    adjacent,    // (2j, 2j+1)
    split_half,  // (j, j + D/2)
};

struct RopeParams {
    double base = 10000.0;
    std::size_t head_dim = 8;
    double scaling = 1.0;  // multiplier on positions
    RopePairing pairing = RopePairing::adjacent;

    // base > 1, head_dim even and >= 2; throws InvalidParam otherwise.
    void validate() const;

    // omega_j = base^{-2j/D}
    double frequency(std::size_t pair) const;
};

// Rotates one head vector (head_dim entries) in place to position `position`.
// Negative positions apply the inverse rotation.
void rope_rotate_head(std::span<double> head, std::int64_t position, const RopeParams& params);

// Applies the rotary transform to every token of `keys` at the matching
// entry of `positions`.
SeqTensor rope_apply(const SeqTensor& keys, std::span<const std::int64_t> positions,
                     const RopeParams& params);

}  // namespace cachetune
