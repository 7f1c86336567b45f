#include "cachetune/rope.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "cachetune/error.hpp"

namespace cachetune {

void RopeParams::validate() const {
    if (!(base > 1.0)) {
        throw InvalidParam("RopeParams: base must be > 1");
    }
    if (head_dim == 0 || head_dim % 2 != 0) {
        throw InvalidParam("RopeParams: head_dim must be even and >= 2");
    }
}

double RopeParams::frequency(std::size_t pair) const {
    return std::pow(base, -2.0 * static_cast<double>(pair) / static_cast<double>(head_dim));
}

void rope_rotate_head(std::span<double> head, std::int64_t position, const RopeParams& params) {
    const std::size_t half = params.head_dim / 2;
    const double p = static_cast<double>(position) * params.scaling;
    for (std::size_t j = 0; j < half; ++j) {
        const double angle = p * params.frequency(j);
        const double c = std::cos(angle);
        const double s = std::sin(angle);
        const std::size_t ix = params.pairing == RopePairing::adjacent ? 2 * j : j;
        const std::size_t iy = params.pairing == RopePairing::adjacent ? 2 * j + 1 : j + half;
        const double x = head[ix];
        const double y = head[iy];
        head[ix] = x * c - y * s;
        head[iy] = x * s + y * c;
    }
}

SeqTensor rope_apply(const SeqTensor& keys, std::span<const std::int64_t> positions,
                     const RopeParams& params) {
    params.validate();
    if (positions.size() != keys.n_tokens()) {
        throw ShapeError("rope_apply: " + std::to_string(positions.size()) + " positions for " +
                         std::to_string(keys.n_tokens()) + " tokens");
    }
    if (keys.n_tokens() > 0 && keys.head_dim() != params.head_dim) {
        throw ShapeError("rope_apply: tensor head_dim " + std::to_string(keys.head_dim()) +
                         " differs from RopeParams head_dim " + std::to_string(params.head_dim));
    }
    SeqTensor out = keys;
    std::vector<double> head(keys.head_dim());
    for (std::size_t t = 0; t < keys.n_tokens(); ++t) {
        if (positions[t] == 0) continue;  // identity rotation, keep input bits
        for (std::size_t h = 0; h < keys.n_heads(); ++h) {
            for (std::size_t d = 0; d < head.size(); ++d) head[d] = keys.at(t, h, d);
            rope_rotate_head(head, positions[t], params);
            for (std::size_t d = 0; d < head.size(); ++d) out.at(t, h, d) = static_cast<float>(head[d]);
        }
    }
    return out;
}

}  // namespace cachetune
