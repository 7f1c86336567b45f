#include "cachetune/tensor.hpp"

#include <algorithm>
#include <cstring>

#include "cachetune/error.hpp"

namespace cachetune {

namespace {

void check_geometry(std::size_t n_heads, std::size_t head_dim) {
    if (n_heads == 0 || head_dim == 0) {
        throw ShapeError("SeqTensor: n_heads and head_dim must be >= 1");
    }
    if (head_dim % 2 != 0) {
        throw ShapeError("SeqTensor: head_dim must be even, got " + std::to_string(head_dim));
    }
}

}  // namespace

SeqTensor::SeqTensor(std::size_t n_tokens, std::size_t n_heads, std::size_t head_dim)
    : n_tokens_(n_tokens), n_heads_(n_heads), head_dim_(head_dim),
      data_(n_tokens * n_heads * head_dim, 0.0f) {
    check_geometry(n_heads, head_dim);
}

SeqTensor::SeqTensor(std::size_t n_tokens, std::size_t n_heads, std::size_t head_dim,
                     std::vector<float> data)
    : n_tokens_(n_tokens), n_heads_(n_heads), head_dim_(head_dim), data_(std::move(data)) {
    check_geometry(n_heads, head_dim);
    if (data_.size() != n_tokens * n_heads * head_dim) {
        throw ShapeError("SeqTensor: data length " + std::to_string(data_.size()) +
                         " != N*H*D = " + std::to_string(n_tokens * n_heads * head_dim));
    }
}

SeqTensor SeqTensor::filled(std::size_t n_tokens, std::size_t n_heads, std::size_t head_dim,
                            float value) {
    return SeqTensor(n_tokens, n_heads, head_dim,
                     std::vector<float>(n_tokens * n_heads * head_dim, value));
}

bool operator==(const SeqTensor& a, const SeqTensor& b) {
    return a.n_tokens_ == b.n_tokens_ && a.n_heads_ == b.n_heads_ &&
           a.head_dim_ == b.head_dim_ &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
}

SeqTensor tensor_slice_tokens(const SeqTensor& t, std::span<const TokenIndex> indices) {
    SeqTensor out(indices.size(), t.n_heads(), t.head_dim());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= t.n_tokens()) {
            throw IndexError("tensor_slice_tokens: index " + std::to_string(indices[i]) +
                             " out of range [0, " + std::to_string(t.n_tokens()) + ")");
        }
        std::ranges::copy(t.row(indices[i]), out.row(i).begin());
    }
    return out;
}

SeqTensor tensor_scatter_tokens(SeqTensor dst, const SeqTensor& src,
                                std::span<const TokenIndex> indices) {
    if (indices.size() != src.n_tokens()) {
        throw ShapeError("tensor_scatter_tokens: " + std::to_string(indices.size()) +
                         " indices for " + std::to_string(src.n_tokens()) + " source rows");
    }
    if (indices.empty()) {
        return dst;
    }
    if (!dst.same_geometry(src)) {
        throw ShapeError("tensor_scatter_tokens: (H, D) mismatch between dst and src");
    }
    std::vector<bool> seen(dst.n_tokens(), false);
    for (const TokenIndex idx : indices) {
        if (idx >= dst.n_tokens()) {
            throw IndexError("tensor_scatter_tokens: index " + std::to_string(idx) +
                             " out of range [0, " + std::to_string(dst.n_tokens()) + ")");
        }
        if (seen[idx]) {
            throw InvalidPlan("tensor_scatter_tokens: duplicate index " + std::to_string(idx));
        }
        seen[idx] = true;
    }
    for (std::size_t i = 0; i < indices.size(); ++i) {
        std::ranges::copy(src.row(i), dst.row(indices[i]).begin());
    }
    return dst;
}

void KvChunk::validate() const {
    if (keys_raw.empty() || keys_raw.size() != values.size()) {
        throw ShapeError("KvChunk '" + chunk_id + "': need L >= 1 key and value layers");
    }
    const SeqTensor& ref = keys_raw.front();
    if (ref.n_tokens() == 0) {
        throw ShapeError("KvChunk '" + chunk_id + "': empty chunk");
    }
    for (std::size_t l = 0; l < keys_raw.size(); ++l) {
        for (const SeqTensor* t : {&keys_raw[l], &values[l]}) {
            if (t->n_tokens() != ref.n_tokens() || !t->same_geometry(ref)) {
                throw ShapeError("KvChunk '" + chunk_id + "': layer " + std::to_string(l) +
                                 " shape differs from layer 0");
            }
        }
    }
}

}  // namespace cachetune
