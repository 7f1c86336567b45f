#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cachetune {

using TokenIndex = std::uint32_t;

enum class DType : std::uint32_t {
    f32 = 0,
    f16_as_f32 = 1,  // values were fp16 upstream, widened and stored as f32
};

// Dense sequence-major tensor, row-major [token][head][dim], 32-bit storage.
//
// A tensor may hold zero tokens (the result of an empty slice or an empty
// sparse fetch); everything else requires n_heads >= 1 and an even
// head_dim >= 2 so rotary pairs are well defined.
class SeqTensor {
public:
    SeqTensor() = default;
    SeqTensor(std::size_t n_tokens, std::size_t n_heads, std::size_t head_dim);
    SeqTensor(std::size_t n_tokens, std::size_t n_heads, std::size_t head_dim,
              std::vector<float> data);

    static SeqTensor filled(std::size_t n_tokens, std::size_t n_heads,
                            std::size_t head_dim, float value);

    std::size_t n_tokens() const { return n_tokens_; }
    std::size_t n_heads() const { return n_heads_; }
    std::size_t head_dim() const { return head_dim_; }
    std::size_t row_size() const { return n_heads_ * head_dim_; }
    std::size_t size() const { return data_.size(); }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }

    std::span<const float> row(std::size_t token) const {
        return {data_.data() + token * row_size(), row_size()};
    }
    std::span<float> row(std::size_t token) {
        return {data_.data() + token * row_size(), row_size()};
    }

    float at(std::size_t token, std::size_t head, std::size_t dim) const {
        return data_[(token * n_heads_ + head) * head_dim_ + dim];
    }
    float& at(std::size_t token, std::size_t head, std::size_t dim) {
        return data_[(token * n_heads_ + head) * head_dim_ + dim];
    }

    bool same_geometry(const SeqTensor& other) const {
        return n_heads_ == other.n_heads_ && head_dim_ == other.head_dim_;
    }

    // Bit-level equality (NaN payloads compared as bits).
    friend bool operator==(const SeqTensor& a, const SeqTensor& b);

private:
    std::size_t n_tokens_ = 0;
    std::size_t n_heads_ = 0;
    std::size_t head_dim_ = 0;
    std::vector<float> data_;
};

// Copies rows `indices` of t, in the given order.
SeqTensor tensor_slice_tokens(const SeqTensor& t, std::span<const TokenIndex> indices);

// Returns dst with rows `indices` replaced by the rows of src.
SeqTensor tensor_scatter_tokens(SeqTensor dst, const SeqTensor& src,
                                std::span<const TokenIndex> indices);

// Per-layer pre-RoPE keys and values of one reusable text segment.
struct KvChunk {
    std::string chunk_id;
    std::vector<SeqTensor> keys_raw;
    std::vector<SeqTensor> values;
    DType dtype = DType::f32;

    std::size_t n_layers() const { return keys_raw.size(); }
    std::size_t n_tokens() const { return keys_raw.empty() ? 0 : keys_raw.front().n_tokens(); }
    std::size_t n_heads() const { return keys_raw.empty() ? 0 : keys_raw.front().n_heads(); }
    std::size_t head_dim() const { return keys_raw.empty() ? 0 : keys_raw.front().head_dim(); }

    // Throws ShapeError unless every layer has identical (N, H, D) and N >= 1.
    void validate() const;
};

// Half spectrum of a SeqTensor along the token axis, row-major
// [freq][head][dim], 64-bit.
struct ComplexSpectrum {
    std::size_t n_freqs = 0;
    std::size_t n_heads = 0;
    std::size_t head_dim = 0;
    std::size_t origin_len = 0;
    std::vector<double> re;
    std::vector<double> im;

    std::size_t lanes() const { return n_heads * head_dim; }
};

}  // namespace cachetune
