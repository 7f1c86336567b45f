#pragma once

// CTKV: little-endian chunk file.
//
//   magic "CTKV" | version u32 = 1 | n_layers u32 | n_tokens u32 | n_heads u32
//   | head_dim u32 | dtype u32 | flags u32
//   per layer: K_raw rows [token][head][dim] f32, then V rows f32
//   optional ranking block (flags bit1): alpha f64 | per-layer orders (L*N u32)
//   | aggregate order (N u32) | per-layer scores (L*N f64)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cachetune/spectral.hpp"
#include "cachetune/tensor.hpp"

namespace cachetune {

inline constexpr std::uint32_t kCtkvVersion = 1;
inline constexpr std::uint64_t kCtkvHeaderBytes = 32;
inline constexpr std::uint32_t kCtkvFlagPreRope = 1u << 0;
inline constexpr std::uint32_t kCtkvFlagHasRanking = 1u << 1;
inline constexpr std::uint64_t kCtkvDtypeBytes = 4;

struct CtkvHeader {
    std::uint32_t version = kCtkvVersion;
    std::uint32_t n_layers = 0;
    std::uint32_t n_tokens = 0;
    std::uint32_t n_heads = 0;
    std::uint32_t head_dim = 0;
    DType dtype = DType::f32;
    std::uint32_t flags = kCtkvFlagPreRope;

    bool has_ranking() const { return (flags & kCtkvFlagHasRanking) != 0; }
};

// Byte offsets inside a CTKV file.
struct CtkvLayout {
    CtkvHeader header;

    std::uint64_t row_bytes() const { return std::uint64_t{header.n_heads} * header.head_dim * kCtkvDtypeBytes; }
    std::uint64_t layer_bytes() const { return 2 * std::uint64_t{header.n_tokens} * row_bytes(); }
    std::uint64_t key_offset(std::size_t layer, std::size_t token) const {
        return kCtkvHeaderBytes + layer * layer_bytes() + token * row_bytes();
    }
    std::uint64_t value_offset(std::size_t layer, std::size_t token) const {
        return key_offset(layer, token) + std::uint64_t{header.n_tokens} * row_bytes();
    }
    std::uint64_t ranking_offset() const { return kCtkvHeaderBytes + header.n_layers * layer_bytes(); }
    std::uint64_t ranking_bytes() const {
        const std::uint64_t l = header.n_layers;
        const std::uint64_t n = header.n_tokens;
        return 8 + l * n * 4 + n * 4 + l * n * 8;
    }
    std::uint64_t file_bytes() const {
        return ranking_offset() + (header.has_ranking() ? ranking_bytes() : 0);
    }
};

struct CtkvContents {
    CtkvHeader header;
    KvChunk chunk;
    std::optional<ImportanceRanking> ranking;
};

std::vector<std::byte> encode_ctkv(const KvChunk& chunk, const ImportanceRanking* ranking);

// Throws FormatError on bad magic, version, geometry or truncated payload.
CtkvHeader decode_ctkv_header(std::span<const std::byte> bytes);
CtkvContents decode_ctkv(std::span<const std::byte> bytes, std::string chunk_id = {});

void write_ctkv_file(const std::filesystem::path& path, const KvChunk& chunk,
                     const ImportanceRanking* ranking);
CtkvContents read_ctkv_file(const std::filesystem::path& path);

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path);

}  // namespace cachetune
