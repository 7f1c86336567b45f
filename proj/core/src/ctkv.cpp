#include "cachetune/ctkv.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cachetune/error.hpp"

namespace cachetune {

namespace {

class Writer {
public:
    explicit Writer(std::vector<std::byte>& out) : out_(out) {}

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xffu));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

private:
    std::vector<std::byte>& out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::byte> in) : in_(in) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::to_integer<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::to_integer<std::uint64_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > in_.size()) {
            throw FormatError("CTKV: truncated file (" + std::to_string(in_.size()) + " bytes)");
        }
    }
    std::span<const std::byte> in_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::byte> encode_ctkv(const KvChunk& chunk, const ImportanceRanking* ranking) {
    chunk.validate();
    CtkvLayout layout;
    layout.header.n_layers = static_cast<std::uint32_t>(chunk.n_layers());
    layout.header.n_tokens = static_cast<std::uint32_t>(chunk.n_tokens());
    layout.header.n_heads = static_cast<std::uint32_t>(chunk.n_heads());
    layout.header.head_dim = static_cast<std::uint32_t>(chunk.head_dim());
    layout.header.dtype = chunk.dtype;
    layout.header.flags = kCtkvFlagPreRope;
    if (ranking != nullptr) {
        ranking->validate();
        if (ranking->n_tokens != chunk.n_tokens() || ranking->n_layers() != chunk.n_layers()) {
            throw ShapeError("encode_ctkv: ranking (N, L) does not match chunk");
        }
        layout.header.flags |= kCtkvFlagHasRanking;
    }

    std::vector<std::byte> out;
    out.reserve(layout.file_bytes());
    Writer w(out);
    for (char c : {'C', 'T', 'K', 'V'}) out.push_back(static_cast<std::byte>(c));
    w.u32(layout.header.version);
    w.u32(layout.header.n_layers);
    w.u32(layout.header.n_tokens);
    w.u32(layout.header.n_heads);
    w.u32(layout.header.head_dim);
    w.u32(static_cast<std::uint32_t>(layout.header.dtype));
    w.u32(layout.header.flags);
    for (std::size_t l = 0; l < chunk.n_layers(); ++l) {
        for (float v : chunk.keys_raw[l].data()) w.f32(v);
        for (float v : chunk.values[l].data()) w.f32(v);
    }
    if (ranking != nullptr) {
        w.f64(ranking->alpha);
        for (const auto& order : ranking->per_layer_order) {
            for (TokenIndex t : order) w.u32(t);
        }
        for (TokenIndex t : ranking->aggregate_order) w.u32(t);
        for (const auto& scores : ranking->per_layer_scores) {
            for (double s : scores) w.f64(s);
        }
    }
    return out;
}

CtkvHeader decode_ctkv_header(std::span<const std::byte> bytes) {
    if (bytes.size() < kCtkvHeaderBytes || std::memcmp(bytes.data(), "CTKV", 4) != 0) {
        throw FormatError("CTKV: bad magic");
    }
    Reader r(bytes.subspan(4));
    CtkvHeader h;
    h.version = r.u32();
    h.n_layers = r.u32();
    h.n_tokens = r.u32();
    h.n_heads = r.u32();
    h.head_dim = r.u32();
    const std::uint32_t dtype = r.u32();
    h.flags = r.u32();
    if (h.version != kCtkvVersion) {
        throw FormatError("CTKV: unsupported version " + std::to_string(h.version));
    }
    if (dtype > static_cast<std::uint32_t>(DType::f16_as_f32)) {
        throw FormatError("CTKV: unknown dtype code " + std::to_string(dtype));
    }
    h.dtype = static_cast<DType>(dtype);
    if (h.n_layers == 0 || h.n_tokens == 0 || h.n_heads == 0 || h.head_dim == 0 || h.head_dim % 2 != 0) {
        throw FormatError("CTKV: invalid geometry");
    }
    if ((h.flags & ~(kCtkvFlagPreRope | kCtkvFlagHasRanking)) != 0) {
        throw FormatError("CTKV: unknown flag bits");
    }
    const CtkvLayout layout{h};
    if (bytes.size() != layout.file_bytes()) {
        throw FormatError("CTKV: file is " + std::to_string(bytes.size()) + " bytes, header implies " +
                          std::to_string(layout.file_bytes()));
    }
    return h;
}

CtkvContents decode_ctkv(std::span<const std::byte> bytes, std::string chunk_id) {
    CtkvContents c;
    c.header = decode_ctkv_header(bytes);
    const std::size_t n = c.header.n_tokens;
    const std::size_t h = c.header.n_heads;
    const std::size_t d = c.header.head_dim;
    const std::size_t l_count = c.header.n_layers;

    Reader r(bytes.subspan(kCtkvHeaderBytes));
    c.chunk.chunk_id = std::move(chunk_id);
    c.chunk.dtype = c.header.dtype;
    for (std::size_t l = 0; l < l_count; ++l) {
        std::vector<float> k(n * h * d);
        std::vector<float> v(n * h * d);
        for (float& x : k) x = r.f32();
        for (float& x : v) x = r.f32();
        c.chunk.keys_raw.emplace_back(n, h, d, std::move(k));
        c.chunk.values.emplace_back(n, h, d, std::move(v));
    }
    if (c.header.has_ranking()) {
        ImportanceRanking rk;
        rk.n_tokens = n;
        rk.alpha = r.f64();
        rk.per_layer_order.assign(l_count, std::vector<TokenIndex>(n));
        for (auto& order : rk.per_layer_order) {
            for (TokenIndex& t : order) t = r.u32();
        }
        rk.aggregate_order.resize(n);
        for (TokenIndex& t : rk.aggregate_order) t = r.u32();
        rk.per_layer_scores.assign(l_count, std::vector<double>(n));
        for (auto& scores : rk.per_layer_scores) {
            for (double& s : scores) s = r.f64();
        }
        try {
            rk.validate();
        } catch (const InvalidParam& e) {
            throw FormatError(std::string("CTKV: corrupt ranking block: ") + e.what());
        }
        c.ranking = std::move(rk);
    }
    return c;
}

std::vector<std::byte> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<std::byte> bytes(size);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (static_cast<std::size_t>(in.gcount()) != size) {
        throw IoError("short read from " + path.string());
    }
    return bytes;
}

void write_ctkv_file(const std::filesystem::path& path, const KvChunk& chunk,
                     const ImportanceRanking* ranking) {
    const std::vector<std::byte> bytes = encode_ctkv(chunk, ranking);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("short write to " + path.string());
    }
}

CtkvContents read_ctkv_file(const std::filesystem::path& path) {
    return decode_ctkv(read_file_bytes(path), path.stem().string());
}

}  // namespace cachetune
