#include "cachetune/cachepool.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <mutex>

#include "cachetune/error.hpp"

namespace cachetune {

struct CachePool::Entry {
    std::string chunk_id;
    TierConfig tier;
    CtkvHeader header;
    ImportanceRanking ranking;
    std::vector<std::byte> blob;  // simulated tiers
    std::filesystem::path path;   // file-backed tiers
};

namespace {

void check_chunk_id(const std::string& id) {
    if (id.empty() || id.size() > 200) {
        throw InvalidParam("chunk id must be 1..200 characters");
    }
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                        c == '-' || c == '_' || c == '.';
        if (!ok) {
            throw InvalidParam("chunk id '" + id + "' may only contain [A-Za-z0-9._-]");
        }
    }
}

void decode_rows(std::span<const std::byte> bytes, std::span<float> out) {
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= std::to_integer<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
        out[i] = std::bit_cast<float>(v);
    }
}

// Maximal runs [first, last] of consecutive token indices.
std::vector<std::pair<TokenIndex, TokenIndex>> token_runs(std::span<const TokenIndex> sorted) {
    std::vector<std::pair<TokenIndex, TokenIndex>> runs;
    for (TokenIndex t : sorted) {
        if (!runs.empty() && runs.back().second + 1 == t) {
            runs.back().second = t;
        } else {
            runs.emplace_back(t, t);
        }
    }
    return runs;
}

}  // namespace

std::vector<ByteRange> sparse_byte_ranges(const CtkvLayout& layout, std::size_t layer,
                                          std::span<const TokenIndex> keep_indices) {
    std::vector<ByteRange> ranges;
    const std::uint64_t row = layout.row_bytes();
    for (const auto& [first, last] : token_runs(keep_indices)) {
        const std::uint64_t len = (std::uint64_t{last} - first + 1) * row;
        ranges.push_back({layout.key_offset(layer, first), len});
        ranges.push_back({layout.value_offset(layer, first), len});
    }
    return ranges;
}

PutReceipt CachePool::put_chunk(const KvChunk& chunk, const ImportanceRanking& ranking, const TierConfig& tier) {
    check_chunk_id(chunk.chunk_id);
    tier.validate();
    if (ranking.n_tokens != chunk.n_tokens() || ranking.n_layers() != chunk.n_layers()) {
        throw ShapeError("put_chunk: ranking (N, L) does not match chunk '" + chunk.chunk_id + "'");
    }
    auto entry = std::make_shared<Entry>();
    entry->chunk_id = chunk.chunk_id;
    entry->tier = tier;
    entry->ranking = ranking;
    std::vector<std::byte> bytes = encode_ctkv(chunk, &ranking);
    entry->header = decode_ctkv_header(bytes);

    std::unique_lock lock(mu_);
    if (entries_.contains(chunk.chunk_id)) {
        throw AlreadyExists("chunk '" + chunk.chunk_id + "' is already in the pool");
    }
    const std::uint64_t size = bytes.size();
    if (tier.file_backed()) {
        std::error_code ec;
        std::filesystem::create_directories(*tier.backing, ec);
        if (ec) {
            throw IoError("cannot create pool directory " + tier.backing->string() + ": " + ec.message());
        }
        entry->path = *tier.backing / (chunk.chunk_id + ".ctkv");
        std::ofstream out(entry->path, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw IoError("failed writing " + entry->path.string());
        }
    } else {
        entry->blob = std::move(bytes);
    }
    entries_.emplace(chunk.chunk_id, entry);
    return PutReceipt{chunk.chunk_id, size, tier.modeled_write_seconds(size)};
}

void CachePool::attach_file(const std::string& chunk_id, const std::filesystem::path& path, const TierConfig& tier) {
    check_chunk_id(chunk_id);
    CtkvContents contents = read_ctkv_file(path);
    if (!contents.ranking) {
        throw FormatError("attach_file: " + path.string() + " has no ranking block; run analyze first");
    }
    auto entry = std::make_shared<Entry>();
    entry->chunk_id = chunk_id;
    entry->tier = tier;
    entry->header = contents.header;
    entry->ranking = std::move(*contents.ranking);
    entry->path = path;
    std::unique_lock lock(mu_);
    if (entries_.contains(chunk_id)) {
        throw AlreadyExists("chunk '" + chunk_id + "' is already in the pool");
    }
    entries_.emplace(chunk_id, std::move(entry));
}

std::unique_ptr<CachePool> CachePool::open_directory(const TierConfig& tier) {
    if (!tier.file_backed()) {
        throw InvalidParam("open_directory: tier has no backing directory");
    }
    auto pool = std::make_unique<CachePool>();
    std::error_code ec;
    if (!std::filesystem::exists(*tier.backing, ec)) {
        return pool;
    }
    std::vector<std::filesystem::path> files;
    for (const auto& de : std::filesystem::directory_iterator(*tier.backing)) {
        if (de.is_regular_file() && de.path().extension() == ".ctkv") files.push_back(de.path());
    }
    std::ranges::sort(files);
    for (const auto& f : files) {
        pool->attach_file(f.stem().string(), f, tier);
    }
    return pool;
}

std::shared_ptr<const CachePool::Entry> CachePool::find(const std::string& chunk_id) const {
    std::shared_lock lock(mu_);
    const auto it = entries_.find(chunk_id);
    if (it == entries_.end()) {
        throw NotFound("chunk '" + chunk_id + "' is not in the pool");
    }
    return it->second;
}

std::uint64_t CachePool::read_range(const Entry& e, ByteRange range, std::span<std::byte> out) const {
    if (!e.tier.file_backed()) {
        if (range.offset + range.length > e.blob.size()) {
            throw IoError("read past end of chunk '" + e.chunk_id + "'");
        }
        std::copy_n(e.blob.begin() + static_cast<std::ptrdiff_t>(range.offset), range.length, out.begin());
        bytes_read_ += range.length;
        return range.length;
    }
    std::ifstream in(e.path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + e.path.string());
    }
    in.seekg(static_cast<std::streamoff>(range.offset));
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(range.length));
    const auto got = static_cast<std::uint64_t>(in.gcount());
    bytes_read_ += got;
    if (got != range.length) {
        throw IoError("short read from " + e.path.string() + " (corrupted or truncated chunk)");
    }
    return got;
}

SparseFetchPlan CachePool::plan_sparse_fetch(const std::string& chunk_id, std::size_t layer, double r) const {
    const auto e = find(chunk_id);
    if (layer >= e->header.n_layers) {
        throw InvalidParam("plan_sparse_fetch: layer " + std::to_string(layer) + " out of range");
    }
    SparseFetchPlan plan;
    plan.chunk_id = chunk_id;
    plan.layer = layer;
    plan.keep_indices = complement_for_ratio(e->ranking, r);
    const CtkvLayout layout{e->header};
    plan.byte_ranges = sparse_byte_ranges(layout, layer, plan.keep_indices);
    plan.expected_bytes = plan.keep_indices.size() * layout.row_bytes() * 2;
    return plan;
}

FetchResult CachePool::fetch_sparse(const SparseFetchPlan& plan) const {
    const auto e = find(plan.chunk_id);
    const CtkvLayout layout{e->header};
    const std::size_t n = e->header.n_tokens;
    if (plan.layer >= e->header.n_layers) {
        throw InvalidPlan("fetch_sparse: layer out of range for chunk '" + plan.chunk_id + "'");
    }
    for (std::size_t i = 0; i < plan.keep_indices.size(); ++i) {
        if (plan.keep_indices[i] >= n || (i > 0 && plan.keep_indices[i] <= plan.keep_indices[i - 1])) {
            throw InvalidPlan("fetch_sparse: keep indices must be ascending, distinct and < N");
        }
    }
    if (plan.byte_ranges != sparse_byte_ranges(layout, plan.layer, plan.keep_indices) ||
        plan.expected_bytes != plan.keep_indices.size() * layout.row_bytes() * 2) {
        throw InvalidPlan("fetch_sparse: plan ranges do not match the stored chunk layout");
    }

    const std::size_t h = e->header.n_heads;
    const std::size_t d = e->header.head_dim;
    FetchResult result{SeqTensor(plan.keep_indices.size(), h, d), SeqTensor(plan.keep_indices.size(), h, d),
                       plan.keep_indices, 0, 0.0};
    std::vector<std::byte> buf;
    std::size_t row_cursor = 0;
    const std::size_t row_floats = h * d;
    const auto runs = token_runs(plan.keep_indices);
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const std::size_t rows = runs[k].second - runs[k].first + 1;
        for (int part = 0; part < 2; ++part) {
            const ByteRange range = plan.byte_ranges[2 * k + part];
            buf.resize(range.length);
            result.bytes_read += read_range(*e, range, buf);
            SeqTensor& dst = part == 0 ? result.keys_raw : result.values;
            decode_rows(buf, dst.data().subspan(row_cursor * row_floats, rows * row_floats));
        }
        row_cursor += rows;
    }
    result.modeled_seconds = e->tier.modeled_read_seconds(result.bytes_read);
    return result;
}

KvChunk CachePool::get_full(const std::string& chunk_id) const {
    const auto e = find(chunk_id);
    const CtkvLayout layout{e->header};
    std::vector<std::byte> bytes(layout.file_bytes());
    read_range(*e, {0, bytes.size()}, bytes);
    return decode_ctkv(bytes, chunk_id).chunk;
}

ImportanceRanking CachePool::ranking(const std::string& chunk_id) const { return find(chunk_id)->ranking; }

CtkvHeader CachePool::header(const std::string& chunk_id) const { return find(chunk_id)->header; }

TierConfig CachePool::tier(const std::string& chunk_id) const { return find(chunk_id)->tier; }

bool CachePool::contains(const std::string& chunk_id) const {
    std::shared_lock lock(mu_);
    return entries_.contains(chunk_id);
}

std::vector<std::string> CachePool::chunk_ids() const {
    std::shared_lock lock(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : entries_) ids.push_back(id);
    return ids;
}

}  // namespace cachetune
