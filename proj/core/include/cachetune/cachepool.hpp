#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cachetune/ctkv.hpp"
#include "cachetune/spectral.hpp"
#include "cachetune/tensor.hpp"
#include "cachetune/tier.hpp"

namespace cachetune {

struct ByteRange {
    std::uint64_t offset = 0;
    std::uint64_t length = 0;

    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

// Which rows of one layer of one chunk to pull from the pool. keep_indices is
// the complement of the recompute set, ascending; each contiguous run of kept
// tokens becomes one key range followed by one value range.
struct SparseFetchPlan {
    std::string chunk_id;
    std::size_t layer = 0;
    std::vector<TokenIndex> keep_indices;
    std::vector<ByteRange> byte_ranges;
    std::uint64_t expected_bytes = 0;
};

struct FetchResult {
    SeqTensor keys_raw;
    SeqTensor values;
    std::vector<TokenIndex> keep_indices;
    std::uint64_t bytes_read = 0;
    double modeled_seconds = 0.0;
};

struct PutReceipt {
    std::string chunk_id;
    std::uint64_t bytes_written = 0;
    double modeled_seconds = 0.0;
};

// Byte ranges for a sorted keep set under the CTKV layout, with runs coalesced.
std::vector<ByteRange> sparse_byte_ranges(const CtkvLayout& layout, std::size_t layer,
                                          std::span<const TokenIndex> keep_indices);

// Tiered store of CTKV chunks. Simulated tiers hold the encoded bytes in
// memory; file-backed tiers keep `<backing>/<chunk_id>.ctkv`. Readers may run
// concurrently; put_chunk and attach_file take the writer lock.
class CachePool {
public:
    CachePool() = default;
    CachePool(const CachePool&) = delete;
    CachePool& operator=(const CachePool&) = delete;

    PutReceipt put_chunk(const KvChunk& chunk, const ImportanceRanking& ranking, const TierConfig& tier);

    // Registers an existing CTKV file (which must carry a ranking block).
    void attach_file(const std::string& chunk_id, const std::filesystem::path& path, const TierConfig& tier);

    // Attaches every *.ctkv under the tier's backing directory.
    static std::unique_ptr<CachePool> open_directory(const TierConfig& tier);

    SparseFetchPlan plan_sparse_fetch(const std::string& chunk_id, std::size_t layer, double r) const;
    FetchResult fetch_sparse(const SparseFetchPlan& plan) const;

    KvChunk get_full(const std::string& chunk_id) const;
    ImportanceRanking ranking(const std::string& chunk_id) const;
    CtkvHeader header(const std::string& chunk_id) const;
    TierConfig tier(const std::string& chunk_id) const;
    bool contains(const std::string& chunk_id) const;
    std::vector<std::string> chunk_ids() const;

    // Total bytes pulled from backing storage by fetches and full reads.
    std::uint64_t bytes_read() const { return bytes_read_.load(); }

private:
    struct Entry;
    std::shared_ptr<const Entry> find(const std::string& chunk_id) const;
    std::uint64_t read_range(const Entry& e, ByteRange range, std::span<std::byte> out) const;

    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<const Entry>> entries_;
    mutable std::atomic<std::uint64_t> bytes_read_{0};
};

}  // namespace cachetune
