#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cachetune/rope.hpp"
#include "cachetune/scheduler.hpp"
#include "cachetune/spectral.hpp"
#include "cachetune/tensor.hpp"

namespace cachetune {

enum class LayerClass { collection, check, fusion };
enum class Stream { forward, transfer, recompute };

std::string_view to_string(LayerClass c);
std::string_view to_string(Stream s);

struct ChunkMeta {
    std::string chunk_id;
    std::size_t n_tokens = 0;
    std::size_t n_heads = 0;
    std::size_t head_dim = 0;
    std::size_t dtype_size = 4;

    std::uint64_t token_bytes() const { return std::uint64_t{2} * n_heads * head_dim * dtype_size; }
};

// One chunk laid onto the global token axis. Indices are chunk-local and
// ascending; recompute_indices and keep_indices partition [0, n_tokens).
struct ChunkPlacement {
    ChunkMeta meta;
    std::size_t global_offset = 0;
    std::vector<TokenIndex> recompute_indices;
    std::vector<TokenIndex> keep_indices;
};

struct LayerPlan {
    std::size_t layer = 0;
    LayerClass cls = LayerClass::fusion;
    // Global token indices, ascending; together they partition [0, total).
    std::vector<TokenIndex> recompute_global;
    std::vector<TokenIndex> keep_global;
    // Rotary positions for the reused keys, aligned with keep_global.
    std::vector<std::int64_t> reuse_positions;
    std::uint64_t transfer_bytes = 0;
};

struct PipelinePlan {
    std::size_t n_layers = 0;
    std::size_t total_tokens = 0;
    double ratio = 0.0;
    std::vector<ChunkPlacement> chunks;
    std::vector<LayerPlan> layers;

    // Throws InvalidPlan when layer classes or index partitions are broken.
    void validate() const;
};

// Concatenates chunks onto one global axis and splits each chunk at ratio r
// using its ranking. Layer 0 collects, layer 1 checks, the rest fuse.
PipelinePlan build_plan(std::span<const ChunkMeta> chunks, std::span<const ImportanceRanking> rankings, double r,
                        std::size_t n_layers);

struct TimelineEvent {
    Stream stream = Stream::forward;
    std::size_t layer = 0;
    double start_s = 0.0;
    double end_s = 0.0;
    std::string label;
};

struct Timeline {
    std::vector<TimelineEvent> events;
    double ttft_s = 0.0;
};

// Event-driven schedule of the forward, transfer and recompute streams.
//
// Per layer l: transfer(l) moves keep_count * t_i worth of KV and may start
// once forward(l-2) has freed its working buffer, so it overlaps the compute of
// layer l-1; recompute(l) costs recompute_count * t_c and needs forward(l-1)'s
// hidden states; forward(l) fuses and attends in t_o after both finish.
Timeline simulate(const PipelinePlan& plan, const HardwareProfile& p);

// Sum of every event duration, as if the three streams ran back to back.
double serialized_ttft(const PipelinePlan& plan, const HardwareProfile& p);

// Empty when the timeline honors stream exclusivity and layer dependencies;
// otherwise one message per violation.
std::vector<std::string> check_timeline(const PipelinePlan& plan, const Timeline& timeline);

// Sum over layers and chunks of keep_count * H * D * dtype_size * 2.
std::uint64_t transferred_bytes(const PipelinePlan& plan);

// Tokens recomputed at each layer (the same set for every layer).
std::size_t recompute_tokens(const PipelinePlan& plan);

struct FusedKv {
    SeqTensor keys;
    SeqTensor values;
};

// Assembles one layer's complete KV in an n-row working buffer: reused pre-RoPE
// keys are rotated to positions[i] for their slot i, recomputed keys (already
// rotated) are copied as-is, and both parts scatter into place.
// `positions` has one entry per buffer slot. Throws InvalidPlan unless the two
// index sets partition [0, n).
FusedKv fuse_layer(const SeqTensor& reused_keys_raw, const SeqTensor& reused_values,
                   std::span<const TokenIndex> keep_indices, const SeqTensor& recomputed_keys,
                   const SeqTensor& recomputed_values, std::span<const TokenIndex> recompute_indices,
                   std::span<const std::int64_t> positions, const RopeParams& rope, std::size_t n);

// CSV with header `stream,layer,start_s,end_s,label`.
std::string format_timeline_csv(const Timeline& timeline);

// Human-readable totals, including the gap to the steady-state roofline model.
std::string format_timeline_summary(const PipelinePlan& plan, const Timeline& timeline, const HardwareProfile& p);

}  // namespace cachetune
