#include "cachetune/pipesim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cachetune/error.hpp"

namespace cachetune {

std::string_view to_string(LayerClass c) {
    switch (c) {
        case LayerClass::collection: return "collection";
        case LayerClass::check: return "check";
        case LayerClass::fusion: return "fusion";
    }
    return "fusion";
}

std::string_view to_string(Stream s) {
    switch (s) {
        case Stream::forward: return "forward";
        case Stream::transfer: return "transfer";
        case Stream::recompute: return "recompute";
    }
    return "forward";
}

namespace {

LayerClass class_for_layer(std::size_t layer) {
    if (layer == 0) return LayerClass::collection;
    if (layer == 1) return LayerClass::check;
    return LayerClass::fusion;
}

// Throws InvalidPlan unless a and b are ascending and partition [0, n).
void check_partition(std::span<const TokenIndex> a, std::span<const TokenIndex> b, std::size_t n,
                     std::string_view what) {
    if (a.size() + b.size() != n) {
        throw InvalidPlan(fmt::format("{}: {} + {} indices do not cover {} slots", what, a.size(), b.size(), n));
    }
    std::vector<char> hit(n, 0);
    for (auto set : {a, b}) {
        for (TokenIndex t : set) {
            if (t >= n || hit[t]) {
                throw InvalidPlan(fmt::format("{}: index {} out of range or in both sets", what, t));
            }
            hit[t] = 1;
        }
    }
}

}  // namespace

void PipelinePlan::validate() const {
    if (layers.size() != n_layers || n_layers == 0) {
        throw InvalidPlan("PipelinePlan: layer count mismatch");
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        const LayerPlan& lp = layers[l];
        if (lp.layer != l || lp.cls != class_for_layer(l)) {
            throw InvalidPlan(fmt::format("PipelinePlan: layer {} has the wrong class", l));
        }
        check_partition(lp.recompute_global, lp.keep_global, total_tokens, "PipelinePlan layer");
        if (lp.reuse_positions.size() != lp.keep_global.size()) {
            throw InvalidPlan("PipelinePlan: reuse positions misaligned with keep set");
        }
    }
    for (const ChunkPlacement& c : chunks) {
        check_partition(c.recompute_indices, c.keep_indices, c.meta.n_tokens, "PipelinePlan chunk");
    }
}

PipelinePlan build_plan(std::span<const ChunkMeta> chunks, std::span<const ImportanceRanking> rankings, double r,
                        std::size_t n_layers) {
    if (chunks.size() != rankings.size()) {
        throw InvalidParam("build_plan: one ranking per chunk is required");
    }
    if (n_layers == 0) {
        throw InvalidParam("build_plan: n_layers must be >= 1");
    }
    PipelinePlan plan;
    plan.n_layers = n_layers;
    plan.ratio = r;
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        const ChunkMeta& m = chunks[j];
        if (m.n_tokens == 0 || m.n_heads == 0 || m.head_dim == 0) {
            throw ShapeError(fmt::format("build_plan: chunk '{}' has an empty dimension", m.chunk_id));
        }
        if (m.n_heads != chunks[0].n_heads || m.head_dim != chunks[0].head_dim ||
            m.dtype_size != chunks[0].dtype_size) {
            throw ShapeError(fmt::format("build_plan: chunk '{}' has different (H, D, dtype)", m.chunk_id));
        }
        if (rankings[j].n_tokens != m.n_tokens) {
            throw ShapeError(fmt::format("build_plan: ranking for '{}' covers {} tokens, chunk has {}", m.chunk_id,
                                         rankings[j].n_tokens, m.n_tokens));
        }
        ChunkPlacement p;
        p.meta = m;
        p.global_offset = plan.total_tokens;
        p.recompute_indices = indices_for_ratio(rankings[j], r);
        p.keep_indices = complement_for_ratio(rankings[j], r);
        plan.total_tokens += m.n_tokens;
        plan.chunks.push_back(std::move(p));
    }

    LayerPlan shared;
    for (const ChunkPlacement& c : plan.chunks) {
        const auto off = static_cast<TokenIndex>(c.global_offset);
        for (TokenIndex t : c.recompute_indices) shared.recompute_global.push_back(off + t);
        for (TokenIndex t : c.keep_indices) {
            shared.keep_global.push_back(off + t);
            shared.reuse_positions.push_back(static_cast<std::int64_t>(off + t));
        }
        shared.transfer_bytes += c.keep_indices.size() * c.meta.token_bytes();
    }
    for (std::size_t l = 0; l < n_layers; ++l) {
        LayerPlan lp = shared;
        lp.layer = l;
        lp.cls = class_for_layer(l);
        plan.layers.push_back(std::move(lp));
    }
    return plan;
}

Timeline simulate(const PipelinePlan& plan, const HardwareProfile& p) {
    plan.validate();
    Timeline tl;
    std::vector<double> forward_end(plan.n_layers, 0.0);
    double transfer_free = 0.0;
    double recompute_free = 0.0;
    for (std::size_t l = 0; l < plan.n_layers; ++l) {
        const LayerPlan& lp = plan.layers[l];
        const double prev_forward = l >= 1 ? forward_end[l - 1] : 0.0;

        const double t_gate = l >= 2 ? forward_end[l - 2] : 0.0;
        const double t_start = std::max(transfer_free, t_gate);
        const double t_end = t_start + static_cast<double>(lp.keep_global.size()) * p.t_i;
        transfer_free = t_end;

        const double r_start = std::max(recompute_free, prev_forward);
        const double r_end = r_start + static_cast<double>(lp.recompute_global.size()) * p.t_c;
        recompute_free = r_end;

        const double f_start = std::max({t_end, r_end, prev_forward});
        forward_end[l] = f_start + p.t_o;

        tl.events.push_back({Stream::transfer, l, t_start, t_end, fmt::format("fetch {}", lp.keep_global.size())});
        tl.events.push_back(
            {Stream::recompute, l, r_start, r_end, fmt::format("recompute+rope {}", lp.recompute_global.size())});
        tl.events.push_back({Stream::forward, l, f_start, forward_end[l], std::string(to_string(lp.cls))});
    }
    tl.ttft_s = forward_end.back();
    return tl;
}

double serialized_ttft(const PipelinePlan& plan, const HardwareProfile& p) {
    double total = 0.0;
    for (const LayerPlan& lp : plan.layers) {
        total += static_cast<double>(lp.keep_global.size()) * p.t_i +
                 static_cast<double>(lp.recompute_global.size()) * p.t_c + p.t_o;
    }
    return total;
}

std::vector<std::string> check_timeline(const PipelinePlan& plan, const Timeline& timeline) {
    std::vector<std::string> issues;
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
    struct Slots {
        double t_end = kNaN, r_start = kNaN, r_end = kNaN, f_start = kNaN, f_end = kNaN;
    };
    std::vector<Slots> slots(plan.n_layers);
    double last_end[3] = {0.0, 0.0, 0.0};
    double latest = 0.0;
    for (const TimelineEvent& e : timeline.events) {
        if (e.layer >= plan.n_layers || e.end_s < e.start_s) {
            issues.push_back(fmt::format("malformed event on layer {}", e.layer));
            continue;
        }
        const auto s = static_cast<std::size_t>(e.stream);
        if (e.start_s < last_end[s]) {
            issues.push_back(fmt::format("{} stream overlaps at layer {}", to_string(e.stream), e.layer));
        }
        last_end[s] = e.end_s;
        latest = std::max(latest, e.end_s);
        Slots& sl = slots[e.layer];
        switch (e.stream) {
            case Stream::transfer: sl.t_end = e.end_s; break;
            case Stream::recompute: sl.r_start = e.start_s; sl.r_end = e.end_s; break;
            case Stream::forward: sl.f_start = e.start_s; sl.f_end = e.end_s; break;
        }
    }
    for (std::size_t l = 0; l < plan.n_layers; ++l) {
        const Slots& sl = slots[l];
        if (std::isnan(sl.t_end) || std::isnan(sl.r_end) || std::isnan(sl.f_start)) {
            issues.push_back(fmt::format("layer {} is missing an event", l));
            continue;
        }
        if (sl.f_start < sl.t_end) issues.push_back(fmt::format("layer {} fuses before its transfer ends", l));
        if (sl.f_start < sl.r_end) issues.push_back(fmt::format("layer {} fuses before its recompute ends", l));
        if (l > 0 && !std::isnan(slots[l - 1].f_end)) {
            if (sl.r_start < slots[l - 1].f_end) {
                issues.push_back(fmt::format("layer {} recomputes before layer {} finished", l, l - 1));
            }
            if (sl.f_start < slots[l - 1].f_end) {
                issues.push_back(fmt::format("layer {} fuses before layer {} finished", l, l - 1));
            }
        }
    }
    if (timeline.ttft_s != latest) issues.push_back("ttft does not equal the last event end");
    return issues;
}

std::uint64_t transferred_bytes(const PipelinePlan& plan) {
    std::uint64_t per_layer = 0;
    for (const ChunkPlacement& c : plan.chunks) per_layer += c.keep_indices.size() * c.meta.token_bytes();
    return per_layer * plan.n_layers;
}

std::size_t recompute_tokens(const PipelinePlan& plan) {
    std::size_t n = 0;
    for (const ChunkPlacement& c : plan.chunks) n += c.recompute_indices.size();
    return n;
}

FusedKv fuse_layer(const SeqTensor& reused_keys_raw, const SeqTensor& reused_values,
                   std::span<const TokenIndex> keep_indices, const SeqTensor& recomputed_keys,
                   const SeqTensor& recomputed_values, std::span<const TokenIndex> recompute_indices,
                   std::span<const std::int64_t> positions, const RopeParams& rope, std::size_t n) {
    check_partition(keep_indices, recompute_indices, n, "fuse_layer");
    if (positions.size() != n) {
        throw ShapeError(fmt::format("fuse_layer: {} positions for {} slots", positions.size(), n));
    }
    const SeqTensor& geo = keep_indices.empty() ? recomputed_keys : reused_keys_raw;
    constexpr float kSentinel = std::numeric_limits<float>::quiet_NaN();
    FusedKv out{SeqTensor::filled(n, geo.n_heads(), geo.head_dim(), kSentinel),
                SeqTensor::filled(n, geo.n_heads(), geo.head_dim(), kSentinel)};

    std::vector<std::int64_t> reuse_pos(keep_indices.size());
    for (std::size_t i = 0; i < keep_indices.size(); ++i) reuse_pos[i] = positions[keep_indices[i]];
    const SeqTensor rotated = rope_apply(reused_keys_raw, reuse_pos, rope);

    out.keys = tensor_scatter_tokens(std::move(out.keys), rotated, keep_indices);
    out.values = tensor_scatter_tokens(std::move(out.values), reused_values, keep_indices);
    out.keys = tensor_scatter_tokens(std::move(out.keys), recomputed_keys, recompute_indices);
    out.values = tensor_scatter_tokens(std::move(out.values), recomputed_values, recompute_indices);
    return out;
}

std::string format_timeline_csv(const Timeline& timeline) {
    std::string out = "stream,layer,start_s,end_s,label\n";
    for (const TimelineEvent& e : timeline.events) {
        out += fmt::format("{},{},{:.9g},{:.9g},{}\n", to_string(e.stream), e.layer, e.start_s, e.end_s, e.label);
    }
    return out;
}

std::string format_timeline_summary(const PipelinePlan& plan, const Timeline& timeline, const HardwareProfile& p) {
    const double model = ttft_model(plan.ratio, plan.total_tokens, plan.n_layers, p);
    std::string out;
    out += fmt::format("ratio {:.6g}\n", plan.ratio);
    out += fmt::format("layers {}\n", plan.n_layers);
    out += fmt::format("tokens {}\n", plan.total_tokens);
    out += fmt::format("recompute_tokens {}\n", recompute_tokens(plan));
    out += fmt::format("transferred_bytes {}\n", transferred_bytes(plan));
    out += fmt::format("ttft_s {:.9g}\n", timeline.ttft_s);
    out += fmt::format("serialized_s {:.9g}\n", serialized_ttft(plan, p));
    out += fmt::format("roofline_model_s {:.9g}\n", model);
    out += fmt::format("bubble_delta_s {:.9g}\n", timeline.ttft_s - model);
    return out;
}

}  // namespace cachetune
