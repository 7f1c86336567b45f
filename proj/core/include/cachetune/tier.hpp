#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace cachetune {

enum class TierKind { gpu_sim, cpu_mem, ssd, hdd, custom };

std::string_view to_string(TierKind kind);
TierKind parse_tier_kind(std::string_view text);

// Cache medium description. Without a backing path the tier is simulated:
// bytes live in memory and timings come from the bandwidth model.
struct TierConfig {
    TierKind kind = TierKind::cpu_mem;
    double read_bw = 0.0;        // bytes/s
    double write_bw = 0.0;       // bytes/s
    double fixed_latency = 0.0;  // seconds per access
    std::optional<std::filesystem::path> backing;

    void validate() const;
    bool file_backed() const { return backing.has_value(); }

    double modeled_read_seconds(std::uint64_t bytes) const;
    double modeled_write_seconds(std::uint64_t bytes) const;
};

// Shipped presets. hdd and ssd carry the effective fio bandwidths of the
// reference testbeds (205/201 MB/s and 535/445 MB/s read/write).
TierConfig tier_preset(TierKind kind);

// key=value text: kind, read_bw_bytes, write_bw_bytes, fixed_latency_s,
// backing (`memory` or a directory path). '#' starts a comment. Keys left out
// fall back to the preset for `kind`; `custom` must give both bandwidths.
TierConfig parse_tier_config(std::string_view text);
TierConfig load_tier_config(const std::filesystem::path& path);
std::string format_tier_config(const TierConfig& tier);

// Effective per-token transfer cost t_i in seconds. Simulated tiers return
// (fixed_latency + sample_bytes / read_bw) / (sample_bytes / token_bytes);
// file-backed tiers write a sample file under the backing directory and time
// sequential reads of it.
double measure_transfer_cost(const TierConfig& tier, std::uint64_t sample_bytes,
                             std::uint64_t token_bytes);

}  // namespace cachetune
