#include "cachetune/tier.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "cachetune/error.hpp"

namespace cachetune {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_number(std::string_view key, std::string_view value) {
    // std::from_chars for double is missing on some libstdc++ releases.
    std::string buf(value);
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(buf, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != buf.size() || buf.empty()) {
        throw InvalidParam("tier config: '" + std::string(key) + "' is not a number: '" + buf + "'");
    }
    return v;
}

}  // namespace

std::string_view to_string(TierKind kind) {
    switch (kind) {
        case TierKind::gpu_sim: return "gpu-sim";
        case TierKind::cpu_mem: return "cpu-mem";
        case TierKind::ssd: return "ssd";
        case TierKind::hdd: return "hdd";
        case TierKind::custom: return "custom";
    }
    return "custom";
}

TierKind parse_tier_kind(std::string_view text) {
    for (TierKind k : {TierKind::gpu_sim, TierKind::cpu_mem, TierKind::ssd, TierKind::hdd, TierKind::custom}) {
        if (to_string(k) == text) return k;
    }
    throw InvalidParam("unknown tier kind '" + std::string(text) +
                       "' (expected gpu-sim, cpu-mem, ssd, hdd or custom)");
}

void TierConfig::validate() const {
    if (!(read_bw > 0.0) || !(write_bw > 0.0) || !std::isfinite(read_bw) || !std::isfinite(write_bw)) {
        throw InvalidParam("tier '" + std::string(to_string(kind)) + "': bandwidths must be positive");
    }
    if (!(fixed_latency >= 0.0) || !std::isfinite(fixed_latency)) {
        throw InvalidParam("tier '" + std::string(to_string(kind)) + "': fixed_latency must be >= 0");
    }
}

double TierConfig::modeled_read_seconds(std::uint64_t bytes) const {
    if (bytes == 0) return 0.0;
    return fixed_latency + static_cast<double>(bytes) / read_bw;
}

double TierConfig::modeled_write_seconds(std::uint64_t bytes) const {
    if (bytes == 0) return 0.0;
    return fixed_latency + static_cast<double>(bytes) / write_bw;
}

TierConfig tier_preset(TierKind kind) {
    TierConfig t;
    t.kind = kind;
    switch (kind) {
        case TierKind::gpu_sim:
            t.read_bw = 1.5e12;
            t.write_bw = 1.5e12;
            t.fixed_latency = 0.0;
            break;
        case TierKind::cpu_mem:
            // PCIe Gen3 x16 host-to-device, effective
            t.read_bw = 12e9;
            t.write_bw = 12e9;
            t.fixed_latency = 5e-6;
            break;
        case TierKind::ssd:
            t.read_bw = 535e6;
            t.write_bw = 445e6;
            t.fixed_latency = 1e-4;
            break;
        case TierKind::hdd:
            t.read_bw = 205e6;
            t.write_bw = 201e6;
            t.fixed_latency = 1e-3;
            break;
        case TierKind::custom:
            t.read_bw = 1e9;
            t.write_bw = 1e9;
            t.fixed_latency = 0.0;
            break;
    }
    return t;
}

TierConfig parse_tier_config(std::string_view text) {
    std::vector<std::pair<std::string, std::string>> entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidParam("tier config line " + std::to_string(line_no) + ": expected key=value");
        }
        entries.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
    }

    std::optional<TierKind> kind;
    for (const auto& [k, v] : entries) {
        if (k == "kind") kind = parse_tier_kind(v);
    }
    if (!kind) {
        throw InvalidParam("tier config: missing 'kind'");
    }
    TierConfig tier = tier_preset(*kind);
    bool have_read = false;
    bool have_write = false;
    for (const auto& [k, v] : entries) {
        if (k == "kind") {
            continue;
        } else if (k == "read_bw_bytes") {
            tier.read_bw = parse_number(k, v);
            have_read = true;
        } else if (k == "write_bw_bytes") {
            tier.write_bw = parse_number(k, v);
            have_write = true;
        } else if (k == "fixed_latency_s") {
            tier.fixed_latency = parse_number(k, v);
        } else if (k == "backing") {
            if (v == "memory" || v.empty()) {
                tier.backing.reset();
            } else {
                tier.backing = std::filesystem::path(v);
            }
        } else {
            throw InvalidParam("tier config: unknown key '" + k + "'");
        }
    }
    if (*kind == TierKind::custom && (!have_read || !have_write)) {
        throw InvalidParam("tier config: custom tiers must set read_bw_bytes and write_bw_bytes");
    }
    tier.validate();
    return tier;
}

TierConfig load_tier_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open tier config " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_tier_config(ss.str());
}

std::string format_tier_config(const TierConfig& tier) {
    std::ostringstream ss;
    ss.precision(17);
    ss << "kind=" << to_string(tier.kind) << '\n'
       << "read_bw_bytes=" << tier.read_bw << '\n'
       << "write_bw_bytes=" << tier.write_bw << '\n'
       << "fixed_latency_s=" << tier.fixed_latency << '\n'
       << "backing=" << (tier.backing ? tier.backing->string() : std::string("memory")) << '\n';
    return ss.str();
}

double measure_transfer_cost(const TierConfig& tier, std::uint64_t sample_bytes, std::uint64_t token_bytes) {
    tier.validate();
    if (sample_bytes == 0 || token_bytes == 0) {
        throw InvalidParam("measure_transfer_cost: sample_bytes and token_bytes must be > 0");
    }
    const double tokens = static_cast<double>(sample_bytes) / static_cast<double>(token_bytes);
    if (!tier.file_backed()) {
        return tier.modeled_read_seconds(sample_bytes) / tokens;
    }

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(*tier.backing, ec);
    const fs::path sample = *tier.backing / ".cachetune_profile.bin";
    {
        std::ofstream out(sample, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("measure_transfer_cost: cannot write " + sample.string());
        std::vector<char> block(1 << 16);
        for (std::size_t i = 0; i < block.size(); ++i) block[i] = static_cast<char>(i * 131u);
        std::uint64_t left = sample_bytes;
        while (left > 0) {
            const auto n = static_cast<std::streamsize>(std::min<std::uint64_t>(left, block.size()));
            out.write(block.data(), n);
            left -= static_cast<std::uint64_t>(n);
        }
        if (!out) throw IoError("measure_transfer_cost: short write to " + sample.string());
    }

    std::vector<char> buf(1 << 16);
    std::uint64_t got = 0;
    const auto start = std::chrono::steady_clock::now();
    {
        std::ifstream in(sample, std::ios::binary);
        if (!in) throw IoError("measure_transfer_cost: cannot read " + sample.string());
        while (in) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            got += static_cast<std::uint64_t>(in.gcount());
        }
    }
    const auto stop = std::chrono::steady_clock::now();
    fs::remove(sample, ec);
    if (got != sample_bytes) {
        throw IoError("measure_transfer_cost: read " + std::to_string(got) + " of " +
                      std::to_string(sample_bytes) + " bytes");
    }
    const double elapsed = std::chrono::duration<double>(stop - start).count();
    if (!(elapsed > 0.0)) {
        throw ProfileError("measure_transfer_cost: timer resolution too coarse for the sample size");
    }
    return elapsed / tokens;
}

}  // namespace cachetune
