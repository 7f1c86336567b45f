#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "cachetune/cachepool.hpp"
#include "cachetune/ctkv.hpp"
#include "cachetune/error.hpp"
#include "cachetune/pipesim.hpp"
#include "cachetune/scheduler.hpp"
#include "cachetune/spectral.hpp"
#include "cachetune/tier.hpp"
#include "cachetune/toymodel.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;

namespace cachetune::cli {

namespace {

// ---- shared helpers ----

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
        throw InvalidParam(fmt::format("{}: '{}' is not a non-negative integer", what, text));
    }
    return v;
}

double parse_double(const std::string& text, const std::string& what) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw InvalidParam(fmt::format("{}: '{}' is not a number", what, text));
    }
    return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(text);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    return out;
}

std::uint64_t default_seed() {
    const char* env = std::getenv("CACHETUNE_SEED");
    if (env == nullptr || *env == '\0') return 0;
    return parse_u64(env, "CACHETUNE_SEED");
}

std::string meta_line() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return fmt::format("meta generated_at {}", buf);
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw IoError(fmt::format("cannot write {}", path.string()));
    }
}

struct SyntheticSpec {
    std::size_t n = 64;
    std::size_t h = 2;
    std::size_t d = 8;
    std::size_t l = 4;
    std::size_t vocab = 256;
    std::uint64_t seed = 0;
};

// "N=64,H=2,D=8,L=4,seed=7"; missing keys keep their defaults.
SyntheticSpec parse_synthetic(const std::string& text, std::uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    for (const std::string& item : split(text, ',')) {
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string::npos) {
            throw InvalidParam(fmt::format("--synthetic: expected key=value, got '{}'", item));
        }
        const std::string key = item.substr(0, eq);
        const std::uint64_t v = parse_u64(item.substr(eq + 1), "--synthetic " + key);
        if (key == "N") s.n = v;
        else if (key == "H") s.h = v;
        else if (key == "D") s.d = v;
        else if (key == "L") s.l = v;
        else if (key == "vocab") s.vocab = v;
        else if (key == "seed") s.seed = v;
        else throw InvalidParam(fmt::format("--synthetic: unknown key '{}'", key));
    }
    if (s.n == 0) throw InvalidParam("--synthetic: N must be >= 1");
    return s;
}

// Chunk produced by encoding a seeded random prompt with a toy model.
KvChunk synthetic_chunk(const SyntheticSpec& s) {
    ToyModelConfig mc;
    mc.seed = s.seed;
    mc.n_layers = s.l;
    mc.n_heads = s.h;
    mc.head_dim = s.d;
    mc.vocab_size = s.vocab;
    const ToyModel model(mc);
    const std::vector<TokenId> tokens = synthetic_tokens(s.n, s.vocab, s.seed ^ 0x9e3779b97f4a7c15ull);
    return encode_chunk_isolated(model, tokens, fmt::format("synthetic-{}", s.seed));
}

std::vector<double> parse_sweep(const std::string& text) {
    const std::vector<std::string> parts = split(text, ':');
    if (parts.size() != 3) throw InvalidParam("--sweep: expected lo:hi:step");
    const double lo = parse_double(parts[0], "--sweep lo");
    const double hi = parse_double(parts[1], "--sweep hi");
    const double step = parse_double(parts[2], "--sweep step");
    if (!(step > 0.0) || lo < 0.0 || hi > 1.0 || lo > hi) {
        throw InvalidParam("--sweep: need 0 <= lo <= hi <= 1 and step > 0");
    }
    const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
    if (count > 1'000'000) throw InvalidParam("--sweep: too many points");
    std::vector<double> rs;
    for (std::size_t i = 0; i < count; ++i) {
        // round to kill accumulated representation noise in printed output
        rs.push_back(std::round((lo + step * static_cast<double>(i)) * 1e12) / 1e12);
    }
    return rs;
}

std::vector<std::size_t> parse_counts(const std::string& text, const std::string& what) {
    std::vector<std::size_t> out;
    for (const std::string& item : split(text, ',')) {
        const std::uint64_t v = parse_u64(item, what);
        if (v == 0) throw InvalidParam(fmt::format("{}: counts must be >= 1", what));
        out.push_back(v);
    }
    if (out.empty()) throw InvalidParam(fmt::format("{}: empty list", what));
    return out;
}

struct TierOptions {
    std::string preset;
    std::string config_path;
};

void add_tier_options(CLI::App* cmd, TierOptions& t, const std::string& default_preset) {
    t.preset = default_preset;
    auto* preset = cmd->add_option("--tier", t.preset, "tier preset: gpu-sim, cpu-mem, ssd, hdd, custom")
                       ->capture_default_str();
    cmd->add_option("--tier-config", t.config_path, "key=value tier config file")
        ->check(CLI::ExistingFile)
        ->excludes(preset);
}

TierConfig resolve_tier(const TierOptions& t) {
    if (!t.config_path.empty()) return load_tier_config(t.config_path);
    return tier_preset(parse_tier_kind(t.preset));
}

std::string fmt_num(double v) { return fmt::format("{:.9g}", v); }

// ---- analyze ----

struct AnalyzeArgs {
    std::string input;
    std::string synthetic;
    std::string output = "synthetic.ctkv";
    double alpha = kDefaultAlpha;
    double r = 0.15;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out) {
    KvChunk chunk;
    fs::path path;
    if (!a.input.empty()) {
        path = a.input;
        chunk = read_ctkv_file(path).chunk;
    } else {
        chunk = synthetic_chunk(parse_synthetic(a.synthetic, default_seed()));
        path = a.output;
    }
    const ImportanceRanking ranking = rank_chunk(chunk, a.alpha);

    // write next to the target, then swap in
    fs::path tmp = path;
    tmp += ".tmp";
    write_ctkv_file(tmp, chunk, &ranking);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError(fmt::format("cannot replace {}: {}", path.string(), ec.message()));

    const std::size_t n = chunk.n_tokens();
    const std::size_t k = selection_count(n, a.r);
    const std::vector<double> agg = ranking.aggregate_scores();
    out << fmt::format("chunk {} layers {} tokens {} heads {} head_dim {} alpha {}\n", chunk.chunk_id,
                       chunk.n_layers(), n, chunk.n_heads(), chunk.head_dim(), fmt_num(a.alpha));
    out << fmt::format("wrote {}\n", path.string());
    out << fmt::format("# top {} tokens at r={} (ceil(r*N))\n", k, fmt_num(a.r));
    out << "rank,token,score\n";
    for (std::size_t i = 0; i < k; ++i) {
        const TokenIndex t = ranking.aggregate_order[i];
        out << fmt::format("{},{},{}\n", i, t, fmt_num(agg[t]));
    }
    out << "# per-layer scores\n";
    out << "layer,min,mean,max\n";
    for (std::size_t l = 0; l < ranking.n_layers(); ++l) {
        const std::vector<double>& s = ranking.per_layer_scores[l];
        double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
        for (double v : s) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            sum += v;
        }
        out << fmt::format("{},{},{},{}\n", l, fmt_num(lo), fmt_num(sum / static_cast<double>(n)), fmt_num(hi));
    }
    out << fmt::format("# selection overlap across alpha at r={}\n", fmt_num(a.r));
    out << "alpha_a,alpha_b,jaccard\n";
    const double alphas[] = {0.3, 0.5, 0.7};
    std::vector<std::vector<TokenIndex>> sets;
    for (double al : alphas) sets.push_back(indices_for_ratio(rank_chunk(chunk, al), a.r));
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = i + 1; j < 3; ++j) {
            out << fmt::format("{},{},{:.6f}\n", alphas[i], alphas[j], jaccard(sets[i], sets[j]));
        }
    }
    return kExitOk;
}

// ---- pool-put / pool-fetch ----

constexpr const char* kPoolTierFile = "tier.conf";

struct PoolPutArgs {
    std::string pool;
    TierOptions tier;
    std::vector<std::string> files;
    double alpha = kDefaultAlpha;
};

int cmd_pool_put(const PoolPutArgs& a, std::ostream& out) {
    TierConfig tier = resolve_tier(a.tier);
    tier.backing = fs::path(a.pool);
    std::error_code ec;
    fs::create_directories(a.pool, ec);
    if (ec) throw IoError(fmt::format("cannot create pool directory {}: {}", a.pool, ec.message()));
    tier.validate();
    const fs::path tier_file = fs::path(a.pool) / kPoolTierFile;
    if (!fs::exists(tier_file)) {
        TierConfig stored = tier;
        stored.backing.reset();
        write_text(tier_file, format_tier_config(stored));
    }
    std::unique_ptr<CachePool> pool = CachePool::open_directory(tier);
    for (const std::string& file : a.files) {
        const CtkvContents c = read_ctkv_file(file);
        const ImportanceRanking ranking = c.ranking ? *c.ranking : rank_chunk(c.chunk, a.alpha);
        const PutReceipt rec = pool->put_chunk(c.chunk, ranking, tier);
        out << fmt::format("put {} bytes {} modeled_write_s {}\n", rec.chunk_id, rec.bytes_written,
                           fmt_num(rec.modeled_seconds));
    }
    return kExitOk;
}

struct PoolFetchArgs {
    std::string pool;
    TierOptions tier;
    bool tier_given = false;
    std::string chunk;
    std::optional<std::size_t> layer;
    double r = 0.15;
};

int cmd_pool_fetch(const PoolFetchArgs& a, std::ostream& out) {
    TierConfig tier;
    const fs::path tier_file = fs::path(a.pool) / kPoolTierFile;
    if (!a.tier_given && fs::exists(tier_file)) {
        tier = load_tier_config(tier_file);
    } else {
        tier = resolve_tier(a.tier);
    }
    tier.backing = fs::path(a.pool);
    std::unique_ptr<CachePool> pool = CachePool::open_directory(tier);
    const CtkvHeader h = pool->header(a.chunk);
    std::vector<std::size_t> layers;
    if (a.layer) {
        if (*a.layer >= h.n_layers) {
            throw InvalidParam(fmt::format("--layer {} out of range (chunk has {} layers)", *a.layer, h.n_layers));
        }
        layers.push_back(*a.layer);
    } else {
        for (std::size_t l = 0; l < h.n_layers; ++l) layers.push_back(l);
    }
    out << fmt::format("chunk {} tier {} r {} tokens {} keep {}\n", a.chunk, to_string(tier.kind), fmt_num(a.r),
                       h.n_tokens, h.n_tokens - selection_count(h.n_tokens, a.r));
    out << "layer,keep_tokens,ranges,expected_bytes,bytes_read,modeled_s\n";
    std::uint64_t total_expected = 0, total_read = 0;
    double total_s = 0.0;
    for (std::size_t l : layers) {
        const SparseFetchPlan plan = pool->plan_sparse_fetch(a.chunk, l, a.r);
        const FetchResult res = pool->fetch_sparse(plan);
        out << fmt::format("{},{},{},{},{},{}\n", l, plan.keep_indices.size(), plan.byte_ranges.size(),
                           plan.expected_bytes, res.bytes_read, fmt_num(res.modeled_seconds));
        total_expected += plan.expected_bytes;
        total_read += res.bytes_read;
        total_s += res.modeled_seconds;
    }
    out << fmt::format("total expected_bytes {} bytes_read {} modeled_s {}\n", total_expected, total_read,
                       fmt_num(total_s));
    return kExitOk;
}

// ---- calibrate ----

struct CalibrateArgs {
    TierOptions tier;
    std::string backing;
    std::size_t cal_n = 10;
    double epsilon = 0.01;
    double r_min = 0.15;
    double r_max = 0.9;
    std::string evaluator = "sim";
    std::size_t layers = 32;
    std::size_t heads = 2;
    std::size_t head_dim = 8;
    std::optional<double> t_c;
    std::optional<double> t_o;
    std::optional<double> t_i;
    std::uint64_t sample_bytes = 1 << 20;
    std::optional<std::uint64_t> seed;
    std::string output;
};

// Default per-token recompute and per-layer overhead for the simulator when
// nothing is injected; the same values simulate uses.
constexpr double kDefaultTc = 1e-6;
constexpr double kDefaultTo = 20e-6;

std::vector<CalRequest> synthetic_cal_set(std::size_t n, std::uint64_t seed, std::size_t lo, std::size_t hi) {
    std::mt19937_64 rng(seed);
    std::vector<CalRequest> set;
    for (std::size_t i = 0; i < n; ++i) {
        CalRequest req;
        for (int j = 0; j < 3; ++j) req.chunk_tokens.push_back(lo + rng() % (hi - lo + 1));
        set.push_back(std::move(req));
    }
    return set;
}

double simulate_request(const CalRequest& req, double r, const HardwareProfile& p, std::size_t layers,
                        std::size_t heads, std::size_t head_dim) {
    std::vector<ChunkMeta> metas;
    std::vector<ImportanceRanking> rankings;
    for (std::size_t j = 0; j < req.chunk_tokens.size(); ++j) {
        metas.push_back(ChunkMeta{fmt::format("c{}", j), req.chunk_tokens[j], heads, head_dim, 4});
        rankings.push_back(identity_ranking(req.chunk_tokens[j], 1));
    }
    return simulate(build_plan(metas, rankings, r, layers), p).ttft_s;
}

int cmd_calibrate(const CalibrateArgs& a, std::ostream& out) {
    TierConfig tier = resolve_tier(a.tier);
    if (!a.backing.empty()) tier.backing = fs::path(a.backing);
    SearchConfig cfg;
    cfg.r_min = a.r_min;
    cfg.r_max = a.r_max;
    cfg.epsilon = a.epsilon;
    cfg.validate();
    if (a.cal_n == 0) throw InvalidParam("--cal-n must be >= 1");
    const std::uint64_t seed = a.seed.value_or(default_seed());

    CalibrationInputs in;
    in.tier = tier;
    in.sample_bytes = a.sample_bytes;
    in.t_c = a.t_c;
    in.t_o = a.t_o;
    in.t_i = a.t_i;

    CalibrationReport report;
    if (a.evaluator == "sim") {
        in.token_bytes = 2 * a.heads * a.head_dim * 4;
        if (!in.t_c) in.t_c = kDefaultTc;
        if (!in.t_o) in.t_o = kDefaultTo;
        const std::vector<CalRequest> cal = synthetic_cal_set(a.cal_n, seed, 256, 1024);
        report = calibrate(
            in,
            [&](const CalRequest& req, double r, const HardwareProfile& p) {
                return simulate_request(req, r, p, a.layers, a.heads, a.head_dim);
            },
            cal, cfg);
    } else if (a.evaluator == "real") {
        // Toy-model forward plus pool fetches on the configured tier.
        ToyModelConfig mc;
        mc.seed = seed;
        mc.n_heads = a.heads;
        mc.head_dim = a.head_dim;
        const ToyModel model(mc);
        in.token_bytes = 2 * a.heads * a.head_dim * 4;
        in.measure_t_c = [&] { return time_recompute_per_token(model, 64); };
        in.measure_t_o = [&] { return time_layer_overhead(model, 64); };

        const std::vector<CalRequest> cal = synthetic_cal_set(a.cal_n, seed, 48, 80);
        CachePool pool;
        std::vector<std::vector<ReusableChunk>> chunks(cal.size());
        for (std::size_t i = 0; i < cal.size(); ++i) {
            for (std::size_t j = 0; j < cal[i].chunk_tokens.size(); ++j) {
                ReusableChunk c;
                c.tokens = synthetic_tokens(cal[i].chunk_tokens[j], mc.vocab_size, seed + 131 * i + j);
                c.kv = encode_chunk_isolated(model, c.tokens, fmt::format("req{}-c{}", i, j));
                c.ranking = rank_chunk(c.kv);
                try {
                    pool.put_chunk(c.kv, c.ranking, tier);
                } catch (const IoError& e) {
                    throw ProfileError(fmt::format("cannot stage calibration chunks: {}", e.what()));
                }
                chunks[i].push_back(std::move(c));
            }
        }
        const std::vector<TokenId> suffix = synthetic_tokens(8, mc.vocab_size, seed + 7);
        std::map<std::vector<std::size_t>, std::size_t> request_index;
        for (std::size_t i = 0; i < cal.size(); ++i) request_index.emplace(cal[i].chunk_tokens, i);
        report = calibrate(
            in,
            [&](const CalRequest& req, double r, const HardwareProfile&) {
                const std::size_t i = request_index.at(req.chunk_tokens);
                double modeled = 0.0;
                const auto start = std::chrono::steady_clock::now();
                for (const ReusableChunk& c : chunks[i]) {
                    for (std::size_t l = 0; l < mc.n_layers; ++l) {
                        const FetchResult f = pool.fetch_sparse(pool.plan_sparse_fetch(c.kv.chunk_id, l, r));
                        modeled += f.modeled_seconds;
                    }
                }
                const SelectivePrefillResult res = selective_prefill(model, chunks[i], suffix, r);
                (void)res;
                const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                // simulated tiers move bytes instantly, so charge their model time
                return tier.file_backed() ? wall : wall + modeled;
            },
            cal, cfg);
    } else {
        throw InvalidParam(fmt::format("--evaluator must be sim or real, got '{}'", a.evaluator));
    }

    const std::string text = format_calibration_report(report);
    out << text;
    if (!a.output.empty()) write_text(a.output, text);
    return kExitOk;
}

// ---- simulate ----

struct SimulateArgs {
    TierOptions tier;
    std::string chunks = "512,512,512";
    std::vector<std::string> chunk_files;
    std::size_t layers = 32;
    std::size_t heads = 2;
    std::size_t head_dim = 8;
    std::optional<double> t_c;
    std::optional<double> t_o;
    std::optional<double> t_i;
    std::uint64_t sample_bytes = 1 << 20;
    double r = 0.15;
    std::string sweep;
    double r_min = 0.15;
    double r_max = 0.9;
    double epsilon = 0.01;
    std::string out_dir;
    bool svg = false;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
    const TierConfig tier = resolve_tier(a.tier);
    std::vector<ChunkMeta> metas;
    std::vector<ImportanceRanking> rankings;
    std::size_t heads = a.heads, head_dim = a.head_dim;
    if (!a.chunk_files.empty()) {
        for (const std::string& f : a.chunk_files) {
            const CtkvContents c = read_ctkv_file(f);
            metas.push_back(ChunkMeta{c.chunk.chunk_id, c.chunk.n_tokens(), c.chunk.n_heads(), c.chunk.head_dim(), 4});
            rankings.push_back(c.ranking ? *c.ranking : rank_chunk(c.chunk));
        }
        heads = metas.front().n_heads;
        head_dim = metas.front().head_dim;
    } else {
        const std::vector<std::size_t> counts = parse_counts(a.chunks, "--chunks");
        for (std::size_t j = 0; j < counts.size(); ++j) {
            metas.push_back(ChunkMeta{fmt::format("c{}", j), counts[j], heads, head_dim, 4});
            rankings.push_back(identity_ranking(counts[j], 1));
        }
    }
    if (a.layers < 2) throw InvalidParam("--layers must be >= 2 (collection and check layers)");
    const std::uint64_t token_bytes = 2ull * heads * head_dim * 4;
    HardwareProfile p;
    p.t_c = a.t_c.value_or(kDefaultTc);
    p.t_o = a.t_o.value_or(kDefaultTo);
    p.t_i = a.t_i ? *a.t_i : measure_transfer_cost(tier, a.sample_bytes, token_bytes);
    p.validate();

    const fs::path dir = a.out_dir;
    out << fmt::format("tier {} t_c_s {} t_i_s {} t_o_s {}\n", to_string(tier.kind), fmt_num(p.t_c),
                       fmt_num(p.t_i), fmt_num(p.t_o));

    if (a.sweep.empty()) {
        const PipelinePlan plan = build_plan(metas, rankings, a.r, a.layers);
        const Timeline tl = simulate(plan, p);
        const std::string summary = format_timeline_summary(plan, tl, p);
        out << summary;
        if (!a.out_dir.empty()) {
            write_text(dir / "timeline.csv", format_timeline_csv(tl));
            write_text(dir / "summary.txt", summary);
            if (a.svg) write_text(dir / "timeline.svg", svg_gantt(tl));
        }
        return kExitOk;
    }

    const std::vector<double> rs = parse_sweep(a.sweep);
    SearchConfig cfg;
    cfg.r_min = a.r_min;
    cfg.r_max = a.r_max;
    cfg.epsilon = a.epsilon;
    cfg.validate();
    std::string csv = "r,ttft_s,transferred_bytes,recompute_tokens,roofline_model_s\n";
    std::vector<double> ttfts, models;
    double best_r = rs.front(), best = std::numeric_limits<double>::infinity();
    std::optional<double> best_in_r;
    double best_in = std::numeric_limits<double>::infinity();
    for (double r : rs) {
        const PipelinePlan plan = build_plan(metas, rankings, r, a.layers);
        const double t = simulate(plan, p).ttft_s;
        const double m = ttft_model(r, plan.total_tokens, a.layers, p);
        ttfts.push_back(t);
        models.push_back(m);
        csv += fmt::format("{},{},{},{},{}\n", fmt_num(r), fmt_num(t), transferred_bytes(plan), recompute_tokens(plan),
                           fmt_num(m));
        if (t < best) {
            best = t;
            best_r = r;
        }
        if (r >= cfg.r_min - 1e-12 && r <= cfg.r_max + 1e-12 && t < best_in) {
            best_in = t;
            best_in_r = r;
        }
    }
    const std::function<double(double)> f = [&](double r) {
        return simulate(build_plan(metas, rankings, r, a.layers), p).ttft_s;
    };
    const double r0 = roofline_r0(p, cfg);
    const GssResult gss = gss_optimize(f, r0, cfg);

    out << csv;
    out << fmt::format("grid_argmin_r {}\n", fmt_num(best_r));
    if (best_in_r) out << fmt::format("clamped_argmin_r {}\n", fmt_num(*best_in_r));
    out << fmt::format("roofline_r0 {}\n", fmt_num(r0));
    out << fmt::format("gss_r_star {}\n", fmt_num(gss.r_star));
    out << fmt::format("gss_eval_count {}\n", gss.eval_count);
    if (!a.out_dir.empty()) {
        write_text(dir / "sweep.csv", csv);
        if (a.svg) {
            write_text(dir / "sweep.svg", svg_line_chart(fmt::format("TTFT vs recompute ratio ({})", to_string(tier.kind)),
                                                         "r", rs, {{"simulated", ttfts}, {"roofline model", models}}));
        }
    }
    return kExitOk;
}

// ---- attn-experiment ----

struct AttnArgs {
    std::string seeds;
    double r = 0.15;
    std::vector<std::string> strategies;
    std::size_t n_chunks = 3;
    std::size_t chunk_tokens = 64;
    std::size_t suffix = 8;
    double alpha = kDefaultAlpha;
    std::size_t layers = 4;
    std::size_t heads = 2;
    std::size_t head_dim = 8;
    bool mlp = false;
    std::string output;
    std::string svg;
};

int cmd_attn_experiment(const AttnArgs& a, std::ostream& out) {
    std::vector<std::uint64_t> seeds;
    if (a.seeds.empty()) {
        seeds.assign(kCommittedSeeds.begin(), kCommittedSeeds.end());
    } else {
        for (const std::string& s : split(a.seeds, ',')) seeds.push_back(parse_u64(s, "--seeds"));
    }
    std::vector<SelectionStrategy> strategies;
    if (a.strategies.empty()) {
        strategies = {SelectionStrategy::lowfreq, SelectionStrategy::highfreq, SelectionStrategy::random,
                      SelectionStrategy::none, SelectionStrategy::full};
    } else {
        for (const std::string& s : a.strategies) strategies.push_back(parse_selection_strategy(s));
    }
    if (a.r < 0.0 || a.r > 1.0) throw InvalidParam("--r must be in [0, 1]");
    AttentionExperimentConfig cfg;
    cfg.model.n_layers = a.layers;
    cfg.model.n_heads = a.heads;
    cfg.model.head_dim = a.head_dim;
    cfg.model.use_mlp = a.mlp;
    cfg.model.validate();
    cfg.n_chunks = a.n_chunks;
    cfg.chunk_tokens = a.chunk_tokens;
    cfg.suffix_tokens = a.suffix;
    cfg.r = a.r;
    cfg.alpha = a.alpha;
    if (cfg.n_chunks == 0 || cfg.chunk_tokens == 0 || cfg.suffix_tokens == 0) {
        throw InvalidParam("--chunks, --chunk-tokens and --suffix must be >= 1");
    }

    std::string csv = "seed";
    for (SelectionStrategy s : strategies) csv += fmt::format(",{}", to_string(s));
    csv += '\n';
    std::vector<double> mean(strategies.size(), 0.0);
    for (std::uint64_t seed : seeds) {
        const std::vector<double> d = run_attention_trial(seed, strategies, cfg);
        csv += std::to_string(seed);
        for (std::size_t i = 0; i < d.size(); ++i) {
            csv += fmt::format(",{:.9f}", d[i]);
            mean[i] += d[i] / static_cast<double>(seeds.size());
        }
        csv += '\n';
    }
    csv += "mean";
    for (double m : mean) csv += fmt::format(",{:.9f}", m);
    csv += '\n';
    out << csv;
    if (!a.output.empty()) write_text(a.output, csv);
    if (!a.svg.empty()) {
        std::vector<std::string> names;
        for (SelectionStrategy s : strategies) names.emplace_back(to_string(s));
        write_text(a.svg, svg_bar_chart(fmt::format("mean attention deviation, r={}", fmt_num(a.r)), names,
                                        {{"deviation", mean}}));
    }
    return kExitOk;
}

// ---- spectrum-report ----

struct SpectrumArgs {
    std::string input;
    std::string synthetic;
    std::string output;
    std::string svg;
};

int cmd_spectrum_report(const SpectrumArgs& a, std::ostream& out) {
    const KvChunk chunk = !a.input.empty() ? read_ctkv_file(a.input).chunk
                                           : synthetic_chunk(parse_synthetic(a.synthetic, default_seed()));
    const SpectrumReport rep = spectrum_report(chunk);
    std::string csv = "decile,key_energy,value_energy\n";
    for (std::size_t i = 0; i < 10; ++i) {
        csv += fmt::format("{},{:.9f},{:.9f}\n", i + 1, rep.key_deciles[i], rep.value_deciles[i]);
    }
    out << csv;
    if (!a.output.empty()) write_text(a.output, csv);
    if (!a.svg.empty()) {
        std::vector<std::string> names;
        for (int i = 1; i <= 10; ++i) names.push_back(std::to_string(i));
        write_text(a.svg, svg_bar_chart("energy share per frequency decile", names,
                                        {{"keys", {rep.key_deciles.begin(), rep.key_deciles.end()}},
                                         {"values", {rep.value_deciles.begin(), rep.value_deciles.end()}}}));
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"cachetune: frequency-guided KV-cache reuse toolkit", "cachetune"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    AnalyzeArgs analyze;
    auto* c_an = app.add_subcommand("analyze", "rank a chunk's tokens and store the ranking in its CTKV file");
    auto* an_in = c_an->add_option("--input", analyze.input, "CTKV chunk file (updated in place)")
                      ->check(CLI::ExistingFile);
    auto* an_syn = c_an->add_option("--synthetic", analyze.synthetic,
                                    "toy-model chunk spec, e.g. N=64,H=2,D=8,L=4,seed=7");
    an_in->excludes(an_syn);
    c_an->add_option("--output", analyze.output, "CTKV path for --synthetic")->capture_default_str();
    c_an->add_option("--alpha", analyze.alpha, "low-pass cutoff ratio")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    c_an->add_option("--r", analyze.r, "ratio for the top-k table")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    PoolPutArgs put;
    auto* c_put = app.add_subcommand("pool-put", "store CTKV chunks in a pool directory");
    c_put->add_option("--pool", put.pool, "pool directory")->required();
    add_tier_options(c_put, put.tier, "ssd");
    c_put->add_option("--alpha", put.alpha, "cutoff used when a file has no ranking")->capture_default_str();
    c_put->add_option("files", put.files, "CTKV files")->required()->check(CLI::ExistingFile);

    PoolFetchArgs fetch;
    std::size_t fetch_layer = 0;
    auto* c_fetch = app.add_subcommand("pool-fetch", "sparse-fetch a chunk's reusable rows");
    c_fetch->add_option("--pool", fetch.pool, "pool directory")->required()->check(CLI::ExistingDirectory);
    add_tier_options(c_fetch, fetch.tier, "ssd");
    c_fetch->add_option("--chunk", fetch.chunk, "chunk id")->required();
    auto* fetch_layer_opt = c_fetch->add_option("--layer", fetch_layer, "single layer (default: all)");
    c_fetch->add_option("--r", fetch.r, "recompute ratio")->capture_default_str()->check(CLI::Range(0.0, 1.0));

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "profile the tier and search the recompute ratio");
    add_tier_options(c_cal, cal.tier, "ssd");
    c_cal->add_option("--backing", cal.backing, "directory to make the tier file-backed");
    c_cal->add_option("--cal-n", cal.cal_n, "calibration requests")->capture_default_str();
    c_cal->add_option("--epsilon", cal.epsilon, "search tolerance")->capture_default_str();
    c_cal->add_option("--r-min", cal.r_min, "lower ratio bound")->capture_default_str();
    c_cal->add_option("--r-max", cal.r_max, "upper ratio bound")->capture_default_str();
    c_cal->add_option("--evaluator", cal.evaluator, "sim or real")->capture_default_str()
        ->check(CLI::IsMember({"sim", "real"}));
    c_cal->add_option("--layers", cal.layers, "layers in the simulated model")->capture_default_str();
    c_cal->add_option("--heads", cal.heads, "KV heads")->capture_default_str();
    c_cal->add_option("--head-dim", cal.head_dim, "head dimension")->capture_default_str();
    c_cal->add_option("--t-c", cal.t_c, "inject recompute cost, s/token/layer (sim default 1e-6)");
    c_cal->add_option("--t-o", cal.t_o, "inject per-layer overhead, s (sim default 2e-5)");
    c_cal->add_option("--t-i", cal.t_i, "inject transfer cost, s/token/layer");
    c_cal->add_option("--sample-bytes", cal.sample_bytes, "transfer profiling sample size")->capture_default_str();
    c_cal->add_option("--seed", cal.seed, "calibration-set seed (default CACHETUNE_SEED or 0)");
    c_cal->add_option("--output", cal.output, "report file");

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "simulate the overlapped prefill pipeline");
    add_tier_options(c_sim, sim.tier, "ssd");
    auto* sim_chunks = c_sim->add_option("--chunks", sim.chunks, "token count per chunk")->capture_default_str();
    c_sim->add_option("--chunk-files", sim.chunk_files, "CTKV files to plan from")->check(CLI::ExistingFile)
        ->excludes(sim_chunks);
    c_sim->add_option("--layers", sim.layers, "model layers")->capture_default_str();
    c_sim->add_option("--heads", sim.heads, "KV heads")->capture_default_str();
    c_sim->add_option("--head-dim", sim.head_dim, "head dimension")->capture_default_str();
    c_sim->add_option("--t-c", sim.t_c, "recompute cost, s/token/layer (default 1e-6)");
    c_sim->add_option("--t-o", sim.t_o, "per-layer overhead, s (default 2e-5)");
    c_sim->add_option("--t-i", sim.t_i, "transfer cost, s/token/layer (default: from tier)");
    c_sim->add_option("--sample-bytes", sim.sample_bytes, "transfer profiling sample size")->capture_default_str();
    auto* sim_r = c_sim->add_option("--r", sim.r, "recompute ratio")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    c_sim->add_option("--sweep", sim.sweep, "lo:hi:step ratio sweep")->excludes(sim_r);
    c_sim->add_option("--r-min", sim.r_min, "lower bound for the sweep search")->capture_default_str();
    c_sim->add_option("--r-max", sim.r_max, "upper bound for the sweep search")->capture_default_str();
    c_sim->add_option("--epsilon", sim.epsilon, "search tolerance")->capture_default_str();
    c_sim->add_option("--out-dir", sim.out_dir, "write CSV and summary files here");
    c_sim->add_flag("--svg", sim.svg, "also write SVG plots into --out-dir");

    AttnArgs attn;
    auto* c_attn = app.add_subcommand("attn-experiment", "attention recovery per selection strategy");
    c_attn->add_option("--seeds", attn.seeds, "comma-separated seeds (default: committed list of 25)");
    c_attn->add_option("--r", attn.r, "recompute ratio")->capture_default_str();
    c_attn->add_option("--strategy", attn.strategies, "lowfreq, highfreq, random, none, full (repeatable)");
    c_attn->add_option("--chunks", attn.n_chunks, "chunks per prompt")->capture_default_str();
    c_attn->add_option("--chunk-tokens", attn.chunk_tokens, "tokens per chunk")->capture_default_str();
    c_attn->add_option("--suffix", attn.suffix, "suffix tokens")->capture_default_str();
    c_attn->add_option("--alpha", attn.alpha, "low-pass cutoff ratio")->capture_default_str();
    c_attn->add_option("--layers", attn.layers, "toy model layers")->capture_default_str();
    c_attn->add_option("--heads", attn.heads, "toy model heads")->capture_default_str();
    c_attn->add_option("--head-dim", attn.head_dim, "toy model head dimension")->capture_default_str();
    c_attn->add_flag("--mlp", attn.mlp, "add an MLP to every block");
    c_attn->add_option("--output", attn.output, "CSV file");
    c_attn->add_option("--svg", attn.svg, "bar chart of the means");

    SpectrumArgs spec;
    auto* c_spec = app.add_subcommand("spectrum-report", "energy share per frequency decile of a chunk");
    auto* sp_in = c_spec->add_option("--input", spec.input, "CTKV chunk file")->check(CLI::ExistingFile);
    auto* sp_syn = c_spec->add_option("--synthetic", spec.synthetic, "toy-model chunk spec");
    sp_in->excludes(sp_syn);
    c_spec->add_option("--output", spec.output, "CSV file");
    c_spec->add_option("--svg", spec.svg, "bar chart");

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (c_an->parsed()) {
            if (analyze.input.empty() && analyze.synthetic.empty()) {
                throw InvalidParam("analyze: give --input or --synthetic");
            }
            return cmd_analyze(analyze, out);
        }
        if (c_put->parsed()) return cmd_pool_put(put, out);
        if (c_fetch->parsed()) {
            if (fetch_layer_opt->count() > 0) fetch.layer = fetch_layer;
            fetch.tier_given = c_fetch->count("--tier") > 0 || c_fetch->count("--tier-config") > 0;
            return cmd_pool_fetch(fetch, out);
        }
        if (c_cal->parsed()) return cmd_calibrate(cal, out);
        if (c_sim->parsed()) {
            const int rc = cmd_simulate(sim, out);
            if (rc == kExitOk) out << meta_line() << '\n';
            return rc;
        }
        if (c_attn->parsed()) return cmd_attn_experiment(attn, out);
        if (c_spec->parsed()) {
            if (spec.input.empty() && spec.synthetic.empty()) {
                throw InvalidParam("spectrum-report: give --input or --synthetic");
            }
            return cmd_spectrum_report(spec, out);
        }
    } catch (const ProfileError& e) {
        err << "error: " << e.what() << '\n';
        return kExitEnvironment;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitEnvironment;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace cachetune::cli
