#include "cachetune/toymodel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "cachetune/error.hpp"
#include "cachetune/fft.hpp"
#include "cachetune/pipesim.hpp"

namespace cachetune {

namespace {

// Portable uniform in [-1, 1): mt19937_64's output sequence is fixed by the
// standard, the library distributions are not.
double uniform_pm1(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
}

std::vector<double> random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
    std::vector<double> m(rows * cols);
    for (double& v : m) v = uniform_pm1(rng) * scale;
    return m;
}

// out[c] += sum_r in[r] * w[r][c]
void matvec_acc(std::span<const double> in, const std::vector<double>& w, std::size_t cols, std::span<double> out) {
    for (std::size_t r = 0; r < in.size(); ++r) {
        const double x = in[r];
        const double* wr = w.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += x * wr[c];
    }
}

void rms_norm(std::span<const double> in, std::span<double> out) {
    double ms = 0.0;
    for (double v : in) ms += v * v;
    ms /= static_cast<double>(in.size());
    const double inv = 1.0 / std::sqrt(ms + 1e-6);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] * inv;
}

struct ReuseSource {
    // Per layer, pre-RoPE keys and values for every global slot; rows of
    // active tokens are ignored.
    const std::vector<SeqTensor>* keys_raw = nullptr;
    const std::vector<SeqTensor>* values = nullptr;
};

struct EngineOutput {
    std::vector<SeqTensor> fused_keys;
    std::vector<SeqTensor> fused_values;
    std::vector<SeqTensor> active_keys_raw;  // pre-RoPE, rows aligned with `active`
    std::vector<SeqTensor> active_values;
    AttentionRecord attention;
    std::vector<std::vector<double>> logits;
};

// Forwards the `active` tokens (ascending global indices into `tokens`)
// through every layer. Global slot i sits at rotary position i. Non-active
// slots take their KV from `reuse`. Attention and logits are recorded for
// active slots >= query_start.
EngineOutput run_engine(const ToyModel& model, std::span<const TokenId> tokens,
                        std::span<const TokenIndex> active, const ReuseSource& reuse, std::size_t query_start) {
    const ToyModelConfig& cfg = model.config();
    const std::size_t n = tokens.size();
    const std::size_t hid = cfg.hidden_dim();
    const std::size_t heads = cfg.n_heads;
    const std::size_t dim = cfg.head_dim;
    const std::size_t na = active.size();
    const RopeParams rope = cfg.rope();
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dim));

    std::vector<TokenIndex> keep;
    {
        std::vector<char> is_active(n, 0);
        for (TokenIndex t : active) is_active[t] = 1;
        for (TokenIndex t = 0; t < n; ++t) {
            if (!is_active[t]) keep.push_back(t);
        }
    }
    if (!keep.empty() && (reuse.keys_raw == nullptr || reuse.values == nullptr)) {
        throw InvalidPlan("run_engine: inactive tokens but no reuse source");
    }
    std::vector<std::int64_t> positions(n);
    for (std::size_t i = 0; i < n; ++i) positions[i] = static_cast<std::int64_t>(i);

    std::vector<std::size_t> query_rows;  // positions in `active`
    for (std::size_t a = 0; a < na; ++a) {
        if (active[a] >= query_start) query_rows.push_back(a);
    }

    EngineOutput out;
    out.attention.n_layers = cfg.n_layers;
    out.attention.n_heads = heads;
    out.attention.n_queries = query_rows.size();
    out.attention.n_keys = n;
    out.attention.weights.assign(cfg.n_layers * heads * query_rows.size() * n, 0.0);

    const std::vector<double>& emb = model.embedding();
    std::vector<double> h(na * hid);
    for (std::size_t a = 0; a < na; ++a) {
        std::copy_n(emb.begin() + static_cast<std::ptrdiff_t>(tokens[active[a]] * hid), hid,
                    h.begin() + static_cast<std::ptrdiff_t>(a * hid));
    }

    std::vector<double> x(hid), q(na * hid), k(hid), v(hid), attn_out(hid), proj(hid), scores(n), head_buf(dim);
    std::vector<double> mlp_mid(4 * hid);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const ToyModel::Layer& w = model.layer(l);
        SeqTensor k_raw(na, heads, dim), k_rot(na, heads, dim), v_act(na, heads, dim);
        for (std::size_t a = 0; a < na; ++a) {
            std::span<const double> ha(h.data() + a * hid, hid);
            rms_norm(ha, x);
            std::span<double> qa(q.data() + a * hid, hid);
            std::fill(qa.begin(), qa.end(), 0.0);
            std::fill(k.begin(), k.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            matvec_acc(x, w.wq, hid, qa);
            matvec_acc(x, w.wk, hid, k);
            matvec_acc(x, w.wv, hid, v);
            for (std::size_t hh = 0; hh < heads; ++hh) {
                std::span<double> kh(k.data() + hh * dim, dim);
                for (std::size_t d = 0; d < dim; ++d) k_raw.at(a, hh, d) = static_cast<float>(kh[d]);
                rope_rotate_head(kh, positions[active[a]], rope);
                rope_rotate_head(qa.subspan(hh * dim, dim), positions[active[a]], rope);
                for (std::size_t d = 0; d < dim; ++d) {
                    k_rot.at(a, hh, d) = static_cast<float>(kh[d]);
                    v_act.at(a, hh, d) = static_cast<float>(v[hh * dim + d]);
                }
            }
        }

        SeqTensor reuse_k, reuse_v;
        if (!keep.empty()) {
            reuse_k = tensor_slice_tokens((*reuse.keys_raw)[l], keep);
            reuse_v = tensor_slice_tokens((*reuse.values)[l], keep);
        } else {
            reuse_k = SeqTensor(0, heads, dim);
            reuse_v = SeqTensor(0, heads, dim);
        }
        FusedKv fused = fuse_layer(reuse_k, reuse_v, keep, k_rot, v_act, active, positions, rope, n);

        std::size_t qi = 0;
        for (std::size_t a = 0; a < na; ++a) {
            const std::size_t g = active[a];
            const bool recorded = qi < query_rows.size() && query_rows[qi] == a;
            std::fill(attn_out.begin(), attn_out.end(), 0.0);
            for (std::size_t hh = 0; hh < heads; ++hh) {
                const double* qh = q.data() + a * hid + hh * dim;
                double mx = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j <= g; ++j) {
                    double s = 0.0;
                    for (std::size_t d = 0; d < dim; ++d) s += qh[d] * static_cast<double>(fused.keys.at(j, hh, d));
                    scores[j] = s * inv_sqrt_d;
                    mx = std::max(mx, scores[j]);
                }
                double z = 0.0;
                for (std::size_t j = 0; j <= g; ++j) {
                    scores[j] = std::exp(scores[j] - mx);
                    z += scores[j];
                }
                for (std::size_t j = 0; j <= g; ++j) {
                    const double p = scores[j] / z;
                    for (std::size_t d = 0; d < dim; ++d) {
                        attn_out[hh * dim + d] += p * static_cast<double>(fused.values.at(j, hh, d));
                    }
                    if (recorded) {
                        out.attention.weights[((l * heads + hh) * query_rows.size() + qi) * n + j] = p;
                    }
                }
            }
            if (recorded) ++qi;
            std::fill(proj.begin(), proj.end(), 0.0);
            matvec_acc(attn_out, w.wo, hid, proj);
            for (std::size_t c = 0; c < hid; ++c) h[a * hid + c] += proj[c];
            if (cfg.use_mlp) {
                rms_norm({h.data() + a * hid, hid}, x);
                std::fill(mlp_mid.begin(), mlp_mid.end(), 0.0);
                matvec_acc(x, w.w1, 4 * hid, mlp_mid);
                for (double& m : mlp_mid) m = std::max(m, 0.0);
                std::fill(proj.begin(), proj.end(), 0.0);
                matvec_acc(mlp_mid, w.w2, hid, proj);
                for (std::size_t c = 0; c < hid; ++c) h[a * hid + c] += proj[c];
            }
        }

        out.fused_keys.push_back(std::move(fused.keys));
        out.fused_values.push_back(std::move(fused.values));
        out.active_keys_raw.push_back(std::move(k_raw));
        out.active_values.push_back(std::move(v_act));
    }

    const std::vector<double>& unemb = model.unembedding();
    for (std::size_t a : query_rows) {
        rms_norm({h.data() + a * hid, hid}, x);
        std::vector<double> logit(cfg.vocab_size, 0.0);
        matvec_acc(x, unemb, cfg.vocab_size, logit);
        out.logits.push_back(std::move(logit));
    }
    return out;
}

std::vector<TokenIndex> iota_indices(std::size_t n) {
    std::vector<TokenIndex> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<TokenIndex>(i);
    return v;
}

std::vector<double> high_freq_scores(const SeqTensor& keys, const SeqTensor& values, double alpha) {
    const std::size_t n = keys.n_tokens();
    const std::size_t lanes = keys.row_size();
    const std::size_t bins = n / 2 + 1;
    const std::size_t cutoff = lowpass_cutoff(n, alpha);
    RealFft fft(n);
    std::vector<double> lane(n), rec(n), acc_k(n, 0.0), acc_v(n, 0.0);
    std::vector<std::complex<double>> spec(bins);
    for (int part = 0; part < 2; ++part) {
        const SeqTensor& t = part == 0 ? keys : values;
        std::vector<double>& acc = part == 0 ? acc_k : acc_v;
        for (std::size_t c = 0; c < lanes; ++c) {
            for (std::size_t i = 0; i < n; ++i) lane[i] = t.data()[i * lanes + c];
            fft.forward(lane, spec);
            for (std::size_t k = 0; k < std::min(cutoff, bins); ++k) spec[k] = {0.0, 0.0};
            fft.inverse(spec, rec);
            for (std::size_t i = 0; i < n; ++i) acc[i] += rec[i] * rec[i];
        }
    }
    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) scores[i] = 0.5 * (std::sqrt(acc_k[i]) + std::sqrt(acc_v[i]));
    return scores;
}

}  // namespace

void ToyModelConfig::validate() const {
    if (n_layers == 0 || n_heads == 0 || head_dim == 0 || vocab_size == 0) {
        throw InvalidParam("ToyModelConfig: all dimensions must be >= 1");
    }
    if (head_dim % 2 != 0) {
        throw InvalidParam("ToyModelConfig: head_dim must be even");
    }
    rope().validate();
}

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
    config_.validate();
    std::mt19937_64 rng(config_.seed);
    const std::size_t hid = config_.hidden_dim();
    // Unit-variance entries for embeddings; projections at variance 1/hidden.
    const double emb_scale = std::sqrt(3.0);
    const double proj_scale = std::sqrt(3.0 / static_cast<double>(hid));
    embedding_ = random_matrix(rng, config_.vocab_size, hid, emb_scale);
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        Layer layer;
        layer.wq = random_matrix(rng, hid, hid, proj_scale);
        layer.wk = random_matrix(rng, hid, hid, proj_scale);
        layer.wv = random_matrix(rng, hid, hid, proj_scale);
        layer.wo = random_matrix(rng, hid, hid, proj_scale);
        if (config_.use_mlp) {
            layer.w1 = random_matrix(rng, hid, 4 * hid, proj_scale);
            layer.w2 = random_matrix(rng, 4 * hid, hid, std::sqrt(3.0 / static_cast<double>(4 * hid)));
        }
        layers_.push_back(std::move(layer));
    }
    unembedding_ = random_matrix(rng, hid, config_.vocab_size, proj_scale);
}

PrefillResult full_prefill(const ToyModel& model, std::span<const TokenId> tokens, std::size_t query_start) {
    for (TokenId t : tokens) {
        if (t >= model.config().vocab_size) {
            throw InvalidParam(fmt::format("full_prefill: token id {} >= vocab size", t));
        }
    }
    if (tokens.empty()) {
        throw InvalidParam("full_prefill: empty prompt");
    }
    const std::vector<TokenIndex> active = iota_indices(tokens.size());
    EngineOutput e = run_engine(model, tokens, active, {}, query_start);
    return PrefillResult{std::move(e.fused_keys), std::move(e.fused_values), std::move(e.attention),
                         std::move(e.logits)};
}

KvChunk encode_chunk_isolated(const ToyModel& model, std::span<const TokenId> tokens, std::string chunk_id) {
    for (TokenId t : tokens) {
        if (t >= model.config().vocab_size) {
            throw InvalidParam(fmt::format("encode_chunk_isolated: token id {} >= vocab size", t));
        }
    }
    if (tokens.empty()) {
        throw InvalidParam("encode_chunk_isolated: empty chunk");
    }
    const std::vector<TokenIndex> active = iota_indices(tokens.size());
    EngineOutput e = run_engine(model, tokens, active, {}, tokens.size());
    KvChunk chunk;
    chunk.chunk_id = std::move(chunk_id);
    chunk.keys_raw = std::move(e.active_keys_raw);
    chunk.values = std::move(e.active_values);
    return chunk;
}

SelectivePrefillResult selective_prefill(const ToyModel& model, std::span<const ReusableChunk> chunks,
                                         std::span<const TokenId> suffix,
                                         std::span<const std::vector<TokenIndex>> recompute_sets) {
    const ToyModelConfig& cfg = model.config();
    if (recompute_sets.size() != chunks.size()) {
        throw InvalidPlan("selective_prefill: one recompute set per chunk is required");
    }
    std::vector<TokenId> tokens;
    std::vector<TokenIndex> active;
    std::vector<SeqTensor> reuse_k(cfg.n_layers), reuse_v(cfg.n_layers);
    std::vector<std::vector<const SeqTensor*>> parts_k(cfg.n_layers), parts_v(cfg.n_layers);
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        const ReusableChunk& c = chunks[j];
        c.kv.validate();
        if (c.kv.n_tokens() != c.tokens.size() || c.kv.n_layers() != cfg.n_layers ||
            c.kv.n_heads() != cfg.n_heads || c.kv.head_dim() != cfg.head_dim) {
            throw InvalidPlan(fmt::format("selective_prefill: chunk {} does not match the model geometry", j));
        }
        if (c.ranking.n_tokens != c.tokens.size()) {
            throw InvalidPlan(fmt::format("selective_prefill: ranking of chunk {} covers {} tokens, chunk has {}", j,
                                          c.ranking.n_tokens, c.tokens.size()));
        }
        const auto offset = static_cast<TokenIndex>(tokens.size());
        TokenIndex prev = 0;
        for (std::size_t i = 0; i < recompute_sets[j].size(); ++i) {
            const TokenIndex t = recompute_sets[j][i];
            if (t >= c.tokens.size() || (i > 0 && t <= prev)) {
                throw InvalidPlan(fmt::format("selective_prefill: recompute set {} must be ascending and in range", j));
            }
            prev = t;
            active.push_back(offset + t);
        }
        tokens.insert(tokens.end(), c.tokens.begin(), c.tokens.end());
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            parts_k[l].push_back(&c.kv.keys_raw[l]);
            parts_v[l].push_back(&c.kv.values[l]);
        }
    }
    const std::size_t n_context = tokens.size();
    for (std::size_t i = 0; i < suffix.size(); ++i) {
        active.push_back(static_cast<TokenIndex>(n_context + i));
    }
    tokens.insert(tokens.end(), suffix.begin(), suffix.end());
    for (TokenId t : tokens) {
        if (t >= cfg.vocab_size) {
            throw InvalidParam(fmt::format("selective_prefill: token id {} >= vocab size", t));
        }
    }
    if (tokens.empty()) {
        throw InvalidParam("selective_prefill: empty prompt");
    }

    // Stored KV laid onto the global axis; suffix rows stay zero and are never
    // read because every suffix token is active.
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        reuse_k[l] = SeqTensor(tokens.size(), cfg.n_heads, cfg.head_dim);
        reuse_v[l] = SeqTensor(tokens.size(), cfg.n_heads, cfg.head_dim);
        std::size_t off = 0;
        for (std::size_t j = 0; j < chunks.size(); ++j) {
            const SeqTensor& sk = *parts_k[l][j];
            const SeqTensor& sv = *parts_v[l][j];
            std::copy(sk.data().begin(), sk.data().end(), reuse_k[l].data().begin() + static_cast<std::ptrdiff_t>(off * sk.row_size()));
            std::copy(sv.data().begin(), sv.data().end(), reuse_v[l].data().begin() + static_cast<std::ptrdiff_t>(off * sv.row_size()));
            off += sk.n_tokens();
        }
    }

    EngineOutput e = run_engine(model, tokens, active, ReuseSource{&reuse_k, &reuse_v}, n_context);
    SelectivePrefillResult result;
    result.keys = std::move(e.fused_keys);
    result.values = std::move(e.fused_values);
    result.attention = std::move(e.attention);
    result.logits = std::move(e.logits);
    result.recomputed = std::move(active);
    return result;
}

SelectivePrefillResult selective_prefill(const ToyModel& model, std::span<const ReusableChunk> chunks,
                                         std::span<const TokenId> suffix, double r) {
    std::vector<std::vector<TokenIndex>> sets;
    for (const ReusableChunk& c : chunks) sets.push_back(indices_for_ratio(c.ranking, r));
    return selective_prefill(model, chunks, suffix, sets);
}

double attention_deviation(const AttentionRecord& a, const AttentionRecord& b) {
    if (a.n_layers != b.n_layers || a.n_heads != b.n_heads || a.n_queries != b.n_queries || a.n_keys != b.n_keys) {
        throw ShapeError("attention_deviation: records have different shapes");
    }
    const std::size_t mats = a.n_layers * a.n_heads;
    if (mats == 0) return 0.0;
    const std::size_t per = a.n_queries * a.n_keys;
    double total = 0.0;
    for (std::size_t m = 0; m < mats; ++m) {
        double sq = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const double d = a.weights[m * per + i] - b.weights[m * per + i];
            sq += d * d;
        }
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(mats);
}

SpectrumReport spectrum_report(const KvChunk& chunk) {
    chunk.validate();
    SpectrumReport report;
    const std::size_t n = chunk.n_tokens();
    const std::size_t bins = n / 2 + 1;
    std::array<double, 10> key_energy{}, value_energy{};
    for (std::size_t l = 0; l < chunk.n_layers(); ++l) {
        for (int part = 0; part < 2; ++part) {
            const ComplexSpectrum s = rfft_seq(part == 0 ? chunk.keys_raw[l] : chunk.values[l]);
            std::array<double, 10>& acc = part == 0 ? key_energy : value_energy;
            const std::size_t lanes = s.lanes();
            for (std::size_t k = 0; k < bins; ++k) {
                const bool unpaired = k == 0 || (n % 2 == 0 && k == n / 2);
                const double weight = unpaired ? 1.0 : 2.0;
                const std::size_t decile = std::min<std::size_t>(10 * k / bins, 9);
                for (std::size_t c = 0; c < lanes; ++c) {
                    const double re = s.re[k * lanes + c];
                    const double im = s.im[k * lanes + c];
                    acc[decile] += weight * (re * re + im * im);
                }
            }
        }
    }
    auto normalize = [](const std::array<double, 10>& e, std::array<double, 10>& out) {
        double total = 0.0;
        for (double v : e) total += v;
        for (std::size_t i = 0; i < 10; ++i) out[i] = total > 0.0 ? e[i] / total : 0.0;
    };
    normalize(key_energy, report.key_deciles);
    normalize(value_energy, report.value_deciles);
    return report;
}

std::string_view to_string(SelectionStrategy s) {
    switch (s) {
        case SelectionStrategy::lowfreq: return "lowfreq";
        case SelectionStrategy::highfreq: return "highfreq";
        case SelectionStrategy::random: return "random";
        case SelectionStrategy::none: return "none";
        case SelectionStrategy::full: return "full";
    }
    return "none";
}

SelectionStrategy parse_selection_strategy(std::string_view text) {
    for (auto s : {SelectionStrategy::lowfreq, SelectionStrategy::highfreq, SelectionStrategy::random,
                   SelectionStrategy::none, SelectionStrategy::full}) {
        if (to_string(s) == text) return s;
    }
    throw InvalidParam(fmt::format("unknown strategy '{}' (expected lowfreq, highfreq, random, none, full)", text));
}

std::vector<TokenIndex> select_tokens(const KvChunk& chunk, const ImportanceRanking& ranking,
                                      SelectionStrategy strategy, double r, std::uint64_t rng_seed) {
    const std::size_t n = ranking.n_tokens;
    switch (strategy) {
        case SelectionStrategy::none: return {};
        case SelectionStrategy::full: return iota_indices(n);
        case SelectionStrategy::lowfreq: return indices_for_ratio(ranking, r);
        case SelectionStrategy::highfreq: {
            std::vector<double> mean(n, 0.0);
            for (std::size_t l = 0; l < chunk.n_layers(); ++l) {
                const std::vector<double> s = high_freq_scores(chunk.keys_raw[l], chunk.values[l], ranking.alpha);
                for (std::size_t i = 0; i < n; ++i) mean[i] += s[i];
            }
            std::vector<TokenIndex> order = order_by_score(mean);
            order.resize(selection_count(n, r));
            std::ranges::sort(order);
            return order;
        }
        case SelectionStrategy::random: {
            std::mt19937_64 rng(rng_seed);
            std::vector<TokenIndex> perm = iota_indices(n);
            for (std::size_t i = n; i > 1; --i) {
                std::swap(perm[i - 1], perm[rng() % i]);
            }
            perm.resize(selection_count(n, r));
            std::ranges::sort(perm);
            return perm;
        }
    }
    return {};
}

std::vector<TokenId> synthetic_tokens(std::size_t n, std::size_t vocab_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<TokenId> out(n);
    for (TokenId& t : out) t = static_cast<TokenId>(rng() % vocab_size);
    return out;
}

std::vector<double> run_attention_trial(std::uint64_t seed, std::span<const SelectionStrategy> strategies,
                                        const AttentionExperimentConfig& cfg) {
    ToyModelConfig mc = cfg.model;
    mc.seed = seed;
    const ToyModel model(mc);
    std::vector<ReusableChunk> chunks;
    std::vector<TokenId> prompt;
    for (std::size_t j = 0; j < cfg.n_chunks; ++j) {
        ReusableChunk c;
        c.tokens = synthetic_tokens(cfg.chunk_tokens, mc.vocab_size, seed * 1000003u + 17u * (j + 1));
        c.kv = encode_chunk_isolated(model, c.tokens, fmt::format("chunk{}", j));
        c.ranking = rank_chunk(c.kv, cfg.alpha);
        prompt.insert(prompt.end(), c.tokens.begin(), c.tokens.end());
        chunks.push_back(std::move(c));
    }
    const std::vector<TokenId> suffix = synthetic_tokens(cfg.suffix_tokens, mc.vocab_size, seed * 1000003u + 7u);
    const std::size_t n_context = prompt.size();
    prompt.insert(prompt.end(), suffix.begin(), suffix.end());
    const PrefillResult full = full_prefill(model, prompt, n_context);

    std::vector<double> deviations;
    for (SelectionStrategy s : strategies) {
        std::vector<std::vector<TokenIndex>> sets;
        for (std::size_t j = 0; j < chunks.size(); ++j) {
            sets.push_back(select_tokens(chunks[j].kv, chunks[j].ranking, s, cfg.r, seed * 7919u + j));
        }
        const SelectivePrefillResult sel = selective_prefill(model, chunks, suffix, sets);
        deviations.push_back(attention_deviation(full.attention, sel.attention));
    }
    return deviations;
}

double time_recompute_per_token(const ToyModel& model, std::size_t n_tokens, std::size_t repeats) {
    if (n_tokens == 0 || repeats == 0) {
        throw InvalidParam("time_recompute_per_token: need n_tokens, repeats >= 1");
    }
    const std::vector<TokenId> tokens = synthetic_tokens(n_tokens, model.config().vocab_size, 0x5eed);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const PrefillResult r = full_prefill(model, tokens, n_tokens);
        const auto stop = std::chrono::steady_clock::now();
        (void)r;
        best = std::min(best, std::chrono::duration<double>(stop - start).count());
    }
    return best / static_cast<double>(n_tokens * model.config().n_layers);
}

double time_layer_overhead(const ToyModel& model, std::size_t n_tokens, std::size_t repeats) {
    if (n_tokens == 0 || repeats == 0) {
        throw InvalidParam("time_layer_overhead: need n_tokens, repeats >= 1");
    }
    const ToyModelConfig& cfg = model.config();
    const SeqTensor k(n_tokens, cfg.n_heads, cfg.head_dim);
    const SeqTensor v(n_tokens, cfg.n_heads, cfg.head_dim);
    const SeqTensor empty(0, cfg.n_heads, cfg.head_dim);
    const std::vector<TokenIndex> keep = iota_indices(n_tokens);
    std::vector<std::int64_t> positions(n_tokens);
    for (std::size_t i = 0; i < n_tokens; ++i) positions[i] = static_cast<std::int64_t>(i);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < repeats; ++i) {
        const auto start = std::chrono::steady_clock::now();
        const FusedKv f = fuse_layer(k, v, keep, empty, empty, {}, positions, cfg.rope(), n_tokens);
        const auto stop = std::chrono::steady_clock::now();
        (void)f;
        best = std::min(best, std::chrono::duration<double>(stop - start).count());
    }
    return best;
}

}  // namespace cachetune
