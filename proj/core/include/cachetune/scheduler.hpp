#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cachetune/tier.hpp"

namespace cachetune {

// Per-token, per-layer costs of the two critical paths plus the fixed
// per-layer overhead, in seconds.
struct HardwareProfile {
    double t_c = 0.0;  // recompute one token at one layer
    double t_i = 0.0;  // transfer one token's KV for one layer
    double t_o = 0.0;  // fixed per-layer overhead

    void validate() const;
};

struct SearchConfig {
    double r_min = 0.15;
    double r_max = 0.9;
    double epsilon = 0.01;

    static constexpr double kPhi = 0.6180339887498948482;  // (sqrt(5) - 1) / 2

    void validate() const;

    // ceil(log_{1/phi}((r_max - r_min) / epsilon)) + 2
    std::size_t eval_budget() const;
};

// max(r*N*t_c, (1-r)*N*t_i) + t_o
double per_layer_latency(double r, std::size_t n_tokens, const HardwareProfile& p);

// L * max(r*N*t_c, (1-r)*N*t_i) + L * t_o
double ttft_model(double r, std::size_t n_tokens, std::size_t n_layers, const HardwareProfile& p);

// Crossover of the two roofline arms, t_i / (t_c + t_i).
double roofline_r0_unclipped(const HardwareProfile& p);

// roofline_r0_unclipped clipped into [r_min, r_max].
double roofline_r0(const HardwareProfile& p, const SearchConfig& cfg);

// A calibration request: the token counts of the chunks it reuses.
struct CalRequest {
    std::vector<std::size_t> chunk_tokens;

    std::size_t total_tokens() const;
};

using TtftEvaluator = std::function<double(const CalRequest&, double r)>;

// Mean of evaluator(s, r) over the calibration set.
double eval_mean_ttft(const TtftEvaluator& evaluator, std::span<const CalRequest> cal_set, double r);

struct GssProbe {
    std::size_t iter = 0;  // 0 for the two initial probes
    double a = 0.0;
    double b = 0.0;
    double probe = 0.0;
    double value = 0.0;
};

struct GssResult {
    double r_star = 0.0;
    std::size_t eval_count = 0;
    std::size_t iterations = 0;
    std::vector<GssProbe> trace;
};

// Golden-section search on [r_min, r_max] with one of the two initial probes
// placed at the roofline prior r0 (left probe when r0 is in the left half,
// right probe otherwise). Each iteration shrinks the bracket and evaluates one
// new point until b - a < epsilon; returns the bracket midpoint. If an update
// leaves the probes out of order they are swapped, which keeps the minimizer
// inside the bracket when the warm start is off the golden grid.
//
// Throws ObjectiveError if f returns a non-finite value.
GssResult gss_optimize(const std::function<double(double)>& f, double r0, const SearchConfig& cfg);

// Plain golden-section search with both probes on the golden grid.
GssResult gss_optimize_cold(const std::function<double(double)>& f, const SearchConfig& cfg);

struct CalibrationInputs {
    TierConfig tier;
    std::size_t token_bytes = 0;  // bytes of K+V per token per layer
    std::uint64_t sample_bytes = 1 << 20;
    // Either an injected constant or a timing hook; the constant wins.
    std::optional<double> t_c;
    std::optional<double> t_o;
    std::function<double()> measure_t_c;
    std::function<double()> measure_t_o;
    // Overrides measure_transfer_cost when set.
    std::optional<double> t_i;
};

struct CalibrationReport {
    std::string tier_name;
    HardwareProfile profile;
    double r0_unclipped = 0.0;
    double r0 = 0.0;
    SearchConfig config;
    std::size_t cal_n = 0;
    GssResult search;
    double wall_time_s = 0.0;

    double r_star() const { return search.r_star; }
};

// Profiles (t_c, t_i, t_o), derives r0, then refines it by GSS over the mean
// calibration-set TTFT. The evaluator receives the profile so a simulator can
// consume it. Throws ProfileError if a cost cannot be obtained.
CalibrationReport calibrate(
    const CalibrationInputs& inputs,
    const std::function<double(const CalRequest&, double r, const HardwareProfile&)>& evaluator,
    std::span<const CalRequest> cal_set, const SearchConfig& cfg);

// Line-oriented text form. Every line except the trailing `meta` line is a
// deterministic function of the inputs.
std::string format_calibration_report(const CalibrationReport& report);

}  // namespace cachetune
