#include "cachetune/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "cachetune/error.hpp"

namespace cachetune {

void HardwareProfile::validate() const {
    if (!(t_c > 0.0) || !(t_i > 0.0) || !(t_o >= 0.0) || !std::isfinite(t_c) || !std::isfinite(t_i) ||
        !std::isfinite(t_o)) {
        throw InvalidParam(fmt::format("HardwareProfile: need t_c > 0, t_i > 0, t_o >= 0 (got {}, {}, {})", t_c,
                                       t_i, t_o));
    }
}

void SearchConfig::validate() const {
    if (!(r_min >= 0.0 && r_min <= r_max && r_max <= 1.0)) {
        throw InvalidParam(fmt::format("SearchConfig: need 0 <= r_min <= r_max <= 1 (got {}, {})", r_min, r_max));
    }
    if (!(epsilon > 0.0)) {
        throw InvalidParam("SearchConfig: epsilon must be > 0");
    }
}

std::size_t SearchConfig::eval_budget() const {
    const double span = r_max - r_min;
    if (span < epsilon) return 2;
    const double steps = std::ceil(std::log(span / epsilon) / std::log(1.0 / kPhi) - 1e-12);
    return static_cast<std::size_t>(std::max(steps, 0.0)) + 2;
}

double per_layer_latency(double r, std::size_t n_tokens, const HardwareProfile& p) {
    const double n = static_cast<double>(n_tokens);
    return std::max(r * n * p.t_c, (1.0 - r) * n * p.t_i) + p.t_o;
}

double ttft_model(double r, std::size_t n_tokens, std::size_t n_layers, const HardwareProfile& p) {
    if (n_layers == 0) {
        throw InvalidParam("ttft_model: n_layers must be >= 1");
    }
    const double n = static_cast<double>(n_tokens);
    const double l = static_cast<double>(n_layers);
    return l * std::max(r * n * p.t_c, (1.0 - r) * n * p.t_i) + l * p.t_o;
}

double roofline_r0_unclipped(const HardwareProfile& p) {
    p.validate();
    return p.t_i / (p.t_c + p.t_i);
}

double roofline_r0(const HardwareProfile& p, const SearchConfig& cfg) {
    cfg.validate();
    return std::clamp(roofline_r0_unclipped(p), cfg.r_min, cfg.r_max);
}

std::size_t CalRequest::total_tokens() const {
    return std::accumulate(chunk_tokens.begin(), chunk_tokens.end(), std::size_t{0});
}

double eval_mean_ttft(const TtftEvaluator& evaluator, std::span<const CalRequest> cal_set, double r) {
    if (cal_set.empty()) {
        throw InvalidParam("eval_mean_ttft: calibration set is empty");
    }
    double sum = 0.0;
    for (const CalRequest& s : cal_set) sum += evaluator(s, r);
    return sum / static_cast<double>(cal_set.size());
}

namespace {

struct Search {
    const std::function<double(double)>& f;
    GssResult result;

    double eval(std::size_t iter, double a, double b, double x) {
        const double v = f(x);
        if (!std::isfinite(v)) {
            throw ObjectiveError(fmt::format("objective returned {} at r = {}", v, x));
        }
        ++result.eval_count;
        result.trace.push_back({iter, a, b, x, v});
        return v;
    }
};

GssResult golden_section(const std::function<double(double)>& f, double x1, double x2, const SearchConfig& cfg) {
    constexpr double phi = SearchConfig::kPhi;
    double a = cfg.r_min;
    double b = cfg.r_max;
    if (x1 > x2) std::swap(x1, x2);
    Search s{f, {}};
    double f1 = s.eval(0, a, b, x1);
    double f2 = s.eval(0, a, b, x2);
    while (std::abs(b - a) >= cfg.epsilon) {
        ++s.result.iterations;
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = s.eval(s.result.iterations, a, b, x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = s.eval(s.result.iterations, a, b, x2);
        }
        if (x1 > x2) {
            std::swap(x1, x2);
            std::swap(f1, f2);
        }
    }
    s.result.r_star = 0.5 * (a + b);
    return std::move(s.result);
}

}  // namespace

GssResult gss_optimize(const std::function<double(double)>& f, double r0, const SearchConfig& cfg) {
    cfg.validate();
    if (!(r0 >= cfg.r_min && r0 <= cfg.r_max)) {
        throw InvalidParam(fmt::format("gss_optimize: prior r0 = {} outside [{}, {}]", r0, cfg.r_min, cfg.r_max));
    }
    constexpr double phi = SearchConfig::kPhi;
    const double a = cfg.r_min;
    const double b = cfg.r_max;
    if (r0 <= 0.5 * (a + b)) {
        return golden_section(f, r0, a + phi * (b - a), cfg);
    }
    return golden_section(f, b - phi * (b - a), r0, cfg);
}

GssResult gss_optimize_cold(const std::function<double(double)>& f, const SearchConfig& cfg) {
    cfg.validate();
    constexpr double phi = SearchConfig::kPhi;
    const double a = cfg.r_min;
    const double b = cfg.r_max;
    return golden_section(f, b - phi * (b - a), a + phi * (b - a), cfg);
}

CalibrationReport calibrate(
    const CalibrationInputs& inputs,
    const std::function<double(const CalRequest&, double r, const HardwareProfile&)>& evaluator,
    std::span<const CalRequest> cal_set, const SearchConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    cfg.validate();
    if (cal_set.empty()) {
        throw InvalidParam("calibrate: calibration set is empty");
    }

    auto obtain = [](const char* name, const std::optional<double>& fixed, const std::function<double()>& hook) {
        double v = 0.0;
        if (fixed) {
            v = *fixed;
        } else if (hook) {
            try {
                v = hook();
            } catch (const std::exception& e) {
                throw ProfileError(fmt::format("profiling {} failed: {}", name, e.what()));
            }
        } else {
            throw ProfileError(fmt::format("no value or timing hook for {}", name));
        }
        if (!std::isfinite(v) || v < 0.0) {
            throw ProfileError(fmt::format("profiled {} = {} is not a valid cost", name, v));
        }
        return v;
    };

    CalibrationReport report;
    report.tier_name = std::string(to_string(inputs.tier.kind));
    report.config = cfg;
    report.cal_n = cal_set.size();
    report.profile.t_c = obtain("t_c", inputs.t_c, inputs.measure_t_c);
    report.profile.t_o = obtain("t_o", inputs.t_o, inputs.measure_t_o);
    if (inputs.t_i) {
        report.profile.t_i = *inputs.t_i;
    } else {
        try {
            report.profile.t_i = measure_transfer_cost(inputs.tier, inputs.sample_bytes, inputs.token_bytes);
        } catch (const Error& e) {
            throw ProfileError(fmt::format("profiling t_i failed: {}", e.what()));
        }
    }
    try {
        report.profile.validate();
    } catch (const InvalidParam& e) {
        throw ProfileError(e.what());
    }

    report.r0_unclipped = roofline_r0_unclipped(report.profile);
    report.r0 = roofline_r0(report.profile, cfg);
    const HardwareProfile profile = report.profile;
    auto objective = [&](double r) {
        return eval_mean_ttft([&](const CalRequest& s, double rr) { return evaluator(s, rr, profile); }, cal_set, r);
    };
    report.search = gss_optimize(objective, report.r0, cfg);
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string format_calibration_report(const CalibrationReport& report) {
    std::string out;
    auto line = [&out](const std::string& s) {
        out += s;
        out += '\n';
    };
    line("# cachetune calibration report");
    line(fmt::format("tier {}", report.tier_name));
    line(fmt::format("t_c_s {:.9g}", report.profile.t_c));
    line(fmt::format("t_i_s {:.9g}", report.profile.t_i));
    line(fmt::format("t_o_s {:.9g}", report.profile.t_o));
    line(fmt::format("r0_unclipped {:.9g}", report.r0_unclipped));
    line(fmt::format("r0 {:.9g}", report.r0));
    line(fmt::format("r_min {:.9g}", report.config.r_min));
    line(fmt::format("r_max {:.9g}", report.config.r_max));
    line(fmt::format("epsilon {:.9g}", report.config.epsilon));
    line(fmt::format("cal_n {}", report.cal_n));
    line("# trace: iter a b probe f");
    for (const GssProbe& p : report.search.trace) {
        line(fmt::format("trace {} {:.9g} {:.9g} {:.9g} {:.9g}", p.iter, p.a, p.b, p.probe, p.value));
    }
    line(fmt::format("eval_count {}", report.search.eval_count));
    line(fmt::format("r_star {:.9g}", report.search.r_star));
    line(fmt::format("meta wall_time_s {:.6f}", report.wall_time_s));
    return out;
}

}  // namespace cachetune
