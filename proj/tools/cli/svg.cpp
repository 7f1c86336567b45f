#include "svg.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace cachetune::cli {

namespace {

constexpr double kWidth = 720;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 20;
constexpr double kTop = 40;
constexpr double kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string open_svg(const std::string& title) {
    std::string s = fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
        "font-size=\"12\">\n",
        kWidth, kHeight);
    s += fmt::format("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    s += fmt::format("<text x=\"{}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n", kWidth / 2,
                     escape(title));
    return s;
}

std::string axes(double y_lo, double y_hi) {
    const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
    std::string s = fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", x0, y0, x1, y0);
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", x0, y0, x0, y1);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, y0, y_lo);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", x0 - 4, y1 + 4, y_hi);
    return s;
}

void legend(std::string& s, const std::vector<Series>& series) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double y = kTop + 14 * static_cast<double>(i);
        s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", kWidth - 150, y - 9,
                         kColors[i % 6]);
        s += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", kWidth - 135, y, escape(series[i].name));
    }
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                           const std::vector<Series>& series) {
    std::string s = open_svg(title);
    if (x.empty()) return s + "</svg>\n";
    double y_lo = INFINITY, y_hi = -INFINITY;
    for (const Series& ser : series) {
        for (double v : ser.y) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
    const double x_lo = x.front(), x_hi = x.back() > x.front() ? x.back() : x.front() + 1.0;
    auto px = [&](double v) { return kLeft + (v - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight); };
    auto py = [&](double v) { return kHeight - kBottom - (v - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom); };
    s += axes(y_lo, y_hi);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", (kLeft + kWidth - kRight) / 2,
                     kHeight - 12, escape(x_label));
    s += fmt::format("<text x=\"{}\" y=\"{}\">{:.3g}</text>\n", kLeft, kHeight - kBottom + 16, x_lo);
    s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3g}</text>\n", kWidth - kRight,
                     kHeight - kBottom + 16, x_hi);
    for (std::size_t i = 0; i < series.size(); ++i) {
        std::string pts;
        for (std::size_t j = 0; j < std::min(x.size(), series[i].y.size()); ++j) {
            pts += fmt::format("{:.2f},{:.2f} ", px(x[j]), py(series[i].y[j]));
        }
        s += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                         kColors[i % 6], pts);
    }
    legend(s, series);
    return s + "</svg>\n";
}

std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<Series>& series) {
    std::string s = open_svg(title);
    double y_hi = 0.0;
    for (const Series& ser : series) {
        for (double v : ser.y) y_hi = std::max(y_hi, v);
    }
    if (y_hi <= 0.0) y_hi = 1.0;
    s += axes(0.0, y_hi);
    const double plot_w = kWidth - kLeft - kRight;
    const double group_w = categories.empty() ? plot_w : plot_w / static_cast<double>(categories.size());
    const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
    const double plot_h = kHeight - kTop - kBottom;
    for (std::size_t c = 0; c < categories.size(); ++c) {
        const double gx = kLeft + group_w * static_cast<double>(c) + group_w * 0.1;
        for (std::size_t i = 0; i < series.size(); ++i) {
            if (c >= series[i].y.size()) continue;
            const double h = series[i].y[c] / y_hi * plot_h;
            s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                             gx + bar_w * static_cast<double>(i), kHeight - kBottom - h, bar_w, h, kColors[i % 6]);
        }
        s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", gx + group_w * 0.4,
                         kHeight - kBottom + 16, escape(categories[c]));
    }
    legend(s, series);
    return s + "</svg>\n";
}

std::string svg_gantt(const Timeline& timeline) {
    std::string s = open_svg(fmt::format("pipeline timeline, ttft {:.6g} s", timeline.ttft_s));
    const double span = timeline.ttft_s > 0.0 ? timeline.ttft_s : 1.0;
    const double lane_h = 60;
    const Stream lanes[] = {Stream::transfer, Stream::recompute, Stream::forward};
    for (std::size_t i = 0; i < 3; ++i) {
        const double y = kTop + 20 + lane_h * static_cast<double>(i);
        s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n", kLeft - 6, y + lane_h / 2,
                         to_string(lanes[i]));
        for (const TimelineEvent& e : timeline.events) {
            if (e.stream != lanes[i]) continue;
            const double x0 = kLeft + e.start_s / span * (kWidth - kLeft - kRight);
            const double w = std::max((e.end_s - e.start_s) / span * (kWidth - kLeft - kRight), 0.5);
            s += fmt::format(
                "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" stroke=\"white\" "
                "stroke-width=\"0.5\"><title>{}</title></rect>\n",
                x0, y, w, lane_h - 10, kColors[(e.layer % 2) + 2 * i], escape(e.label));
        }
    }
    return s + "</svg>\n";
}

}  // namespace cachetune::cli
