#pragma once

#include <string>
#include <vector>

#include "cachetune/pipesim.hpp"

namespace cachetune::cli {

struct Series {
    std::string name;
    std::vector<double> y;
};

// Line chart sharing one x axis.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::vector<double>& x,
                           const std::vector<Series>& series);

// Grouped bars, one group per category.
std::string svg_bar_chart(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<Series>& series);

// One lane per stream, one rectangle per event.
std::string svg_gantt(const Timeline& timeline);

}  // namespace cachetune::cli
