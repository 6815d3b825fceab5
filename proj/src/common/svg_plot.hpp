// Copyright (C) 2026 The propcredit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace propcredit {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
    bool log_y = false;
};

// Minimal standalone SVG line chart. Output is a pure function of the input,
// so reruns produce byte-identical files.
std::string render_svg(const LinePlot& plot);

}  // namespace propcredit
