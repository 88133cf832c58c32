#pragma once

#include <string>
#include <vector>

namespace poisonlab {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::string color; // empty: palette
    bool dashed = false;
};

struct ShadedSpan {
    double x0;
    double x1;
};

struct ChartStyle {
    std::string title;
    std::string x_label = "time (s)";
    std::string y_label;
    int width = 900;
    int height = 420;
    std::vector<ShadedSpan> shaded; // drawn in light blue behind the series
    std::vector<double> vlines;     // dashed markers, e.g. attack start
};

/// Standalone SVG line chart. Throws DataError when there are no series, a
/// series is empty, or x/y lengths differ. A single point renders with a
/// padded range.
std::string render_svg(const std::vector<Series>& series, const ChartStyle& style);
void write_svg(const std::string& path, const std::vector<Series>& series, const ChartStyle& style);

/// Merges consecutive flagged seconds into [t, t+1) spans.
std::vector<ShadedSpan> spans_from_flags(const std::vector<double>& t, const std::vector<bool>& flagged);

} // namespace poisonlab
