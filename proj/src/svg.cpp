#include "poisonlab/svg.hpp"

#include "poisonlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace poisonlab {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", std::abs(v) < 1e-12 ? 0.0 : v);
    return buf;
}

double nice_step(double span, int target) {
    double raw = span / target;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) return m * mag;
    }
    return 10.0 * mag;
}

} // namespace

std::string render_svg(const std::vector<Series>& series, const ChartStyle& style) {
    if (series.empty()) throw DataError("cannot render a chart without series");
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const Series& s : series) {
        if (s.x.empty()) throw DataError("series '" + s.name + "' is empty");
        if (s.x.size() != s.y.size()) throw DataError("series '" + s.name + "' has mismatched x/y lengths");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    }
    if (!std::isfinite(x0)) x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    if (x1 == x0) x0 -= 1.0, x1 += 1.0;
    if (y1 == y0) y0 -= 1.0, y1 += 1.0;
    y0 = std::min(y0, 0.0);
    y1 += 0.05 * (y1 - y0);

    const double W = style.width, H = style.height;
    const double left = 64, right = 20, top = 36, bottom = 70;
    const double pw = W - left - right, ph = H - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
       << "\" viewBox=\"0 0 " << style.width << ' ' << style.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        os << "<text x=\"" << fmt(W / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(style.title)
           << "</text>\n";

    os << "<g class=\"shaded\">\n";
    for (const ShadedSpan& s : style.shaded) {
        double a = std::clamp(s.x0, x0, x1), b = std::clamp(s.x1, x0, x1);
        if (b <= a) continue;
        os << "<rect x=\"" << fmt(px(a)) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(px(b) - px(a))
           << "\" height=\"" << fmt(ph) << "\" fill=\"#add8e6\" fill-opacity=\"0.6\"/>\n";
    }
    os << "</g>\n";

    os << "<g class=\"axes\" stroke=\"#333\">\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
       << fmt(top + ph) << "\"/>\n";
    os << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
       << fmt(top + ph) << "\"/>\n";
    os << "</g>\n<g class=\"ticks\" fill=\"#333\">\n";
    const double xs = nice_step(x1 - x0, 8);
    for (double v = std::ceil(x0 / xs) * xs; v <= x1 + 1e-9; v += xs) {
        os << "<line x1=\"" << fmt(px(v)) << "\" y1=\"" << fmt(top + ph) << "\" x2=\"" << fmt(px(v)) << "\" y2=\""
           << fmt(top + ph + 5) << "\" stroke=\"#333\"/>";
        os << "<text x=\"" << fmt(px(v)) << "\" y=\"" << fmt(top + ph + 18) << "\" text-anchor=\"middle\">"
           << tick_label(v) << "</text>\n";
    }
    const double ys = nice_step(y1 - y0, 6);
    for (double v = std::ceil(y0 / ys) * ys; v <= y1 + 1e-9; v += ys) {
        os << "<line x1=\"" << fmt(left - 5) << "\" y1=\"" << fmt(py(v)) << "\" x2=\"" << fmt(left + pw) << "\" y2=\""
           << fmt(py(v)) << "\" stroke=\"#ddd\"/>";
        os << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(py(v) + 4) << "\" text-anchor=\"end\">"
           << tick_label(v) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(top + ph + 36) << "\" text-anchor=\"middle\">"
       << escape(style.x_label) << "</text>\n";
    os << "<text transform=\"translate(16," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
       << escape(style.y_label) << "</text>\n";

    for (double v : style.vlines) {
        if (v < x0 || v > x1) continue;
        os << "<line x1=\"" << fmt(px(v)) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(px(v)) << "\" y2=\""
           << fmt(top + ph) << "\" stroke=\"#555\" stroke-dasharray=\"4 3\"/>\n";
    }

    os << "<g class=\"series\" fill=\"none\" stroke-width=\"1.2\">\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const Series& s = series[k];
        const std::string color = s.color.empty() ? kPalette[k % std::size(kPalette)] : s.color;
        if (s.x.size() == 1) {
            os << "<circle cx=\"" << fmt(px(s.x[0])) << "\" cy=\"" << fmt(py(s.y[0])) << "\" r=\"3\" fill=\"" << color
               << "\"/>\n";
            continue;
        }
        os << "<polyline stroke=\"" << color << '"' << (s.dashed ? " stroke-dasharray=\"5 3\"" : "") << " points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            os << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
        }
        os << "\"/>\n";
    }
    os << "</g>\n";

    os << "<g class=\"legend\">\n";
    double lx = left;
    const double ly = H - 14;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const std::string color = series[k].color.empty() ? kPalette[k % std::size(kPalette)] : series[k].color;
        os << "<g class=\"legend-entry\"><line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
           << fmt(lx + 22) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>"
           << "<text x=\"" << fmt(lx + 28) << "\" y=\"" << fmt(ly) << "\">" << escape(series[k].name)
           << "</text></g>\n";
        lx += 40 + 7.0 * static_cast<double>(series[k].name.size());
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

void write_svg(const std::string& path, const std::vector<Series>& series, const ChartStyle& style) {
    std::string svg = render_svg(series, style);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path);
    os << svg;
}

std::vector<ShadedSpan> spans_from_flags(const std::vector<double>& t, const std::vector<bool>& flagged) {
    std::vector<ShadedSpan> out;
    for (std::size_t i = 0; i < t.size() && i < flagged.size(); ++i) {
        if (!flagged[i]) continue;
        if (!out.empty() && out.back().x1 >= t[i]) out.back().x1 = t[i] + 1.0;
        else out.push_back({t[i], t[i] + 1.0});
    }
    return out;
}

} // namespace poisonlab
