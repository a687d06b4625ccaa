#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mvsim {

struct Series {
    std::string label;
    std::vector<double> x, y;
};

struct ChartOptions {
    int width = 720;
    int height = 480;
    std::string title, x_label, y_label;
    bool log_x = false;
    bool log_y = false;
};

namespace detail {

inline std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
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

inline std::string fmt(double v, const char* spec = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// Tick positions on the 1-2-5 ladder covering [lo, hi].
inline std::vector<double> linear_ticks(double lo, double hi) {
    const double span = hi - lo;
    if (!(span > 0.0)) return {lo};
    const double raw = span / 6.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double f : {1.0, 2.0, 5.0, 10.0})
        if (mag * f >= raw) {
            step = mag * f;
            break;
        }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 0.5 * step; t += step)
        ticks.push_back(std::fabs(t) < 1e-12 * step ? 0.0 : t);
    return ticks;
}

// Decade ticks for a log axis over raw (positive) bounds.
inline std::vector<double> decade_ticks(double lo, double hi) {
    std::vector<double> ticks;
    const int e0 = int(std::floor(std::log10(lo)));
    const int e1 = int(std::ceil(std::log10(hi)));
    for (int e = e0; e <= e1; ++e) {
        const double t = std::pow(10.0, e);
        if (t >= lo / 1.0001 && t <= hi * 1.0001) ticks.push_back(t);
    }
    if (ticks.empty()) ticks = {lo, hi};
    return ticks;
}

}  // namespace detail

// Renders a standalone SVG 1.1 line chart. Non-finite points (and, on log
// axes, nonpositive values) split a series into separate polyline segments.
inline std::string render_line_chart(const std::vector<Series>& series,
                                     const ChartOptions& opt = {}) {
    static const char* kPalette[] = {"#1f6fb2", "#c23b22", "#2d8659", "#8a5fbf",
                                     "#c98a1c", "#3aa6a6", "#b2477f", "#6b6b6b"};
    const double ml = 64.0, mr = 16.0, mt = opt.title.empty() ? 16.0 : 36.0, mb = 46.0;
    const double pw = opt.width - ml - mr, ph = opt.height - mt - mb;

    auto usable = [&](double vx, double vy) {
        return std::isfinite(vx) && std::isfinite(vy) && (!opt.log_x || vx > 0.0) &&
               (!opt.log_y || vy > 0.0);
    };
    double x_lo = 0.0, x_hi = 0.0, y_lo = 0.0, y_hi = 0.0;
    bool any = false;
    for (const Series& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            if (!any) {
                x_lo = x_hi = s.x[i];
                y_lo = y_hi = s.y[i];
                any = true;
            }
            x_lo = std::min(x_lo, s.x[i]);
            x_hi = std::max(x_hi, s.x[i]);
            y_lo = std::min(y_lo, s.y[i]);
            y_hi = std::max(y_hi, s.y[i]);
        }
    if (!any) {
        x_lo = y_lo = opt.log_x || opt.log_y ? 0.1 : 0.0;
        x_hi = y_hi = 1.0;
    }
    auto pad = [](double& lo, double& hi, bool log_axis) {
        if (log_axis) {
            lo /= 1.2;
            hi *= 1.2;
        } else {
            const double p = hi > lo ? 0.05 * (hi - lo) : std::max(0.5, std::fabs(hi)) * 0.1;
            lo -= p;
            hi += p;
        }
    };
    pad(x_lo, x_hi, opt.log_x);
    pad(y_lo, y_hi, opt.log_y);

    auto coord = [](double v, double lo, double hi, bool log_axis) {
        if (log_axis) return (std::log10(v) - std::log10(lo)) / (std::log10(hi) - std::log10(lo));
        return (v - lo) / (hi - lo);
    };
    auto px = [&](double v) { return ml + pw * coord(v, x_lo, x_hi, opt.log_x); };
    auto py = [&](double v) { return mt + ph * (1.0 - coord(v, y_lo, y_hi, opt.log_y)); };

    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(opt.width) +
           "\" height=\"" + std::to_string(opt.height) + "\" viewBox=\"0 0 " +
           std::to_string(opt.width) + " " + std::to_string(opt.height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    if (!opt.title.empty())
        out += "<text x=\"" + detail::fmt(ml + pw / 2) +
               "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"15\">" +
               detail::xml_escape(opt.title) + "</text>\n";

    const auto xticks = opt.log_x ? detail::decade_ticks(x_lo, x_hi)
                                  : detail::linear_ticks(x_lo, x_hi);
    const auto yticks = opt.log_y ? detail::decade_ticks(y_lo, y_hi)
                                  : detail::linear_ticks(y_lo, y_hi);
    for (double t : xticks) {
        const double gx = px(t);
        out += "<line x1=\"" + detail::fmt(gx) + "\" y1=\"" + detail::fmt(mt) + "\" x2=\"" +
               detail::fmt(gx) + "\" y2=\"" + detail::fmt(mt + ph) +
               "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + detail::fmt(gx) + "\" y=\"" + detail::fmt(mt + ph + 16) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::fmt(t, "%g") + "</text>\n";
    }
    for (double t : yticks) {
        const double gy = py(t);
        out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(gy) + "\" x2=\"" +
               detail::fmt(ml + pw) + "\" y2=\"" + detail::fmt(gy) +
               "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        out += "<text x=\"" + detail::fmt(ml - 6) + "\" y=\"" + detail::fmt(gy + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::fmt(t, "%g") + "</text>\n";
    }
    out += "<rect x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt) + "\" width=\"" +
           detail::fmt(pw) + "\" height=\"" + detail::fmt(ph) +
           "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
    if (!opt.x_label.empty())
        out += "<text x=\"" + detail::fmt(ml + pw / 2) + "\" y=\"" +
               detail::fmt(double(opt.height) - 10) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
               detail::xml_escape(opt.x_label) + "</text>\n";
    if (!opt.y_label.empty())
        out += "<text x=\"14\" y=\"" + detail::fmt(mt + ph / 2) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
               "transform=\"rotate(-90 14 " +
               detail::fmt(mt + ph / 2) + ")\">" + detail::xml_escape(opt.y_label) +
               "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kPalette[si % 8];
        std::string points;
        auto flush = [&]() {
            if (points.empty()) return;
            out += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                   "\" stroke-width=\"1.6\" points=\"" + points + "\"/>\n";
            points.clear();
        };
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) {
                flush();
                continue;
            }
            points += detail::fmt(px(s.x[i])) + "," + detail::fmt(py(s.y[i])) + " ";
        }
        flush();
    }

    double ly = mt + 14.0;
    for (std::size_t si = 0; si < series.size(); ++si) {
        if (series[si].label.empty()) continue;
        const double lx = ml + pw - 150.0;
        out += "<line x1=\"" + detail::fmt(lx) + "\" y1=\"" + detail::fmt(ly - 4) +
               "\" x2=\"" + detail::fmt(lx + 22) + "\" y2=\"" + detail::fmt(ly - 4) +
               "\" stroke=\"" + kPalette[si % 8] + "\" stroke-width=\"1.6\"/>\n";
        out += "<text x=\"" + detail::fmt(lx + 28) + "\" y=\"" + detail::fmt(ly) +
               "\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::xml_escape(series[si].label) + "</text>\n";
        ly += 16.0;
    }
    out += "</svg>\n";
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << content;
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace mvsim
