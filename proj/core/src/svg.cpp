// SPDX-License-Identifier: Apache-2.0
#include "gridcal/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

#include "gridcal/error.hpp"

namespace gridcal::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

std::string fixed(double x) {
    char buffer[48];
    std::snprintf(buffer, sizeof(buffer), "%.2f", x == 0.0 ? 0.0 : x);
    return buffer;
}

std::string tick_label(double x) {
    char buffer[48];
    std::snprintf(buffer, sizeof(buffer), "%.4g", std::abs(x) < 1e-12 ? 0.0 : x);
    return buffer;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!std::isfinite(lo)) {
            lo = 0.0;
            hi = 1.0;
        }
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::vector<double> nice_ticks(double lo, double hi) {
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 5.0, 10.0}) {
        step = m * mag;
        if (step >= raw) break;
    }
    std::vector<double> ticks;
    for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) ticks.push_back(t);
    return ticks;
}

struct Frame {
    Range x;
    Range y;
    double px(double v) const { return kLeft + (v - x.lo) / (x.hi - x.lo) * (kWidth - kLeft - kRight); }
    double py(double v) const { return kHeight - kBottom - (v - y.lo) / (y.hi - y.lo) * (kHeight - kTop - kBottom); }
};

void draw_axes(Canvas& c, const Frame& f, const std::string& title, const std::string& x_label,
               const std::string& y_label) {
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    const double y1 = kTop;
    c.rect(x0, y1, x1 - x0, y0 - y1, "none", "#444444");
    for (double t : nice_ticks(f.x.lo, f.x.hi)) {
        c.line(f.px(t), y0, f.px(t), y0 + 5, "#444444");
        c.text(f.px(t), y0 + 18, tick_label(t), 11, "middle");
    }
    for (double t : nice_ticks(f.y.lo, f.y.hi)) {
        c.line(x0 - 5, f.py(t), x0, f.py(t), "#444444");
        c.line(x0, f.py(t), x1, f.py(t), "#e5e5e5");
        c.text(x0 - 8, f.py(t) + 4, tick_label(t), 11, "end");
    }
    c.text(0.5 * (x0 + x1), 24, title, 14, "middle");
    c.text(0.5 * (x0 + x1), kHeight - 18, x_label, 12, "middle");
    c.text(18, 0.5 * (y0 + y1), y_label, 12, "start");
}

void legend(Canvas& c, const std::vector<std::pair<std::string, std::string>>& entries) {
    double y = kTop + 10;
    for (const auto& [label, color] : entries) {
        c.line(kWidth - kRight + 12, y, kWidth - kRight + 36, y, color, 2.0);
        c.text(kWidth - kRight + 42, y + 4, label, 11);
        y += 18;
    }
}

}  // namespace

Canvas::Canvas(double width, double height) : width_(width), height_(height) {}

void Canvas::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width, bool dashed) {
    body_ += "<line x1=\"" + fixed(x1) + "\" y1=\"" + fixed(y1) + "\" x2=\"" + fixed(x2) + "\" y2=\"" + fixed(y2) +
             "\" stroke=\"" + stroke + "\" stroke-width=\"" + fixed(width) + "\"" +
             (dashed ? " stroke-dasharray=\"5,4\"" : "") + "/>\n";
}

void Canvas::polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& stroke,
                      double width, bool dashed) {
    if (xs.size() != ys.size()) throw ValidationError("svg polyline: coordinate counts differ");
    std::string points;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
        if (!points.empty()) points += ' ';
        points += fixed(xs[i]) + "," + fixed(ys[i]);
    }
    body_ += "<polyline fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"" + fixed(width) + "\"" +
             (dashed ? " stroke-dasharray=\"5,4\"" : "") + " points=\"" + points + "\"/>\n";
}

void Canvas::polygon(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& fill,
                     double opacity) {
    std::string points;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (!points.empty()) points += ' ';
        points += fixed(xs[i]) + "," + fixed(ys[i]);
    }
    body_ += "<polygon fill=\"" + fill + "\" fill-opacity=\"" + fixed(opacity) + "\" stroke=\"none\" points=\"" +
             points + "\"/>\n";
}

void Canvas::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
    body_ += "<rect x=\"" + fixed(x) + "\" y=\"" + fixed(y) + "\" width=\"" + fixed(w) + "\" height=\"" + fixed(h) +
             "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
}

void Canvas::circle(double cx, double cy, double r, const std::string& fill) {
    body_ += "<circle cx=\"" + fixed(cx) + "\" cy=\"" + fixed(cy) + "\" r=\"" + fixed(r) + "\" fill=\"" + fill +
             "\"/>\n";
}

void Canvas::text(double x, double y, const std::string& content, double size, const std::string& anchor) {
    body_ += "<text x=\"" + fixed(x) + "\" y=\"" + fixed(y) + "\" font-size=\"" + fixed(size) +
             "\" font-family=\"sans-serif\" text-anchor=\"" + anchor + "\">" + escape(content) + "</text>\n";
}

std::string Canvas::str() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(width_) + "\" height=\"" + fixed(height_) +
           "\" viewBox=\"0 0 " + fixed(width_) + " " + fixed(height_) + "\">\n<rect width=\"100%\" height=\"100%\" " +
           "fill=\"white\"/>\n" + body_ + "</svg>\n";
}

const std::string& palette(std::size_t index) {
    static const std::array<std::string, 8> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                   "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return colors[index % colors.size()];
}

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string render(const LinePlot& plot) {
    Frame f;
    for (const Series& s : plot.series) {
        if (s.x.size() != s.y.size()) throw ValidationError("line plot: series '" + s.label + "' has mismatched x/y");
        for (double v : s.x) f.x.add(v);
        for (double v : s.y) f.y.add(v);
    }
    for (const Band& b : plot.bands) {
        for (double v : b.x) f.x.add(v);
        for (double v : b.lower) f.y.add(v);
        for (double v : b.upper) f.y.add(v);
    }
    f.x.finish();
    f.y.finish();
    const double pad = 0.05 * (f.y.hi - f.y.lo);
    f.y.lo -= pad;
    f.y.hi += pad;

    Canvas c(kWidth, kHeight);
    draw_axes(c, f, plot.title, plot.x_label, plot.y_label);
    for (const Band& b : plot.bands) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t i = 0; i < b.x.size(); ++i) {
            xs.push_back(f.px(b.x[i]));
            ys.push_back(f.py(b.upper[i]));
        }
        for (std::size_t i = b.x.size(); i-- > 0;) {
            xs.push_back(f.px(b.x[i]));
            ys.push_back(f.py(b.lower[i]));
        }
        c.polygon(xs, ys, b.color, 0.25);
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const Series& s : plot.series) {
        std::vector<double> xs;
        std::vector<double> ys;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xs.push_back(f.px(s.x[i]));
            ys.push_back(f.py(s.y[i]));
        }
        c.polyline(xs, ys, s.color, 1.5, s.dashed);
        entries.emplace_back(s.label, s.color);
    }
    legend(c, entries);
    return c.str();
}

std::string render(const BarPlot& plot) {
    const std::size_t n = plot.labels.size();
    if (plot.value.size() != n || plot.lower.size() != n || plot.upper.size() != n ||
        (!plot.truth.empty() && plot.truth.size() != n) || (!plot.prior.empty() && plot.prior.size() != n)) {
        throw ValidationError("bar plot: label and value counts differ");
    }
    Frame f;
    f.x.lo = 0.0;
    f.x.hi = static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) {
        f.y.add(plot.lower[i]);
        f.y.add(plot.upper[i]);
        f.y.add(plot.value[i]);
        if (!plot.truth.empty()) f.y.add(plot.truth[i]);
        if (!plot.prior.empty()) f.y.add(plot.prior[i]);
    }
    f.y.finish();
    const double pad = 0.1 * (f.y.hi - f.y.lo);
    f.y.lo -= pad;
    f.y.hi += pad;

    Canvas c(kWidth, kHeight);
    const double x0 = kLeft;
    const double x1 = kWidth - kRight;
    const double y0 = kHeight - kBottom;
    c.rect(x0, kTop, x1 - x0, y0 - kTop, "none", "#444444");
    for (double t : nice_ticks(f.y.lo, f.y.hi)) {
        c.line(x0 - 5, f.py(t), x0, f.py(t), "#444444");
        c.line(x0, f.py(t), x1, f.py(t), "#e5e5e5");
        c.text(x0 - 8, f.py(t) + 4, tick_label(t), 11, "end");
    }
    c.text(0.5 * (x0 + x1), 24, plot.title, 14, "middle");
    const double slot = (x1 - x0) / f.x.hi;
    const double bar = std::min(0.6 * slot, 40.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double cx = x0 + (static_cast<double>(i) + 0.5) * slot;
        const double base = f.py(std::max(f.y.lo, 0.0));
        const double top = f.py(plot.value[i]);
        c.rect(cx - 0.5 * bar, std::min(top, base), bar, std::abs(base - top), palette(0));
        c.line(cx, f.py(plot.lower[i]), cx, f.py(plot.upper[i]), "#000000", 1.5);
        c.line(cx - 0.25 * bar, f.py(plot.lower[i]), cx + 0.25 * bar, f.py(plot.lower[i]), "#000000", 1.5);
        c.line(cx - 0.25 * bar, f.py(plot.upper[i]), cx + 0.25 * bar, f.py(plot.upper[i]), "#000000", 1.5);
        if (!plot.truth.empty()) c.circle(cx, f.py(plot.truth[i]), 4.0, palette(1));
        if (!plot.prior.empty()) c.line(cx - 0.5 * slot, f.py(plot.prior[i]), cx + 0.5 * slot, f.py(plot.prior[i]), palette(2), 1.5, true);
        c.text(cx, y0 + 18, plot.labels[i], 11, "middle");
    }
    std::vector<std::pair<std::string, std::string>> entries{{"estimate ±2σ", palette(0)}};
    if (!plot.truth.empty()) entries.emplace_back("truth", palette(1));
    if (!plot.prior.empty()) entries.emplace_back("prior mean", palette(2));
    legend(c, entries);
    return c.str();
}

std::string render(const HeatTable& table) {
    const std::size_t rows = table.row_labels.size();
    const std::size_t cols = table.column_labels.size();
    if (table.values.size() != rows) throw ValidationError("heat table: row count differs from labels");
    for (const auto& r : table.values) {
        if (r.size() != cols) throw ValidationError("heat table: column count differs from labels");
    }
    const double cell_w = 84.0;
    const double cell_h = 28.0;
    const double left = 120.0;
    const double top = 110.0;
    Canvas c(left + cell_w * static_cast<double>(cols) + 20.0, top + cell_h * static_cast<double>(rows) + 30.0);
    c.text(10, 24, table.title, 14);
    c.text(10, top - 8, "calibration \\ prediction", 10);
    for (std::size_t j = 0; j < cols; ++j) {
        c.text(left + (static_cast<double>(j) + 0.5) * cell_w, top - 8, table.column_labels[j], 10, "middle");
    }
    for (std::size_t i = 0; i < rows; ++i) {
        const double y = top + static_cast<double>(i) * cell_h;
        c.text(left - 6, y + 18, table.row_labels[i], 10, "end");
        for (std::size_t j = 0; j < cols; ++j) {
            const double x = left + static_cast<double>(j) * cell_w;
            const double v = table.values[i][j];
            if (!std::isfinite(v)) {
                c.rect(x, y, cell_w, cell_h, "#dddddd", "#ffffff");
                c.text(x + 0.5 * cell_w, y + 18, "n/a", 11, "middle");
                continue;
            }
            const double s = std::clamp((v - table.min) / (table.max - table.min), 0.0, 1.0);
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x%02x%02x", static_cast<int>(std::lround(255 - 200 * s)),
                          static_cast<int>(std::lround(255 - 135 * s)), 255);
            c.rect(x, y, cell_w, cell_h, color, "#ffffff");
            char label[32];
            std::snprintf(label, sizeof(label), "%.1f", v);
            c.text(x + 0.5 * cell_w, y + 18, label, 11, "middle");
        }
    }
    return c.str();
}

}  // namespace gridcal::svg
