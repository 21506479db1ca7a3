// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace gridcal::svg {

/// Coordinates are printed with two decimals so output bytes depend only on inputs.
class Canvas {
public:
    Canvas(double width, double height);

    void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
              bool dashed = false);
    void polyline(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& stroke,
                  double width = 1.5, bool dashed = false);
    void polygon(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& fill,
                 double opacity);
    void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none");
    void circle(double cx, double cy, double r, const std::string& fill);
    /// anchor: start, middle or end.
    void text(double x, double y, const std::string& content, double size = 12.0,
              const std::string& anchor = "start");

    std::string str() const;

private:
    double width_;
    double height_;
    std::string body_;
};

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color;
    bool dashed = false;
};

struct Band {
    std::vector<double> x;
    std::vector<double> lower;
    std::vector<double> upper;
    std::string color;
};

struct LinePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    std::vector<Band> bands;
};

std::string render(const LinePlot& plot);

/// Point estimate per parameter with an error bar, plus optional reference markers.
struct BarPlot {
    std::string title;
    std::vector<std::string> labels;
    std::vector<double> value;
    std::vector<double> lower;
    std::vector<double> upper;
    std::vector<double> truth;  ///< empty to omit
    std::vector<double> prior;  ///< empty to omit
};

std::string render(const BarPlot& plot);

/// Matrix of values in [min, max] coloured on a white-to-blue ramp.
struct HeatTable {
    std::string title;
    std::vector<std::string> row_labels;
    std::vector<std::string> column_labels;
    std::vector<std::vector<double>> values;  ///< NaN marks a missing cell
    double min = 0.0;
    double max = 100.0;
};

std::string render(const HeatTable& table);

/// Fixed palette, cycled by series index.
const std::string& palette(std::size_t index);

/// Escapes &, <, >, and quotes for text content and attributes.
std::string escape(const std::string& text);

}  // namespace gridcal::svg
