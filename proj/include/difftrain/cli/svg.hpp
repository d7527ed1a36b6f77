#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace difftrain {

// Minimal SVG scatter/line plots: axes, polylines, point markers. Enough to
// eyeball boundary geometry without a plotting dependency.
class SvgPlot {
public:
    SvgPlot(double x_lo, double x_hi, double y_lo, double y_hi, int width = 640, int height = 640)
        : x_lo_(x_lo), x_hi_(x_hi), y_lo_(y_lo), y_hi_(y_hi), width_(width), height_(height) {
        if (x_hi_ <= x_lo_ || y_hi_ <= y_lo_) {
            throw std::invalid_argument("SvgPlot: empty plot range");
        }
        body_.setf(std::ios::fixed);
        body_.precision(2);
    }

    void circle(double x, double y, double radius_px, const std::string& color) {
        body_ << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"" << radius_px
              << "\" fill=\"" << color << "\"/>\n";
    }

    void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color,
                  double stroke_px = 1.5) {
        if (pts.size() < 2) return;
        body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << stroke_px
              << "\" points=\"";
        for (const auto& [x, y] : pts) body_ << px(x) << ',' << py(y) << ' ';
        body_ << "\"/>\n";
    }

    // Clipped segment of the line a*x + b*y + c = 0 across the plot range.
    void line_equation(double a, double b, double c, const std::string& color) {
        std::vector<std::pair<double, double>> pts;
        auto try_point = [&](double x, double y) {
            if (x >= x_lo_ - 1e-9 && x <= x_hi_ + 1e-9 && y >= y_lo_ - 1e-9 && y <= y_hi_ + 1e-9) {
                pts.emplace_back(x, y);
            }
        };
        if (b != 0.0) {
            try_point(x_lo_, -(a * x_lo_ + c) / b);
            try_point(x_hi_, -(a * x_hi_ + c) / b);
        }
        if (a != 0.0) {
            try_point(-(b * y_lo_ + c) / a, y_lo_);
            try_point(-(b * y_hi_ + c) / a, y_hi_);
        }
        if (pts.size() >= 2) polyline({pts[0], pts[1]}, color, 2.0);
    }

    void label(double x, double y, const std::string& text, const std::string& color = "#333") {
        body_ << "<text x=\"" << px(x) << "\" y=\"" << py(y) << "\" fill=\"" << color
              << "\" font-size=\"12\">" << text << "</text>\n";
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::runtime_error("SvgPlot: cannot write " + path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
            << height_ << "\" viewBox=\"0 0 " << width_ << ' ' << height_ << "\">\n"
            << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        // axes through the origin when visible
        std::ostringstream axes;
        axes.setf(std::ios::fixed);
        axes.precision(2);
        if (x_lo_ <= 0.0 && x_hi_ >= 0.0) {
            axes << "<line x1=\"" << px(0) << "\" y1=\"0\" x2=\"" << px(0) << "\" y2=\"" << height_
                 << "\" stroke=\"#ccc\"/>\n";
        }
        if (y_lo_ <= 0.0 && y_hi_ >= 0.0) {
            axes << "<line x1=\"0\" y1=\"" << py(0) << "\" x2=\"" << width_ << "\" y2=\"" << py(0)
                 << "\" stroke=\"#ccc\"/>\n";
        }
        out << axes.str() << body_.str() << "</svg>\n";
    }

private:
    double px(double x) const { return (x - x_lo_) / (x_hi_ - x_lo_) * width_; }
    double py(double y) const { return height_ - (y - y_lo_) / (y_hi_ - y_lo_) * height_; }

    double x_lo_, x_hi_, y_lo_, y_hi_;
    int width_, height_;
    std::ostringstream body_;
};

}  // namespace difftrain
