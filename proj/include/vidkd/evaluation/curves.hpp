#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vidkd/error.hpp"
#include "vidkd/training/history.hpp"

namespace vidkd {

struct CurveFiles {
    std::filesystem::path table;
    std::filesystem::path figure;
};

namespace detail {

struct Panel {
    double x0, y0, width, height;
    double y_min, y_max;
};

inline std::string fmt(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

inline double px(const Panel& p, int epoch, int epochs) {
    if (epochs <= 1) {
        return p.x0 + p.width / 2.0;
    }
    return p.x0 + p.width * static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
}

inline double py(const Panel& p, double v) {
    const double span = p.y_max - p.y_min;
    const double t = span > 0.0 ? (v - p.y_min) / span : 0.5;
    return p.y0 + p.height * (1.0 - std::clamp(t, 0.0, 1.0));
}

inline void draw_axes(std::string& svg, const Panel& p, const std::string& title, const std::string& y_label,
                      int epochs) {
    svg += "<rect x=\"" + fmt(p.x0) + "\" y=\"" + fmt(p.y0) + "\" width=\"" + fmt(p.width) + "\" height=\"" +
           fmt(p.height) + "\" fill=\"none\" stroke=\"#444\"/>\n";
    svg += "<text x=\"" + fmt(p.x0 + p.width / 2) + "\" y=\"" + fmt(p.y0 - 12) +
           "\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
    svg += "<text x=\"" + fmt(p.x0 + p.width / 2) + "\" y=\"" + fmt(p.y0 + p.height + 34) +
           "\" text-anchor=\"middle\" font-size=\"12\">epoch</text>\n";
    svg += "<text x=\"" + fmt(p.x0 - 44) + "\" y=\"" + fmt(p.y0 + p.height / 2) +
           "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " + fmt(p.x0 - 44) + " " +
           fmt(p.y0 + p.height / 2) + ")\">" + y_label + "</text>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = p.y_min + (p.y_max - p.y_min) * i / 4.0;
        const double y = py(p, v);
        svg += "<line x1=\"" + fmt(p.x0 - 4) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(p.x0) + "\" y2=\"" + fmt(y) +
               "\" stroke=\"#444\"/>\n";
        svg += "<text x=\"" + fmt(p.x0 - 7) + "\" y=\"" + fmt(y + 4) + "\" text-anchor=\"end\" font-size=\"10\">" +
               fmt(v, "%.3g") + "</text>\n";
    }
    const int ticks = std::min(epochs, 5);
    for (int i = 0; i < ticks; ++i) {
        const int e = ticks == 1 ? 1 : 1 + (epochs - 1) * i / (ticks - 1);
        const double x = px(p, e, epochs);
        svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(p.y0 + p.height) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
               fmt(p.y0 + p.height + 4) + "\" stroke=\"#444\"/>\n";
        svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(p.y0 + p.height + 16) +
               "\" text-anchor=\"middle\" font-size=\"10\">" + std::to_string(e) + "</text>\n";
    }
}

inline void draw_series(std::string& svg, const Panel& p, const std::vector<double>& values, const char* color,
                        int epochs) {
    std::string points;
    for (std::size_t i = 0; i < values.size(); ++i) {
        points += (i ? " " : "") + fmt(px(p, static_cast<int>(i) + 1, epochs)) + "," + fmt(py(p, values[i]));
    }
    if (values.size() > 1) {
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + points +
               "\"/>\n";
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        svg += "<circle cx=\"" + fmt(px(p, static_cast<int>(i) + 1, epochs)) + "\" cy=\"" + fmt(py(p, values[i])) +
               "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
    }
}

inline void draw_legend(std::string& svg, double x, double y, const std::vector<std::pair<std::string, const char*>>& items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const double yy = y + 16.0 * static_cast<double>(i);
        svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(yy) + "\" x2=\"" + fmt(x + 18) + "\" y2=\"" + fmt(yy) +
               "\" stroke=\"" + items[i].second + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + fmt(x + 23) + "\" y=\"" + fmt(yy + 4) + "\" font-size=\"11\">" + items[i].first +
               "</text>\n";
    }
}

}  // namespace detail

inline constexpr const char* kTrainColor = "#d62728";
inline constexpr const char* kValColor = "#1f77b4";

/// Two-panel SVG: train/val video accuracy on the left, validation loss on the right.
inline std::string render_curves_svg(const RunHistory& history) {
    if (history.empty()) {
        throw ConfigError("cannot plot an empty history");
    }
    const int epochs = static_cast<int>(history.size());
    std::vector<double> train_acc, val_acc, val_loss;
    for (const auto& r : history.records) {
        train_acc.push_back(r.train_accuracy);
        val_acc.push_back(r.val_accuracy);
        val_loss.push_back(r.val_loss);
    }
    double lo = *std::min_element(val_loss.begin(), val_loss.end());
    double hi = *std::max_element(val_loss.begin(), val_loss.end());
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    const detail::Panel acc{70, 40, 340, 260, 0.0, 1.0};
    const detail::Panel loss{540, 40, 340, 260, std::max(0.0, lo - pad), hi + pad};

    std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"920\" height=\"360\" viewBox=\"0 0 920 360\" "
        "font-family=\"sans-serif\">\n<rect width=\"920\" height=\"360\" fill=\"white\"/>\n";
    detail::draw_axes(svg, acc, "video accuracy", "accuracy", epochs);
    detail::draw_series(svg, acc, train_acc, kTrainColor, epochs);
    detail::draw_series(svg, acc, val_acc, kValColor, epochs);
    detail::draw_legend(svg, acc.x0 + 10, acc.y0 + 14, {{"train", kTrainColor}, {"val", kValColor}});
    detail::draw_axes(svg, loss, "validation loss", "loss", epochs);
    detail::draw_series(svg, loss, val_loss, kValColor, epochs);
    detail::draw_legend(svg, loss.x0 + 10, loss.y0 + 14, {{"val loss", kValColor}});
    svg += "</svg>\n";
    return svg;
}

inline void write_curves_svg(const std::filesystem::path& path, const RunHistory& history) {
    const std::string svg = render_curves_svg(history);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot write figure '" + path.string() + "'");
    }
    out << svg;
    if (!out) {
        throw IoError("failed writing figure '" + path.string() + "'");
    }
}

/// Writes `<stem>.csv` (the metrics table) and `<stem>.svg` (the figure).
inline CurveFiles export_curves(const RunHistory& history, const std::filesystem::path& stem) {
    if (history.empty()) {
        throw ConfigError("cannot export curves of an empty history");
    }
    CurveFiles files{stem, stem};
    files.table += ".csv";
    files.figure += ".svg";
    write_history_csv(files.table, history);
    write_curves_svg(files.figure, history);
    return files;
}

}  // namespace vidkd
