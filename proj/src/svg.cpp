#include "kmex/svg.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace kmex {

namespace {

constexpr const char* kColors[] = {"#c0392b", "#2980b9", "#27ae60", "#8e44ad",
                                   "#d68910", "#16a085", "#7f8c8d"};

std::string fmt(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

}  // namespace

std::string radar_svg(const std::vector<std::pair<std::string, RadarScores>>& entries) {
    require(!entries.empty(), "radar: nothing to plot");
    const double size = 420.0, cx = size / 2.0, cy = size / 2.0 + 10.0, radius = 140.0;
    const char* axis_names[5] = {"Transp.", "Faith.Acc.", "Faith.Expl.", "Rob.Expl.",
                                 "Div."};

    const auto point = [&](int axis, double value) {
        const double angle =
            -std::numbers::pi / 2.0 + axis * 2.0 * std::numbers::pi / 5.0;
        const double r = std::clamp(value, 0.0, 1.2) * radius;
        return std::pair{cx + r * std::cos(angle), cy + r * std::sin(angle)};
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\""
       << size + 20 * entries.size() << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    for (double ring : {0.25, 0.5, 0.75, 1.0}) {
        os << "<polygon points=\"";
        for (int axis = 0; axis < 5; ++axis) {
            const auto [x, y] = point(axis, ring);
            os << fmt(x) << ',' << fmt(y) << ' ';
        }
        os << "\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\"/>\n";
    }
    for (int axis = 0; axis < 5; ++axis) {
        const auto [x, y] = point(axis, 1.2);
        const auto [lx, ly] = point(axis, 1.32);
        os << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(cy) << "\" x2=\"" << fmt(x)
           << "\" y2=\"" << fmt(y) << "\" stroke=\"#999999\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly)
           << "\" text-anchor=\"middle\">" << axis_names[axis] << "</text>\n";
    }

    for (std::size_t e = 0; e < entries.size(); ++e) {
        const auto& scores = entries[e].second;
        const double values[5] = {scores.transparency, scores.acc_faithfulness,
                                  scores.expl_faithfulness, scores.expl_robustness,
                                  scores.diversity};
        const char* color = kColors[e % std::size(kColors)];
        os << "<polygon points=\"";
        for (int axis = 0; axis < 5; ++axis) {
            const auto [x, y] = point(axis, values[axis]);
            os << fmt(x) << ',' << fmt(y) << ' ';
        }
        os << "\" fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"" << color
           << "\" stroke-width=\"2\"/>\n";
        os << "<rect x=\"20\" y=\"" << fmt(size - 10 + 20.0 * e)
           << "\" width=\"12\" height=\"12\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"38\" y=\"" << fmt(size + 20.0 * e) << "\">" << entries[e].first
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

std::string image_grid_svg(const std::vector<Tensorf>& images,
                           const std::vector<std::string>& captions, int columns,
                           int pixel_scale) {
    require(!images.empty(), "gallery: no images");
    require(images.size() == captions.size(), "gallery: ", images.size(), " images vs ",
            captions.size(), " captions");
    require(columns >= 1, "gallery: need at least one column");

    const TensorShape shape = images[0].shape;
    const int cell_w = shape.width * pixel_scale + 10;
    const int cell_h = shape.height * pixel_scale + 28;
    const int rows = (static_cast<int>(images.size()) + columns - 1) / columns;

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << columns * cell_w
       << "\" height=\"" << rows * cell_h
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    const Eigen::Index plane = static_cast<Eigen::Index>(shape.height) * shape.width;
    for (std::size_t i = 0; i < images.size(); ++i) {
        require(images[i].shape == shape, "gallery: inconsistent image shapes");
        const int ox = static_cast<int>(i) % columns * cell_w + 5;
        const int oy = static_cast<int>(i) / columns * cell_h + 5;
        for (int y = 0; y < shape.height; ++y) {
            for (int x = 0; x < shape.width; ++x) {
                int rgb[3];
                for (int c = 0; c < 3; ++c) {
                    const int src = shape.channels >= 3 ? c : 0;
                    const float v = images[i].data[src * plane + y * shape.width + x];
                    rgb[c] = std::clamp(static_cast<int>(v * 255.0f + 0.5f), 0, 255);
                }
                char color[8];
                std::snprintf(color, sizeof(color), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
                os << "<rect x=\"" << ox + x * pixel_scale << "\" y=\""
                   << oy + y * pixel_scale << "\" width=\"" << pixel_scale
                   << "\" height=\"" << pixel_scale << "\" fill=\"" << color << "\"/>\n";
            }
        }
        os << "<text x=\"" << ox << "\" y=\"" << oy + shape.height * pixel_scale + 15
           << "\">" << captions[i] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace kmex
