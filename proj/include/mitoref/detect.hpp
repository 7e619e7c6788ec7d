#pragma once

#include <string>
#include <vector>

#include "mitoref/cells.hpp"
#include "mitoref/macenko.hpp"

namespace mitoref {

/// Classical threshold detector used when no external detections are
/// supplied. Thresholds the hematoxylin concentration channel (mean OD when
/// no stain basis can be fitted).
struct FallbackDetectorParams {
    double od_threshold = 0.25;
    double min_area_px = 50.0;
    MacenkoParams macenko{};
};

inline void to_json(nlohmann::json& j, const FallbackDetectorParams& p) {
    j = nlohmann::json{{"od_threshold", p.od_threshold},
                       {"min_area_px", p.min_area_px},
                       {"macenko", p.macenko}};
}

inline void from_json(const nlohmann::json& j, FallbackDetectorParams& p) {
    p.od_threshold = j.value("od_threshold", p.od_threshold);
    p.min_area_px = j.value("min_area_px", p.min_area_px);
    if (j.contains("macenko")) j.at("macenko").get_to(p.macenko);
}

namespace detail {

/// Follows the outer pixel-edge contour of a connected component, clockwise
/// on screen, starting at the top-left corner of its first pixel in scan
/// order. Diagonal pinches are kept enclosed, matching 8-connected labeling.
template <typename Fg>
inline std::vector<Point> trace_boundary(Fg fg, int sx, int sy, std::size_t max_steps) {
    static constexpr int dx[4] = {1, 0, -1, 0};  // E, S, W, N
    static constexpr int dy[4] = {0, 1, 0, -1};
    const auto valid = [&](int x, int y, int c) {
        int rx, ry, lx, ly;
        switch (c) {
            case 0: rx = x; ry = y; lx = x; ly = y - 1; break;          // E
            case 1: rx = x - 1; ry = y; lx = x; ly = y; break;          // S
            case 2: rx = x - 1; ry = y - 1; lx = x - 1; ly = y; break;  // W
            default: rx = x; ry = y - 1; lx = x - 1; ly = y - 1; break; // N
        }
        return fg(rx, ry) && !fg(lx, ly);
    };

    std::vector<Point> poly;
    int x = sx, y = sy, d = 0;
    do {
        x += dx[d];
        y += dy[d];
        const int left = (d + 3) % 4;
        int nd;
        if (valid(x, y, left)) nd = left;
        else if (valid(x, y, d)) nd = d;
        else nd = (d + 1) % 4;
        if (nd != d) poly.push_back({static_cast<double>(x), static_cast<double>(y)});
        d = nd;
        if (--max_steps == 0) throw Error("boundary trace did not terminate");
    } while (!(x == sx && y == sy && d == 0));
    return poly;
}

}  // namespace detail

/// Threshold the stain channel and turn 8-connected components of sufficient
/// area into cells. The polygon is the component's outer edge contour; the
/// centroid derives from the polygon; the score is fixed at 0.5.
inline DetectionSet fallback_detect(const ImageRGB8& img,
                                    const FallbackDetectorParams& params = {},
                                    const std::string& image_id = "") {
    check_image(img);
    const int w = img.width, h = img.height;
    const Image3d od = od_image(img, params.macenko.io);

    std::vector<double> channel(od.pixels.size());
    bool use_mean_od = false;
    try {
        const StainProfile profile = macenko_fit(img, params.macenko);
        double dot = 0.0;
        for (int c = 0; c < 3; ++c) dot += profile.stains[0][c] * profile.stains[1][c];
        if (dot > 0.99863) {  // columns < 3 degrees apart: single-stain tile,
            use_mean_od = true;  // the concentration solve is ill-posed
        } else {
            const auto conc = stain_concentrations(od, profile);
            for (std::size_t i = 0; i < conc.size(); ++i) channel[i] = conc[i][0];
        }
    } catch (const InsufficientTissue&) {
        use_mean_od = true;  // blank-ish tile
    }
    if (use_mean_od) {
        for (std::size_t i = 0; i < od.pixels.size(); ++i) {
            const Vec3& p = od.pixels[i];
            channel[i] = (p[0] + p[1] + p[2]) / 3.0;
        }
    }

    std::vector<std::uint8_t> mask(channel.size());
    for (std::size_t i = 0; i < channel.size(); ++i)
        mask[i] = channel[i] > params.od_threshold ? 1 : 0;

    DetectionSet out;
    out.image_id = image_id;
    out.width = w;
    out.height = h;
    out.source = DetectionSource::Fallback;

    std::vector<int> label(mask.size(), 0);
    int next_label = 0;
    std::vector<std::pair<int, int>> stack;
    for (int sy = 0; sy < h; ++sy) {
        for (int sx = 0; sx < w; ++sx) {
            const std::size_t si = static_cast<std::size_t>(sy) * w + sx;
            if (!mask[si] || label[si]) continue;
            const int id = ++next_label;
            std::size_t area = 0;
            label[si] = id;
            stack.assign(1, {sx, sy});
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                ++area;
                for (int ny = cy - 1; ny <= cy + 1; ++ny) {
                    for (int nx = cx - 1; nx <= cx + 1; ++nx) {
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
                        if (mask[ni] && !label[ni]) {
                            label[ni] = id;
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
            if (static_cast<double>(area) < params.min_area_px) continue;

            const auto fg = [&](int x, int y) {
                if (x < 0 || y < 0 || x >= w || y >= h) return false;
                return label[static_cast<std::size_t>(y) * w + x] == id;
            };
            auto poly = detail::trace_boundary(
                fg, sx, sy, 4 * static_cast<std::size_t>(w + 2) * (h + 2) + 8);
            out.cells.push_back(make_cell(std::move(poly), 0.5));
        }
    }
    return out;
}

}  // namespace mitoref
