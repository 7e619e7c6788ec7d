#pragma once

#include <cmath>
#include <limits>

#include <json.hpp>

#include "mitoref/cells.hpp"
#include "mitoref/macenko.hpp"

namespace mitoref {

/// Shape-category thresholds. The categories come from the rule set; the
/// numeric gates are declared defaults, tunable per run.
struct MorphologyConfig {
    double round_ecc = 0.6;
    double round_solidity = 0.85;
    double oval_ecc = 0.9;
    double oval_solidity = 0.8;
    double hole_contrast = 0.6;   // center OD below this fraction of the annulus OD -> ring
    double hole_margin = 0.1;     // contrast ratios this close to the gate are low-confidence
    double isotropy_ecc = 0.2;    // below: orientation is unreliable
    double min_area_px = 4.0;
    double io = 240.0;            // OD reference for the radial profile
};

inline void to_json(nlohmann::json& j, const MorphologyConfig& c) {
    j = nlohmann::json{{"round_ecc", c.round_ecc},
                       {"round_solidity", c.round_solidity},
                       {"oval_ecc", c.oval_ecc},
                       {"oval_solidity", c.oval_solidity},
                       {"hole_contrast", c.hole_contrast},
                       {"hole_margin", c.hole_margin},
                       {"isotropy_ecc", c.isotropy_ecc},
                       {"min_area_px", c.min_area_px},
                       {"io", c.io}};
}

inline void from_json(const nlohmann::json& j, MorphologyConfig& c) {
    c.round_ecc = j.value("round_ecc", c.round_ecc);
    c.round_solidity = j.value("round_solidity", c.round_solidity);
    c.oval_ecc = j.value("oval_ecc", c.oval_ecc);
    c.oval_solidity = j.value("oval_solidity", c.oval_solidity);
    c.hole_contrast = j.value("hole_contrast", c.hole_contrast);
    c.hole_margin = j.value("hole_margin", c.hole_margin);
    c.isotropy_ecc = j.value("isotropy_ecc", c.isotropy_ecc);
    c.min_area_px = j.value("min_area_px", c.min_area_px);
    c.io = j.value("io", c.io);
}

enum class ShapeClass { Ring, Round, Oval, Other };

inline const char* shape_class_name(ShapeClass s) {
    switch (s) {
        case ShapeClass::Ring: return "Ring";
        case ShapeClass::Round: return "Round";
        case ShapeClass::Oval: return "Oval";
        case ShapeClass::Other: return "Other";
    }
    return "?";
}

struct ShapeDescriptor {
    double area = 0.0;             // px^2, polygon area
    double perimeter = 0.0;        // px
    double orientation = 0.0;      // degrees in [0, 180)
    double eccentricity = 0.0;     // [0, 1)
    double solidity = 1.0;         // (0, 1]
    double circularity = 1.0;      // (0, 1]
    bool has_hole = false;
    double hole_contrast_ratio = std::numeric_limits<double>::quiet_NaN();
};

inline void to_json(nlohmann::json& j, const ShapeDescriptor& d) {
    j = nlohmann::json{{"area", d.area},
                       {"perimeter", d.perimeter},
                       {"orientation", d.orientation},
                       {"eccentricity", d.eccentricity},
                       {"solidity", d.solidity},
                       {"circularity", d.circularity},
                       {"has_hole", d.has_hole}};
    if (std::isfinite(d.hole_contrast_ratio)) j["hole_contrast_ratio"] = d.hole_contrast_ratio;
}

/// Axial orientation difference in [0, 90] degrees.
inline double orientation_difference(double theta1_deg, double theta2_deg) {
    double d = std::fmod(std::abs(theta1_deg - theta2_deg), 180.0);
    return std::min(d, 180.0 - d);
}

/// Shape descriptors from the rasterized polygon interior. Second moments use
/// pixel centers plus the per-pixel 1/12 square inertia, which reproduces the
/// continuous moments of axis-aligned rectangles exactly. Ring evidence comes
/// from the radial OD profile when an image is supplied.
inline ShapeDescriptor describe(const CellInstance& cell, const ImageRGB8* img,
                                const MorphologyConfig& cfg = {}) {
    ShapeDescriptor d;
    d.area = polygon_area(cell.polygon);
    if (d.area < cfg.min_area_px)
        throw DegenerateShape("polygon area below " + std::to_string(cfg.min_area_px));
    d.perimeter = polygon_perimeter(cell.polygon);
    d.circularity = std::min(1.0, 4.0 * M_PI * d.area / (d.perimeter * d.perimeter));

    const auto raster = rasterize_polygon(cell.polygon);
    if (raster.size() < 3) throw DegenerateShape("shape rasterizes to fewer than 3 pixels");
    const double n = static_cast<double>(raster.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : raster) {
        mx += x + 0.5;
        my += y + 0.5;
    }
    mx /= n;
    my /= n;
    double mu20 = n / 12.0, mu02 = n / 12.0, mu11 = 0.0;
    for (const auto& [x, y] : raster) {
        const double ddx = x + 0.5 - mx;
        const double ddy = y + 0.5 - my;
        mu20 += ddx * ddx;
        mu02 += ddy * ddy;
        mu11 += ddx * ddy;
    }

    double theta = 0.5 * std::atan2(2.0 * mu11, mu20 - mu02) * 180.0 / M_PI;
    theta = std::fmod(theta, 180.0);
    if (theta < 0.0) theta += 180.0;
    d.orientation = theta == 180.0 ? 0.0 : theta;

    const double tr = mu20 + mu02;
    const double det = std::sqrt((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11);
    const double l1 = (tr + det) / 2.0;
    const double l2 = (tr - det) / 2.0;
    d.eccentricity = l1 > 0.0 ? std::sqrt(std::max(0.0, 1.0 - l2 / l1)) : 0.0;

    const double hull_area = polygon_area(convex_hull(cell.polygon));
    d.solidity = hull_area > 0.0 ? std::min(1.0, d.area / hull_area) : 1.0;

    if (img != nullptr) {
        check_image(*img);
        const double r_eq = std::sqrt(d.area / M_PI);
        double center_sum = 0.0, annulus_sum = 0.0;
        std::size_t center_n = 0, annulus_n = 0;
        for (const auto& [x, y] : raster) {
            if (x < 0 || y < 0 || x >= img->width || y >= img->height) continue;
            const double r = std::hypot(x + 0.5 - mx, y + 0.5 - my);
            const Vec3 rgb = img->px_d(x, y);
            const double od = (od_forward(rgb[0], cfg.io) + od_forward(rgb[1], cfg.io) +
                               od_forward(rgb[2], cfg.io)) / 3.0;
            if (r <= 0.35 * r_eq) {
                center_sum += od;
                ++center_n;
            } else if (r >= 0.6 * r_eq && r <= r_eq) {
                annulus_sum += od;
                ++annulus_n;
            }
        }
        if (center_n >= 3 && annulus_n >= 3 && annulus_sum > 0.0) {
            d.hole_contrast_ratio = (center_sum / center_n) / (annulus_sum / annulus_n);
            d.has_hole = d.hole_contrast_ratio < cfg.hole_contrast;
        }
    }
    return d;
}

/// Category dispatch over the descriptor: ring evidence wins, then the
/// round and oval gates, else Other.
inline ShapeClass classify_shape(const ShapeDescriptor& d, const MorphologyConfig& cfg = {}) {
    if (d.has_hole) return ShapeClass::Ring;
    if (d.eccentricity < cfg.round_ecc && d.solidity > cfg.round_solidity)
        return ShapeClass::Round;
    if (d.eccentricity < cfg.oval_ecc && d.solidity > cfg.oval_solidity)
        return ShapeClass::Oval;
    return ShapeClass::Other;
}

}  // namespace mitoref
