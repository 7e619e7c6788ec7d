#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mitoref/geometry.hpp"

namespace mitoref {

/// One detected cell: a simple polygon outline, its area centroid, and the
/// detector confidence.
struct CellInstance {
    std::vector<Point> polygon;
    Point centroid;
    double score = 0.0;
};

/// Builds a cell from an outline, deriving the centroid and validating the
/// polygon. Throws GeometryError on degenerate or self-intersecting outlines.
inline CellInstance make_cell(std::vector<Point> polygon, double score) {
    // drop exact consecutive duplicates before validating
    std::vector<Point> poly;
    for (const Point& p : polygon)
        if (poly.empty() || !(poly.back() == p)) poly.push_back(p);
    if (poly.size() > 1 && poly.front() == poly.back()) poly.pop_back();
    if (poly.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
    if (polygon_area(poly) <= 0.0) throw GeometryError("polygon has zero area");
    if (!polygon_is_simple(poly)) throw GeometryError("polygon is self-intersecting");
    CellInstance cell;
    cell.centroid = polygon_centroid(poly);
    cell.polygon = std::move(poly);
    cell.score = score;
    return cell;
}

enum class DetectionSource { External, Fallback };

/// All detections for one image.
struct DetectionSet {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<CellInstance> cells;
    DetectionSource source = DetectionSource::External;
};

enum class SelectionKind { NoCell, Single, Pair, Ambiguous };

inline SelectionKind selection_kind_for(std::size_t n) {
    if (n == 0) return SelectionKind::NoCell;
    if (n == 1) return SelectionKind::Single;
    if (n == 2) return SelectionKind::Pair;
    return SelectionKind::Ambiguous;
}

inline const char* selection_kind_name(SelectionKind k) {
    switch (k) {
        case SelectionKind::NoCell: return "NoCell";
        case SelectionKind::Single: return "Single";
        case SelectionKind::Pair: return "Pair";
        case SelectionKind::Ambiguous: return "Ambiguous";
    }
    return "?";
}

/// Outcome of center-region cell selection; kind is a function of the number
/// of selected cells.
struct CenterSelection {
    SelectionKind kind = SelectionKind::NoCell;
    std::vector<CellInstance> selected;
};

struct CenterSelectConfig {
    double radius_frac = 0.15;     // of min(width, height): "near the center"
    double proximity_frac = 0.25;  // of min(width, height): "close proximity"
};

namespace detail {

inline bool centroid_less(const CellInstance& a, const CellInstance& b) {
    return a.centroid.x < b.centroid.x ||
           (a.centroid.x == b.centroid.x && a.centroid.y < b.centroid.y);
}

}  // namespace detail

/// Core of the center selection, with an explicit center so the logic is
/// translation-consistent by construction. Candidates within `radius` of the
/// center are clustered around the nearest-to-center cell; cells farther than
/// `proximity` from that anchor are dropped.
inline CenterSelection select_cells_around(const std::vector<CellInstance>& cells,
                                           const Point& center, double radius,
                                           double proximity) {
    std::vector<CellInstance> candidates;
    for (const CellInstance& c : cells)
        if (distance(c.centroid, center) <= radius) candidates.push_back(c);

    CenterSelection sel;
    if (candidates.size() >= 2) {
        std::sort(candidates.begin(), candidates.end(),
                  [&](const CellInstance& a, const CellInstance& b) {
                      const double da = distance(a.centroid, center);
                      const double db = distance(b.centroid, center);
                      if (da != db) return da < db;
                      return detail::centroid_less(a, b);
                  });
        const Point anchor = candidates.front().centroid;
        std::vector<CellInstance> kept;
        for (const CellInstance& c : candidates)
            if (distance(c.centroid, anchor) < proximity) kept.push_back(c);
        candidates = std::move(kept);
    }
    sel.selected = std::move(candidates);
    sel.kind = selection_kind_for(sel.selected.size());
    return sel;
}

/// Selects the cells near the image center that drive rule dispatch.
inline CenterSelection select_center_cells(const DetectionSet& d,
                                           const CenterSelectConfig& cfg = {}) {
    const double unit = static_cast<double>(std::min(d.width, d.height));
    const Point center{d.width / 2.0, d.height / 2.0};
    return select_cells_around(d.cells, center, cfg.radius_frac * unit,
                               cfg.proximity_frac * unit);
}

inline nlohmann::json detections_to_json(const DetectionSet& d) {
    nlohmann::json cells = nlohmann::json::array();
    for (const CellInstance& c : d.cells) {
        nlohmann::json poly = nlohmann::json::array();
        for (const Point& p : c.polygon) poly.push_back({p.x, p.y});
        cells.push_back({{"polygon", poly}, {"score", c.score}});
    }
    return nlohmann::json{{"image_id", d.image_id},
                          {"width", d.width},
                          {"height", d.height},
                          {"cells", cells}};
}

/// Parse and validate one image's detections.
inline DetectionSet parse_detections(const nlohmann::json& j) {
    DetectionSet d;
    try {
        j.at("image_id").get_to(d.image_id);
        j.at("width").get_to(d.width);
        j.at("height").get_to(d.height);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("detection JSON: ") + e.what());
    }
    if (d.width <= 0 || d.height <= 0)
        throw SchemaError("detection JSON: width and height must be positive");
    const auto it = j.find("cells");
    if (it == j.end() || !it->is_array())
        throw SchemaError("detection JSON: missing 'cells' array");
    for (const auto& jc : *it) {
        std::vector<Point> poly;
        double score = 0.0;
        try {
            for (const auto& v : jc.at("polygon"))
                poly.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            score = jc.at("score").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(std::string("detection JSON cell: ") + e.what());
        }
        if (!(score >= 0.0 && score <= 1.0))
            throw SchemaError("detection JSON: score must be in [0, 1]");
        for (const Point& p : poly)
            if (p.x < 0.0 || p.x > d.width || p.y < 0.0 || p.y > d.height)
                throw SchemaError("detection JSON: vertex outside image bounds");
        d.cells.push_back(make_cell(std::move(poly), score));
    }
    return d;
}

inline DetectionSet load_detections(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid JSON in " + path + ": " + e.what());
    }
    return parse_detections(j);
}

inline void save_detections(const DetectionSet& d, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << detections_to_json(d).dump(2) << "\n";
}

}  // namespace mitoref
