#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "mitoref/errors.hpp"

namespace mitoref {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }

inline double distance(const Point& a, const Point& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

inline double polygon_signed_area(const std::vector<Point>& poly) {
    double s = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = poly[i];
        const Point& b = poly[(i + 1) % n];
        s += a.x * b.y - b.x * a.y;
    }
    return 0.5 * s;
}

inline double polygon_area(const std::vector<Point>& poly) {
    return std::abs(polygon_signed_area(poly));
}

inline double polygon_perimeter(const std::vector<Point>& poly) {
    double s = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) s += distance(poly[i], poly[(i + 1) % n]);
    return s;
}

/// Area centroid by the shoelace formula.
inline Point polygon_centroid(const std::vector<Point>& poly) {
    const double a = polygon_signed_area(poly);
    if (a == 0.0) throw GeometryError("centroid of zero-area polygon");
    double cx = 0.0, cy = 0.0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& p = poly[i];
        const Point& q = poly[(i + 1) % n];
        const double cross = p.x * q.y - q.x * p.y;
        cx += (p.x + q.x) * cross;
        cy += (p.y + q.y) * cross;
    }
    return {cx / (6.0 * a), cy / (6.0 * a)};
}

namespace detail {

inline double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

inline bool on_segment(const Point& a, const Point& b, const Point& p) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

/// True if segments ab and cd properly cross, or overlap collinearly over
/// more than a point. Mere endpoint touching is allowed: rasterized cell
/// outlines may legitimately pinch at a corner.
inline bool segments_conflict(const Point& a, const Point& b, const Point& c, const Point& d) {
    const double d1 = cross(a, b, c);
    const double d2 = cross(a, b, d);
    const double d3 = cross(c, d, a);
    const double d4 = cross(c, d, b);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
        ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0)))
        return true;
    if (d1 == 0 && d2 == 0 && d3 == 0 && d4 == 0) {
        // collinear: conflict if the overlap extends beyond a single point
        const auto lo = [](const Point& p, const Point& q) {
            return std::make_pair(std::min(p.x, q.x), std::min(p.y, q.y));
        };
        const auto hi = [](const Point& p, const Point& q) {
            return std::make_pair(std::max(p.x, q.x), std::max(p.y, q.y));
        };
        auto [ax0, ay0] = lo(a, b);
        auto [ax1, ay1] = hi(a, b);
        auto [bx0, by0] = lo(c, d);
        auto [bx1, by1] = hi(c, d);
        const double ox0 = std::max(ax0, bx0), ox1 = std::min(ax1, bx1);
        const double oy0 = std::max(ay0, by0), oy1 = std::min(ay1, by1);
        if (ox0 > ox1 || oy0 > oy1) return false;
        return ox1 - ox0 > 0 || oy1 - oy0 > 0;
    }
    return false;
}

}  // namespace detail

/// Rejects proper self-intersections and collinear edge overlaps. Touching at
/// isolated vertices passes; adjacent edges sharing an endpoint are fine
/// unless they fold back over each other.
inline bool polygon_is_simple(const std::vector<Point>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Point &a = poly[i], &b = poly[(i + 1) % n];
            const Point &c = poly[j], &d = poly[(j + 1) % n];
            if (detail::segments_conflict(a, b, c, d)) return false;
        }
    }
    return true;
}

/// Andrew monotone chain; returns hull vertices in counterclockwise order.
inline std::vector<Point> convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const std::size_t n = pts.size();
    if (n < 3) return pts;
    std::vector<Point> hull(2 * n);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    const std::size_t lower = k + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        while (k >= lower && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

/// Pixel centers (x + 0.5, y + 0.5) inside the polygon, even-odd rule,
/// half-open on scanline crossings so shared edges never double-fill.
inline std::vector<std::pair<int, int>> rasterize_polygon(const std::vector<Point>& poly) {
    std::vector<std::pair<int, int>> out;
    if (poly.size() < 3) return out;
    double ymin = poly[0].y, ymax = poly[0].y;
    for (const Point& p : poly) {
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const int y0 = static_cast<int>(std::floor(ymin));
    const int y1 = static_cast<int>(std::ceil(ymax));
    std::vector<double> xs;
    for (int y = y0; y <= y1; ++y) {
        const double yc = y + 0.5;
        xs.clear();
        const std::size_t n = poly.size();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = poly[i];
            const Point& b = poly[(i + 1) % n];
            if ((a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y))
                xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
            const int xa = static_cast<int>(std::ceil(xs[i] - 0.5));
            for (int x = xa; x + 0.5 < xs[i + 1]; ++x) out.emplace_back(x, y);
        }
    }
    return out;
}

}  // namespace mitoref
