#include <algorithm>
#include <cmath>

#include "dmgnet/scene_data.hpp"

namespace dmgnet {

namespace {

// Crossing abscissa of edge (a,b) with the horizontal line at y. Shared by
// the point test and the scanline fill so both agree bit for bit.
inline double crossing_x(const Point& a, const Point& b, double y) {
    return (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x;
}

inline bool edge_crosses(const Point& a, const Point& b, double y) { return (a.y > y) != (b.y > y); }

// Sutherland-Hodgman against one half-plane.
template <typename Inside, typename Intersect>
std::vector<Point> clip_half(const std::vector<Point>& poly, Inside inside, Intersect intersect) {
    std::vector<Point> out;
    if (poly.empty()) return out;
    Point prev = poly.back();
    bool prev_in = inside(prev);
    for (const Point& cur : poly) {
        const bool cur_in = inside(cur);
        if (cur_in) {
            if (!prev_in) out.push_back(intersect(prev, cur));
            out.push_back(cur);
        } else if (prev_in) {
            out.push_back(intersect(prev, cur));
        }
        prev = cur;
        prev_in = cur_in;
    }
    return out;
}

double clipped_area(const std::vector<Point>& polygon, int width, int height) {
    std::vector<Point> p = polygon;
    const double w = width, h = height;
    auto at_x = [](double x) {
        return [x](const Point& a, const Point& b) {
            const double t = (x - a.x) / (b.x - a.x);
            return Point{x, a.y + t * (b.y - a.y)};
        };
    };
    auto at_y = [](double y) {
        return [y](const Point& a, const Point& b) {
            const double t = (y - a.y) / (b.y - a.y);
            return Point{a.x + t * (b.x - a.x), y};
        };
    };
    p = clip_half(p, [](const Point& q) { return q.x >= 0.0; }, at_x(0.0));
    p = clip_half(p, [w](const Point& q) { return q.x <= w; }, at_x(w));
    p = clip_half(p, [](const Point& q) { return q.y >= 0.0; }, at_y(0.0));
    p = clip_half(p, [h](const Point& q) { return q.y <= h; }, at_y(h));
    if (p.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0, j = p.size() - 1; i < p.size(); j = i++) twice += p[j].x * p[i].y - p[i].x * p[j].y;
    return std::abs(twice) * 0.5;
}

}  // namespace

bool point_in_polygon(const std::vector<Point>& polygon, double x, double y) {
    bool inside = false;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = polygon[j];
        const Point& b = polygon[i];
        if (edge_crosses(a, b, y) && x < crossing_x(a, b, y)) inside = !inside;
    }
    return inside;
}

RasterizeResult rasterize_annotations(const std::vector<BuildingAnnotation>& annotations, int width,
                                      int height) {
    RasterizeResult result;
    result.grades = GradeMap(width, height, 0);
    std::vector<double> xs;
    for (const BuildingAnnotation& ann : annotations) {
        const auto& poly = ann.polygon;
        if (poly.size() < 3 || clipped_area(poly, width, height) <= 0.0) {
            ++result.skipped;
            continue;
        }
        const auto code = static_cast<std::uint8_t>(ann.grade);
        double ymin = poly[0].y, ymax = poly[0].y;
        for (const Point& p : poly) {
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
        const int y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(ymax)));
        for (int y = y0; y <= y1; ++y) {
            const double cy = y + 0.5;
            xs.clear();
            for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
                if (edge_crosses(poly[j], poly[i], cy)) xs.push_back(crossing_x(poly[j], poly[i], cy));
            std::sort(xs.begin(), xs.end());
            // A center cx is inside iff an odd number of crossings lie
            // strictly right of it, i.e. xs[2m] <= cx < xs[2m+1].
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                const double lo = xs[k], hi = xs[k + 1];
                if (!(lo < hi)) continue;
                int x = static_cast<int>(std::ceil(lo - 0.5)) - 1;
                while (x + 0.5 < lo) ++x;
                x = std::max(x, 0);
                for (; x < width && x + 0.5 < hi; ++x) result.grades.at(y, x) = code;
            }
        }
    }
    result.mask = mask_from_grades(result.grades);
    return result;
}

RasterizeResult rasterize_annotations(const ScenePair& scene) {
    return rasterize_annotations(scene.annotations, scene.pre.width, scene.pre.height);
}

}  // namespace dmgnet
