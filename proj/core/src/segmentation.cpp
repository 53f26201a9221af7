#include "aba/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <ostream>
#include <set>

#include "aba/error.hpp"

namespace aba::harvester {

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

// Clockwise angle in (0, 2pi] that takes direction u onto direction v.
double clockwise_angle(geom::Point u, geom::Point v) {
    const double cross = u.x * v.y - u.y * v.x;
    const double dot = u.x * v.x + u.y * v.y;
    double a = std::atan2(-cross, dot);
    if (a <= 0.0) a += 2.0 * M_PI;
    return a;
}

std::vector<geom::Ring> trace_rings(std::span<const geom::Point> pts, const std::vector<Edge>& boundary) {
    std::multimap<std::size_t, std::size_t> outgoing;
    for (auto [a, b] : boundary) outgoing.emplace(a, b);
    std::set<Edge> used;
    std::vector<geom::Ring> rings;
    for (const Edge& start : boundary) {
        if (used.count(start)) continue;
        geom::Ring ring;
        Edge e = start;
        while (!used.count(e)) {
            used.insert(e);
            ring.push_back(pts[e.first]);
            const auto [a, b] = e;
            const geom::Point back{pts[a].x - pts[b].x, pts[a].y - pts[b].y};
            std::size_t best = b;
            double best_angle = INFINITY;
            auto [lo, hi] = outgoing.equal_range(b);
            for (auto it = lo; it != hi; ++it) {
                if (used.count({b, it->second})) continue;
                const geom::Point dir{pts[it->second].x - pts[b].x, pts[it->second].y - pts[b].y};
                const double ang = clockwise_angle(back, dir);
                if (ang < best_angle) {
                    best_angle = ang;
                    best = it->second;
                }
            }
            if (best == b) break;
            e = {b, best};
        }
        if (ring.size() >= 3) rings.push_back(std::move(ring));
    }
    return rings;
}

}  // namespace

std::vector<geom::Polygon> alpha_shape(std::span<const geom::Point> points, double alpha_m) {
    if (points.size() < 3) throw GeometryError("alpha shape needs at least 3 points");
    if (!(alpha_m > 0.0)) throw GeometryError("alpha must be positive");
    const auto tris = geom::delaunay(points);

    std::set<Edge> kept_edges;
    std::vector<geom::Triangle> kept;
    for (const auto& t : tris) {
        if (geom::circumradius(points[t.v[0]], points[t.v[1]], points[t.v[2]]) < alpha_m) {
            kept.push_back(t);
            for (int i = 0; i < 3; ++i) kept_edges.insert({t.v[i], t.v[(i + 1) % 3]});
        }
    }
    std::vector<Edge> boundary;
    for (const auto& t : kept)
        for (int i = 0; i < 3; ++i) {
            const Edge e{t.v[i], t.v[(i + 1) % 3]};
            if (!kept_edges.count({e.second, e.first})) boundary.push_back(e);
        }

    std::vector<geom::Ring> outers, holes;
    for (auto& r : trace_rings(points, boundary)) {
        const double a = geom::signed_area(r);
        if (a > 0.0)
            outers.push_back(std::move(r));
        else if (a < 0.0)
            holes.push_back(std::move(r));
    }
    std::vector<geom::Polygon> polys;
    for (auto& o : outers) polys.push_back({std::move(o), {}});
    std::sort(polys.begin(), polys.end(), [](const geom::Polygon& a, const geom::Polygon& b) {
        const auto& pa = a.outer.front();
        const auto& pb = b.outer.front();
        return pa.x < pb.x || (pa.x == pb.x && pa.y < pb.y);
    });
    for (auto& h : holes) {
        geom::Polygon* owner = nullptr;
        double owner_area = INFINITY;
        for (auto& p : polys) {
            const bool inside =
                std::all_of(h.begin(), h.end(), [&](const geom::Point& v) { return geom::contains(p.outer, v); });
            const double a = geom::signed_area(p.outer);
            if (inside && a < owner_area) {
                owner = &p;
                owner_area = a;
            }
        }
        if (owner) owner->holes.push_back(std::move(h));
    }
    return polys;
}

geom::Point HarvestedGridCell::center() const noexcept {
    const auto& r = square.outer;
    return {(r[0].x + r[2].x) / 2.0, (r[0].y + r[2].y) / 2.0};
}

std::vector<HarvestedGridCell> tessellate(const HarvestedSegment& segment, std::span<const TreeRecord> trees,
                                          const TessellationOptions& options) {
    const double cs = options.cell_size_m;
    if (!(cs > 0.0)) throw DomainError("cell size must be positive");
    if (segment.polygon.outer.size() < 3) return {};
    const auto box = geom::bounds(geom::Shape{segment.polygon});
    const auto c0 = static_cast<long long>(std::floor(box.min_x / cs));
    const auto c1 = static_cast<long long>(std::ceil(box.max_x / cs));
    const auto r0 = static_cast<long long>(std::floor(box.min_y / cs));
    const auto r1 = static_cast<long long>(std::ceil(box.max_y / cs));
    const double cell_area = cs * cs;

    std::vector<HarvestedGridCell> cells;
    std::map<std::pair<long long, long long>, std::size_t> index;
    for (long long row = r0; row < r1; ++row)
        for (long long col = c0; col < c1; ++col) {
            const double x0 = static_cast<double>(col) * cs, y0 = static_cast<double>(row) * cs;
            const geom::Box cell_box{x0, y0, x0 + cs, y0 + cs};
            const double a = geom::intersection_area(segment.polygon, cell_box);
            if (!(a > 0.0)) continue;
            HarvestedGridCell c;
            c.id = segment.id + ":" + std::to_string(col) + "_" + std::to_string(row);
            c.col = col;
            c.row = row;
            c.square = geom::rectangle(x0, y0, x0 + cs, y0 + cs);
            c.coverage_fraction = a / cell_area;
            c.accepted = c.coverage_fraction >= options.coverage_threshold - 1e-12;
            index[{col, row}] = cells.size();
            cells.push_back(std::move(c));
        }
    for (const auto& t : trees) {
        const auto col = static_cast<long long>(std::floor(t.x / cs));
        const auto row = static_cast<long long>(std::floor(t.y / cs));
        if (auto it = index.find({col, row}); it != index.end()) cells[it->second].trees.push_back(t);
    }
    return cells;
}

void write_segments_geojson(std::ostream& out, std::span<const HarvestedSegment> segments) {
    using nlohmann::json;
    auto ring_json = [](const geom::Ring& r) {
        json coords = json::array();
        for (const auto& p : r) coords.push_back({p.x, p.y});
        if (!r.empty()) coords.push_back({r.front().x, r.front().y});
        return coords;
    };
    json fc{{"type", "FeatureCollection"}, {"features", json::array()}};
    for (const auto& s : segments) {
        json rings = json::array();
        rings.push_back(ring_json(s.polygon.outer));
        for (const auto& h : s.polygon.holes) rings.push_back(ring_json(h));
        fc["features"].push_back({{"type", "Feature"},
                                  {"properties", {{"id", s.id}, {"source_stand_id", s.source_stand_id}, {"area_m2", s.area_m2}}},
                                  {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
    }
    out << fc.dump(1) << '\n';
}

}  // namespace aba::harvester
