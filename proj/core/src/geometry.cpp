#include "aba/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "aba/error.hpp"

namespace aba::geom {

double orient(const Point& a, const Point& b, const Point& c) noexcept {
    const long double acx = static_cast<long double>(a.x) - c.x;
    const long double bcx = static_cast<long double>(b.x) - c.x;
    const long double acy = static_cast<long double>(a.y) - c.y;
    const long double bcy = static_cast<long double>(b.y) - c.y;
    return static_cast<double>(acx * bcy - acy * bcx);
}

double incircle(const Point& a, const Point& b, const Point& c, const Point& d) noexcept {
    const long double adx = static_cast<long double>(a.x) - d.x;
    const long double ady = static_cast<long double>(a.y) - d.y;
    const long double bdx = static_cast<long double>(b.x) - d.x;
    const long double bdy = static_cast<long double>(b.y) - d.y;
    const long double cdx = static_cast<long double>(c.x) - d.x;
    const long double cdy = static_cast<long double>(c.y) - d.y;
    const long double ad = adx * adx + ady * ady;
    const long double bd = bdx * bdx + bdy * bdy;
    const long double cd = cdx * cdx + cdy * cdy;
    return static_cast<double>(adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) +
                               ad * (bdx * cdy - bdy * cdx));
}

double circumradius(const Point& a, const Point& b, const Point& c) noexcept {
    const double ab = std::hypot(a.x - b.x, a.y - b.y);
    const double bc = std::hypot(b.x - c.x, b.y - c.y);
    const double ca = std::hypot(c.x - a.x, c.y - a.y);
    const double twice_area = std::abs(orient(a, b, c));
    if (twice_area == 0.0) return std::numeric_limits<double>::infinity();
    return ab * bc * ca / (2.0 * twice_area);
}

double signed_area(std::span<const Point> ring) noexcept {
    if (ring.size() < 3) return 0.0;
    long double s = 0.0L;
    const Point& o = ring.front();
    for (std::size_t i = 1; i + 1 < ring.size(); ++i)
        s += static_cast<long double>(orient(o, ring[i], ring[i + 1]));
    return static_cast<double>(s / 2.0L);
}

double area(const Polygon& poly) noexcept {
    double a = std::abs(signed_area(poly.outer));
    for (const auto& h : poly.holes) a -= std::abs(signed_area(h));
    return a;
}

double area(const Shape& shape) noexcept {
    if (const auto* c = std::get_if<Circle>(&shape)) return M_PI * c->radius * c->radius;
    return area(std::get<Polygon>(shape));
}

double area(std::span<const Polygon> polys) noexcept {
    double a = 0.0;
    for (const auto& p : polys) a += area(p);
    return a;
}

Box bounds(const Shape& shape) noexcept {
    if (const auto* c = std::get_if<Circle>(&shape))
        return {c->center.x - c->radius, c->center.y - c->radius, c->center.x + c->radius,
                c->center.y + c->radius};
    const auto& ring = std::get<Polygon>(shape).outer;
    Box b{INFINITY, INFINITY, -INFINITY, -INFINITY};
    for (const auto& p : ring) {
        b.min_x = std::min(b.min_x, p.x);
        b.min_y = std::min(b.min_y, p.y);
        b.max_x = std::max(b.max_x, p.x);
        b.max_y = std::max(b.max_y, p.y);
    }
    return b;
}

namespace {

bool on_segment(const Point& a, const Point& b, const Point& p) noexcept {
    if (orient(a, b, p) != 0.0) return false;
    return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
           p.y <= std::max(a.y, b.y);
}

// Strict even-odd crossing test; boundary points are handled by the caller.
bool crosses_odd(const Ring& ring, const Point& p) noexcept {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

bool on_boundary(const Ring& ring, const Point& p) noexcept {
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++)
        if (on_segment(ring[j], ring[i], p)) return true;
    return false;
}

}  // namespace

bool contains(const Ring& ring, const Point& p) noexcept {
    if (ring.size() < 3) return false;
    return on_boundary(ring, p) || crosses_odd(ring, p);
}

bool contains(const Polygon& poly, const Point& p) noexcept {
    if (!contains(poly.outer, p)) return false;
    for (const auto& h : poly.holes)
        if (crosses_odd(h, p) && !on_boundary(h, p)) return false;
    return true;
}

bool contains(const Shape& shape, const Point& p) noexcept {
    if (const auto* c = std::get_if<Circle>(&shape)) {
        const double dx = p.x - c->center.x;
        const double dy = p.y - c->center.y;
        return dx * dx + dy * dy <= c->radius * c->radius;
    }
    return contains(std::get<Polygon>(shape), p);
}

Polygon rectangle(double x0, double y0, double x1, double y1) {
    return Polygon{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}, {}};
}

Polygon square(Point center, double side) {
    const double h = side / 2.0;
    return rectangle(center.x - h, center.y - h, center.x + h, center.y + h);
}

Ring clip_to_box(std::span<const Point> ring, const Box& box) {
    Ring out(ring.begin(), ring.end());
    auto clip_edge = [&](auto inside, auto intersect) {
        if (out.empty()) return;
        Ring in = std::move(out);
        out.clear();
        Point prev = in.back();
        bool prev_in = inside(prev);
        for (const Point& cur : in) {
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
    };
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
    clip_edge([&](const Point& p) { return p.x >= box.min_x; }, at_x(box.min_x));
    clip_edge([&](const Point& p) { return p.x <= box.max_x; }, at_x(box.max_x));
    clip_edge([&](const Point& p) { return p.y >= box.min_y; }, at_y(box.min_y));
    clip_edge([&](const Point& p) { return p.y <= box.max_y; }, at_y(box.max_y));
    return out;
}

double intersection_area(const Polygon& poly, const Box& box) {
    double a = std::abs(signed_area(clip_to_box(poly.outer, box)));
    for (const auto& h : poly.holes) a -= std::abs(signed_area(clip_to_box(h, box)));
    return std::max(0.0, a);
}

Ring convex_hull(std::vector<Point> pts) {
    std::sort(pts.begin(), pts.end(),
              [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;
    Ring hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && orient(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
        while (k >= lo && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

// ---------------------------------------------------------------------------
// Delaunay

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct Tri {
    std::array<std::size_t, 3> v;
    std::array<std::size_t, 3> n;  // n[i] is the neighbour across the edge opposite v[i]
};

class Triangulator {
public:
    explicit Triangulator(std::span<const Point> pts) : pts_(pts) {}

    std::vector<Triangle> run(std::vector<std::size_t> order) {
        // order holds distinct point indices, lexicographically sorted
        std::size_t k = 2;
        while (k < order.size() && orient(pts_[order[0]], pts_[order[1]], pts_[order[k]]) == 0.0) ++k;
        if (k == order.size()) throw GeometryError("delaunay: all points are collinear");

        next_.assign(pts_.size(), kNone);
        prev_.assign(pts_.size(), kNone);
        hull_tri_.assign(pts_.size(), kNone);
        seed_fan(order, k);

        std::size_t last = order[k];
        for (std::size_t i = k + 1; i < order.size(); ++i) {
            insert(order[i], last);
            last = order[i];
        }

        std::vector<Triangle> out;
        out.reserve(tris_.size());
        for (const auto& t : tris_) out.push_back(Triangle{t.v});
        return out;
    }

private:
    const Point& P(std::size_t i) const { return pts_[i]; }

    void seed_fan(const std::vector<std::size_t>& order, std::size_t k) {
        const std::size_t apex = order[k];
        const bool left = orient(P(order[0]), P(order[1]), P(apex)) > 0;
        for (std::size_t i = 0; i + 1 < k; ++i) {
            Tri t;
            if (left)
                t.v = {order[i], order[i + 1], apex};
            else
                t.v = {order[i + 1], order[i], apex};
            t.n = {kNone, kNone, kNone};
            tris_.push_back(t);
        }
        // Adjacency within the fan via directed-edge lookup.
        std::unordered_map<std::uint64_t, std::pair<std::size_t, int>> edges;
        auto key = [](std::size_t a, std::size_t b) { return (std::uint64_t(a) << 32) | std::uint64_t(b); };
        for (std::size_t t = 0; t < tris_.size(); ++t)
            for (int e = 0; e < 3; ++e)
                edges[key(tris_[t].v[(e + 1) % 3], tris_[t].v[(e + 2) % 3])] = {t, e};
        for (std::size_t t = 0; t < tris_.size(); ++t)
            for (int e = 0; e < 3; ++e) {
                const std::size_t a = tris_[t].v[(e + 1) % 3], b = tris_[t].v[(e + 2) % 3];
                if (auto it = edges.find(key(b, a)); it != edges.end())
                    tris_[t].n[e] = it->second.first;
                else {
                    next_[a] = b;
                    prev_[b] = a;
                    hull_tri_[a] = t;
                }
            }
        std::vector<std::size_t> stack(tris_.size());
        std::iota(stack.begin(), stack.end(), 0);
        for (std::size_t t : stack)
            for (int e = 0; e < 3; ++e) legalize(t, e);
    }

    int index_of(std::size_t t, std::size_t v) const {
        for (int i = 0; i < 3; ++i)
            if (tris_[t].v[i] == v) return i;
        return -1;
    }

    void relink(std::size_t t, std::size_t from, std::size_t to) {
        if (t == kNone) return;
        for (auto& n : tris_[t].n)
            if (n == from) {
                n = to;
                return;
            }
    }

    void note_hull_edges(std::size_t t) {
        for (int e = 0; e < 3; ++e)
            if (tris_[t].n[e] == kNone) hull_tri_[tris_[t].v[(e + 1) % 3]] = t;
    }

    // Flip edge e (opposite vertex v[e]) of triangle t while it is illegal.
    void legalize(std::size_t t0, int e0) {
        std::vector<std::pair<std::size_t, std::size_t>> stack;  // (triangle, apex vertex)
        stack.emplace_back(t0, tris_[t0].v[e0]);
        std::size_t budget = 64 * (tris_.size() + 16);
        while (!stack.empty() && budget-- > 0) {
            auto [t, pv] = stack.back();
            stack.pop_back();
            const int i = index_of(t, pv);
            if (i < 0) continue;
            const std::size_t u = tris_[t].n[i];
            if (u == kNone) continue;
            const std::size_t a = tris_[t].v[(i + 1) % 3];
            const std::size_t b = tris_[t].v[(i + 2) % 3];
            const int jb = index_of(u, b);
            // u holds the edge as b -> a, so its apex follows a.
            const int q_idx = (jb + 2) % 3;
            const std::size_t q = tris_[u].v[q_idx];
            if (incircle(P(pv), P(a), P(b), P(q)) <= 0.0) continue;
            // Quad pv, a, q, b is counter-clockwise.
            const std::size_t n_t_a = tris_[t].n[(i + 1) % 3];  // edge b-pv
            const std::size_t n_t_b = tris_[t].n[(i + 2) % 3];  // edge pv-a
            const std::size_t n_u_b = tris_[u].n[jb];            // edge a-q
            const std::size_t n_u_a = tris_[u].n[(jb + 1) % 3];  // edge q-b
            tris_[t].v = {pv, a, q};
            tris_[t].n = {n_u_b, u, n_t_b};
            tris_[u].v = {pv, q, b};
            tris_[u].n = {n_u_a, n_t_a, t};
            relink(n_u_b, u, t);
            relink(n_t_a, t, u);
            note_hull_edges(t);
            note_hull_edges(u);
            stack.emplace_back(t, pv);
            stack.emplace_back(u, pv);
        }
    }

    void insert(std::size_t p, std::size_t start) {
        // `start` is the previous lexicographic maximum and lies on the hull.
        std::size_t first = start;
        while (true) {
            const std::size_t w = prev_[first];
            if (orient(P(w), P(first), P(p)) < 0) {
                first = w;
                if (first == start) break;
            } else
                break;
        }
        std::size_t last = first;
        std::vector<std::size_t> chain{first};
        while (orient(P(last), P(next_[last]), P(p)) < 0) {
            last = next_[last];
            chain.push_back(last);
            if (last == first) throw GeometryError("delaunay: hull walk failed");
        }
        if (chain.size() < 2) throw GeometryError("delaunay: inserted point sees no hull edge");

        std::vector<std::size_t> created;
        created.reserve(chain.size() - 1);
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const std::size_t a = chain[i], b = chain[i + 1];
            const std::size_t adj = hull_tri_[a];
            Tri t;
            t.v = {a, p, b};
            t.n = {kNone, adj, kNone};  // opp a: p-b, opp p: b-a, opp b: a-p
            const std::size_t id = tris_.size();
            tris_.push_back(t);
            const int e = [&] {
                for (int k = 0; k < 3; ++k)
                    if (tris_[adj].v[(k + 1) % 3] == a && tris_[adj].v[(k + 2) % 3] == b) return k;
                return -1;
            }();
            if (e < 0) throw GeometryError("delaunay: hull bookkeeping inconsistent");
            tris_[adj].n[e] = id;
            created.push_back(id);
        }
        for (std::size_t i = 0; i < created.size(); ++i) {
            if (i + 1 < created.size()) tris_[created[i]].n[0] = created[i + 1];
            if (i > 0) tris_[created[i]].n[2] = created[i - 1];
        }
        next_[chain.front()] = p;
        prev_[p] = chain.front();
        next_[p] = chain.back();
        prev_[chain.back()] = p;
        for (std::size_t i = 1; i + 1 < chain.size(); ++i) {
            next_[chain[i]] = kNone;
            prev_[chain[i]] = kNone;
            hull_tri_[chain[i]] = kNone;
        }
        hull_tri_[chain.front()] = created.front();
        hull_tri_[p] = created.back();
        for (std::size_t id : created) legalize(id, 1);
    }

    std::span<const Point> pts_;
    std::vector<Tri> tris_;
    std::vector<std::size_t> next_;
    std::vector<std::size_t> prev_;
    std::vector<std::size_t> hull_tri_;
};

}  // namespace

std::vector<Triangle> delaunay(std::span<const Point> pts) {
    std::vector<std::size_t> order(pts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return pts[a].x < pts[b].x || (pts[a].x == pts[b].x && pts[a].y < pts[b].y);
    });
    order.erase(std::unique(order.begin(), order.end(),
                            [&](std::size_t a, std::size_t b) { return pts[a] == pts[b]; }),
                order.end());
    if (order.size() < 3) throw GeometryError("delaunay: need at least 3 distinct points");
    return Triangulator(pts).run(std::move(order));
}

}  // namespace aba::geom
