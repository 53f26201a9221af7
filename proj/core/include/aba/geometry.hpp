#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <variant>
#include <vector>

namespace aba::geom {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

// Closed ring without the repeated closing vertex.
using Ring = std::vector<Point>;

// Outer ring counter-clockwise, holes clockwise.
struct Polygon {
    Ring outer;
    std::vector<Ring> holes;
};

struct Circle {
    Point center;
    double radius = 0.0;
};

using Shape = std::variant<Circle, Polygon>;

struct Box {
    double min_x, min_y, max_x, max_y;
};

// > 0 when c lies left of the directed line a->b.
double orient(const Point& a, const Point& b, const Point& c) noexcept;

// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
double incircle(const Point& a, const Point& b, const Point& c, const Point& d) noexcept;

double circumradius(const Point& a, const Point& b, const Point& c) noexcept;

double signed_area(std::span<const Point> ring) noexcept;
double area(const Polygon& poly) noexcept;
double area(const Shape& shape) noexcept;
double area(std::span<const Polygon> polys) noexcept;

Box bounds(const Shape& shape) noexcept;

// Boundary-inclusive point membership.
bool contains(const Ring& ring, const Point& p) noexcept;
bool contains(const Polygon& poly, const Point& p) noexcept;
bool contains(const Shape& shape, const Point& p) noexcept;

Polygon rectangle(double x0, double y0, double x1, double y1);
Polygon square(Point center, double side);

// Sutherland-Hodgman clip of an arbitrary ring against an axis-aligned
// box. The signed area of the result equals the signed area of the
// intersection even for concave input.
Ring clip_to_box(std::span<const Point> ring, const Box& box);

// Area of poly ∩ box, holes subtracted.
double intersection_area(const Polygon& poly, const Box& box);

// Andrew's monotone chain; CCW, collinear points dropped.
Ring convex_hull(std::vector<Point> pts);

struct Triangle {
    std::array<std::size_t, 3> v;  // CCW vertex indices into the input
};

// Delaunay triangulation by lexicographic sweep insertion with Lawson
// flips. Duplicate points are collapsed onto their first occurrence.
// Throws GeometryError for fewer than three distinct or all-collinear points.
std::vector<Triangle> delaunay(std::span<const Point> pts);

}  // namespace aba::geom
