#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aba/forest.hpp"
#include "aba/geometry.hpp"

namespace aba::harvester {

// Alpha shape of a point set: Delaunay triangles with circumradius below
// alpha, returned as the boundary polygons of their union. Each connected
// component is one polygon; enclosed gaps become holes.
// Throws GeometryError for fewer than three points or a collinear set.
std::vector<geom::Polygon> alpha_shape(std::span<const geom::Point> points, double alpha_m = 25.0);

struct HarvestedSegment {
    std::string id;
    geom::Polygon polygon;
    std::string source_stand_id;
    double area_m2 = 0.0;
};

struct HarvestedGridCell {
    std::string id;
    long long col = 0;  // cell index: x in [col, col + 1) * cell_size
    long long row = 0;
    geom::Polygon square;
    double coverage_fraction = 0.0;
    std::vector<TreeRecord> trees;
    bool accepted = false;

    geom::Point center() const noexcept;
};

struct TessellationOptions {
    double cell_size_m = 32.0;
    double coverage_threshold = 0.80;
};

// Cells of a grid anchored at multiples of the cell size that intersect
// the segment with positive area. Trees go to the cell whose half-open
// square [x0, x1) x [y0, y1) holds them.
std::vector<HarvestedGridCell> tessellate(const HarvestedSegment& segment, std::span<const TreeRecord> trees,
                                          const TessellationOptions& options = {});

// FeatureCollection with one Polygon feature per segment.
void write_segments_geojson(std::ostream& out, std::span<const HarvestedSegment> segments);

}  // namespace aba::harvester
