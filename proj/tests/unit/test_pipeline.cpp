#include <doctest.h>

#include <cmath>
#include <sstream>

#include "aba/error.hpp"
#include "aba/parallel.hpp"
#include "aba/pipeline.hpp"
#include "aba/random.hpp"

using namespace aba;
using namespace aba::pipeline;

namespace {

std::vector<harvester::StemProfile> site(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<harvester::StemProfile> out;
    for (std::size_t i = 0; i < n; ++i) {
        harvester::StemProfile p;
        p.tree_id = "t" + std::to_string(i);
        p.x = 640 + rng.uniform(0, 96);
        p.y = 320 + rng.uniform(0, 64);
        p.positioning = harvester::Positioning::Boom;
        p.harvest_year = 2019;
        p.base_height_m = 0.2;
        const harvester::Taper t{rng.uniform(18, 35), rng.uniform(15, 28), rng.uniform(0.7, 1.1)};
        for (double h = p.base_height_m; h < 0.7 * t.height_m; h += harvester::kProfileSpacingM)
            p.diameters_mm.push_back(10 * t.diameter_cm(h));
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

TEST_CASE("metrics per unit from terrain-normalized echoes") {
    als::TerrainRaster r;
    r.ncols = r.nrows = 50;
    r.elevation.assign(2500, 100.0);
    std::vector<als::Echo> e;
    for (int i = 0; i < 50; ++i)
        for (int j = 0; j < 50; ++j) e.push_back({i + 0.5, j + 0.5, 100.0 + (i + j) % 17});
    std::vector<PlotUnit> units(3);
    units[0].id = "a", units[0].geometry = geom::Circle{{10, 10}, 5}, units[0].measurement_year = 2018;
    units[1].id = "b", units[1].geometry = geom::square({30, 30}, 10), units[1].measurement_year = 2016;
    units[2].id = "c", units[2].geometry = geom::Circle{{500, 500}, 5}, units[2].measurement_year = 2018;
    const auto run = unit_metrics(e, &r, units, 2014);
    REQUIRE(run.rows.size() == 3);
    CHECK(run.rows[0].metrics->time_diff == 4);
    CHECK(run.rows[1].metrics->time_diff == 2);
    CHECK_FALSE(run.rows[2].metrics.has_value());
    CHECK(run.empty_units == 1);
    CHECK(run.rows[1].metrics->n_first_echoes == 100);
}

TEST_CASE("harvested cells from a synthetic site") {
    const auto profiles = site(400, 1);
    CellsOptions o;
    o.jitter_m = 0;
    const auto run = harvested_cells(profiles, o);
    CHECK(run.failed.empty());
    CHECK(run.trees.size() == 400);
    REQUIRE(run.segments.size() == 1);
    // A dense 96 x 64 rectangle on the grid: 3 x 2 cells, nearly full.
    CHECK(run.accepted() == 6);
    double covered = 0;
    for (const auto& c : run.cells) covered += c.coverage_fraction * 1024.0;
    CHECK(covered == doctest::Approx(run.segments[0].area_m2).epsilon(1e-6));
    const auto units = cells_as_units(run);
    CHECK(units.size() == 6);
    for (const auto& u : units) {
        CHECK(u.area_m2 == 1024.0);
        CHECK(u.measurement_year == 2019);
    }

    o.tessellation.coverage_threshold = 1.01;
    CHECK(harvested_cells(profiles, o).accepted() == 0);
}

TEST_CASE("cells are thread independent") {
    const auto profiles = site(300, 2);
    CellsOptions o;
    set_max_threads(1);
    const auto a = harvested_cells(profiles, o);
    set_max_threads(4);
    const auto b = harvested_cells(profiles, o);
    set_max_threads(0);
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        CHECK(a.cells[i].coverage_fraction == b.cells[i].coverage_fraction);
        CHECK(a.cells[i].trees.size() == b.cells[i].trees.size());
    }
}

TEST_CASE("attribute CSV and join") {
    std::vector<UnitAttributes> rows(2);
    rows[0].unit_id = "a";
    rows[0].attributes = compute_attributes({}, 1024);
    rows[1].unit_id = "z";
    rows[1].attributes.v = 12.5;
    std::stringstream s;
    write_attributes_csv(s, rows);
    const auto back = read_attributes_csv(s);
    REQUIRE(back.size() == 2);
    CHECK_FALSE(back[0].attributes.hl.has_value());
    CHECK(back[1].attributes.v == 12.5);

    std::vector<als::UnitMetrics> m{{"a", als::MetricsVector{}}, {"b", als::MetricsVector{}}};
    std::size_t missing = 0;
    const auto joined = join_units(m, back, &missing);
    CHECK(joined.size() == 1);
    CHECK(missing == 1);
}
