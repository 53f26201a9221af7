#include "aba/pipeline.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/parallel.hpp"

namespace aba::pipeline {

MetricsRun unit_metrics(std::span<const als::Echo> echoes, const als::TerrainRaster* terrain,
                        std::span<const PlotUnit> units, int acquisition_year, const als::MetricsOptions& options) {
    MetricsRun run;
    std::vector<als::Echo> normalized;
    std::span<const als::Echo> heights = echoes;
    if (terrain) {
        auto nr = als::normalize_heights(echoes, *terrain);
        run.dropped_nodata = nr.dropped_nodata;
        run.dropped_outside = nr.dropped_outside;
        normalized = std::move(nr.echoes);
        heights = normalized;
    }
    run.rows.resize(units.size());
    parallel_for(units.size(), [&](std::size_t i) {
        const auto& u = units[i];
        const auto clipped = als::clip(heights, u.geometry);
        run.rows[i] = {u.id, als::compute_metrics(clipped, u.measurement_year, acquisition_year, options)};
    });
    for (const auto& r : run.rows)
        if (!r.metrics) ++run.empty_units;
    return run;
}

std::size_t CellsRun::accepted() const noexcept {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.accepted; }));
}

CellsRun harvested_cells(std::span<const harvester::StemProfile> profiles, const CellsOptions& options) {
    options.allometry.validate();
    const auto jittered = harvester::jitter_positions({profiles.begin(), profiles.end()}, options.jitter_m, options.seed);

    std::vector<std::optional<harvester::ReconstructedTree>> rec(jittered.size());
    std::vector<std::string> errors(jittered.size());
    parallel_for(jittered.size(), [&](std::size_t i) {
        try {
            rec[i] = harvester::reconstruct_tree(jittered[i], options.allometry, options.reconstruction);
        } catch (const Error& e) {
            errors[i] = e.what();
        }
    });

    CellsRun run;
    for (const auto& p : profiles) run.harvest_year = std::max(run.harvest_year, p.harvest_year);
    for (std::size_t i = 0; i < jittered.size(); ++i) {
        if (rec[i])
            run.trees.push_back(std::move(*rec[i]));
        else
            run.failed.push_back({jittered[i].tree_id, errors[i]});
    }
    if (run.trees.size() < 3) throw GeometryError("fewer than 3 reconstructed trees to delineate a harvested site");

    std::vector<geom::Point> pts;
    pts.reserve(run.trees.size());
    for (const auto& t : run.trees) pts.push_back({t.tree.x, t.tree.y});
    const auto polys = harvester::alpha_shape(pts, options.alpha_m);

    std::vector<std::vector<TreeRecord>> members(polys.size());
    for (const auto& t : run.trees)
        for (std::size_t s = 0; s < polys.size(); ++s)
            if (geom::contains(polys[s], geom::Point{t.tree.x, t.tree.y})) {
                members[s].push_back(t.tree);
                break;
            }

    for (std::size_t s = 0; s < polys.size(); ++s) {
        harvester::HarvestedSegment seg;
        seg.id = "seg" + std::to_string(s + 1);
        seg.polygon = polys[s];
        seg.source_stand_id = options.source_stand_id;
        seg.area_m2 = geom::area(seg.polygon);
        auto cells = harvester::tessellate(seg, members[s], options.tessellation);
        for (auto& c : cells) run.cells.push_back(std::move(c));
        run.segments.push_back(std::move(seg));
    }
    return run;
}

std::vector<PlotUnit> cells_as_units(const CellsRun& run) {
    std::vector<PlotUnit> out;
    for (const auto& c : run.cells) {
        if (!c.accepted) continue;
        PlotUnit u;
        u.id = c.id;
        u.geometry = c.square;
        u.area_m2 = geom::area(c.square);
        u.trees = c.trees;
        u.measurement_year = run.harvest_year;
        out.push_back(std::move(u));
    }
    return out;
}

void write_attributes_csv(std::ostream& out, std::span<const UnitAttributes> rows) {
    out << "unit_id";
    for (Attribute a : kAllAttributes) out << ',' << to_string(a);
    out << '\n';
    for (const auto& r : rows) {
        out << r.unit_id;
        for (Attribute a : kAllAttributes) {
            const auto v = get(r.attributes, a);
            out << ',' << (v ? csv::format(*v) : std::string("NA"));
        }
        out << '\n';
    }
}

std::vector<UnitAttributes> read_attributes_csv(std::istream& in) {
    csv::Reader rd(in);
    if (!rd.has_header()) throw ParseError("missing header", rd.line());
    const auto c_id = rd.column("unit_id");
    std::array<std::size_t, 6> cols{};
    for (Attribute a : kAllAttributes) cols[static_cast<std::size_t>(a)] = rd.column(to_string(a));
    std::vector<UnitAttributes> out;
    std::vector<std::string> f;
    while (rd.next(f)) {
        if (f.size() < rd.header().size()) throw ParseError("expected " + std::to_string(rd.header().size()) + " fields", rd.line());
        UnitAttributes u;
        u.unit_id = f[c_id];
        auto req = [&](Attribute a) {
            const auto v = csv::to_optional_double(f[cols[static_cast<std::size_t>(a)]], rd.line());
            if (!v) throw ParseError(std::string(to_string(a)) + " may not be NA", rd.line());
            return *v;
        };
        u.attributes.hl = csv::to_optional_double(f[cols[0]], rd.line());
        u.attributes.v = req(Attribute::V);
        u.attributes.n = req(Attribute::N);
        u.attributes.agb = req(Attribute::AGB);
        u.attributes.g = req(Attribute::G);
        u.attributes.qmd = csv::to_optional_double(f[cols[5]], rd.line());
        out.push_back(std::move(u));
    }
    return out;
}

std::vector<regression::LabeledUnit> join_units(std::span<const als::UnitMetrics> metrics,
                                                std::span<const UnitAttributes> attributes, std::size_t* missing) {
    std::unordered_map<std::string_view, const als::MetricsVector*> by_id;
    for (const auto& m : metrics)
        if (m.metrics) by_id.emplace(m.unit_id, &*m.metrics);
    std::vector<regression::LabeledUnit> out;
    std::size_t miss = 0;
    for (const auto& a : attributes) {
        const auto it = by_id.find(a.unit_id);
        if (it == by_id.end()) {
            ++miss;
            continue;
        }
        out.push_back({a.unit_id, *it->second, a.attributes});
    }
    if (missing) *missing = miss;
    return out;
}

EvalInput evaluation_plots(std::span<const PlotUnit> plots, std::span<const als::UnitMetrics> metrics,
                           std::span<const regression::FittedModel> models, const DomainRuleSet& rules) {
    rules.validate();
    std::unordered_map<std::string_view, const als::MetricsVector*> by_id;
    for (const auto& m : metrics)
        if (m.metrics) by_id.emplace(m.unit_id, &*m.metrics);
    EvalInput in;
    for (const auto& p : plots) {
        const auto it = by_id.find(p.id);
        if (it == by_id.end()) {
            ++in.missing_metrics;
            continue;
        }
        const auto attrs = compute_attributes(p.trees, p.area_m2);
        const auto labels = classify_domain(p, rules);
        const auto dom = dominant_species(p.trees);
        for (const auto& m : models) {
            const auto obs = get(attrs, m.spec.response);
            if (!obs) continue;
            regression::EvalPlot e;
            e.id = p.id;
            e.observed = *obs;
            e.predicted = regression::predict(m, *it->second);
            e.labels = labels;
            e.maturity = p.maturity;
            e.dominant = dom;
            in.plots[m.spec.response].push_back(std::move(e));
        }
    }
    return in;
}

}  // namespace aba::pipeline
