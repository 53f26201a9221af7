#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/forest.hpp"

namespace aba {

TreeTable read_trees(std::istream& in) {
    csv::Reader reader(in);
    if (!reader.has_header()) throw ParseError("tree file has no header", 1);
    const auto c_plot = reader.column("plot_id");
    const auto c_x = reader.column("x");
    const auto c_y = reader.column("y");
    const auto c_sp = reader.column("species");
    const auto c_dbh = reader.column("dbh_cm");
    const auto c_h = reader.column("height_m");
    const auto c_v = reader.column("volume_m3");
    const auto c_agb = reader.column("agb_kg");
    const auto c_src = reader.column("source");
    const std::size_t width = reader.header().size();

    TreeTable table;
    std::unordered_map<std::string, std::size_t> per_plot;
    std::vector<std::string> f;
    while (reader.next(f)) {
        if (f.size() != width)
            throw ParseError("expected " + std::to_string(width) + " columns, got " + std::to_string(f.size()),
                             reader.line());
        PlotTree row;
        row.plot_id = f[c_plot];
        auto& tree = row.tree;
        tree.id = row.plot_id + "#" + std::to_string(++per_plot[row.plot_id]);
        bool known = true;
        tree.species = parse_species(f[c_sp], &known);
        if (!known) ++table.unknown_species;
        tree.x = csv::to_double(f[c_x], reader.line());
        tree.y = csv::to_double(f[c_y], reader.line());
        tree.dbh_cm = csv::to_double(f[c_dbh], reader.line());
        tree.height_m = csv::to_double(f[c_h], reader.line());
        tree.volume_m3 = csv::to_double(f[c_v], reader.line());
        tree.agb_kg = csv::to_double(f[c_agb], reader.line());
        try {
            tree.source = parse_source(f[c_src]);
            validate(tree);
        } catch (const DomainError& e) {
            throw ParseError(e.what(), reader.line());
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

void write_trees(std::ostream& out, std::span<const PlotTree> rows) {
    out << "plot_id,x,y,species,dbh_cm,height_m,volume_m3,agb_kg,source\n";
    for (const auto& r : rows) {
        const auto& t = r.tree;
        out << r.plot_id << ',' << csv::format(t.x) << ',' << csv::format(t.y) << ',' << to_string(t.species) << ','
            << csv::format(t.dbh_cm) << ',' << csv::format(t.height_m) << ',' << csv::format(t.volume_m3) << ','
            << csv::format(t.agb_kg) << ',' << to_string(t.source) << '\n';
    }
}

std::vector<PlotUnit> read_plots(std::istream& in) {
    csv::Reader reader(in);
    if (!reader.has_header()) throw ParseError("plot file has no header", 1);
    const auto c_id = reader.column("plot_id");
    const auto c_cx = reader.column("center_x");
    const auto c_cy = reader.column("center_y");
    const auto c_r = reader.column("radius_m");
    const auto c_a = reader.column("area_m2");
    const auto c_mat = reader.column("maturity");
    const auto c_si = reader.column("site_index");
    const auto c_cp = reader.column("conif_prop");
    const auto c_fd = reader.column("fwd_dist_m");
    const auto c_forest = reader.column("is_forest");
    const auto c_year = reader.column("meas_year");
    const std::size_t width = reader.header().size();

    std::vector<PlotUnit> plots;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f.size() != width)
            throw ParseError("expected " + std::to_string(width) + " columns, got " + std::to_string(f.size()), line);
        PlotUnit p;
        p.id = f[c_id];
        const geom::Point center{csv::to_double(f[c_cx], line), csv::to_double(f[c_cy], line)};
        const auto radius = csv::to_optional_double(f[c_r], line);
        const auto area = csv::to_optional_double(f[c_a], line);
        if (radius && *radius > 0.0) {
            p.geometry = geom::Circle{center, *radius};
            p.area_m2 = area.value_or(M_PI * *radius * *radius);
        } else {
            if (!area || !(*area > 0.0)) throw ParseError("unit needs a radius or a positive area", line);
            p.geometry = geom::square(center, std::sqrt(*area));
            p.area_m2 = *area;
        }
        if (!(p.area_m2 > 0.0)) throw ParseError("unit area must be positive", line);
        if (!f[c_mat].empty()) {
            p.maturity = parse_maturity(f[c_mat]);
            if (!p.maturity) throw ParseError("bad maturity class '" + f[c_mat] + "'", line);
        }
        p.site_index = csv::to_optional_double(f[c_si], line);
        p.coniferous_volume_proportion = csv::to_optional_double(f[c_cp], line);
        p.forwarding_distance_m = csv::to_optional_double(f[c_fd], line);
        const auto& forest = f[c_forest];
        p.is_forest = !(forest == "0" || forest == "false" || forest == "FALSE");
        p.measurement_year = f[c_year].empty() ? 0 : static_cast<int>(csv::to_int(f[c_year], line));
        plots.push_back(std::move(p));
    }
    return plots;
}

void write_plots(std::ostream& out, std::span<const PlotUnit> plots) {
    out << "plot_id,center_x,center_y,radius_m,area_m2,maturity,site_index,conif_prop,fwd_dist_m,is_forest,meas_year\n";
    auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string(); };
    for (const auto& p : plots) {
        geom::Point c;
        std::string radius;
        if (const auto* circle = std::get_if<geom::Circle>(&p.geometry)) {
            c = circle->center;
            radius = csv::format(circle->radius);
        } else {
            const auto b = geom::bounds(p.geometry);
            c = {(b.min_x + b.max_x) / 2.0, (b.min_y + b.max_y) / 2.0};
        }
        out << p.id << ',' << csv::format(c.x) << ',' << csv::format(c.y) << ',' << radius << ','
            << csv::format(p.area_m2) << ',' << (p.maturity ? to_string(*p.maturity) : "") << ',' << opt(p.site_index)
            << ',' << opt(p.coniferous_volume_proportion) << ',' << opt(p.forwarding_distance_m) << ','
            << (p.is_forest ? 1 : 0) << ',' << p.measurement_year << '\n';
    }
}

std::size_t attach_trees(std::vector<PlotUnit>& plots, std::span<const PlotTree> trees) {
    std::unordered_map<std::string, PlotUnit*> by_id;
    for (auto& p : plots) by_id[p.id] = &p;
    std::size_t orphans = 0;
    for (const auto& t : trees) {
        if (auto it = by_id.find(t.plot_id); it != by_id.end())
            it->second->trees.push_back(t.tree);
        else
            ++orphans;
    }
    return orphans;
}

}  // namespace aba
