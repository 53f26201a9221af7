#pragma once

// Synthetic input files for end-to-end runs of the command-line tool.

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "aba/als.hpp"
#include "aba/estimation.hpp"
#include "aba/forest.hpp"
#include "aba/harvester.hpp"
#include "aba/random.hpp"

namespace aba::testing {

namespace fs = std::filesystem;

inline constexpr int kAcquisitionYear = 2014;

inline double canopy_height(double x, double y) { return 16.0 + 7.0 * std::sin(x / 37.0) * std::cos(y / 29.0); }
inline double ground(double x, double y) { return 120.0 + 0.02 * x - 0.01 * y; }

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
}

inline als::TerrainRaster terrain() {
    als::TerrainRaster r;
    r.x_ll = 600;
    r.y_ll = 300;
    r.cell_size = 2;
    r.ncols = 200;
    r.nrows = 150;
    r.elevation.resize(r.ncols * r.nrows);
    for (std::size_t row = 0; row < r.nrows; ++row)
        for (std::size_t col = 0; col < r.ncols; ++col)
            r.elevation[row * r.ncols + col] =
                ground(r.x_ll + (col + 0.5) * r.cell_size, r.y_ll + (r.nrows - row - 0.5) * r.cell_size);
    return r;
}

inline std::vector<als::Echo> echoes(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<als::Echo> out;
    for (double x = 610; x < 990; x += 1.25)
        for (double y = 310; y < 590; y += 1.25) {
            const double px = x + rng.uniform(-0.5, 0.5), py = y + rng.uniform(-0.5, 0.5);
            const double top = canopy_height(px, py);
            const bool hit = rng.uniform() < 0.55 + 0.02 * top;
            const double z = hit ? top * std::sqrt(rng.uniform()) + 0.5 * rng.normal() : 0.1 * rng.uniform();
            const std::uint8_t returns = hit && rng.uniform() < 0.3 ? 2 : 1;
            out.push_back({px, py, ground(px, py) + std::max(0.0, z), 1, returns, std::uint8_t(hit ? 1 : 2)});
            if (returns == 2) out.push_back({px, py, ground(px, py) + 0.2 * rng.uniform(), 2, 2, 2});
        }
    return out;
}

// A harvested site of 256 x 128 m on the 32 m grid, about one stem per 30 m2.
inline std::vector<harvester::StemProfile> harvested_site(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<harvester::StemProfile> out;
    const int n = 256 * 128 / 30;
    for (int i = 0; i < n; ++i) {
        harvester::StemProfile p;
        p.tree_id = "h" + std::to_string(i + 1);
        p.species = rng.uniform() < 0.6 ? Species::Spruce : (rng.uniform() < 0.7 ? Species::Pine : Species::Deciduous);
        p.x = 640 + rng.uniform(0, 256);
        p.y = 352 + rng.uniform(0, 128);
        p.positioning = rng.uniform() < 0.5 ? harvester::Positioning::Machine : harvester::Positioning::Boom;
        p.harvest_year = 2019;
        p.base_height_m = 0.2;
        const double H = std::max(6.0, canopy_height(p.x, p.y) + 1.5 * rng.normal());
        const harvester::Taper t{std::max(8.0, 1.15 * H + 3.0 * rng.normal()), H, rng.uniform(0.7, 1.1)};
        for (double h = p.base_height_m; h < 0.6 * H; h += harvester::kProfileSpacingM)
            p.diameters_mm.push_back(std::round(10.0 * t.diameter_cm(h) + rng.uniform(-1, 1)));
        out.push_back(std::move(p));
    }
    return out;
}

struct FieldData {
    std::vector<PlotUnit> plots;
    std::vector<PlotTree> trees;
};

inline FieldData field_plots(std::uint64_t seed) {
    Rng rng(seed);
    FieldData f;
    for (int i = 0; i < 60; ++i) {
        PlotUnit p;
        p.id = "nfi" + std::to_string(100 + i);
        const double cx = rng.uniform(625, 975), cy = rng.uniform(325, 575);
        p.geometry = geom::Circle{{cx, cy}, std::sqrt(250.0 / M_PI)};
        p.area_m2 = 250.0;
        const double top = canopy_height(cx, cy);
        p.maturity = i == 0 ? Maturity::M1 : top < 12 ? Maturity::M2 : top < 15 ? Maturity::M3 : top < 19 ? Maturity::M4 : Maturity::M5;
        p.site_index = std::round(rng.uniform(6, 20));
        p.coniferous_volume_proportion = std::round(100 * rng.uniform(0.3, 1.0)) / 100;
        p.forwarding_distance_m = std::round(rng.uniform(100, 900));
        p.measurement_year = 2016 + static_cast<int>(rng.below(4));
        const int nt = i == 1 ? 0 : 4 + static_cast<int>(rng.below(17));
        for (int t = 0; t < nt; ++t) {
            TreeRecord tr;
            tr.species = rng.uniform() < 0.6 ? Species::Spruce : (rng.uniform() < 0.7 ? Species::Pine : Species::Deciduous);
            tr.height_m = std::round(10 * std::max(3.0, top + 2.0 * rng.normal())) / 10;
            tr.dbh_cm = std::round(10 * std::max(5.0, 1.15 * tr.height_m + 3.0 * rng.normal())) / 10;
            tr.volume_m3 = std::round(1e4 * 0.00004 * tr.dbh_cm * tr.dbh_cm * tr.height_m) / 1e4;
            tr.agb_kg = std::round(10 * 0.05 * tr.dbh_cm * tr.dbh_cm * std::pow(tr.height_m, 0.9)) / 10;
            tr.x = std::round(10 * (cx + rng.uniform(-6, 6))) / 10;
            tr.y = std::round(10 * (cy + rng.uniform(-6, 6))) / 10;
            f.trees.push_back({p.id, tr});
        }
        f.plots.push_back(std::move(p));
    }
    return f;
}

inline std::vector<estimation::SamplePlot> sample(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<estimation::SamplePlot> s;
    for (int i = 0; i < 80; ++i) {
        estimation::SamplePlot p;
        p.id = "s" + std::to_string(i);
        p.forest_indicator = rng.uniform() < 0.85;
        if (p.forest_indicator) {
            const double y = std::max(0.0, 150 + 60 * rng.normal());
            p.y = std::round(100 * y) / 100;
            p.y_hat = std::round(100 * (0.9 * y + 20 + 15 * rng.normal())) / 100;
        }
        s.push_back(p);
    }
    return s;
}

// Inputs shared by every run, written once into `dir`.
inline void write_inputs(const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "echoes.fem", std::ios::binary);
        const auto e = echoes(1);
        als::write_echoes_binary(out, e);
    }
    {
        std::ofstream out(dir / "terrain.asc");
        als::write_esri_ascii(out, terrain());
    }
    {
        std::ofstream out(dir / "harvester.csv");
        const auto h = harvested_site(2);
        harvester::write_harvester(out, h);
    }
    const auto f = field_plots(3);
    {
        std::ofstream out(dir / "plots.csv");
        write_plots(out, f.plots);
    }
    {
        std::ofstream out(dir / "trees.csv");
        write_trees(out, f.trees);
    }
    {
        std::ofstream out(dir / "sample.csv");
        const auto s = sample(4);
        estimation::write_sample_csv(out, s);
    }
}

// Config files for the whole workflow, with paths relative to `run_dir`
// and inputs one level up.
inline void write_chain_configs(const fs::path& run_dir) {
    using nlohmann::json;
    fs::create_directories(run_dir);
    const json cells{{"seed", 11}, {"cells", {{"harvester", "../harvester.csv"}}}};
    const json cell_metrics{{"seed", 11},
                            {"metrics",
                             {{"echoes", "../echoes.fem"},
                              {"terrain", "../terrain.asc"},
                              {"units", "cells.csv"},
                              {"acquisition_year", kAcquisitionYear},
                              {"output", "cell_metrics.csv"}}}};
    const json plot_metrics{{"seed", 11},
                            {"metrics",
                             {{"echoes", "../echoes.fem"},
                              {"terrain", "../terrain.asc"},
                              {"units", "../plots.csv"},
                              {"acquisition_year", kAcquisitionYear},
                              {"output", "plot_metrics.csv"}}}};
    const json rest{{"seed", 11},
                    // One harvest year: time_diff is constant over the cells.
                    {"fit",
                     {{"metrics", "cell_metrics.csv"},
                      {"attributes", "cell_attributes.csv"},
                      {"models",
                       {{"HL", {{"predictors", {"h95", "hmean"}}}},
                        {"V", {{"predictors", {"hmean", "d2"}}}},
                        {"N", {{"predictors", {"hmean", "d2"}}}},
                        {"AGB", {{"predictors", {"hmean", "d2"}}}},
                        {"G", {{"predictors", {"hmean", "d2"}}}},
                        {"QMD", {{"predictors", {"hmean", "d2", "h95"}}}}}}}},
                    {"evaluate",
                     {{"models", "models.json"}, {"metrics", "plot_metrics.csv"}, {"units", "../plots.csv"}, {"trees", "../trees.csv"}}},
                    {"estimate", {{"sample", "../sample.csv"}, {"attribute", "V"}, {"mu_syn", 151.25}}},
                    {"simulate", {{"replicates", 6}}}};
    spit(run_dir / "cells.json", cells.dump(2));
    spit(run_dir / "cell_metrics.json", cell_metrics.dump(2));
    spit(run_dir / "plot_metrics.json", plot_metrics.dump(2));
    spit(run_dir / "rest.json", rest.dump(2));
}

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

inline std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

// Runs the tool with `args`; stdout and stderr are captured through files
// next to `scratch`.
inline CliResult run_cli(const std::string& exe, const std::vector<std::string>& args, const fs::path& scratch) {
    fs::create_directories(scratch);
    const auto so = scratch / "last.stdout", se = scratch / "last.stderr";
    std::string cmd = quote(exe);
    for (const auto& a : args) cmd += " " + quote(a);
    cmd += " >" + quote(so.string()) + " 2>" + quote(se.string());
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

// The workflow in order. Returns the first failing step, or an empty string.
inline std::string run_chain(const std::string& exe, const fs::path& run_dir, unsigned threads, const fs::path& scratch) {
    const std::string t = std::to_string(threads), out = run_dir.string();
    const std::vector<std::pair<std::string, std::string>> steps{{"cells.json", "cells"},
                                                                  {"cell_metrics.json", "metrics"},
                                                                  {"rest.json", "fit"},
                                                                  {"plot_metrics.json", "metrics"},
                                                                  {"rest.json", "evaluate"},
                                                                  {"rest.json", "estimate"},
                                                                  {"rest.json", "simulate"}};
    for (const auto& [cfg, cmd] : steps) {
        const auto r = run_cli(exe, {"--config", (run_dir / cfg).string(), "--threads", t, "--out", out, cmd}, scratch);
        if (r.code != 0) return cmd + " (" + cfg + ") exited " + std::to_string(r.code) + ": " + r.err;
    }
    return {};
}

}  // namespace aba::testing
