// aba: command-line front end for the area-based inventory workflow.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "aba/als.hpp"
#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/estimation.hpp"
#include "aba/forest.hpp"
#include "aba/harvester.hpp"
#include "aba/parallel.hpp"
#include "aba/pipeline.hpp"
#include "aba/regression.hpp"
#include "aba/segmentation.hpp"
#include "aba/simulation.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitProcessing = 3;

struct ValidationError : aba::Error {
    explicit ValidationError(const std::string& w) : Error("validation", w) {}
};

enum class KeyKind { Path, OptionalPath, Number, Integer, Bool, String, Object };

struct Key {
    std::string name;
    KeyKind kind;
    json default_value;
    std::string help;
    bool required = false;
};

struct Command {
    std::string name;
    std::string help;
    std::vector<Key> keys;
    std::map<std::string, std::string> flag_values;  // raw override strings
};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out = ".";
};

void warn(const std::string& what, std::size_t count) {
    std::cerr << json{{"warning", what}, {"count", count}}.dump() << '\n';
}

json rule_json(const aba::DomainRule& r) {
    auto b = [](double v) { return std::isinf(v) ? json(nullptr) : json(v); };
    return {{"site_index_min", b(r.site_index_min)}, {"site_index_max", b(r.site_index_max)},
            {"conif_min", b(r.conif_min)},           {"conif_max", b(r.conif_max)},
            {"fwd_dist_min", b(r.fwd_dist_min)},     {"fwd_dist_max", b(r.fwd_dist_max)}};
}

aba::DomainRule rule_from(const json& j, aba::DomainRule r) {
    auto rd = [&](const char* k, double& v, double unbounded) {
        if (!j.contains(k)) return;
        v = j[k].is_null() ? unbounded : j[k].get<double>();
    };
    rd("site_index_min", r.site_index_min, -INFINITY);
    rd("site_index_max", r.site_index_max, INFINITY);
    rd("conif_min", r.conif_min, -INFINITY);
    rd("conif_max", r.conif_max, INFINITY);
    rd("fwd_dist_min", r.fwd_dist_min, -INFINITY);
    rd("fwd_dist_max", r.fwd_dist_max, INFINITY);
    return r;
}

json allometry_json(const aba::harvester::AllometryConfig& a) {
    json j = json::object();
    for (const auto& [s, p] : a.species)
        j[std::string(aba::to_string(s))] = {{"taper_exponent_prior", p.taper_exponent_prior},
                                             {"stump_height_m", p.stump_height_m},
                                             {"biomass_a", p.biomass_a},
                                             {"biomass_b", p.biomass_b},
                                             {"biomass_c", p.biomass_c}};
    return j;
}

aba::harvester::AllometryConfig allometry_from(const json& j) {
    auto a = aba::harvester::AllometryConfig::defaults();
    for (const auto& [k, v] : j.items()) {
        bool known = false;
        const auto s = aba::parse_species(k, &known);
        if (!known) throw ValidationError("unknown species '" + k + "' in allometry");
        auto& p = a.species[s];
        p.taper_exponent_prior = v.value("taper_exponent_prior", p.taper_exponent_prior);
        p.stump_height_m = v.value("stump_height_m", p.stump_height_m);
        p.biomass_a = v.value("biomass_a", p.biomass_a);
        p.biomass_b = v.value("biomass_b", p.biomass_b);
        p.biomass_c = v.value("biomass_c", p.biomass_c);
    }
    a.validate();
    return a;
}

json model_specs_json() {
    json j = json::object();
    for (auto a : aba::kAllAttributes) {
        const auto s = aba::regression::default_spec(a);
        j[std::string(aba::to_string(a))] = {{"predictors", s.predictors}, {"expected_time_diff_sign", "positive"}};
    }
    return j;
}

std::vector<Command> command_table() {
    using K = KeyKind;
    const aba::DomainRuleSet rules;
    return {
        {"metrics",
         "Laser metrics per unit: normalize, clip, compute.",
         {{"echoes", K::Path, "", "laser echoes, CSV or FEM1 binary", true},
          {"terrain", K::OptionalPath, "", "terrain model as ESRI ASCII grid; empty when heights are normalized"},
          {"units", K::Path, "", "unit descriptor CSV (plots or grid cells)", true},
          {"acquisition_year", K::Integer, 0, "laser acquisition year", true},
          {"d2_threshold_m", K::Number, 2.0, "height threshold of the d2 density metric, m"},
          {"output", K::String, "metrics.csv", "metrics CSV file name"}}},
        {"cells",
         "Harvested grid cells: parse, jitter, reconstruct, delineate, tessellate.",
         {{"harvester", K::Path, "", "harvester stem-profile CSV", true},
          {"alpha_m", K::Number, 25.0, "alpha-shape radius, m"},
          {"cell_size_m", K::Number, 32.0, "grid cell side, m (1024 m2 cells)"},
          {"coverage_threshold", K::Number, 0.80, "minimum share of a cell inside the harvested segment"},
          {"jitter_m", K::Number, 8.0, "uniform position jitter for machine-positioned stems, m"},
          {"max_base_height_m", K::Number, 2.0, "highest accepted first-diameter height, m"},
          {"smooth", K::Bool, true, "3-point median smoothing of diameter profiles"},
          {"source_stand_id", K::String, "", "stand id recorded on every segment"},
          {"allometry", K::Object, allometry_json(aba::harvester::AllometryConfig::defaults()),
           "per-species taper prior, stump height and biomass coefficients"}}},
        {"fit",
         "Fit OLS attribute models on labelled units.",
         {{"metrics", K::Path, "", "metrics CSV of the training units", true},
          {"attributes", K::Path, "", "attribute CSV of the training units", true},
          {"models", K::Object, model_specs_json(), "model specs per response"},
          {"output", K::String, "models.json", "model JSON file name"}}},
        {"evaluate",
         "Evaluate models on field plots by dataset, maturity and species.",
         {{"models", K::Path, "", "model JSON from fit", true},
          {"metrics", K::Path, "", "metrics CSV of the field plots", true},
          {"units", K::Path, "", "plot descriptor CSV", true},
          {"trees", K::Path, "", "field tree CSV", true},
          {"min_n", K::Integer, 10, "strata below this size are flagged low_n"},
          {"by_species", K::Bool, true, "add dominant-species strata"},
          {"prod", K::Object, rule_json(rules.productive), "PROD thresholds (open intervals, null = unbounded)"},
          {"uprod", K::Object, rule_json(rules.unproductive), "UPROD thresholds (open intervals, null = unbounded)"}}},
        {"estimate",
         "Direct and model-assisted estimates from a sample CSV.",
         {{"sample", K::Path, "", "sample CSV plot_id,y,y_hat,forest_indicator,hl_defined", true},
          {"attribute", K::String, "V", "attribute name; HL restricts to plots with measured trees"},
          {"mu_syn", K::Number, nullptr, "synthetic estimate; omit for the direct estimate only"},
          {"output", K::String, "", "output file name (default estimate_<attribute>.json)"}}},
        {"simulate",
         "Monte Carlo replicates of the estimators on a synthetic population.",
         {{"scenario", K::OptionalPath, "", "scenario JSON; empty uses the built-in default scenario"},
          {"replicates", K::Integer, nullptr, "replicate count override"},
          {"first_replicate", K::Integer, 0, "id of the first replicate"}}},
    };
}

// --------------------------------------------------------------------------
// Config resolution

json parse_flag(const Key& k, const std::string& raw) {
    try {
        switch (k.kind) {
            case KeyKind::Number: return std::stod(raw);
            case KeyKind::Integer: return std::stoll(raw);
            case KeyKind::Bool:
                if (raw == "true" || raw == "1") return true;
                if (raw == "false" || raw == "0") return false;
                throw ValidationError("--" + k.name + " expects true or false");
            case KeyKind::Object: return json::parse(raw);
            default: return raw;
        }
    } catch (const std::invalid_argument&) {
        throw ValidationError("--" + k.name + ": cannot parse '" + raw + "'");
    } catch (const json::exception&) {
        throw ValidationError("--" + k.name + ": invalid JSON");
    }
}

struct Resolved {
    json config;
    fs::path base;  // relative paths resolve here
    fs::path out;
    std::uint64_t seed = 1;
    bool seed_given = false;  // by --seed or the config file

    fs::path path(const std::string& key) const {
        const fs::path p = config.at(key).get<std::string>();
        return p.is_absolute() ? p : base / p;
    }
};

Resolved resolve(const Command& cmd, const Globals& g) {
    Resolved r;
    json file = json::object();
    r.base = fs::current_path();
    if (!g.config.empty()) {
        std::ifstream in(g.config);
        if (!in) throw ValidationError("cannot open config '" + g.config + "'");
        try {
            in >> file;
        } catch (const json::exception& e) {
            throw ValidationError(std::string("config is not valid JSON: ") + e.what());
        }
        if (!file.is_object()) throw ValidationError("config must be a JSON object");
        if (file.contains(cmd.name) && file[cmd.name].is_object()) {
            json section = file[cmd.name];
            if (file.contains("seed")) section.emplace("seed", file["seed"]);
            file = section;
        }
        r.base = fs::absolute(g.config).parent_path();
    }

    json cfg = json::object();
    std::set<std::string> known{"seed"};
    for (const auto& k : cmd.keys) {
        known.insert(k.name);
        cfg[k.name] = k.default_value;
    }
    for (const auto& [k, v] : file.items()) {
        if (!known.count(k)) throw ValidationError("unknown config key '" + k + "' for " + cmd.name);
        if (k != "seed") cfg[k] = v;
    }
    for (const auto& k : cmd.keys)
        if (auto it = cmd.flag_values.find(k.name); it != cmd.flag_values.end()) cfg[k.name] = parse_flag(k, it->second);

    r.seed = 1;
    if (file.contains("seed")) r.seed = file["seed"].get<std::uint64_t>();
    if (g.seed) r.seed = *g.seed;
    r.seed_given = file.contains("seed") || g.seed.has_value();
    cfg["seed"] = r.seed;

    for (const auto& k : cmd.keys) {
        const auto& v = cfg[k.name];
        const bool empty = v.is_null() || (v.is_string() && v.get<std::string>().empty());
        if (k.required && (empty || (k.kind == KeyKind::Integer && v.is_number() && v.get<long long>() == 0)))
            throw ValidationError("missing required config key '" + k.name + "'");
        if ((k.kind == KeyKind::Path || k.kind == KeyKind::OptionalPath) && !empty) {
            if (!v.is_string()) throw ValidationError("'" + k.name + "' must be a path string");
        }
    }
    r.config = cfg;
    for (const auto& k : cmd.keys)
        if ((k.kind == KeyKind::Path || k.kind == KeyKind::OptionalPath) && cfg[k.name].is_string() &&
            !cfg[k.name].get<std::string>().empty() && !fs::exists(r.path(k.name)))
            throw ValidationError("input '" + k.name + "' not found: " + r.path(k.name).string());

    r.out = g.out;
    std::error_code ec;
    fs::create_directories(r.out, ec);
    if (ec) throw ValidationError("cannot create output directory '" + r.out.string() + "'");
    return r;
}

std::ifstream open_in(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + p.string() + "'");
    return in;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw aba::Error("io", "cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw aba::Error("io", "write failed for '" + p.string() + "'");
}

void write_resolved(const Resolved& r, const std::string& cmd) {
    write_file(r.out / (cmd + ".config.json"), r.config.dump(2) + "\n");
}

// --------------------------------------------------------------------------
// Commands

json cmd_metrics(const Resolved& r) {
    const auto& c = r.config;
    const auto echoes = aba::als::read_echoes(r.path("echoes").string());
    std::optional<aba::als::TerrainRaster> terrain;
    if (!c["terrain"].get<std::string>().empty()) {
        auto in = open_in(r.path("terrain"));
        terrain = aba::als::read_esri_ascii(in);
    }
    auto uin = open_in(r.path("units"));
    const auto units = aba::read_plots(uin);
    aba::als::MetricsOptions opts;
    opts.d2_threshold_m = c["d2_threshold_m"].get<double>();
    const auto run = aba::pipeline::unit_metrics(echoes, terrain ? &*terrain : nullptr, units,
                                                 c["acquisition_year"].get<int>(), opts);
    std::ostringstream out;
    aba::als::write_metrics_csv(out, run.rows);
    write_file(r.out / c["output"].get<std::string>(), out.str());
    if (run.empty_units) warn("units without first echoes", run.empty_units);
    if (run.dropped_nodata) warn("echoes dropped over nodata terrain", run.dropped_nodata);
    if (run.dropped_outside) warn("echoes dropped outside the terrain", run.dropped_outside);
    return {{"units", units.size()}, {"empty_units", run.empty_units}};
}

json cmd_cells(const Resolved& r) {
    const auto& c = r.config;
    const auto parsed = aba::harvester::parse_harvester_file(r.path("harvester").string());
    aba::pipeline::CellsOptions o;
    o.alpha_m = c["alpha_m"].get<double>();
    o.jitter_m = c["jitter_m"].get<double>();
    o.seed = r.seed;
    o.source_stand_id = c["source_stand_id"].get<std::string>();
    o.tessellation.cell_size_m = c["cell_size_m"].get<double>();
    o.tessellation.coverage_threshold = c["coverage_threshold"].get<double>();
    o.reconstruction.max_base_height_m = c["max_base_height_m"].get<double>();
    o.reconstruction.smooth = c["smooth"].get<bool>();
    o.allometry = allometry_from(c["allometry"]);
    if (!(o.alpha_m > 0.0) || !(o.tessellation.cell_size_m > 0.0)) throw ValidationError("alpha and cell size must be positive");
    const auto run = aba::pipeline::harvested_cells(parsed.profiles, o);

    std::ostringstream seg;
    aba::harvester::write_segments_geojson(seg, run.segments);
    write_file(r.out / "segments.geojson", seg.str());

    const auto units = aba::pipeline::cells_as_units(run);
    std::ostringstream cells, trees, attrs, cov, rej;
    aba::write_plots(cells, units);
    std::vector<aba::PlotTree> rows;
    std::vector<aba::pipeline::UnitAttributes> av;
    for (const auto& u : units) {
        for (const auto& t : u.trees) rows.push_back({u.id, t});
        av.push_back({u.id, aba::compute_attributes(u.trees, u.area_m2)});
    }
    aba::write_trees(trees, rows);
    aba::pipeline::write_attributes_csv(attrs, av);
    cov << "cell_id,segment_id,col,row,coverage_fraction,n_trees,accepted\n";
    for (const auto& cell : run.cells)
        cov << cell.id << ',' << cell.id.substr(0, cell.id.find(':')) << ',' << cell.col << ',' << cell.row << ','
            << aba::csv::format(cell.coverage_fraction) << ',' << cell.trees.size() << ',' << (cell.accepted ? 1 : 0)
            << '\n';
    rej << "kind,where,message\n";
    for (const auto& e : parsed.rejected) rej << "row," << e.line << ',' << e.message << '\n';
    for (const auto& f : run.failed) rej << "tree," << f.tree_id << ',' << f.message << '\n';
    write_file(r.out / "cells.csv", cells.str());
    write_file(r.out / "cell_trees.csv", trees.str());
    write_file(r.out / "cell_attributes.csv", attrs.str());
    write_file(r.out / "cell_coverage.csv", cov.str());
    write_file(r.out / "rejected.csv", rej.str());

    const std::size_t accepted = run.accepted();
    if (accepted == 0) warn("no grid cell reached the coverage threshold", 0);
    if (!parsed.rejected.empty()) warn("harvester rows rejected", parsed.rejected.size());
    if (!run.failed.empty()) warn("stems not reconstructed", run.failed.size());
    return {{"trees", run.trees.size()},       {"segments", run.segments.size()}, {"cells", run.cells.size()},
            {"accepted_cells", accepted},       {"rejected_cells", run.cells.size() - accepted},
            {"rejected_rows", parsed.rejected.size()}, {"failed_trees", run.failed.size()}};
}

std::vector<aba::als::UnitMetrics> load_metrics(const Resolved& r) {
    auto in = open_in(r.path("metrics"));
    return aba::als::read_metrics_csv(in);
}

json cmd_fit(const Resolved& r) {
    const auto& c = r.config;
    const auto metrics = load_metrics(r);
    auto ain = open_in(r.path("attributes"));
    const auto attrs = aba::pipeline::read_attributes_csv(ain);
    std::size_t missing = 0;
    const auto units = aba::pipeline::join_units(metrics, attrs, &missing);
    if (missing) warn("training units without metrics", missing);

    std::vector<aba::regression::FittedModel> models;
    for (const auto& [name, spec_json] : c["models"].items()) {
        const auto a = aba::parse_attribute(name);
        if (!a) throw ValidationError("unknown response '" + name + "'");
        aba::regression::ModelSpec spec;
        spec.response = *a;
        spec.predictors = spec_json.at("predictors").get<std::vector<std::string>>();
        spec.expected_time_diff_sign = spec_json.value("expected_time_diff_sign", std::string("positive")) == "negative"
                                           ? aba::regression::Sign::Negative
                                           : aba::regression::Sign::Positive;
        try {
            spec.validate();
        } catch (const aba::ConfigError& e) {
            throw ValidationError(e.what());
        }
        models.push_back(aba::regression::ols_fit(units, spec));
    }
    std::ostringstream out;
    aba::regression::write_models(out, models);
    write_file(r.out / c["output"].get<std::string>(), out.str());
    json dropped = json::array();
    for (const auto& m : models)
        if (m.time_diff_dropped) dropped.push_back(aba::to_string(m.spec.response));
    return {{"units", units.size()}, {"models", models.size()}, {"time_diff_dropped", dropped}};
}

json cmd_evaluate(const Resolved& r) {
    const auto& c = r.config;
    auto min = open_in(r.path("models"));
    const auto models = aba::regression::read_models(min);
    const auto metrics = load_metrics(r);
    auto uin = open_in(r.path("units"));
    auto plots = aba::read_plots(uin);
    auto tin = open_in(r.path("trees"));
    const auto trees = aba::read_trees(tin);
    if (const auto orphans = aba::attach_trees(plots, trees.rows)) warn("trees of unknown plots", orphans);
    if (trees.unknown_species) warn("trees with unknown species codes", trees.unknown_species);

    aba::DomainRuleSet rules;
    rules.productive = rule_from(c["prod"], rules.productive);
    rules.unproductive = rule_from(c["uprod"], rules.unproductive);
    try {
        rules.validate();
    } catch (const aba::ConfigError& e) {
        throw ValidationError(e.what());
    }
    const auto input = aba::pipeline::evaluation_plots(plots, metrics, models, rules);
    if (input.missing_metrics) warn("plots without metrics", input.missing_metrics);

    aba::regression::EvalOptions eo;
    eo.min_n = c["min_n"].get<std::size_t>();
    eo.by_species = c["by_species"].get<bool>();
    std::vector<aba::regression::EvalReport> reports;
    std::ostringstream pred;
    pred << "plot_id,attribute,observed,predicted,maturity,dominant_species,all,prod,uprod\n";
    for (const auto& m : models) {
        const auto it = input.plots.find(m.spec.response);
        if (it == input.plots.end()) continue;
        reports.push_back(aba::regression::stratified_evaluate(it->second, m.spec.response, eo));
        for (const auto& p : it->second)
            pred << p.id << ',' << aba::to_string(m.spec.response) << ',' << aba::csv::format(p.observed) << ','
                 << aba::csv::format(p.predicted) << ',' << (p.maturity ? aba::to_string(*p.maturity) : "NA") << ','
                 << (p.dominant ? aba::to_string(*p.dominant) : "NA") << ',' << p.labels.all << ',' << p.labels.prod
                 << ',' << p.labels.uprod << '\n';
        std::ostringstream svg;
        aba::tools::write_scatter_svg(svg, it->second, aba::to_string(m.spec.response));
        write_file(r.out / ("scatter_" + std::string(aba::to_string(m.spec.response)) + ".svg"), svg.str());
    }
    std::ostringstream eval, fig;
    aba::regression::write_eval_csv(eval, reports);
    fig << "attribute,dataset,maturity,n,rmse_pct,me_pct,low_n\n";
    for (const auto& rep : reports)
        for (const auto& row : rep.rows) {
            if (row.species) continue;
            auto o = [](const std::optional<double>& v) { return v ? aba::csv::format(*v) : std::string("NA"); };
            fig << aba::to_string(rep.attribute) << ',' << aba::regression::to_string(row.dataset) << ','
                << (row.maturity ? std::string(aba::to_string(*row.maturity)) : "M2-M5") << ',' << row.n << ','
                << o(row.rmse_pct) << ',' << o(row.me_pct) << ',' << (row.low_n ? 1 : 0) << '\n';
        }
    write_file(r.out / "eval.csv", eval.str());
    write_file(r.out / "eval_by_maturity.csv", fig.str());
    write_file(r.out / "predictions.csv", pred.str());
    std::size_t n = 0;
    for (const auto& [a, v] : input.plots) n = std::max(n, v.size());
    return {{"plots", n}, {"reports", reports.size()}};
}

json cmd_estimate(const Resolved& r) {
    const auto& c = r.config;
    const auto attr_name = c["attribute"].get<std::string>();
    const auto attr = aba::parse_attribute(attr_name);
    if (!attr) throw ValidationError("unknown attribute '" + attr_name + "'");
    auto in = open_in(r.path("sample"));
    const auto sample = aba::estimation::read_sample_csv(in);
    aba::estimation::EstimationOptions eo;
    eo.require_hl_defined = *attr == aba::Attribute::HL;
    const auto direct = aba::estimation::direct_estimate(sample, eo);
    json result{{"attribute", attr_name}, {"estimates", json::array({aba::estimation::to_json(direct)})}};
    if (!c["mu_syn"].is_null()) {
        auto ma = aba::estimation::ma_estimate(sample, c["mu_syn"].get<double>(), eo);
        ma.re = aba::estimation::relative_efficiency(direct.variance, ma.variance);
        result["estimates"].push_back(aba::estimation::to_json(ma));
        result["equivalent_sample_size"] =
            std::isinf(*ma.re) ? json("inf") : json(aba::estimation::equivalent_sample_size(ma.n_s, *ma.re));
    }
    auto name = c["output"].get<std::string>();
    if (name.empty()) name = "estimate_" + std::string(aba::to_string(*attr)) + ".json";
    write_file(r.out / name, result.dump(2) + "\n");
    return {{"n_s", direct.n_s}, {"n_forest", direct.n_forest}};
}

json cmd_simulate(Resolved& r) {
    auto& c = r.config;
    aba::sim::Scenario sc = aba::sim::Scenario::defaults();
    try {
        if (!c["scenario"].get<std::string>().empty()) {
            auto in = open_in(r.path("scenario"));
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
            }
            sc = aba::sim::scenario_from_json(j);
        }
        if (!c["replicates"].is_null()) sc.replicates = c["replicates"].get<std::size_t>();
        if (r.seed_given)
            sc.seed = r.seed;
        else
            c["seed"] = sc.seed;
        sc.validate();
    } catch (const aba::ConfigError& e) {
        throw ValidationError(e.what());
    }
    c["resolved_scenario"] = aba::sim::to_json(sc);
    const auto results = aba::sim::run_replicates(sc, c["first_replicate"].get<std::size_t>());
    const auto summary = aba::sim::summarize(results);
    std::ostringstream rep;
    aba::sim::write_replicates_csv(rep, results);
    write_file(r.out / "replicates.csv", rep.str());
    write_file(r.out / "summary.json", aba::sim::to_json(summary).dump(2) + "\n");
    if (summary.failed) warn("replicates failed", summary.failed);
    return {{"replicates", summary.replicates}, {"failed", summary.failed}};
}

int run(Command& cmd, const Globals& g) {
    Resolved r = resolve(cmd, g);
    if (g.threads) aba::set_max_threads(g.threads);
    json report;
    if (cmd.name == "metrics") report = cmd_metrics(r);
    else if (cmd.name == "cells") report = cmd_cells(r);
    else if (cmd.name == "fit") report = cmd_fit(r);
    else if (cmd.name == "evaluate") report = cmd_evaluate(r);
    else if (cmd.name == "estimate") report = cmd_estimate(r);
    else if (cmd.name == "simulate") report = cmd_simulate(r);
    write_resolved(r, cmd.name);
    report["command"] = cmd.name;
    std::cout << report.dump() << '\n';
    return kExitOk;
}

int fail(const std::string& kind, const std::string& message, int code) {
    std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}, {"exit_code", code}}.dump() << '\n';
    return code;
}

std::string default_text(const Key& k) {
    if (k.default_value.is_null()) return "unset";
    if (k.default_value.is_string()) {
        const auto s = k.default_value.get<std::string>();
        return s.empty() ? "empty" : s;
    }
    return k.default_value.dump();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Area-based forest inventory with harvester training data and model-assisted estimation."};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");
    Globals g;
    app.add_option("--config", g.config, "JSON config; a top-level section named after the command is used when present");
    app.add_option("--seed", g.seed, "master seed (default 1, or the config's seed)");
    app.add_option("--threads", g.threads, "worker cap; 0 uses all cores (default 0)");
    app.add_option("--out", g.out, "output directory (default .)");

    auto commands = command_table();
    std::vector<std::pair<CLI::App*, Command*>> subs;
    for (auto& cmd : commands) {
        auto* sub = app.add_subcommand(cmd.name, cmd.help);
        sub->fallthrough();
        for (const auto& k : cmd.keys) {
            std::string flag = "--" + k.name;
            std::replace(flag.begin() + 2, flag.end(), '_', '-');
            std::string help = k.help + " [" + k.name + ", default: " + default_text(k) + "]";
            sub->add_option_function<std::string>(
                flag, [&cmd, name = k.name](const std::string& v) { cmd.flag_values[name] = v; }, help);
        }
        subs.emplace_back(sub, &cmd);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), kExitValidation);
    }

    for (auto& [sub, cmd] : subs) {
        if (!sub->parsed()) continue;
        try {
            return run(*cmd, g);
        } catch (const ValidationError& e) {
            return fail(e.kind(), e.what(), kExitValidation);
        } catch (const aba::ConfigError& e) {
            return fail(e.kind(), e.what(), kExitValidation);
        } catch (const aba::ParseError& e) {
            return fail(e.kind(), e.what(), kExitValidation);
        } catch (const aba::Error& e) {
            return fail(e.kind(), e.what(), kExitProcessing);
        } catch (const json::exception& e) {
            return fail("validation", e.what(), kExitValidation);
        } catch (const std::exception& e) {
            return fail("internal", e.what(), kExitProcessing);
        }
    }
    return fail("usage", "no command given", kExitValidation);
}
