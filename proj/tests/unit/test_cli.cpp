#include <doctest.h>

#include <nlohmann/json.hpp>
#include <sstream>

#include "../support/workspace.hpp"
#include "aba/pipeline.hpp"
#include "aba/regression.hpp"

using namespace aba;
using namespace aba::testing;
using nlohmann::json;

namespace {

const fs::path kScratch = ABA_SCRATCH;

// Inputs and a complete workflow run, built once.
const fs::path& workspace() {
    static const fs::path dir = [] {
        fs::remove_all(kScratch);
        write_inputs(kScratch);
        write_chain_configs(kScratch / "run");
        const auto err = run_chain(ABA_CLI, kScratch / "run", 2, kScratch);
        if (!err.empty()) throw std::runtime_error(err);
        return kScratch;
    }();
    return dir;
}

CliResult cli(std::vector<std::string> args) { return run_cli(ABA_CLI, args, kScratch / "tmp"); }

json error_of(const CliResult& r) {
    const auto line = r.err.substr(r.err.rfind('{', r.err.rfind("\"error\"")));
    return json::parse(line);
}

}  // namespace

TEST_CASE("workflow runs end to end") {
    const auto& ws = workspace();
    for (const char* f : {"segments.geojson", "cells.csv", "cell_attributes.csv", "cell_metrics.csv", "models.json",
                          "plot_metrics.csv", "eval.csv", "eval_by_maturity.csv", "predictions.csv", "scatter_V.svg",
                          "estimate_V.json", "replicates.csv", "summary.json", "fit.config.json"})
        CHECK_MESSAGE(fs::exists(ws / "run" / f), f);
    const auto est = json::parse(slurp(ws / "run" / "estimate_V.json"));
    CHECK(est["estimates"].size() == 2);
    CHECK(est["estimates"][1]["estimator"] == "ma");
    CHECK(est.contains("equivalent_sample_size"));
}

TEST_CASE("metrics on three plots") {
    const auto& ws = workspace();
    std::ifstream in(ws / "plots.csv");
    auto plots = read_plots(in);
    plots.resize(3);
    {
        std::ofstream out(ws / "plots3.csv");
        write_plots(out, plots);
    }
    const auto r = cli({"--out", (ws / "three").string(), "metrics", "--echoes", (ws / "echoes.fem").string(), "--terrain",
                        (ws / "terrain.asc").string(), "--units", (ws / "plots3.csv").string(), "--acquisition-year", "2014"});
    REQUIRE(r.code == 0);
    const auto text = slurp(ws / "three" / "metrics.csv");
    CHECK(text.substr(0, text.find('\n')) == "unit_id,hmean,hvar,h10,h25,h50,h75,h95,d2,time_diff,n_first_echoes,status");
    std::istringstream csv(text);
    CHECK(als::read_metrics_csv(csv).size() == 3);
}

TEST_CASE("missing terrain file is a validation error") {
    const auto& ws = workspace();
    const auto r = cli({"--out", (ws / "bad").string(), "metrics", "--echoes", (ws / "echoes.fem").string(), "--terrain",
                        (ws / "no_such.asc").string(), "--units", (ws / "plots.csv").string(), "--acquisition-year", "2014"});
    CHECK(r.code == 2);
    const auto e = error_of(r);
    CHECK(e["exit_code"] == 2);
    CHECK(e["error"]["message"].get<std::string>().find("terrain") != std::string::npos);
}

TEST_CASE("unit without echoes is flagged with a warning") {
    const auto& ws = workspace();
    PlotUnit far;
    far.id = "far";
    far.geometry = geom::Circle{{5000, 5000}, 8.92};
    far.area_m2 = 250;
    {
        std::ofstream out(ws / "far.csv");
        write_plots(out, std::vector<PlotUnit>{far});
    }
    const auto r = cli({"--out", (ws / "far").string(), "metrics", "--echoes", (ws / "echoes.fem").string(), "--units",
                        (ws / "far.csv").string(), "--acquisition-year", "2014"});
    CHECK(r.code == 0);
    CHECK(r.err.find("\"warning\"") != std::string::npos);
    CHECK(slurp(ws / "far" / "metrics.csv").find("no_first_echoes") != std::string::npos);
}

TEST_CASE("impossible coverage threshold accepts no cell") {
    const auto& ws = workspace();
    const auto r = cli({"--out", (ws / "strict").string(), "cells", "--harvester", (ws / "harvester.csv").string(),
                        "--coverage-threshold", "1.01"});
    CHECK(r.code == 0);
    CHECK(json::parse(r.out)["accepted_cells"] == 0);
    CHECK(r.err.find("coverage threshold") != std::string::npos);
}

TEST_CASE("cell count follows the geometry of the site") {
    const auto& ws = workspace();
    const auto cov = slurp(ws / "run" / "cell_coverage.csv");
    std::istringstream in(cov);
    std::string line;
    std::getline(in, line);
    std::size_t accepted = 0, inner_accepted = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ls(line);
        for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
        const long long col = std::stoll(f[2]), row = std::stoll(f[3]);
        const bool acc = f[6] == "1";
        accepted += acc;
        // Interior cells of the 256 x 128 site lie far from any jittered edge.
        if (col >= 21 && col <= 26 && row >= 12 && row <= 13) inner_accepted += acc;
    }
    CHECK(inner_accepted == 12);
    CHECK(accepted >= 12);
    CHECK(accepted <= 32);
}

TEST_CASE("fit, serialize and predict round trip is exact") {
    const auto& ws = workspace();
    std::ifstream min(ws / "run" / "models.json");
    const auto models = regression::read_models(min);
    std::ifstream mm(ws / "run" / "cell_metrics.csv"), ma(ws / "run" / "cell_attributes.csv");
    const auto metrics = als::read_metrics_csv(mm);
    const auto attrs = pipeline::read_attributes_csv(ma);
    const auto units = pipeline::join_units(metrics, attrs);
    REQUIRE(models.size() == 6);
    for (const auto& m : models) {
        const auto fresh = regression::ols_fit(units, m.spec);
        CHECK(fresh.intercept == m.intercept);
        CHECK(fresh.coefficients == m.coefficients);
        for (const auto& u : units) CHECK(regression::predict(fresh, u.metrics) == regression::predict(m, u.metrics));
    }
}

TEST_CASE("evaluation CSV matches hand metrics") {
    const auto& ws = workspace();
    const fs::path d = ws / "hand";
    fs::create_directories(d);
    std::vector<PlotUnit> plots(2);
    std::vector<PlotTree> trees;
    std::vector<als::UnitMetrics> metrics;
    const double vols[] = {0.25, 0.5};
    for (int i = 0; i < 2; ++i) {
        plots[i].id = "p" + std::to_string(i);
        plots[i].geometry = geom::Circle{{0, 0}, std::sqrt(250.0 / M_PI)};
        plots[i].area_m2 = 250;
        plots[i].maturity = Maturity::M4;
        plots[i].site_index = 14;
        plots[i].coniferous_volume_proportion = 0.9;
        plots[i].forwarding_distance_m = 200;
        TreeRecord t;
        t.dbh_cm = 20;
        t.height_m = 15;
        t.volume_m3 = vols[i];
        t.agb_kg = 100;
        trees.push_back({plots[i].id, t});
        metrics.push_back({plots[i].id, als::MetricsVector{}});
    }
    regression::FittedModel m;
    m.spec.response = Attribute::V;
    m.spec.predictors = {"hmean"};
    m.intercept = 8;
    m.coefficients = {0};
    m.se = {0};
    m.p = {1};
    {
        std::ofstream a(d / "plots.csv"), b(d / "trees.csv"), c(d / "metrics.csv"), e(d / "models.json");
        write_plots(a, plots);
        write_trees(b, trees);
        als::write_metrics_csv(c, metrics);
        regression::write_models(e, std::vector<regression::FittedModel>{m});
    }
    const auto r = cli({"--out", (d / "out").string(), "evaluate", "--models", (d / "models.json").string(), "--metrics",
                        (d / "metrics.csv").string(), "--units", (d / "plots.csv").string(), "--trees",
                        (d / "trees.csv").string(), "--min-n", "1"});
    REQUIRE(r.code == 0);
    // Observed V is 10 and 20 m3/ha against a prediction of 8.
    const auto csv = slurp(d / "out" / "eval.csv");
    std::istringstream in(csv);
    std::string line;
    bool found = false;
    while (std::getline(in, line))
        if (line.rfind("V,ALL,M4,all,", 0) == 0) {
            found = true;
            std::vector<std::string> f;
            std::stringstream ls(line);
            for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
            CHECK(f[4] == "2");
            CHECK(std::stod(f[5]) == doctest::Approx(std::sqrt((4.0 + 144.0) / 2)).epsilon(1e-12));
            CHECK(std::stod(f[6]) == doctest::Approx(100 * std::sqrt(74.0) / 15).epsilon(1e-12));
            CHECK(std::stod(f[7]) == doctest::Approx(7.0).epsilon(1e-12));
            CHECK(std::stod(f[8]) == doctest::Approx(100 * 7.0 / 15).epsilon(1e-12));
        }
    CHECK(found);
}

TEST_CASE("bundled default scenario passes the treatment-arm property") {
    const auto& ws = workspace();
    const auto r = cli({"--out", (ws / "sim").string(), "simulate", "--scenario", ABA_SCENARIO});
    REQUIRE(r.code == 0);
    const auto s = json::parse(slurp(ws / "sim" / "summary.json"));
    for (const char* a : {"HL", "V", "N", "AGB", "G", "QMD"}) {
        const auto& x = s["attributes"][a];
        CHECK(x.contains("bias"));
        CHECK(x.contains("coverage"));
        CHECK(x.contains("mean_re"));
    }
    CHECK(s["checks"]["treatment_arm_property"] == true);
}

TEST_CASE("config handling") {
    const auto& ws = workspace();
    spit(ws / "typo.json", R"({"estimate": {"sample": "sample.csv", "atribute": "V"}})");
    auto r = cli({"--config", (ws / "typo.json").string(), "--out", (ws / "typo").string(), "estimate"});
    CHECK(r.code == 2);
    CHECK(error_of(r)["error"]["message"].get<std::string>().find("atribute") != std::string::npos);

    spit(ws / "est.json", R"({"seed": 5, "estimate": {"sample": "sample.csv", "attribute": "N"}})");
    r = cli({"--config", (ws / "est.json").string(), "--out", (ws / "est").string(), "estimate", "--attribute", "V"});
    REQUIRE(r.code == 0);
    const auto resolved = json::parse(slurp(ws / "est" / "estimate.config.json"));
    CHECK(resolved["attribute"] == "V");
    CHECK(resolved["seed"] == 5);
    CHECK(fs::exists(ws / "est" / "estimate_V.json"));

    r = cli({"estimate", "--attribute"});
    CHECK(r.code == 2);
    r = cli({"--out", (ws / "x").string(), "estimate", "--sample", (ws / "sample.csv").string(), "--attribute", "XYZ"});
    CHECK(r.code == 2);
}

TEST_CASE("processing failures exit with 3") {
    const auto& ws = workspace();
    estimation::SamplePlot p{"only", 3.0, 3.0, true};
    {
        std::ofstream out(ws / "tiny.csv");
        estimation::write_sample_csv(out, std::vector<estimation::SamplePlot>{p});
    }
    const auto r = cli({"--out", (ws / "tiny").string(), "estimate", "--sample", (ws / "tiny.csv").string()});
    CHECK(r.code == 3);
    CHECK(error_of(r)["error"]["kind"] == "estimation");
}

TEST_CASE("help lists every key with its default") {
    const auto r = cli({"cells", "--help"});
    CHECK(r.code == 0);
    for (const char* k : {"--alpha-m", "--cell-size-m", "--coverage-threshold", "--jitter-m"}) CHECK(r.out.find(k) != std::string::npos);
    CHECK(r.out.find("default: 25") != std::string::npos);
    CHECK(r.out.find("default: 32") != std::string::npos);
    CHECK(r.out.find("default: 0.8") != std::string::npos);
    CHECK(r.out.find("default: 8") != std::string::npos);
    const auto m = cli({"metrics", "--help"});
    CHECK(m.out.find("d2_threshold_m, default: 2") != std::string::npos);
}
