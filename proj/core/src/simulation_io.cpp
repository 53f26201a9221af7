#include <cmath>
#include <nlohmann/json.hpp>
#include <ostream>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/simulation.hpp"

namespace aba::sim {

using nlohmann::json;

namespace {

json num(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double read_num(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return INFINITY;
        if (s == "-inf") return -INFINITY;
        throw ConfigError("expected a number, got '" + s + "'");
    }
    return j.get<double>();
}

template <class T>
void opt_read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void opt_num(const json& j, const char* key, double& out) {
    if (j.contains(key)) out = read_num(j.at(key));
}

Attribute attribute_key(const std::string& k) {
    const auto a = parse_attribute(k);
    if (!a) throw ConfigError("unknown attribute '" + k + "'");
    return *a;
}

Maturity maturity_key(const std::string& k) {
    const auto m = parse_maturity(k);
    if (!m) throw ConfigError("unknown maturity class '" + k + "'");
    return *m;
}

json to_json(const AttributeGenerator& g) {
    json loadings = json::object();
    for (Latent l : kAllLatents) loadings[std::string(to_string(l))] = g.loadings[static_cast<std::size_t>(l)];
    return {{"mean", g.mean}, {"sd", g.sd}, {"loadings", loadings}, {"own", g.own}, {"growth", g.growth}};
}

void from_json_into(const json& j, AttributeGenerator& g) {
    opt_num(j, "mean", g.mean);
    opt_num(j, "sd", g.sd);
    opt_num(j, "own", g.own);
    opt_num(j, "growth", g.growth);
    if (j.contains("loadings"))
        for (const auto& [k, v] : j.at("loadings").items()) {
            bool found = false;
            for (Latent l : kAllLatents)
                if (k == to_string(l)) {
                    g.loadings[static_cast<std::size_t>(l)] = v.get<double>();
                    found = true;
                }
            if (!found) throw ConfigError("unknown latent field '" + k + "'");
        }
}

json to_json(const MetricGenerator& g) {
    json slopes = json::object();
    for (const auto& [a, s] : g.slopes) slopes[std::string(to_string(a))] = s;
    return {{"intercept", g.intercept}, {"slopes", slopes},       {"noise_sd", g.noise_sd},
            {"maturity_multipliers", g.maturity_multipliers}, {"min", num(g.min)}, {"max", num(g.max)}};
}

void from_json_into(const json& j, MetricGenerator& g) {
    opt_num(j, "intercept", g.intercept);
    opt_num(j, "noise_sd", g.noise_sd);
    if (j.contains("min")) g.min = j["min"].is_null() ? -INFINITY : read_num(j["min"]);
    if (j.contains("max")) g.max = j["max"].is_null() ? INFINITY : read_num(j["max"]);
    if (j.contains("maturity_multipliers")) g.maturity_multipliers = j["maturity_multipliers"].get<std::array<double, 4>>();
    if (j.contains("slopes")) {
        g.slopes.clear();
        for (const auto& [k, v] : j["slopes"].items()) g.slopes[attribute_key(k)] = v.get<double>();
    }
}

json to_json(const regression::ModelSpec& s) {
    return {{"predictors", s.predictors},
            {"expected_time_diff_sign", s.expected_time_diff_sign == regression::Sign::Positive ? "positive" : "negative"}};
}

}  // namespace

Scenario scenario_from_json(const json& j) {
    try {
        Scenario s = Scenario::defaults();
        opt_read(j, "replicates", s.replicates);
        opt_read(j, "regenerate_population", s.regenerate_population);
        opt_read(j, "seed", s.seed);
        if (j.contains("population")) {
            const auto& p = j["population"];
            auto& c = s.population;
            opt_read(p, "width", c.width);
            opt_read(p, "height", c.height);
            opt_read(p, "smoothing_radius", c.smoothing_radius);
            opt_num(p, "forest_fraction", c.forest_fraction);
            if (p.contains("maturity_quantiles")) c.maturity_quantiles = p["maturity_quantiles"].get<std::array<double, 3>>();
            opt_read(p, "time_diff_min", c.time_diff_min);
            opt_read(p, "time_diff_max", c.time_diff_max);
            opt_read(p, "seed", c.seed);
            if (p.contains("attributes"))
                for (const auto& [k, v] : p["attributes"].items()) from_json_into(v, c.attributes[attribute_key(k)]);
            if (p.contains("metrics"))
                for (const auto& [k, v] : p["metrics"].items()) {
                    if (v.is_null()) {
                        c.metrics.erase(k);
                        continue;
                    }
                    from_json_into(v, c.metrics[k]);
                }
        }
        if (j.contains("selection")) {
            const auto& r = j["selection"];
            if (r.contains("maturities")) {
                s.selection.maturities.clear();
                for (const auto& m : r["maturities"]) s.selection.maturities.push_back(maturity_key(m.get<std::string>()));
            }
            if (r.contains("productivity_threshold"))
                s.selection.productivity_threshold =
                    r["productivity_threshold"].is_null() ? -INFINITY : read_num(r["productivity_threshold"]);
            opt_num(r, "fraction", s.selection.fraction);
        }
        if (j.contains("design")) {
            const auto& d = j["design"];
            const auto kind = d.value("type", std::string("srs"));
            if (kind == "srs")
                s.design.kind = Design::Kind::SRS;
            else if (kind == "systematic")
                s.design.kind = Design::Kind::Systematic;
            else
                throw ConfigError("unknown design type '" + kind + "'");
            opt_read(d, "n", s.design.n);
            opt_read(d, "k", s.design.k);
        }
        if (j.contains("models"))
            for (const auto& [k, v] : j["models"].items()) {
                const Attribute a = attribute_key(k);
                auto& spec = s.models[a];
                spec.response = a;
                opt_read(v, "predictors", spec.predictors);
                if (v.contains("expected_time_diff_sign"))
                    spec.expected_time_diff_sign = v["expected_time_diff_sign"].get<std::string>() == "negative"
                                                       ? regression::Sign::Negative
                                                       : regression::Sign::Positive;
            }
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed scenario: ") + e.what());
    }
}

json to_json(const Scenario& s) {
    const auto& c = s.population;
    json attrs = json::object(), metrics = json::object(), models = json::object(), mats = json::array();
    for (const auto& [a, g] : c.attributes) attrs[std::string(to_string(a))] = to_json(g);
    for (const auto& [name, g] : c.metrics) metrics[name] = to_json(g);
    for (const auto& [a, spec] : s.models) models[std::string(to_string(a))] = to_json(spec);
    for (Maturity m : s.selection.maturities) mats.push_back(to_string(m));
    json design = s.design.kind == Design::Kind::SRS ? json{{"type", "srs"}, {"n", s.design.n}}
                                                     : json{{"type", "systematic"}, {"k", s.design.k}};
    return {{"seed", s.seed},
            {"replicates", s.replicates},
            {"regenerate_population", s.regenerate_population},
            {"population",
             {{"width", c.width},
              {"height", c.height},
              {"smoothing_radius", c.smoothing_radius},
              {"forest_fraction", c.forest_fraction},
              {"maturity_quantiles", c.maturity_quantiles},
              {"time_diff_min", c.time_diff_min},
              {"time_diff_max", c.time_diff_max},
              {"seed", c.seed},
              {"attributes", attrs},
              {"metrics", metrics}}},
            {"selection",
             {{"maturities", mats},
              {"productivity_threshold", num(s.selection.productivity_threshold)},
              {"fraction", s.selection.fraction}}},
            {"design", design},
            {"models", models}};
}

json to_json(const Summary& s) {
    json attrs = json::object();
    for (Attribute a : kAllAttributes) {
        const auto& x = s.attributes[static_cast<std::size_t>(a)];
        json me = json::object();
        for (std::size_t m = 0; m < 4; ++m)
            me["M" + std::to_string(m + 2)] = x.mean_me_pct[m] ? json(*x.mean_me_pct[m]) : json(nullptr);
        attrs[std::string(to_string(a))] = {
            {"mean_truth", x.mean_truth},
            {"bias", {{"direct", x.bias_direct}, {"synthetic", x.bias_synthetic}, {"ma", x.bias_ma}}},
            {"mcse", {{"direct", x.mcse_direct}, {"synthetic", x.mcse_synthetic}, {"ma", x.mcse_ma}}},
            {"empirical_variance", {{"direct", x.empirical_var_direct}, {"ma", x.empirical_var_ma}}},
            {"mean_estimated_variance", {{"direct", x.mean_var_direct}, {"ma", x.mean_var_ma}}},
            {"coverage", {{"direct", x.coverage_direct}, {"ma", x.coverage_ma}}},
            {"mean_re", num(x.mean_re)},
            {"infinite_re", x.infinite_re},
            {"time_diff_dropped", x.time_diff_dropped},
            {"mean_me_pct", me}};
    }
    // Systematic synthetic error beyond 3 MC-SE while MA stays within 2.
    json synthetic_biased = json::array(), ma_unbiased = json::array();
    for (Attribute a : kAllAttributes) {
        const auto& x = s.attributes[static_cast<std::size_t>(a)];
        if (std::abs(x.bias_synthetic) > 3.0 * x.mcse_synthetic) synthetic_biased.push_back(to_string(a));
        if (std::abs(x.bias_ma) < 2.0 * x.mcse_ma) ma_unbiased.push_back(to_string(a));
    }
    json failures = json::object();
    for (const auto& [msg, n] : s.failures) failures[msg] = n;
    return {{"replicates", s.replicates},
            {"failed", s.failed},
            {"failures", failures},
            {"attributes", attrs},
            {"checks",
             {{"synthetic_bias_beyond_3mcse", synthetic_biased},
              {"ma_within_2mcse", ma_unbiased},
              {"treatment_arm_property",
               !synthetic_biased.empty() && ma_unbiased.size() == kAllAttributes.size()}}}};
}

void write_replicates_csv(std::ostream& out, std::span<const ReplicateResult> results) {
    out << "replicate,attribute,status,truth,direct,direct_var,synthetic,ma,ma_var,mu_cor,covered_direct,covered_ma,"
           "re,time_diff_dropped,me_pct_M2,me_pct_M3,me_pct_M4,me_pct_M5\n";
    auto f = [](double v) { return std::isinf(v) ? std::string(v > 0 ? "inf" : "-inf") : csv::format(v); };
    for (const auto& r : results)
        for (Attribute a : kAllAttributes) {
            const auto& o = r.outcomes[static_cast<std::size_t>(a)];
            out << r.replicate << ',' << to_string(a) << ',' << (r.ok ? "ok" : "failed");
            if (!r.ok) {
                out << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA,NA\n";
                continue;
            }
            out << ',' << f(o.truth) << ',' << f(o.direct) << ',' << f(o.direct_variance) << ',' << f(o.synthetic) << ','
                << f(o.ma) << ',' << f(o.ma_variance) << ',' << f(o.mu_cor) << ',' << (o.covered_direct ? 1 : 0) << ','
                << (o.covered_ma ? 1 : 0) << ',' << f(o.re) << ',' << (o.time_diff_dropped ? 1 : 0);
            for (const auto& m : o.me_pct) out << ',' << (m ? f(*m) : std::string("NA"));
            out << '\n';
        }
}

}  // namespace aba::sim
