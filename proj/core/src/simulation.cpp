#include "aba/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aba/error.hpp"
#include "aba/numeric.hpp"
#include "aba/parallel.hpp"
#include "aba/random.hpp"

namespace aba::sim {

std::string_view to_string(Latent l) noexcept {
    switch (l) {
        case Latent::Development: return "development";
        case Latent::Productivity: return "productivity";
        case Latent::Density: return "density";
    }
    return "development";
}

namespace {

std::size_t attr_index(Attribute a) { return static_cast<std::size_t>(a); }

std::size_t maturity_index(Maturity m) { return static_cast<std::size_t>(m) - 2; }

// Streams of one population seed.
enum Stream : std::uint64_t { kDevelopment = 1, kProductivity, kDensity, kForest, kTimeDiff, kAttrNoise = 100, kMetricNoise = 200 };

void set_attribute(AttributeVector& av, Attribute a, double v) {
    switch (a) {
        case Attribute::HL: av.hl = v; break;
        case Attribute::V: av.v = v; break;
        case Attribute::N: av.n = v; break;
        case Attribute::AGB: av.agb = v; break;
        case Attribute::G: av.g = v; break;
        case Attribute::QMD: av.qmd = v; break;
    }
}

// Value at rank q of the sorted copy, by the same interpolation as metrics.
double quantile_of(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, q);
}

}  // namespace

PopulationConfig PopulationConfig::defaults() {
    PopulationConfig c;
    using A = Attribute;
    //                              mean    sd     dev    prod   dens   own   growth
    auto gen = [](double mean, double sd, double d, double p, double s, double own, double growth) {
        return AttributeGenerator{mean, sd, {d, p, s}, own, growth};
    };
    c.attributes[A::HL] = gen(14.0, 4.5, 0.85, 0.35, 0.0, 0.25, 0.25);
    c.attributes[A::V] = gen(150.0, 80.0, 0.60, 0.50, 0.35, 0.30, 5.0);
    c.attributes[A::N] = gen(1100.0, 450.0, -0.55, 0.0, 0.70, 0.35, 0.0);
    c.attributes[A::AGB] = gen(80.0, 40.0, 0.60, 0.45, 0.35, 0.30, 2.5);
    c.attributes[A::G] = gen(22.0, 8.0, 0.45, 0.40, 0.60, 0.30, 0.4);
    c.attributes[A::QMD] = gen(18.0, 5.0, 0.80, 0.20, -0.45, 0.30, 0.25);

    auto met = [](double icpt, std::map<Attribute, double> slopes, double noise, std::array<double, 4> mult,
                  double lo = -INFINITY, double hi = INFINITY) {
        return MetricGenerator{icpt, std::move(slopes), noise, mult, lo, hi};
    };
    c.metrics["h95"] = met(1.5, {{A::HL, 1.0}}, 0.6, {0.85, 0.95, 1.0, 1.0}, 0.0);
    c.metrics["hmean"] = met(-1.0, {{A::HL, 0.7}}, 0.9, {0.80, 0.90, 1.0, 1.0}, 0.0);
    c.metrics["h10"] = met(0.0, {{A::HL, 0.2}}, 0.8, {1.0, 1.0, 1.0, 1.0}, 0.0);
    c.metrics["h25"] = met(0.0, {{A::HL, 0.4}}, 0.8, {1.0, 1.0, 1.0, 1.0}, 0.0);
    c.metrics["h50"] = met(0.0, {{A::HL, 0.65}}, 0.8, {1.0, 1.0, 1.0, 1.0}, 0.0);
    c.metrics["h75"] = met(0.5, {{A::HL, 0.85}}, 0.7, {1.0, 1.0, 1.0, 1.0}, 0.0);
    c.metrics["hvar"] = met(2.0, {{A::HL, 1.2}}, 2.0, {1.0, 1.0, 1.0, 1.0}, 0.0);
    c.metrics["d2"] = met(0.05, {{A::N, 0.0004}, {A::V, 0.0008}}, 0.07, {0.35, 0.70, 1.0, 1.0}, 0.0, 1.0);
    return c;
}

void PopulationConfig::validate() const {
    if (width < 20 || height < 20) throw ConfigError("population grid must be at least 20 x 20");
    if (!(forest_fraction > 0.0 && forest_fraction <= 1.0)) throw ConfigError("forest_fraction must be in (0, 1]");
    if (!std::is_sorted(maturity_quantiles.begin(), maturity_quantiles.end()) || maturity_quantiles.front() < 0.0 ||
        maturity_quantiles.back() > 1.0)
        throw ConfigError("maturity_quantiles must be ascending in [0, 1]");
    if (time_diff_min < 0 || time_diff_max < time_diff_min) throw ConfigError("invalid time_diff range");
    for (Attribute a : kAllAttributes) {
        const auto it = attributes.find(a);
        if (it == attributes.end()) throw ConfigError("missing generator for " + std::string(to_string(a)));
        if (!(it->second.sd >= 0.0) || !(it->second.own >= 0.0))
            throw ConfigError("negative sd for " + std::string(to_string(a)));
    }
    for (const auto& [name, g] : metrics) {
        if (!als::is_metric_name(name) || name == regression::kTimeDiff)
            throw ConfigError("unknown generated metric '" + name + "'");
        if (!(g.noise_sd >= 0.0)) throw ConfigError("negative noise sd for metric '" + name + "'");
        if (g.min > g.max) throw ConfigError("empty clamp range for metric '" + name + "'");
    }
}

std::vector<double> smoothed_field(std::size_t width, std::size_t height, std::size_t radius, std::uint64_t seed) {
    const std::size_t n = width * height;
    Rng rng(seed);
    std::vector<double> white(n);
    for (auto& w : white) w = rng.normal();
    if (radius == 0) return white;

    // Separable box sums on the torus, one pass per axis.
    const auto r = static_cast<long long>(radius);
    const auto W = static_cast<long long>(width), H = static_cast<long long>(height);
    auto wrap = [](long long i, long long m) { return ((i % m) + m) % m; };
    std::vector<double> tmp(n), out(n);
    for (long long y = 0; y < H; ++y)
        for (long long x = 0; x < W; ++x) {
            CompensatedSum s;
            for (long long d = -r; d <= r; ++d) s += white[static_cast<std::size_t>(y * W + wrap(x + d, W))];
            tmp[static_cast<std::size_t>(y * W + x)] = s.value();
        }
    const double norm = 1.0 / static_cast<double>(2 * r + 1);
    for (long long y = 0; y < H; ++y)
        for (long long x = 0; x < W; ++x) {
            CompensatedSum s;
            for (long long d = -r; d <= r; ++d) s += tmp[static_cast<std::size_t>(wrap(y + d, H) * W + x)];
            out[static_cast<std::size_t>(y * W + x)] = s.value() * norm;
        }
    return out;
}

double lag1_autocorrelation(std::span<const double> field, std::size_t width, std::size_t height) {
    if (field.size() != width * height || field.size() < 2) throw DomainError("field size does not match grid");
    const double mean = compensated_sum(field) / static_cast<double>(field.size());
    CompensatedSum num, den;
    std::size_t pairs = 0;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            const double a = field[y * width + x] - mean;
            den += a * a;
            if (x + 1 < width) {
                num += a * (field[y * width + x + 1] - mean);
                ++pairs;
            }
            if (y + 1 < height) {
                num += a * (field[(y + 1) * width + x] - mean);
                ++pairs;
            }
        }
    if (den.value() == 0.0) return 0.0;
    return (num.value() / static_cast<double>(pairs)) / (den.value() / static_cast<double>(field.size()));
}

double Population::true_mean(Attribute a) const {
    CompensatedSum s;
    std::size_t n = 0;
    for (const auto& st : stands)
        if (st.forest)
            if (auto v = get(st.attributes, a)) {
                s += *v;
                ++n;
            }
    if (n == 0) throw SimulationError("population has no forest stands");
    return s.value() / static_cast<double>(n);
}

Population generate_population(const PopulationConfig& config) {
    config.validate();
    const std::size_t W = config.width, H = config.height, n = W * H;
    const std::uint64_t seed = config.seed;
    const std::size_t r = config.smoothing_radius;

    std::array<std::vector<double>, 3> latent{smoothed_field(W, H, r, derive_seed(seed, kDevelopment)),
                                              smoothed_field(W, H, r, derive_seed(seed, kProductivity)),
                                              smoothed_field(W, H, r, derive_seed(seed, kDensity))};
    const auto forest_field = smoothed_field(W, H, r, derive_seed(seed, kForest));
    const double forest_cut = config.forest_fraction >= 1.0 ? -INFINITY : quantile_of(forest_field, 1.0 - config.forest_fraction);

    Population pop;
    pop.width = W;
    pop.height = H;
    pop.stands.resize(n);
    const int width_digits = static_cast<int>(std::to_string(n - 1).size());
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = pop.stands[i];
        std::string num = std::to_string(i);
        s.id = "s" + std::string(static_cast<std::size_t>(width_digits) - num.size(), '0') + num;
        s.row = i / W;
        s.col = i % W;
        s.forest = forest_field[i] > forest_cut;
        s.productivity = latent[1][i];
    }

    std::array<std::vector<double>, 6> values;
    for (Attribute a : kAllAttributes) {
        const auto& g = config.attributes.at(a);
        double norm2 = g.own * g.own;
        for (double l : g.loadings) norm2 += l * l;
        const double scale = norm2 > 0.0 ? g.sd / std::sqrt(norm2) : 0.0;
        Rng rng(derive_seed(seed, kAttrNoise + attr_index(a)));
        auto& v = values[attr_index(a)];
        v.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            double z = g.own * rng.normal();
            for (std::size_t k = 0; k < 3; ++k) z += g.loadings[k] * latent[k][i];
            v[i] = g.mean + scale * z;
            set_attribute(pop.stands[i].attributes, a, v[i]);
        }
    }

    // Maturity from height quantiles.
    const auto& hl = values[attr_index(Attribute::HL)];
    std::array<double, 3> cuts{};
    for (std::size_t k = 0; k < 3; ++k) cuts[k] = quantile_of(hl, config.maturity_quantiles[k]);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        while (m < 3 && hl[i] > cuts[m]) ++m;
        pop.stands[i].maturity = static_cast<Maturity>(static_cast<int>(Maturity::M2) + static_cast<int>(m));
    }

    Rng td_rng(derive_seed(seed, kTimeDiff));
    const auto span = static_cast<std::uint64_t>(config.time_diff_max - config.time_diff_min + 1);
    for (auto& s : pop.stands) s.metrics.time_diff = config.time_diff_min + static_cast<int>(td_rng.below(span));

    std::uint64_t metric_stream = kMetricNoise;
    for (const auto& [name, g] : config.metrics) {
        Rng rng(derive_seed(seed, metric_stream++));
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = pop.stands[i];
            double lin = 0.0;
            for (const auto& [a, slope] : g.slopes) {
                const auto& gen = config.attributes.at(a);
                lin += slope * (values[attr_index(a)][i] - gen.growth * s.metrics.time_diff);
            }
            double v = g.intercept + g.maturity_multipliers[maturity_index(s.maturity)] * lin + g.noise_sd * rng.normal();
            v = std::clamp(v, g.min, g.max);
            als::set_metric(s.metrics, name, v);
        }
    }
    for (auto& s : pop.stands) s.metrics.n_first_echoes = 1000;
    return pop;
}

SelectionRule SelectionRule::unbiased() {
    SelectionRule r;
    r.maturities = {Maturity::M2, Maturity::M3, Maturity::M4, Maturity::M5};
    r.productivity_threshold = -INFINITY;
    r.fraction = 0.3;
    return r;
}

void SelectionRule::validate() const {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("selection fraction must be in (0, 1]");
    if (maturities.empty()) throw ConfigError("selection rule admits no maturity class");
}

std::vector<std::size_t> select_harvester_training(const Population& pop, const SelectionRule& rule,
                                                   std::uint64_t seed) {
    rule.validate();
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pop.stands.size(); ++i) {
        const auto& s = pop.stands[i];
        if (!s.forest || !(s.productivity > rule.productivity_threshold)) continue;
        if (std::find(rule.maturities.begin(), rule.maturities.end(), s.maturity) == rule.maturities.end()) continue;
        eligible.push_back(i);
    }
    if (eligible.empty()) throw SimulationError("no stand satisfies the selection rule");
    const auto take = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(rule.fraction * static_cast<double>(eligible.size()))));
    Rng rng(seed);
    for (std::size_t i = 0; i < take; ++i) std::swap(eligible[i], eligible[i + rng.below(eligible.size() - i)]);
    eligible.resize(take);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

std::vector<std::size_t> draw_sample(const Population& pop, const Design& design, std::uint64_t seed) {
    const std::size_t N = pop.stands.size();
    Rng rng(seed);
    std::vector<std::size_t> out;
    if (design.kind == Design::Kind::Systematic) {
        if (design.k < 1) throw ConfigError("systematic step must be at least 1");
        for (std::size_t i = rng.below(design.k); i < N; i += design.k) out.push_back(i);
        return out;
    }
    if (design.n > N) throw ConfigError("SRS size exceeds the population");
    std::vector<std::size_t> idx(N);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < design.n; ++i) std::swap(idx[i], idx[i + rng.below(N - i)]);
    idx.resize(design.n);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Scenario Scenario::defaults() {
    Scenario s;
    s.population = PopulationConfig::defaults();
    for (Attribute a : kAllAttributes) s.models[a] = regression::default_spec(a);
    return s;
}

void Scenario::validate() const {
    population.validate();
    selection.validate();
    if (replicates < 2) throw ConfigError("at least 2 replicates are required");
    if (design.kind == Design::Kind::SRS && design.n < 2) throw ConfigError("SRS size must be at least 2");
    if (design.kind == Design::Kind::Systematic && design.k < 1) throw ConfigError("systematic step must be at least 1");
    for (const auto& [a, spec] : models) {
        if (spec.response != a) throw ConfigError("model keyed by " + std::string(to_string(a)) + " has another response");
        spec.validate();
    }
}

namespace {

enum ReplicateStream : std::uint64_t { kPopulation = 1, kTraining, kSample };

ReplicateResult run_one(const Scenario& sc, const Population* fixed, std::size_t rep) {
    ReplicateResult res;
    res.replicate = rep;
    const std::uint64_t rseed = derive_seed(sc.seed, rep);
    try {
        std::optional<Population> own;
        if (!fixed) {
            PopulationConfig pc = sc.population;
            pc.seed = derive_seed(rseed, kPopulation);
            own = generate_population(pc);
        }
        const Population& pop = fixed ? *fixed : *own;

        const auto training_idx = select_harvester_training(pop, sc.selection, derive_seed(rseed, kTraining));
        std::vector<regression::LabeledUnit> training;
        training.reserve(training_idx.size());
        for (auto i : training_idx) training.push_back({pop.stands[i].id, pop.stands[i].metrics, pop.stands[i].attributes});

        const auto sample_idx = draw_sample(pop, sc.design, derive_seed(rseed, kSample));

        for (Attribute a : kAllAttributes) {
            const auto it = sc.models.find(a);
            const auto spec = it != sc.models.end() ? it->second : regression::default_spec(a);
            const auto model = regression::ols_fit(training, spec);
            auto& out = res.outcomes[attr_index(a)];
            out.time_diff_dropped = model.time_diff_dropped;
            out.truth = pop.true_mean(a);

            CompensatedSum syn;
            std::size_t nf = 0;
            for (const auto& s : pop.stands)
                if (s.forest && get(s.attributes, a)) {
                    syn += regression::predict(model, s.metrics);
                    ++nf;
                }
            out.synthetic = syn.value() / static_cast<double>(nf);

            std::vector<estimation::SamplePlot> plots;
            plots.reserve(sample_idx.size());
            std::array<std::vector<double>, 4> obs, pred;
            for (auto i : sample_idx) {
                const auto& s = pop.stands[i];
                estimation::SamplePlot p;
                p.id = s.id;
                p.forest_indicator = s.forest;
                p.hl_defined = s.attributes.hl.has_value();
                if (s.forest) {
                    p.y = get(s.attributes, a);
                    p.y_hat = regression::predict(model, s.metrics);
                    if (p.y) {
                        obs[maturity_index(s.maturity)].push_back(*p.y);
                        pred[maturity_index(s.maturity)].push_back(*p.y_hat);
                    }
                }
                plots.push_back(std::move(p));
            }
            estimation::EstimationOptions eo;
            eo.require_hl_defined = a == Attribute::HL;
            const auto direct = estimation::direct_estimate(plots, eo);
            const auto ma = estimation::ma_estimate(plots, out.synthetic, eo);
            out.direct = direct.mu_hat;
            out.direct_variance = direct.variance;
            out.ma = ma.mu_hat;
            out.ma_variance = ma.variance;
            out.mu_cor = *ma.mu_cor;
            out.covered_direct = std::abs(direct.mu_hat - out.truth) <= 2.0 * direct.se;
            out.covered_ma = std::abs(ma.mu_hat - out.truth) <= 2.0 * ma.se;
            out.re = estimation::relative_efficiency(direct.variance, ma.variance);
            for (std::size_t m = 0; m < 4; ++m)
                if (!obs[m].empty()) out.me_pct[m] = regression::me_pct(obs[m], pred[m]);
        }
        res.ok = true;
    } catch (const Error& e) {
        res.ok = false;
        res.error = e.what();
        res.outcomes = {};
    }
    return res;
}

}  // namespace

std::vector<ReplicateResult> run_replicates(const Scenario& scenario, std::size_t first) {
    scenario.validate();
    std::optional<Population> fixed;
    if (!scenario.regenerate_population) fixed = generate_population(scenario.population);
    std::vector<ReplicateResult> results(scenario.replicates);
    parallel_for(results.size(), [&](std::size_t i) {
        results[i] = run_one(scenario, fixed ? &*fixed : nullptr, first + i);
    });
    return results;
}

Summary summarize(std::span<const ReplicateResult> results) {
    Summary sum;
    sum.replicates = results.size();
    std::vector<const ReplicateResult*> ok;
    for (const auto& r : results) {
        if (r.ok)
            ok.push_back(&r);
        else {
            ++sum.failed;
            ++sum.failures[r.error];
        }
    }
    std::sort(ok.begin(), ok.end(), [](auto* a, auto* b) { return a->replicate < b->replicate; });
    const double R = static_cast<double>(ok.size());
    if (ok.empty()) return sum;

    auto mean_sd = [&](auto&& f) {
        CompensatedSum s;
        for (auto* r : ok) s += f(*r);
        const double m = s.value() / R;
        CompensatedSum ss;
        for (auto* r : ok) ss += (f(*r) - m) * (f(*r) - m);
        const double var = ok.size() > 1 ? ss.value() / (R - 1.0) : 0.0;
        return std::pair{m, var};
    };

    for (Attribute a : kAllAttributes) {
        const auto k = attr_index(a);
        auto& s = sum.attributes[k];
        auto at = [k](const ReplicateResult& r) -> const AttributeOutcome& { return r.outcomes[k]; };
        s.mean_truth = mean_sd([&](const ReplicateResult& r) { return at(r).truth; }).first;
        const auto [bd, vd] = mean_sd([&](const ReplicateResult& r) { return at(r).direct - at(r).truth; });
        const auto [bs, vs] = mean_sd([&](const ReplicateResult& r) { return at(r).synthetic - at(r).truth; });
        const auto [bm, vm] = mean_sd([&](const ReplicateResult& r) { return at(r).ma - at(r).truth; });
        s.bias_direct = bd;
        s.bias_synthetic = bs;
        s.bias_ma = bm;
        s.mcse_direct = std::sqrt(vd / R);
        s.mcse_synthetic = std::sqrt(vs / R);
        s.mcse_ma = std::sqrt(vm / R);
        s.empirical_var_direct = vd;
        s.empirical_var_ma = vm;
        s.mean_var_direct = mean_sd([&](const ReplicateResult& r) { return at(r).direct_variance; }).first;
        s.mean_var_ma = mean_sd([&](const ReplicateResult& r) { return at(r).ma_variance; }).first;
        s.coverage_direct = mean_sd([&](const ReplicateResult& r) { return at(r).covered_direct ? 1.0 : 0.0; }).first;
        s.coverage_ma = mean_sd([&](const ReplicateResult& r) { return at(r).covered_ma ? 1.0 : 0.0; }).first;
        CompensatedSum re;
        std::size_t finite = 0;
        for (auto* r : ok) {
            if (at(*r).time_diff_dropped) ++s.time_diff_dropped;
            if (std::isinf(at(*r).re))
                ++s.infinite_re;
            else {
                re += at(*r).re;
                ++finite;
            }
        }
        s.mean_re = finite ? re.value() / static_cast<double>(finite) : INFINITY;
        for (std::size_t m = 0; m < 4; ++m) {
            CompensatedSum me;
            std::size_t cnt = 0;
            for (auto* r : ok)
                if (at(*r).me_pct[m]) {
                    me += *at(*r).me_pct[m];
                    ++cnt;
                }
            if (cnt) s.mean_me_pct[m] = me.value() / static_cast<double>(cnt);
        }
    }
    return sum;
}

}  // namespace aba::sim
