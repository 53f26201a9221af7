#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aba/als.hpp"
#include "aba/estimation.hpp"
#include "aba/forest.hpp"
#include "aba/regression.hpp"

namespace aba::sim {

// Latent fields shared by the attribute generators.
enum class Latent { Development, Productivity, Density };
inline constexpr std::array<Latent, 3> kAllLatents{Latent::Development, Latent::Productivity, Latent::Density};
std::string_view to_string(Latent l) noexcept;

// attribute = mean + sd * (sum of loading * latent + own * white noise),
// with the bracket rescaled to unit variance. `growth` is the annual
// increment used to age the attribute back to the laser acquisition.
struct AttributeGenerator {
    double mean = 0.0;
    double sd = 0.0;
    std::array<double, 3> loadings{};  // indexed by Latent
    double own = 1.0;
    double growth = 0.0;
};

// metric = intercept + m * sum(slope * attribute at acquisition) + noise,
// where m is the multiplier of the stand's maturity class (M2..M5), then
// clamped to [min, max].
struct MetricGenerator {
    double intercept = 0.0;
    std::map<Attribute, double> slopes;
    double noise_sd = 0.0;
    std::array<double, 4> maturity_multipliers{1.0, 1.0, 1.0, 1.0};
    double min = -std::numeric_limits<double>::infinity();
    double max = std::numeric_limits<double>::infinity();
};

struct PopulationConfig {
    std::size_t width = 100;
    std::size_t height = 100;
    std::size_t smoothing_radius = 5;     // moving-average half width, stands
    double forest_fraction = 0.85;
    std::array<double, 3> maturity_quantiles{0.25, 0.50, 0.75};  // HL cut points for M2|M3|M4|M5
    int time_diff_min = 2;
    int time_diff_max = 9;
    std::map<Attribute, AttributeGenerator> attributes;
    std::map<std::string, MetricGenerator> metrics;  // keyed by metric name
    std::uint64_t seed = 1;

    // Scenario with strong height and weak stem-count signal and slopes
    // that drift in young stands.
    static PopulationConfig defaults();
    // Throws ConfigError.
    void validate() const;
};

struct Stand {
    std::string id;
    std::size_t row = 0;
    std::size_t col = 0;
    bool forest = false;
    Maturity maturity = Maturity::M2;
    double productivity = 0.0;  // latent, unit variance
    AttributeVector attributes;
    als::MetricsVector metrics;
};

struct Population {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<Stand> stands;  // row-major

    // Mean of the attribute over forest stands.
    double true_mean(Attribute a) const;
};

Population generate_population(const PopulationConfig& config);

// Moving-average field of white noise on a torus, unit variance per cell.
std::vector<double> smoothed_field(std::size_t width, std::size_t height, std::size_t radius, std::uint64_t seed);

// Lag-1 (rook) autocorrelation of a row-major field.
double lag1_autocorrelation(std::span<const double> field, std::size_t width, std::size_t height);

struct SelectionRule {
    std::vector<Maturity> maturities{Maturity::M4, Maturity::M5};
    double productivity_threshold = 0.0;  // latent units; -inf admits all
    double fraction = 0.3;

    static SelectionRule unbiased();
    void validate() const;
};

// Seeded uniform subsample, without replacement, of forest stands passing
// the rule. Throws SimulationError when no stand is eligible.
std::vector<std::size_t> select_harvester_training(const Population& pop, const SelectionRule& rule,
                                                   std::uint64_t seed);

struct Design {
    enum class Kind { Systematic, SRS } kind = Kind::SRS;
    std::size_t k = 23;   // systematic step
    std::size_t n = 300;  // SRS size
};

// Stand indices: every k-th stand in row-major order from a random start,
// or a without-replacement simple random sample of n stands.
std::vector<std::size_t> draw_sample(const Population& pop, const Design& design, std::uint64_t seed);

struct AttributeOutcome {
    double truth = 0.0;
    double direct = 0.0;
    double direct_variance = 0.0;
    double synthetic = 0.0;
    double ma = 0.0;
    double ma_variance = 0.0;
    double mu_cor = 0.0;
    bool covered_direct = false;
    bool covered_ma = false;
    double re = 0.0;
    bool time_diff_dropped = false;
    std::array<std::optional<double>, 4> me_pct;  // sample ME% per maturity M2..M5
};

struct ReplicateResult {
    std::size_t replicate = 0;
    bool ok = false;
    std::string error;
    std::array<AttributeOutcome, 6> outcomes{};  // indexed like kAllAttributes
};

struct Scenario {
    PopulationConfig population;
    SelectionRule selection;
    Design design;
    std::map<Attribute, regression::ModelSpec> models;  // defaults when absent
    std::size_t replicates = 100;
    bool regenerate_population = false;  // fresh population per replicate
    std::uint64_t seed = 1;

    static Scenario defaults();
    void validate() const;
};

// Replicate r runs under seed derive_seed(scenario.seed, r) and writes only
// its own slot, so results do not depend on the thread count. `first`
// offsets replicate ids, letting batches continue one stream.
std::vector<ReplicateResult> run_replicates(const Scenario& scenario, std::size_t first = 0);

struct AttributeSummary {
    double mean_truth = 0.0;
    double bias_direct = 0.0, bias_synthetic = 0.0, bias_ma = 0.0;
    double mcse_direct = 0.0, mcse_synthetic = 0.0, mcse_ma = 0.0;
    double empirical_var_direct = 0.0, empirical_var_ma = 0.0;
    double mean_var_direct = 0.0, mean_var_ma = 0.0;
    double coverage_direct = 0.0, coverage_ma = 0.0;
    double mean_re = 0.0;  // over finite REs
    std::size_t infinite_re = 0;
    std::size_t time_diff_dropped = 0;
    std::array<std::optional<double>, 4> mean_me_pct;
};

struct Summary {
    std::size_t replicates = 0;
    std::size_t failed = 0;
    std::map<std::string, std::size_t> failures;  // error message -> count
    std::array<AttributeSummary, 6> attributes{};
};

// Bias is measured against each replicate's own truth; the MC-SE is the
// sample SD of the replicate errors over sqrt(R).
Summary summarize(std::span<const ReplicateResult> results);

// Config IO. Missing keys take defaults.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scenario& s);
nlohmann::json to_json(const Summary& s);
void write_replicates_csv(std::ostream& out, std::span<const ReplicateResult> results);

}  // namespace aba::sim
