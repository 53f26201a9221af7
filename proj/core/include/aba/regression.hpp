#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "aba/als.hpp"
#include "aba/forest.hpp"

namespace aba::regression {

enum class Sign { Positive, Negative };

inline constexpr std::string_view kTimeDiff = "time_diff";

struct ModelSpec {
    Attribute response = Attribute::V;
    std::vector<std::string> predictors;  // metric names; "time_diff" when used
    Sign expected_time_diff_sign = Sign::Positive;

    bool use_time_diff() const noexcept;
    // Throws ConfigError on unknown, duplicate or empty predictors.
    void validate() const;
};

// HL ~ h95 + hmean + time_diff, V ~ hmean + time_diff + d2, N ~ hmean + d2,
// AGB ~ hmean + d2 + time_diff, G ~ hmean + d2 + time_diff,
// QMD ~ hmean + d2 + h95.
ModelSpec default_spec(Attribute response);

struct FittedModel {
    ModelSpec spec;  // predictors actually in the model
    double intercept = 0.0;
    std::vector<double> coefficients;  // aligned with spec.predictors
    double intercept_se = 0.0;
    std::vector<double> se;
    double intercept_p = 1.0;
    std::vector<double> p;
    std::size_t n = 0;
    double rmse_train = 0.0;
    std::optional<double> rmse_pct_train;
    std::optional<double> r2_train;
    bool time_diff_dropped = false;

    std::optional<double> coefficient(std::string_view predictor) const;
};

struct LabeledUnit {
    std::string id;
    als::MetricsVector metrics;
    AttributeVector attributes;
};

// OLS via column-pivoted QR. Units whose response is undefined are skipped.
// Does not apply the time_diff sign rule.
FittedModel ols_fit_unchecked(std::span<const LabeledUnit> units, const ModelSpec& spec);

// Drops time_diff and refits when its fitted sign contradicts the
// expectation. Identity for models without time_diff.
FittedModel apply_time_diff_rule(const FittedModel& model, std::span<const LabeledUnit> units);

// ols_fit_unchecked followed by apply_time_diff_rule.
FittedModel ols_fit(std::span<const LabeledUnit> units, const ModelSpec& spec);

// intercept + sum of coefficient * predictor; no clamping.
double predict(const FittedModel& model, const als::MetricsVector& metrics);

std::optional<double> r2_pred(std::span<const double> observed, std::span<const double> predicted);
double rmse(std::span<const double> observed, std::span<const double> predicted);
std::optional<double> rmse_pct(std::span<const double> observed, std::span<const double> predicted);
// Mean of observed minus predicted.
double me(std::span<const double> observed, std::span<const double> predicted);
std::optional<double> me_pct(std::span<const double> observed, std::span<const double> predicted);

// ---------------------------------------------------------------------------
// Stratified evaluation

struct EvalPlot {
    std::string id;
    double observed = 0.0;
    double predicted = 0.0;
    DomainLabels labels;
    std::optional<Maturity> maturity;
    std::optional<Species> dominant;
};

enum class Dataset { ALL, PROD, UPROD };
std::string_view to_string(Dataset d) noexcept;

struct EvalRow {
    Dataset dataset = Dataset::ALL;
    std::optional<Maturity> maturity;  // empty: pooled M2-M5
    std::optional<Species> species;    // empty: all species
    std::size_t n = 0;
    double rmse = 0.0;
    std::optional<double> rmse_pct;
    double me = 0.0;
    std::optional<double> me_pct;
    std::optional<double> r2_pred;
    bool low_n = false;
};

struct EvalOptions {
    std::size_t min_n = 10;
    bool by_species = true;  // species rows for the ALL dataset
};

struct EvalReport {
    Attribute attribute = Attribute::V;
    std::vector<EvalRow> rows;

    const EvalRow* find(Dataset d, std::optional<Maturity> m, std::optional<Species> s = std::nullopt) const;
};

// One row per non-empty dataset x maturity (x species for ALL) stratum and
// pooled M2-M5 rows. Plots outside the ALL dataset never enter a row.
EvalReport stratified_evaluate(std::span<const EvalPlot> plots, Attribute attribute, const EvalOptions& options = {});

void write_eval_csv(std::ostream& out, std::span<const EvalReport> reports);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const FittedModel& model);
FittedModel model_from_json(const nlohmann::json& j);
void write_models(std::ostream& out, std::span<const FittedModel> models);
std::vector<FittedModel> read_models(std::istream& in);

}  // namespace aba::regression
