#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace aba::estimation {

struct SamplePlot {
    std::string id;
    std::optional<double> y;
    std::optional<double> y_hat;
    bool forest_indicator = false;  // I_j
    bool hl_defined = true;
};

enum class Estimator { Direct, MA };
std::string_view to_string(Estimator e) noexcept;

struct EstimateResult {
    Estimator estimator = Estimator::Direct;
    double mu_hat = 0.0;
    double variance = 0.0;
    double se = 0.0;
    std::optional<double> two_se_pct;  // empty when mu_hat = 0
    std::optional<double> mu_cor;      // MA only
    std::optional<double> mu_cor_pct;  // 100 * mu_cor / direct estimate, MA only
    std::optional<double> mu_syn;      // MA only
    std::size_t n_s = 0;
    std::size_t n_forest = 0;
    std::optional<double> re;  // direct over MA variance; +inf for a perfect model
};

struct EstimationOptions {
    // Restrict I_j to plots with measured trees, as for Lorey's height.
    bool require_hl_defined = false;
};

// sum(y I) / sum(I) with the SRS ratio variance of z = (y - mu) I.
EstimateResult direct_estimate(std::span<const SamplePlot> sample, const EstimationOptions& options = {});

// (n_s / n_forest)^2 / (n_s (n_s - 1)) * sum(z^2).
double srs_variance(std::span<const double> z, std::size_t n_s, std::size_t n_forest);

double standard_error(double variance);
std::optional<double> two_se_pct(double se, double mu_hat) noexcept;

// mu_syn + mean forest residual e = y - y_hat; variance of z = (e - mean e) I.
EstimateResult ma_estimate(std::span<const SamplePlot> sample, double mu_syn, const EstimationOptions& options = {});

// var_direct / var_ma; +inf when var_ma is 0.
double relative_efficiency(double var_direct, double var_ma);
std::size_t equivalent_sample_size(std::size_t n_s, double re);

// `plot_id,y,y_hat,forest_indicator,hl_defined`; y and y_hat accept NA or an
// empty field, hl_defined defaults to 1 when the column is absent.
std::vector<SamplePlot> read_sample_csv(std::istream& in);
void write_sample_csv(std::ostream& out, std::span<const SamplePlot> sample);

// {estimator, mu_hat, variance, se, two_se_pct, mu_cor, mu_cor_pct, mu_syn,
// n_s, n_forest, re}; undefined values are null and an infinite RE is "inf".
nlohmann::json to_json(const EstimateResult& r);

}  // namespace aba::estimation
