#include "aba/regression.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <set>

#include "aba/error.hpp"
#include "aba/numeric.hpp"

namespace aba::regression {

bool ModelSpec::use_time_diff() const noexcept {
    return std::find(predictors.begin(), predictors.end(), kTimeDiff) != predictors.end();
}

void ModelSpec::validate() const {
    if (predictors.empty()) throw ConfigError("model for " + std::string(to_string(response)) + " has no predictors");
    std::set<std::string> seen;
    for (const auto& p : predictors) {
        if (!als::is_metric_name(p)) throw ConfigError("unknown predictor '" + p + "'");
        if (!seen.insert(p).second) throw ConfigError("duplicate predictor '" + p + "'");
    }
}

ModelSpec default_spec(Attribute response) {
    ModelSpec s;
    s.response = response;
    s.expected_time_diff_sign = Sign::Positive;
    switch (response) {
        case Attribute::HL: s.predictors = {"h95", "hmean", "time_diff"}; break;
        case Attribute::V: s.predictors = {"hmean", "time_diff", "d2"}; break;
        case Attribute::N: s.predictors = {"hmean", "d2"}; break;
        case Attribute::AGB: s.predictors = {"hmean", "d2", "time_diff"}; break;
        case Attribute::G: s.predictors = {"hmean", "d2", "time_diff"}; break;
        case Attribute::QMD: s.predictors = {"hmean", "d2", "h95"}; break;
    }
    return s;
}

std::optional<double> FittedModel::coefficient(std::string_view predictor) const {
    for (std::size_t i = 0; i < spec.predictors.size(); ++i)
        if (spec.predictors[i] == predictor) return coefficients[i];
    return std::nullopt;
}

namespace {

double two_sided_p(double t, double df) {
    if (std::isnan(t)) return 1.0;
    if (std::isinf(t)) return 0.0;
    boost::math::students_t dist(df);
    return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

}  // namespace

FittedModel ols_fit_unchecked(std::span<const LabeledUnit> units, const ModelSpec& spec) {
    spec.validate();
    const std::size_t p = spec.predictors.size();

    std::vector<const LabeledUnit*> rows;
    rows.reserve(units.size());
    for (const auto& u : units)
        if (get(u.attributes, spec.response)) rows.push_back(&u);
    const std::size_t n = rows.size();
    if (n <= p + 1)
        throw FitError("model for " + std::string(to_string(spec.response)) + " needs more than " +
                       std::to_string(p + 1) + " units, got " + std::to_string(n));

    Eigen::MatrixXd X(n, p + 1);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        for (std::size_t j = 0; j < p; ++j) X(i, j + 1) = *als::metric_value(rows[i]->metrics, spec.predictors[j]);
        y(i) = *get(rows[i]->attributes, spec.response);
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    const double max_norm = X.colwise().norm().maxCoeff();
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p + 1, p + 1).triangularView<Eigen::Upper>();
    std::size_t rank = 0;
    for (std::size_t i = 0; i <= p; ++i)
        if (std::abs(R(i, i)) > 1e-10 * max_norm) ++rank;
    if (rank < p + 1) {
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (std::size_t i = rank; i <= p; ++i) {
            const auto col = static_cast<std::size_t>(perm(static_cast<Eigen::Index>(i)));
            names += (names.empty() ? "" : ", ") + (col == 0 ? std::string("(Intercept)") : spec.predictors[col - 1]);
        }
        throw FitError("design matrix is rank deficient; collinear columns: " + names);
    }

    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;
    const double df = static_cast<double>(n - p - 1);
    CompensatedSum rss;
    for (Eigen::Index i = 0; i < resid.size(); ++i) rss += resid(i) * resid(i);
    const double sigma2 = rss.value() / df;

    // (X'X)^-1 = P R^-1 R^-T P'
    const Eigen::MatrixXd Rinv =
        R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(p + 1),
                                                                          static_cast<Eigen::Index>(p + 1)));
    const Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
    const auto& perm = qr.colsPermutation();
    const Eigen::MatrixXd cov = perm * cov_perm * perm.transpose();

    FittedModel m;
    m.spec = spec;
    m.n = n;
    m.intercept = beta(0);
    m.intercept_se = std::sqrt(sigma2 * cov(0, 0));
    m.intercept_p = two_sided_p(m.intercept_se > 0 ? m.intercept / m.intercept_se : (m.intercept == 0 ? NAN : INFINITY), df);
    for (std::size_t j = 0; j < p; ++j) {
        const auto k = static_cast<Eigen::Index>(j + 1);
        const double b = beta(k);
        const double s = std::sqrt(sigma2 * cov(k, k));
        m.coefficients.push_back(b);
        m.se.push_back(s);
        m.p.push_back(two_sided_p(s > 0 ? b / s : (b == 0 ? NAN : INFINITY), df));
    }

    std::vector<double> obs(n), fit(n);
    for (std::size_t i = 0; i < n; ++i) {
        obs[i] = y(static_cast<Eigen::Index>(i));
        fit[i] = predict(m, rows[i]->metrics);
    }
    m.rmse_train = rmse(obs, fit);
    m.rmse_pct_train = rmse_pct(obs, fit);
    m.r2_train = r2_pred(obs, fit);
    return m;
}

FittedModel apply_time_diff_rule(const FittedModel& model, std::span<const LabeledUnit> units) {
    const auto coef = model.coefficient(kTimeDiff);
    if (!coef) return model;
    const bool contradicts = model.spec.expected_time_diff_sign == Sign::Positive ? *coef < 0.0 : *coef > 0.0;
    if (!contradicts) return model;
    ModelSpec reduced = model.spec;
    std::erase(reduced.predictors, std::string(kTimeDiff));
    FittedModel refit = ols_fit_unchecked(units, reduced);
    refit.time_diff_dropped = true;
    return refit;
}

FittedModel ols_fit(std::span<const LabeledUnit> units, const ModelSpec& spec) {
    return apply_time_diff_rule(ols_fit_unchecked(units, spec), units);
}

double predict(const FittedModel& model, const als::MetricsVector& metrics) {
    if (model.coefficients.size() != model.spec.predictors.size())
        throw PredictionError("model coefficient count does not match its predictors");
    double y = model.intercept;
    for (std::size_t j = 0; j < model.coefficients.size(); ++j) {
        const auto v = als::metric_value(metrics, model.spec.predictors[j]);
        if (!v) throw PredictionError("missing predictor '" + model.spec.predictors[j] + "'");
        y += model.coefficients[j] * *v;
    }
    return y;
}

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DomainError("observed and predicted differ in length");
    if (a.empty()) throw DomainError("no observations");
}

double mean(std::span<const double> xs) { return compensated_sum(xs) / static_cast<double>(xs.size()); }

}  // namespace

std::optional<double> r2_pred(std::span<const double> obs, std::span<const double> pred) {
    check_pair(obs, pred);
    const double ybar = mean(obs);
    CompensatedSum sse, sst;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        sse += (obs[i] - pred[i]) * (obs[i] - pred[i]);
        sst += (obs[i] - ybar) * (obs[i] - ybar);
    }
    if (obs.size() < 2 || sst.value() == 0.0) return std::nullopt;
    return 1.0 - sse.value() / sst.value();
}

double rmse(std::span<const double> obs, std::span<const double> pred) {
    check_pair(obs, pred);
    CompensatedSum sse;
    for (std::size_t i = 0; i < obs.size(); ++i) sse += (obs[i] - pred[i]) * (obs[i] - pred[i]);
    return std::sqrt(sse.value() / static_cast<double>(obs.size()));
}

std::optional<double> rmse_pct(std::span<const double> obs, std::span<const double> pred) {
    const double r = rmse(obs, pred);
    const double ybar = mean(obs);
    if (ybar == 0.0) return std::nullopt;
    return 100.0 * r / ybar;
}

double me(std::span<const double> obs, std::span<const double> pred) {
    check_pair(obs, pred);
    CompensatedSum s;
    for (std::size_t i = 0; i < obs.size(); ++i) s += obs[i] - pred[i];
    return s.value() / static_cast<double>(obs.size());
}

std::optional<double> me_pct(std::span<const double> obs, std::span<const double> pred) {
    const double e = me(obs, pred);
    const double ybar = mean(obs);
    if (ybar == 0.0) return std::nullopt;
    return 100.0 * e / ybar;
}

std::string_view to_string(Dataset d) noexcept {
    switch (d) {
        case Dataset::ALL: return "ALL";
        case Dataset::PROD: return "PROD";
        case Dataset::UPROD: return "UPROD";
    }
    return "ALL";
}

const EvalRow* EvalReport::find(Dataset d, std::optional<Maturity> m, std::optional<Species> s) const {
    for (const auto& r : rows)
        if (r.dataset == d && r.maturity == m && r.species == s) return &r;
    return nullptr;
}

EvalReport stratified_evaluate(std::span<const EvalPlot> plots, Attribute attribute, const EvalOptions& options) {
    EvalReport report;
    report.attribute = attribute;

    auto in_dataset = [](const EvalPlot& p, Dataset d) {
        if (!p.labels.all) return false;
        switch (d) {
            case Dataset::ALL: return true;
            case Dataset::PROD: return p.labels.prod;
            case Dataset::UPROD: return p.labels.uprod;
        }
        return false;
    };
    auto emit = [&](Dataset d, std::optional<Maturity> m, std::optional<Species> s) {
        std::vector<double> obs, pred;
        for (const auto& p : plots) {
            if (!in_dataset(p, d)) continue;
            if (m && p.maturity != m) continue;
            if (s && p.dominant != s) continue;
            obs.push_back(p.observed);
            pred.push_back(p.predicted);
        }
        if (obs.empty()) return;
        EvalRow row;
        row.dataset = d;
        row.maturity = m;
        row.species = s;
        row.n = obs.size();
        row.rmse = rmse(obs, pred);
        row.rmse_pct = rmse_pct(obs, pred);
        row.me = me(obs, pred);
        row.me_pct = me_pct(obs, pred);
        row.r2_pred = r2_pred(obs, pred);
        row.low_n = row.n < options.min_n;
        report.rows.push_back(row);
    };

    static constexpr Maturity kClasses[] = {Maturity::M2, Maturity::M3, Maturity::M4, Maturity::M5};
    for (Dataset d : {Dataset::ALL, Dataset::PROD, Dataset::UPROD}) {
        for (Maturity m : kClasses) emit(d, m, std::nullopt);
        emit(d, std::nullopt, std::nullopt);
    }
    if (options.by_species)
        for (Species s : kAllSpecies) {
            for (Maturity m : kClasses) emit(Dataset::ALL, m, s);
            emit(Dataset::ALL, std::nullopt, s);
        }
    return report;
}

}  // namespace aba::regression
