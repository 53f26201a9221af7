#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/regression.hpp"

namespace aba::regression {

namespace {

std::string opt(const std::optional<double>& v) { return v ? csv::format(*v) : "NA"; }

}  // namespace

void write_eval_csv(std::ostream& out, std::span<const EvalReport> reports) {
    out << "attribute,dataset,maturity,species,n,rmse,rmse_pct,me,me_pct,r2_pred,low_n\n";
    for (const auto& rep : reports)
        for (const auto& r : rep.rows) {
            out << to_string(rep.attribute) << ',' << to_string(r.dataset) << ','
                << (r.maturity ? std::string(to_string(*r.maturity)) : "M2-M5") << ','
                << (r.species ? std::string(to_string(*r.species)) : "all") << ',' << r.n << ','
                << csv::format(r.rmse) << ',' << opt(r.rmse_pct) << ',' << csv::format(r.me) << ','
                << opt(r.me_pct) << ',' << opt(r.r2_pred) << ',' << (r.low_n ? 1 : 0) << '\n';
        }
}

nlohmann::json to_json(const FittedModel& m) {
    using nlohmann::json;
    json coefficients = json::object(), se = json::object(), p = json::object();
    for (std::size_t j = 0; j < m.spec.predictors.size(); ++j) {
        coefficients[m.spec.predictors[j]] = m.coefficients[j];
        se[m.spec.predictors[j]] = m.se[j];
        p[m.spec.predictors[j]] = m.p[j];
    }
    auto opt_json = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    return json{{"response", to_string(m.spec.response)},
                {"predictors", m.spec.predictors},
                {"expected_time_diff_sign", m.spec.expected_time_diff_sign == Sign::Positive ? "positive" : "negative"},
                {"intercept", m.intercept},
                {"intercept_se", m.intercept_se},
                {"intercept_p", m.intercept_p},
                {"coefficients", coefficients},
                {"se", se},
                {"p", p},
                {"n", m.n},
                {"rmse_train", m.rmse_train},
                {"rmse_pct_train", opt_json(m.rmse_pct_train)},
                {"r2_train", opt_json(m.r2_train)},
                {"time_diff_dropped", m.time_diff_dropped}};
}

FittedModel model_from_json(const nlohmann::json& j) {
    try {
        FittedModel m;
        const auto response = parse_attribute(j.at("response").get<std::string>());
        if (!response) throw ConfigError("unknown response '" + j.at("response").get<std::string>() + "'");
        m.spec.response = *response;
        m.spec.predictors = j.at("predictors").get<std::vector<std::string>>();
        m.spec.expected_time_diff_sign =
            j.value("expected_time_diff_sign", std::string("positive")) == "negative" ? Sign::Negative : Sign::Positive;
        m.spec.validate();
        m.intercept = j.at("intercept").get<double>();
        m.intercept_se = j.value("intercept_se", 0.0);
        m.intercept_p = j.value("intercept_p", 1.0);
        for (const auto& name : m.spec.predictors) {
            m.coefficients.push_back(j.at("coefficients").at(name).get<double>());
            m.se.push_back(j.contains("se") ? j["se"].value(name, 0.0) : 0.0);
            m.p.push_back(j.contains("p") ? j["p"].value(name, 1.0) : 1.0);
        }
        m.n = j.value("n", std::size_t{0});
        m.rmse_train = j.value("rmse_train", 0.0);
        if (j.contains("rmse_pct_train") && !j["rmse_pct_train"].is_null())
            m.rmse_pct_train = j["rmse_pct_train"].get<double>();
        if (j.contains("r2_train") && !j["r2_train"].is_null()) m.r2_train = j["r2_train"].get<double>();
        m.time_diff_dropped = j.value("time_diff_dropped", false);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model JSON: ") + e.what());
    }
}

void write_models(std::ostream& out, std::span<const FittedModel> models) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : models) arr.push_back(to_json(m));
    out << arr.dump(2) << '\n';
}

std::vector<FittedModel> read_models(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model JSON: ") + e.what());
    }
    std::vector<FittedModel> out;
    if (j.is_array())
        for (const auto& m : j) out.push_back(model_from_json(m));
    else
        out.push_back(model_from_json(j));
    return out;
}

}  // namespace aba::regression
