#include "aba/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <nlohmann/json.hpp>
#include <ostream>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/numeric.hpp"

namespace aba::estimation {

std::string_view to_string(Estimator e) noexcept { return e == Estimator::Direct ? "direct" : "ma"; }

namespace {

bool counts(const SamplePlot& p, const EstimationOptions& o) { return p.forest_indicator && (!o.require_hl_defined || p.hl_defined); }

// Plot order fixed by id so sums do not depend on input order.
std::vector<const SamplePlot*> ordered(std::span<const SamplePlot> sample) {
    std::vector<const SamplePlot*> out;
    out.reserve(sample.size());
    for (const auto& p : sample) out.push_back(&p);
    std::stable_sort(out.begin(), out.end(), [](const SamplePlot* a, const SamplePlot* b) { return a->id < b->id; });
    return out;
}

void finish(EstimateResult& r) {
    r.se = standard_error(r.variance);
    r.two_se_pct = two_se_pct(r.se, r.mu_hat);
}

}  // namespace

double srs_variance(std::span<const double> z, std::size_t n_s, std::size_t n_forest) {
    if (n_s < 2) throw EstimationError("SRS variance needs at least 2 sample plots");
    if (n_forest < 1) throw EstimationError("SRS variance needs at least 1 forest plot");
    CompensatedSum s;
    for (double v : z) s += v * v;
    const double ns = static_cast<double>(n_s);
    const double frac = static_cast<double>(n_forest) / ns;
    return s.value() / (frac * frac) / (ns * (ns - 1.0));
}

double standard_error(double variance) {
    if (!(variance >= 0.0)) throw EstimationError("negative variance");
    return std::sqrt(variance);
}

std::optional<double> two_se_pct(double se, double mu_hat) noexcept {
    if (mu_hat == 0.0) return std::nullopt;
    return 200.0 * se / mu_hat;
}

EstimateResult direct_estimate(std::span<const SamplePlot> sample, const EstimationOptions& options) {
    const auto plots = ordered(sample);
    CompensatedSum sy;
    std::size_t nf = 0;
    for (const auto* p : plots) {
        if (!counts(*p, options)) continue;
        if (!p->y) throw EstimationError("forest plot '" + p->id + "' has no observed value");
        sy += *p->y;
        ++nf;
    }
    if (nf == 0) throw EstimationError("sample has no forest plots");
    EstimateResult r;
    r.estimator = Estimator::Direct;
    r.n_s = plots.size();
    r.n_forest = nf;
    r.mu_hat = sy.value() / static_cast<double>(nf);
    std::vector<double> z;
    z.reserve(plots.size());
    for (const auto* p : plots) z.push_back(counts(*p, options) ? *p->y - r.mu_hat : 0.0);
    r.variance = srs_variance(z, r.n_s, r.n_forest);
    finish(r);
    return r;
}

EstimateResult ma_estimate(std::span<const SamplePlot> sample, double mu_syn, const EstimationOptions& options) {
    const auto plots = ordered(sample);
    std::vector<double> e(plots.size(), 0.0);
    CompensatedSum se, sy;
    std::size_t nf = 0;
    for (std::size_t i = 0; i < plots.size(); ++i) {
        const auto* p = plots[i];
        if (!counts(*p, options)) continue;
        if (!p->y) throw EstimationError("forest plot '" + p->id + "' has no observed value");
        if (!p->y_hat) throw EstimationError("forest plot '" + p->id + "' has no prediction");
        e[i] = *p->y - *p->y_hat;
        se += e[i];
        sy += *p->y;
        ++nf;
    }
    if (nf == 0) throw EstimationError("sample has no forest plots");
    EstimateResult r;
    r.estimator = Estimator::MA;
    r.n_s = plots.size();
    r.n_forest = nf;
    const double mu_cor = se.value() / static_cast<double>(nf);
    const double mu_direct = sy.value() / static_cast<double>(nf);
    r.mu_syn = mu_syn;
    r.mu_cor = mu_cor;
    if (mu_direct != 0.0) r.mu_cor_pct = 100.0 * mu_cor / mu_direct;
    r.mu_hat = mu_syn + mu_cor;
    std::vector<double> z(plots.size(), 0.0);
    for (std::size_t i = 0; i < plots.size(); ++i)
        if (counts(*plots[i], options)) z[i] = e[i] - mu_cor;
    r.variance = srs_variance(z, r.n_s, r.n_forest);
    finish(r);
    return r;
}

double relative_efficiency(double var_direct, double var_ma) {
    if (var_ma == 0.0) return std::numeric_limits<double>::infinity();
    return var_direct / var_ma;
}

std::size_t equivalent_sample_size(std::size_t n_s, double re) {
    if (!(re > 0.0)) throw EstimationError("relative efficiency must be positive");
    return static_cast<std::size_t>(std::llround(static_cast<double>(n_s) * re));
}

std::vector<SamplePlot> read_sample_csv(std::istream& in) {
    csv::Reader rd(in);
    if (!rd.has_header()) throw ParseError("missing header", rd.line());
    const auto c_id = rd.column("plot_id");
    const auto c_y = rd.column("y");
    const auto c_yhat = rd.find_column("y_hat");
    const auto c_forest = rd.column("forest_indicator");
    const auto c_hl = rd.find_column("hl_defined");
    std::vector<SamplePlot> out;
    std::vector<std::string> f;
    while (rd.next(f)) {
        if (f.size() < rd.header().size()) throw ParseError("expected " + std::to_string(rd.header().size()) + " fields", rd.line());
        SamplePlot p;
        p.id = f[c_id];
        p.y = csv::to_optional_double(f[c_y], rd.line());
        if (c_yhat) p.y_hat = csv::to_optional_double(f[*c_yhat], rd.line());
        const auto flag = [&](std::size_t c) {
            const auto v = csv::to_int(f[c], rd.line());
            if (v != 0 && v != 1) throw ParseError("indicator must be 0 or 1", rd.line());
            return v == 1;
        };
        p.forest_indicator = flag(c_forest);
        if (c_hl) p.hl_defined = flag(*c_hl);
        if (p.forest_indicator && !p.y) throw ParseError("forest plot without y", rd.line());
        out.push_back(std::move(p));
    }
    return out;
}

void write_sample_csv(std::ostream& out, std::span<const SamplePlot> sample) {
    out << "plot_id,y,y_hat,forest_indicator,hl_defined\n";
    auto opt = [](const std::optional<double>& v) { return v ? csv::format(*v) : std::string("NA"); };
    for (const auto& p : sample)
        out << p.id << ',' << opt(p.y) << ',' << opt(p.y_hat) << ',' << (p.forest_indicator ? 1 : 0) << ','
            << (p.hl_defined ? 1 : 0) << '\n';
}

nlohmann::json to_json(const EstimateResult& r) {
    using nlohmann::json;
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json re = nullptr;
    if (r.re) re = std::isinf(*r.re) ? json("inf") : json(*r.re);
    return json{{"estimator", to_string(r.estimator)},
                {"mu_hat", r.mu_hat},
                {"variance", r.variance},
                {"se", r.se},
                {"two_se_pct", opt(r.two_se_pct)},
                {"mu_cor", opt(r.mu_cor)},
                {"mu_cor_pct", opt(r.mu_cor_pct)},
                {"mu_syn", opt(r.mu_syn)},
                {"n_s", r.n_s},
                {"n_forest", r.n_forest},
                {"re", re}};
}

}  // namespace aba::estimation
