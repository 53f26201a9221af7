#include "aba/als.hpp"

#include <algorithm>
#include <cmath>

#include "aba/error.hpp"
#include "aba/numeric.hpp"

namespace aba::als {

std::optional<double> TerrainRaster::sample(double x, double y) const {
    if (ncols == 0 || nrows == 0) return std::nullopt;
    // Fractional position in cell-centre coordinates; column 0 centre at 0.
    const double fc = (x - x_ll) / cell_size - 0.5;
    const double fr_from_bottom = (y - y_ll) / cell_size - 0.5;
    const double max_c = static_cast<double>(ncols) - 1.0;
    const double max_r = static_cast<double>(nrows) - 1.0;
    if (fc < -1.5 || fc > max_c + 1.5 || fr_from_bottom < -1.5 || fr_from_bottom > max_r + 1.5) return std::nullopt;

    const double c = std::clamp(fc, 0.0, max_c);
    const double rb = std::clamp(fr_from_bottom, 0.0, max_r);
    const auto c0 = static_cast<std::size_t>(std::floor(c));
    const auto rb0 = static_cast<std::size_t>(std::floor(rb));
    const std::size_t c1 = std::min(c0 + 1, ncols - 1);
    const std::size_t rb1 = std::min(rb0 + 1, nrows - 1);
    const double tx = c - static_cast<double>(c0);
    const double ty = rb - static_cast<double>(rb0);

    auto cell = [&](std::size_t row_from_bottom, std::size_t col) { return at(nrows - 1 - row_from_bottom, col); };
    const double z00 = cell(rb0, c0), z10 = cell(rb0, c1), z01 = cell(rb1, c0), z11 = cell(rb1, c1);
    if (is_nodata(z00) || is_nodata(z10) || is_nodata(z01) || is_nodata(z11)) return std::nullopt;
    const double bottom = z00 + tx * (z10 - z00);
    const double top = z01 + tx * (z11 - z01);
    return bottom + ty * (top - bottom);
}

NormalizeResult normalize_heights(std::span<const Echo> echoes, const TerrainRaster& terrain) {
    if (!(terrain.cell_size > 0.0)) throw DomainError("terrain cell size must be positive");
    NormalizeResult out;
    out.echoes.reserve(echoes.size());
    const double max_x = terrain.x_ll + terrain.cell_size * static_cast<double>(terrain.ncols);
    const double max_y = terrain.y_ll + terrain.cell_size * static_cast<double>(terrain.nrows);
    for (const Echo& e : echoes) {
        const bool near = e.x >= terrain.x_ll - terrain.cell_size && e.x <= max_x + terrain.cell_size &&
                          e.y >= terrain.y_ll - terrain.cell_size && e.y <= max_y + terrain.cell_size;
        if (!near) {
            ++out.dropped_outside;
            continue;
        }
        const auto ground = terrain.sample(e.x, e.y);
        if (!ground) {
            ++out.dropped_nodata;
            continue;
        }
        Echo n = e;
        n.z = std::max(0.0, e.z - *ground);
        out.echoes.push_back(n);
    }
    return out;
}

std::vector<Echo> clip(std::span<const Echo> echoes, const geom::Shape& shape) {
    if (!(geom::area(shape) > 0.0)) throw DomainError("clip geometry has zero area");
    const auto box = geom::bounds(shape);
    std::vector<Echo> kept;
    for (const Echo& e : echoes) {
        if (e.x < box.min_x || e.x > box.max_x || e.y < box.min_y || e.y > box.max_y) continue;
        if (geom::contains(shape, {e.x, e.y})) kept.push_back(e);
    }
    return kept;
}

std::optional<MetricsVector> compute_metrics(std::span<const Echo> echoes, int reference_year, int acquisition_year,
                                             const MetricsOptions& options) {
    std::vector<double> z;
    z.reserve(echoes.size());
    for (const Echo& e : echoes)
        if (e.return_number == 1) z.push_back(e.z);
    if (z.empty()) return std::nullopt;
    std::sort(z.begin(), z.end());

    const auto n = static_cast<double>(z.size());
    MetricsVector m;
    m.n_first_echoes = z.size();
    m.hmean = compensated_sum(z) / n;
    if (z.size() > 1) {
        CompensatedSum ss;
        for (double v : z) ss += (v - m.hmean) * (v - m.hmean);
        m.hvar = ss.value() / (n - 1.0);
    } else {
        m.low_count = true;
    }
    m.h10 = quantile_sorted(z, 0.10);
    m.h25 = quantile_sorted(z, 0.25);
    m.h50 = quantile_sorted(z, 0.50);
    m.h75 = quantile_sorted(z, 0.75);
    m.h95 = quantile_sorted(z, 0.95);
    const auto above = static_cast<double>(z.end() - std::upper_bound(z.begin(), z.end(), options.d2_threshold_m));
    m.d2 = above / n;
    m.time_diff = growing_seasons(reference_year, acquisition_year);
    return m;
}

bool is_metric_name(std::string_view name) noexcept {
    return std::find(std::begin(kMetricNames), std::end(kMetricNames), name) != std::end(kMetricNames);
}

std::optional<double> metric_value(const MetricsVector& m, std::string_view name) noexcept {
    if (name == "hmean") return m.hmean;
    if (name == "hvar") return m.hvar;
    if (name == "h10") return m.h10;
    if (name == "h25") return m.h25;
    if (name == "h50") return m.h50;
    if (name == "h75") return m.h75;
    if (name == "h95") return m.h95;
    if (name == "d2") return m.d2;
    if (name == "time_diff") return static_cast<double>(m.time_diff);
    return std::nullopt;
}

bool set_metric(MetricsVector& m, std::string_view name, double value) noexcept {
    if (name == "hmean") m.hmean = value;
    else if (name == "hvar") m.hvar = value;
    else if (name == "h10") m.h10 = value;
    else if (name == "h25") m.h25 = value;
    else if (name == "h50") m.h50 = value;
    else if (name == "h75") m.h75 = value;
    else if (name == "h95") m.h95 = value;
    else if (name == "d2") m.d2 = value;
    else if (name == "time_diff") m.time_diff = static_cast<int>(std::lround(value));
    else return false;
    return true;
}

}  // namespace aba::als
