#include "aba/harvester.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "aba/csv.hpp"
#include "aba/error.hpp"
#include "aba/random.hpp"

namespace aba::harvester {

namespace {

constexpr const char* kFixedColumns[] = {"tree_id",         "species",      "x", "y", "positioning_mode",
                                         "harvest_year", "base_height_m"};
constexpr std::size_t kNumFixed = 7;

Positioning parse_positioning(std::string_view s, std::size_t line) {
    std::string l(s);
    std::transform(l.begin(), l.end(), l.begin(), [](unsigned char c) { return std::tolower(c); });
    if (l == "boom") return Positioning::Boom;
    if (l == "machine") return Positioning::Machine;
    throw ParseError("unknown positioning mode '" + std::string(s) + "'", line);
}

}  // namespace

ParseResult parse_harvester(std::istream& in) {
    csv::Reader reader(in);
    if (!reader.has_header()) throw ParseError("harvester file has no header", 1);
    const auto& header = reader.header();
    if (header.size() < kNumFixed + 1) throw ParseError("harvester header lacks diameter columns", reader.line());
    for (std::size_t i = 0; i < kNumFixed; ++i)
        if (header[i] != kFixedColumns[i])
            throw ParseError("harvester header column " + std::to_string(i + 1) + " must be '" + kFixedColumns[i] + "'",
                             reader.line());

    ParseResult result;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        while (f.size() > kNumFixed && f.back().empty()) f.pop_back();
        if (f.size() < kNumFixed + 1)
            throw ParseError("expected at least " + std::to_string(kNumFixed + 1) + " columns, got " +
                                 std::to_string(f.size()),
                             line);
        StemProfile row;
        try {
            row.tree_id = f[0];
            bool known = true;
            row.species = parse_species(f[1], &known);
            row.x = csv::to_double(f[2], line);
            row.y = csv::to_double(f[3], line);
            row.positioning = parse_positioning(f[4], line);
            row.harvest_year = static_cast<int>(csv::to_int(f[5], line));
            row.base_height_m = csv::to_double(f[6], line);
            if (!(row.base_height_m >= 0.0)) throw ParseError("negative base height", line);
            for (std::size_t i = kNumFixed; i < f.size(); ++i) {
                const double d = csv::to_double(f[i], line);
                if (!(d > 0.0)) throw ParseError("diameter must be positive", line);
                row.diameters_mm.push_back(d);
            }
        } catch (const ParseError& e) {
            result.rejected.push_back({line, e.what()});
            continue;
        }

        if (!result.profiles.empty() && result.profiles.back().tree_id == row.tree_id) {
            auto& prev = result.profiles.back();
            const double expected = prev.height_at(prev.diameters_mm.size());
            if (std::abs(row.base_height_m - expected) > 1e-6) {
                result.rejected.push_back({line, "height grid does not continue the previous row of tree " +
                                                     row.tree_id});
                continue;
            }
            prev.diameters_mm.insert(prev.diameters_mm.end(), row.diameters_mm.begin(), row.diameters_mm.end());
            continue;
        }
        result.profiles.push_back(std::move(row));
    }
    return result;
}

ParseResult parse_harvester_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open harvester file " + path, 0);
    return parse_harvester(in);
}

void write_harvester(std::ostream& out, std::span<const StemProfile> profiles) {
    std::size_t width = 1;
    for (const auto& p : profiles) width = std::max(width, p.diameters_mm.size());
    for (std::size_t i = 0; i < kNumFixed; ++i) out << kFixedColumns[i] << ',';
    for (std::size_t i = 0; i < width; ++i) out << 'd' << (i + 1) << (i + 1 < width ? "," : "\n");
    for (const auto& p : profiles) {
        out << p.tree_id << ',' << to_string(p.species) << ',' << csv::format(p.x) << ',' << csv::format(p.y) << ','
            << (p.positioning == Positioning::Boom ? "boom" : "machine") << ',' << p.harvest_year << ','
            << csv::format(p.base_height_m);
        for (double d : p.diameters_mm) out << ',' << csv::format(d);
        out << '\n';
    }
}

std::vector<StemProfile> jitter_positions(std::vector<StemProfile> profiles, double amplitude_m, std::uint64_t seed) {
    if (!(amplitude_m >= 0.0)) throw DomainError("jitter amplitude must be non-negative");
    for (auto& p : profiles) {
        if (p.positioning != Positioning::Machine || amplitude_m == 0.0) continue;
        Rng rng(derive_seed(seed, fnv1a(p.tree_id)));
        p.x += rng.uniform(-amplitude_m, amplitude_m);
        p.y += rng.uniform(-amplitude_m, amplitude_m);
    }
    return profiles;
}

std::vector<double> median3(std::span<const double> xs) {
    std::vector<double> out(xs.begin(), xs.end());
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        const double a = xs[i - 1], b = xs[i], c = xs[i + 1];
        out[i] = std::max(std::min(a, b), std::min(std::max(a, b), c));
    }
    return out;
}

namespace {

std::vector<double> profile_cm(const StemProfile& p, bool smooth) {
    std::vector<double> d(p.diameters_mm.size());
    std::transform(p.diameters_mm.begin(), p.diameters_mm.end(), d.begin(), [](double mm) { return mm / 10.0; });
    return smooth ? median3(d) : d;
}

// Straight line through the upper half of the profile, extended to zero.
double start_height(std::span<const double> h, std::span<const double> d, double top, double fallback_slope) {
    const std::size_t from = d.size() / 2;
    double sh = 0, sd = 0, shh = 0, shd = 0;
    const double m = static_cast<double>(d.size() - from);
    for (std::size_t i = from; i < d.size(); ++i) {
        sh += h[i];
        sd += d[i];
        shh += h[i] * h[i];
        shd += h[i] * d[i];
    }
    const double denom = m * shh - sh * sh;
    const double slope = denom != 0.0 ? (m * shd - sh * sd) / denom : 0.0;
    const double icpt = (sd - slope * sh) / m;
    const double H = slope < 0.0 ? -icpt / slope : top + d.back() * fallback_slope;
    return std::max(H, top + 0.1);
}

// Power taper with dbh, height and exponent all free, by damped
// Gauss-Newton. Empty when the fit does not converge.
std::optional<Taper> fit_free_taper(std::span<const double> h, std::span<const double> d, double dbh0,
                                    const ReconstructionOptions& o) {
    const double bh = kBreastHeightM;
    const double top = h.back();
    const double h_floor = std::max(top, bh) + 1e-6;
    Eigen::Vector3d theta(dbh0, start_height(h, d, top, o.fallback_slope_m_per_cm), o.start_exponent);
    auto sse_of = [&](const Eigen::Vector3d& t) {
        double s = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double r = d[i] - t[0] * std::pow((t[1] - h[i]) / (t[1] - bh), t[2]);
            s += r * r;
        }
        return s;
    };
    double sse = sse_of(theta);
    double lambda = 1e-3;
    for (int it = 0; it < o.max_iterations; ++it) {
        Eigen::Matrix3d A = Eigen::Matrix3d::Zero();
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        const double D = theta[0], H = theta[1], k = theta[2];
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double u = (H - h[i]) / (H - bh);
            const double uk = std::pow(u, k);
            const Eigen::Vector3d j(uk, D * k * std::pow(u, k - 1.0) * (h[i] - bh) / ((H - bh) * (H - bh)),
                                    D * uk * std::log(u));
            A += j * j.transpose();
            g += j * (d[i] - D * uk);
        }
        bool stepped = false, converged = false;
        for (int tries = 0; tries < 30 && !stepped; ++tries) {
            Eigen::Matrix3d B = A;
            B.diagonal() *= 1.0 + lambda;
            const Eigen::Vector3d step = B.ldlt().solve(g);
            if (!step.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            Eigen::Vector3d next = theta + step;
            next[1] = std::max(next[1], h_floor);
            next[2] = std::clamp(next[2], 0.0, 5.0);
            const double nsse = sse_of(next);
            if (!(std::isfinite(nsse) && nsse <= sse)) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::Vector3d moved = (next - theta).cwiseAbs();
            converged = (moved.array() <= o.tolerance * (1.0 + next.array().abs())).all() ||
                        sse - nsse <= o.tolerance * o.tolerance * (1.0 + nsse);
            theta = next;
            sse = nsse;
            lambda = std::max(lambda / 10.0, 1e-12);
            stepped = true;
        }
        if (!stepped || converged) {
            if (!std::isfinite(sse) || !(theta[0] > 0.0)) return std::nullopt;
            return Taper{theta[0], theta[1], theta[2]};
        }
    }
    return std::nullopt;
}

}  // namespace

DbhEstimate estimate_dbh(const StemProfile& p, const ReconstructionOptions& options) {
    if (p.diameters_mm.empty()) throw ReconstructionError("tree " + p.tree_id + ": empty profile");
    const auto d = profile_cm(p, options.smooth);
    const double bh = kBreastHeightM;
    const double eps = 1e-9;
    if (p.base_height_m > options.max_base_height_m)
        throw ReconstructionError("tree " + p.tree_id + ": profile starts above " +
                                  csv::format(options.max_base_height_m) + " m");
    // With enough points the smoothed profile is the least-squares power
    // taper, which uses every measurement rather than the two nearest.
    if (options.smooth && d.size() >= 5) {
        std::vector<double> h(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) h[i] = p.height_at(i);
        const auto rough = estimate_dbh(p, [&] {
            auto o = options;
            o.smooth = false;
            return o;
        }());
        if (const auto t = fit_free_taper(h, d, rough.dbh_cm, options)) return {t->dbh_cm, rough.extrapolated};
        return {rough.dbh_cm, rough.extrapolated};
    }
    if (p.base_height_m > bh + eps) {
        if (d.size() < 2) throw ReconstructionError("tree " + p.tree_id + ": cannot extrapolate from one diameter");
        const double slope = (d[1] - d[0]) / kProfileSpacingM;
        return {d[0] + slope * (bh - p.base_height_m), true};
    }
    if (p.top_height() < bh - eps) throw ReconstructionError("tree " + p.tree_id + ": profile ends below 1.3 m");
    const double pos = (bh - p.base_height_m) / kProfileSpacingM;
    const auto i = std::min(static_cast<std::size_t>(std::max(0.0, std::floor(pos + eps))), d.size() - 1);
    if (i + 1 >= d.size()) return {d[i], false};
    const double t = std::clamp(pos - static_cast<double>(i), 0.0, 1.0);
    return {d[i] + t * (d[i + 1] - d[i]), false};
}

double Taper::diameter_cm(double h) const noexcept {
    if (h >= height_m) return 0.0;
    return dbh_cm * std::pow((height_m - h) / (height_m - kBreastHeightM), exponent);
}

HeightEstimate estimate_height(const StemProfile& p, double dbh_cm, const ReconstructionOptions& options) {
    const auto d = profile_cm(p, options.smooth);
    const double bh = kBreastHeightM;
    std::vector<double> h(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) h[i] = p.height_at(i);
    const double top = d.empty() ? p.base_height_m : h.back();

    auto fallback = [&] {
        HeightEstimate est;
        est.fallback = true;
        const double top_d = d.empty() ? dbh_cm : d.back();
        est.taper = {dbh_cm, std::max(top, bh) + top_d * options.fallback_slope_m_per_cm, options.start_exponent};
        return est;
    };
    if (d.size() < 5 || !(dbh_cm > 0.0)) return fallback();

    // Start height from a straight line through the upper half of the profile.
    double H = start_height(h, d, top, options.fallback_slope_m_per_cm);
    double k = options.start_exponent;
    const double h_floor = std::max(top, bh) + 1e-6;

    auto sse_of = [&](double HH, double kk) {
        double s = 0.0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double u = (HH - h[i]) / (HH - bh);
            const double r = d[i] - dbh_cm * std::pow(u, kk);
            s += r * r;
        }
        return s;
    };

    double sse = sse_of(H, k);
    double lambda = 1e-3;
    HeightEstimate est;
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        double a11 = 0, a12 = 0, a22 = 0, g1 = 0, g2 = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double u = (H - h[i]) / (H - bh);
            const double m = dbh_cm * std::pow(u, k);
            const double r = d[i] - m;
            const double du_dH = (h[i] - bh) / ((H - bh) * (H - bh));
            const double jH = dbh_cm * k * std::pow(u, k - 1.0) * du_dH;
            const double jk = m * std::log(u);
            a11 += jH * jH;
            a12 += jH * jk;
            a22 += jk * jk;
            g1 += jH * r;
            g2 += jk * r;
        }
        bool stepped = false;
        for (int tries = 0; tries < 30; ++tries) {
            const double b11 = a11 * (1.0 + lambda), b22 = a22 * (1.0 + lambda);
            const double det = b11 * b22 - a12 * a12;
            if (!(std::abs(det) > 0.0) || !std::isfinite(det)) {
                lambda *= 10.0;
                continue;
            }
            const double dH = (b22 * g1 - a12 * g2) / det;
            const double dk = (b11 * g2 - a12 * g1) / det;
            const double nH = std::max(H + dH, h_floor);
            const double nk = std::clamp(k + dk, 0.0, 5.0);
            const double nsse = sse_of(nH, nk);
            if (std::isfinite(nsse) && nsse <= sse) {
                const double stepH = std::abs(nH - H), stepk = std::abs(nk - k);
                H = nH;
                k = nk;
                const double improvement = sse - nsse;
                sse = nsse;
                lambda = std::max(lambda / 10.0, 1e-12);
                stepped = true;
                if (stepH <= options.tolerance * (1.0 + H) && stepk <= options.tolerance * (1.0 + k))
                    converged = true;
                if (improvement <= options.tolerance * options.tolerance * (1.0 + sse)) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped) {
            // No descent direction left: a stationary point.
            converged = std::isfinite(sse);
            break;
        }
        if (converged) break;
    }
    if (!converged || !std::isfinite(H)) {
        auto fb = fallback();
        fb.iterations = it;
        return fb;
    }
    est.taper = {dbh_cm, H, k};
    est.iterations = it + 1;
    return est;
}

double tree_volume(const Taper& taper, double stump_height_m) {
    const double H = taper.height_m;
    if (!(H > stump_height_m) || !(taper.dbh_cm > 0.0)) return 0.0;
    if (!(H > kBreastHeightM)) return 0.0;
    const double k = taper.exponent;
    const double D = taper.dbh_cm / 100.0;
    const double e = 2.0 * k + 1.0;
    // pi/4 * D^2 / (H-1.3)^(2k) * (H - s)^(2k+1) / (2k+1)
    return M_PI / 4.0 * D * D * std::pow(H - stump_height_m, e) / (e * std::pow(H - kBreastHeightM, 2.0 * k));
}

AllometryConfig AllometryConfig::defaults() {
    AllometryConfig c;
    c.species[Species::Spruce] = {0.9, 0.2, 0.050, 2.0, 0.90};
    c.species[Species::Pine] = {0.8, 0.2, 0.045, 2.0, 0.85};
    c.species[Species::Deciduous] = {0.8, 0.2, 0.060, 2.1, 0.70};
    return c;
}

const SpeciesAllometry& AllometryConfig::at(Species s) const {
    auto it = species.find(s);
    if (it == species.end()) throw ConfigError("no allometry configured for species " + std::string(to_string(s)));
    return it->second;
}

void AllometryConfig::validate() const {
    for (Species s : kAllSpecies) {
        const auto& a = at(s);
        if (!(a.taper_exponent_prior > 0.0) || !(a.stump_height_m > 0.0) || !(a.biomass_a > 0.0) ||
            !(a.biomass_b > 0.0) || !(a.biomass_c > 0.0))
            throw ConfigError("allometry parameters must be positive for species " + std::string(to_string(s)));
    }
}

double tree_agb(double dbh_cm, double height_m, Species species, const AllometryConfig& allometry) {
    const auto& a = allometry.at(species);
    if (!(dbh_cm > 0.0) || !(height_m > 0.0)) throw DomainError("biomass inputs must be positive");
    return a.biomass_a * std::pow(dbh_cm, a.biomass_b) * std::pow(height_m, a.biomass_c);
}

ReconstructedTree reconstruct_tree(const StemProfile& profile, const AllometryConfig& allometry,
                                   const ReconstructionOptions& options) {
    const auto& sp = allometry.at(profile.species);
    ReconstructionOptions opts = options;
    opts.start_exponent = sp.taper_exponent_prior;
    const auto dbh = estimate_dbh(profile, opts);
    if (!(dbh.dbh_cm > 0.0)) throw ReconstructionError("tree " + profile.tree_id + ": non-positive dbh");
    const auto height = estimate_height(profile, dbh.dbh_cm, opts);

    ReconstructedTree out;
    out.dbh_extrapolated = dbh.extrapolated;
    out.height_fallback = height.fallback;
    out.taper_exponent = height.taper.exponent;
    auto& t = out.tree;
    t.id = profile.tree_id;
    t.species = profile.species;
    t.dbh_cm = dbh.dbh_cm;
    t.height_m = height.taper.height_m;
    t.volume_m3 = tree_volume(height.taper, sp.stump_height_m);
    t.agb_kg = tree_agb(t.dbh_cm, t.height_m, profile.species, allometry);
    t.x = profile.x;
    t.y = profile.y;
    t.source = TreeSource::Harvester;
    return out;
}

}  // namespace aba::harvester
