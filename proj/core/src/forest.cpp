#include "aba/forest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "aba/error.hpp"
#include "aba/numeric.hpp"

namespace aba {

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

double basal_area_m2(double dbh_cm) noexcept {
    const double r = dbh_cm / 200.0;
    return M_PI * r * r;
}

}  // namespace

std::string_view to_string(Species s) noexcept {
    switch (s) {
        case Species::Spruce: return "spruce";
        case Species::Pine: return "pine";
        case Species::Deciduous: return "deciduous";
    }
    return "deciduous";
}

std::string_view to_string(TreeSource s) noexcept {
    return s == TreeSource::Field ? "field" : "harvester";
}

std::string_view to_string(Maturity m) noexcept {
    static constexpr std::array<std::string_view, 5> names{"M1", "M2", "M3", "M4", "M5"};
    return names[static_cast<int>(m) - 1];
}

std::string_view to_string(Attribute a) noexcept {
    switch (a) {
        case Attribute::HL: return "HL";
        case Attribute::V: return "V";
        case Attribute::N: return "N";
        case Attribute::AGB: return "AGB";
        case Attribute::G: return "G";
        case Attribute::QMD: return "QMD";
    }
    return "V";
}

std::optional<Attribute> parse_attribute(std::string_view name) {
    const auto l = lower(name);
    for (Attribute a : kAllAttributes)
        if (lower(to_string(a)) == l) return a;
    return std::nullopt;
}

std::optional<double> get(const AttributeVector& av, Attribute a) noexcept {
    switch (a) {
        case Attribute::HL: return av.hl;
        case Attribute::V: return av.v;
        case Attribute::N: return av.n;
        case Attribute::AGB: return av.agb;
        case Attribute::G: return av.g;
        case Attribute::QMD: return av.qmd;
    }
    return std::nullopt;
}

Species parse_species(std::string_view code, bool* known) {
    const auto l = lower(code);
    auto result = [&](Species s, bool k) {
        if (known) *known = k;
        return s;
    };
    if (l == "spruce" || l == "1" || l == "gran") return result(Species::Spruce, true);
    if (l == "pine" || l == "2" || l == "furu") return result(Species::Pine, true);
    if (l == "deciduous" || l == "3" || l == "lauv") return result(Species::Deciduous, true);
    return result(Species::Deciduous, false);
}

std::optional<Maturity> parse_maturity(std::string_view code) {
    auto l = lower(code);
    if (!l.empty() && l.front() == 'm') l.erase(0, 1);
    if (l.size() == 1 && l[0] >= '1' && l[0] <= '5') return static_cast<Maturity>(l[0] - '0');
    return std::nullopt;
}

TreeSource parse_source(std::string_view code) {
    const auto l = lower(code);
    if (l == "field" || l.empty()) return TreeSource::Field;
    if (l == "harvester") return TreeSource::Harvester;
    throw DomainError("unknown tree source '" + std::string(code) + "'");
}

void validate(const TreeRecord& t) {
    auto fail = [&](const std::string& why) { throw DomainError("tree " + t.id + ": " + why); };
    if (!(t.dbh_cm > 0.0) || !std::isfinite(t.dbh_cm)) fail("dbh must be positive");
    if (t.source == TreeSource::Field && t.dbh_cm < kFieldMinDbhCm) fail("field tree below caliper threshold");
    if (!(t.height_m > kBreastHeightM) || !std::isfinite(t.height_m)) fail("height must exceed 1.3 m");
    if (!(t.volume_m3 >= 0.0) || !std::isfinite(t.volume_m3)) fail("volume must be finite and non-negative");
    if (!(t.agb_kg >= 0.0) || !std::isfinite(t.agb_kg)) fail("biomass must be finite and non-negative");
}

AttributeVector compute_attributes(std::span<const TreeRecord> trees, double area_m2) {
    if (!(area_m2 > 0.0) || !std::isfinite(area_m2)) throw DomainError("unit area must be positive");

    std::vector<const TreeRecord*> sorted;
    sorted.reserve(trees.size());
    for (const auto& t : trees) {
        validate(t);
        sorted.push_back(&t);
    }
    std::stable_sort(sorted.begin(), sorted.end(), [](const TreeRecord* a, const TreeRecord* b) { return a->id < b->id; });

    CompensatedSum vol, agb, ba, ba_h, dbh2;
    for (const TreeRecord* t : sorted) {
        const double g = basal_area_m2(t->dbh_cm);
        vol += t->volume_m3;
        agb += t->agb_kg;
        ba += g;
        ba_h += g * t->height_m;
        dbh2 += t->dbh_cm * t->dbh_cm;
    }

    const double per_ha = 1e4 / area_m2;
    const auto count = static_cast<double>(sorted.size());
    AttributeVector av;
    av.n = count * per_ha;
    av.v = vol.value() * per_ha;
    av.agb = agb.value() / 1000.0 * per_ha;
    av.g = ba.value() * per_ha;
    if (!sorted.empty()) {
        av.qmd = std::sqrt(dbh2.value() / count);
        av.hl = ba_h.value() / ba.value();
    }
    return av;
}

std::optional<Species> dominant_species(std::span<const TreeRecord> trees) {
    if (trees.empty()) return std::nullopt;
    std::array<CompensatedSum, 3> vol, ba;
    for (const auto& t : trees) {
        const auto i = static_cast<std::size_t>(t.species);
        vol[i] += t.volume_m3;
        ba[i] += basal_area_m2(t.dbh_cm);
    }
    const bool any_volume = std::any_of(vol.begin(), vol.end(), [](const CompensatedSum& s) { return s.value() > 0.0; });
    const auto& share = any_volume ? vol : ba;
    std::size_t best = 0;
    for (std::size_t i = 1; i < share.size(); ++i)
        if (share[i].value() > share[best].value()) best = i;
    return static_cast<Species>(best);
}

bool DomainRule::admits(double si, double conif, double dist) const noexcept {
    return si > site_index_min && si < site_index_max && conif > conif_min && conif < conif_max &&
           dist > fwd_dist_min && dist < fwd_dist_max;
}

bool disjoint(const DomainRule& a, const DomainRule& b) noexcept {
    auto no_overlap = [](double lo1, double hi1, double lo2, double hi2) {
        return std::max(lo1, lo2) >= std::min(hi1, hi2);
    };
    return no_overlap(a.site_index_min, a.site_index_max, b.site_index_min, b.site_index_max) ||
           no_overlap(a.conif_min, a.conif_max, b.conif_min, b.conif_max) ||
           no_overlap(a.fwd_dist_min, a.fwd_dist_max, b.fwd_dist_min, b.fwd_dist_max);
}

void DomainRuleSet::validate() const {
    if (!disjoint(productive, unproductive))
        throw ConfigError("productive and unproductive domain rules overlap");
}

DomainLabels classify_domain(const PlotUnit& plot, const DomainRuleSet& rules) {
    DomainLabels labels;
    if (!plot.maturity) {
        labels.unclassifiable = true;
        return labels;
    }
    const bool eligible_class =
        std::find(rules.all_maturities.begin(), rules.all_maturities.end(), *plot.maturity) != rules.all_maturities.end();
    if (!plot.is_forest || !eligible_class) return labels;
    if (!plot.site_index || !plot.coniferous_volume_proportion || !plot.forwarding_distance_m) {
        labels.unclassifiable = true;
        return labels;
    }
    labels.all = true;
    labels.prod = rules.productive.admits(*plot.site_index, *plot.coniferous_volume_proportion, *plot.forwarding_distance_m);
    labels.uprod =
        rules.unproductive.admits(*plot.site_index, *plot.coniferous_volume_proportion, *plot.forwarding_distance_m);
    return labels;
}

}  // namespace aba
