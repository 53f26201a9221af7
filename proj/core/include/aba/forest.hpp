#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aba/geometry.hpp"

namespace aba {

enum class Species { Spruce, Pine, Deciduous };
enum class TreeSource { Field, Harvester };
enum class Maturity { M1 = 1, M2, M3, M4, M5 };

inline constexpr std::array<Species, 3> kAllSpecies{Species::Spruce, Species::Pine, Species::Deciduous};

std::string_view to_string(Species s) noexcept;
std::string_view to_string(TreeSource s) noexcept;
std::string_view to_string(Maturity m) noexcept;

// Unknown codes fall back to Deciduous; `known` reports whether that happened.
Species parse_species(std::string_view code, bool* known = nullptr);
std::optional<Maturity> parse_maturity(std::string_view code);
TreeSource parse_source(std::string_view code);

// Caliper threshold for field-measured trees.
inline constexpr double kFieldMinDbhCm = 5.0;
inline constexpr double kBreastHeightM = 1.3;

struct TreeRecord {
    std::string id;
    Species species = Species::Spruce;
    double dbh_cm = 0.0;
    double height_m = 0.0;
    double volume_m3 = 0.0;
    double agb_kg = 0.0;
    double x = 0.0;
    double y = 0.0;
    TreeSource source = TreeSource::Field;
};

// Throws DomainError when a record violates the tree invariants.
void validate(const TreeRecord& tree);

// Plot-level attributes per hectare. hl and qmd are empty for treeless units.
struct AttributeVector {
    std::optional<double> hl;  // Lorey's height, m
    double v = 0.0;            // m3/ha
    double n = 0.0;            // stems/ha
    double agb = 0.0;          // t/ha
    double g = 0.0;            // m2/ha
    std::optional<double> qmd;  // cm
};

enum class Attribute { HL, V, N, AGB, G, QMD };
inline constexpr std::array<Attribute, 6> kAllAttributes{Attribute::HL, Attribute::V,   Attribute::N,
                                                         Attribute::AGB, Attribute::G, Attribute::QMD};
std::string_view to_string(Attribute a) noexcept;
std::optional<Attribute> parse_attribute(std::string_view name);

// Value of one attribute, empty when undefined for the unit.
std::optional<double> get(const AttributeVector& av, Attribute a) noexcept;

struct PlotUnit {
    std::string id;
    geom::Shape geometry;
    double area_m2 = 0.0;
    std::vector<TreeRecord> trees;
    std::optional<Maturity> maturity;
    std::optional<double> site_index;
    std::optional<double> coniferous_volume_proportion;
    std::optional<double> forwarding_distance_m;
    bool is_forest = true;
    int measurement_year = 0;
};

inline constexpr double kNfiPlotAreaM2 = 250.0;

// Per-hectare attributes of a tree list on `area_m2`. Sums are compensated
// and taken in tree-id order, so the result does not depend on input order.
AttributeVector compute_attributes(std::span<const TreeRecord> trees, double area_m2);

// Species with the largest volume share; basal area breaks an all-zero
// volume list. Empty for an empty list.
std::optional<Species> dominant_species(std::span<const TreeRecord> trees);

// Open-interval thresholds: a descriptor passes when min < value < max.
struct DomainRule {
    double site_index_min = -std::numeric_limits<double>::infinity();
    double site_index_max = std::numeric_limits<double>::infinity();
    double conif_min = -std::numeric_limits<double>::infinity();
    double conif_max = std::numeric_limits<double>::infinity();
    double fwd_dist_min = -std::numeric_limits<double>::infinity();
    double fwd_dist_max = std::numeric_limits<double>::infinity();

    bool admits(double site_index, double conif, double fwd_dist) const noexcept;
};

// True when no descriptor triple can satisfy both rules.
bool disjoint(const DomainRule& a, const DomainRule& b) noexcept;

struct DomainRuleSet {
    std::vector<Maturity> all_maturities{Maturity::M2, Maturity::M3, Maturity::M4, Maturity::M5};
    DomainRule productive{11.0, std::numeric_limits<double>::infinity(), 0.80,
                          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
                          500.0};
    DomainRule unproductive{-std::numeric_limits<double>::infinity(), 11.0,
                            -std::numeric_limits<double>::infinity(), 0.60, 500.0,
                            std::numeric_limits<double>::infinity()};

    // Throws ConfigError when PROD and UPROD overlap.
    void validate() const;
};

struct DomainLabels {
    bool all = false;
    bool prod = false;
    bool uprod = false;
    bool unclassifiable = false;
    friend bool operator==(const DomainLabels&, const DomainLabels&) = default;
};

DomainLabels classify_domain(const PlotUnit& plot, const DomainRuleSet& rules = {});

// ---------------------------------------------------------------------------
// CSV interchange

struct PlotTree {
    std::string plot_id;
    TreeRecord tree;
};

struct TreeTable {
    std::vector<PlotTree> rows;
    std::size_t unknown_species = 0;
};

// `plot_id,x,y,species,dbh_cm,height_m,volume_m3,agb_kg,source`. Tree ids
// are `<plot_id>#<k>` with k counting rows of that plot from 1.
TreeTable read_trees(std::istream& in);
void write_trees(std::ostream& out, std::span<const PlotTree> rows);

// `plot_id,center_x,center_y,radius_m,area_m2,maturity,site_index,conif_prop,
// fwd_dist_m,is_forest,meas_year`. An empty or zero radius denotes an
// axis-aligned square of side sqrt(area_m2) about the centre.
std::vector<PlotUnit> read_plots(std::istream& in);
void write_plots(std::ostream& out, std::span<const PlotUnit> plots);

// Attaches trees to plots by id; trees of unknown plots are counted.
std::size_t attach_trees(std::vector<PlotUnit>& plots, std::span<const PlotTree> trees);

}  // namespace aba
