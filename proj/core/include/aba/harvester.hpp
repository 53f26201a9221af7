#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "aba/forest.hpp"

namespace aba::harvester {

enum class Positioning { Boom, Machine };

inline constexpr double kProfileSpacingM = 0.10;

// One harvested stem. Diameters are kept in millimetres, as recorded, at
// 10 cm spacing starting from base_height_m.
struct StemProfile {
    std::string tree_id;
    Species species = Species::Spruce;
    double x = 0.0;
    double y = 0.0;
    Positioning positioning = Positioning::Boom;
    int harvest_year = 0;
    double base_height_m = 0.0;
    std::vector<double> diameters_mm;

    double height_at(std::size_t i) const noexcept {
        return base_height_m + kProfileSpacingM * static_cast<double>(i);
    }
    double top_height() const noexcept { return height_at(diameters_mm.size() - 1); }
};

struct RowError {
    std::size_t line = 0;
    std::string message;
};

struct ParseResult {
    std::vector<StemProfile> profiles;
    std::vector<RowError> rejected;
};

// `tree_id,species,x,y,positioning_mode,harvest_year,base_height_m,d1,d2,...`
// A tree may continue over several consecutive rows; each continuation row
// must start exactly one spacing above the previous row's last diameter.
// Throws ParseError for a missing header or a row without diameters;
// other bad rows land in `rejected`.
ParseResult parse_harvester(std::istream& in);
ParseResult parse_harvester_file(const std::string& path);
void write_harvester(std::ostream& out, std::span<const StemProfile> profiles);

// Adds independent uniform offsets on [-amplitude, amplitude] to both
// coordinates of machine-positioned stems. Each stem draws from a stream
// keyed by (seed, tree_id).
std::vector<StemProfile> jitter_positions(std::vector<StemProfile> profiles, double amplitude_m, std::uint64_t seed);

// Three-point running median; the end points are kept.
std::vector<double> median3(std::span<const double> xs);

struct DbhEstimate {
    double dbh_cm = 0.0;
    bool extrapolated = false;
};

struct ReconstructionOptions {
    bool smooth = true;
    double max_base_height_m = 2.0;
    int max_iterations = 200;
    double tolerance = 1e-10;
    double fallback_slope_m_per_cm = 1.0;
    double start_exponent = 1.0;
};

// Diameter at 1.3 m on the smoothed profile. Smoothing fits the power taper
// (dbh, height and exponent free) to the 3-point median profile; profiles
// shorter than five points, unsmoothed profiles and failed fits fall back to
// linear interpolation, or extrapolation from the two lowest points when the
// profile starts above 1.3 m.
DbhEstimate estimate_dbh(const StemProfile& profile, const ReconstructionOptions& options = {});

// Power taper d(h) = dbh * ((H - h) / (H - 1.3))^k.
struct Taper {
    double dbh_cm = 0.0;
    double height_m = 0.0;
    double exponent = 1.0;

    double diameter_cm(double h) const noexcept;
};

struct HeightEstimate {
    Taper taper;
    bool fallback = false;
    int iterations = 0;
};

// Least-squares fit of (H, k) with the dbh held fixed; damped Gauss-Newton.
HeightEstimate estimate_height(const StemProfile& profile, double dbh_cm, const ReconstructionOptions& options = {});

// Stem volume in m3 between the stump and the tip, integrated in closed form.
double tree_volume(const Taper& taper, double stump_height_m = 0.2);

struct SpeciesAllometry {
    double taper_exponent_prior = 1.0;  // start value of the taper fit
    double stump_height_m = 0.2;
    double biomass_a = 0.05;
    double biomass_b = 2.0;
    double biomass_c = 0.9;
};

// One entry per species. The defaults are generic placeholders of the form
// agb = a * dbh^b * h^c, not calibrated national functions.
struct AllometryConfig {
    std::map<Species, SpeciesAllometry> species;

    static AllometryConfig defaults();
    const SpeciesAllometry& at(Species s) const;  // throws ConfigError
    void validate() const;
};

// a * dbh^b * height^c in kg.
double tree_agb(double dbh_cm, double height_m, Species species, const AllometryConfig& allometry);

struct ReconstructedTree {
    TreeRecord tree;
    bool dbh_extrapolated = false;
    bool height_fallback = false;
    double taper_exponent = 1.0;
};

ReconstructedTree reconstruct_tree(const StemProfile& profile, const AllometryConfig& allometry,
                                   const ReconstructionOptions& options = {});

}  // namespace aba::harvester
