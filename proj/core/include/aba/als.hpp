#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aba/geometry.hpp"

namespace aba::als {

struct Echo {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    std::uint8_t return_number = 1;
    std::uint8_t num_returns = 1;
    std::uint8_t classification = 1;  // 2 = ground
};

// ESRI ASCII grid. Row 0 is the northern edge, as in the file.
struct TerrainRaster {
    double x_ll = 0.0;
    double y_ll = 0.0;
    double cell_size = 1.0;
    std::size_t ncols = 0;
    std::size_t nrows = 0;
    double nodata = -9999.0;
    std::vector<double> elevation;  // nrows * ncols, row-major

    double at(std::size_t row, std::size_t col) const { return elevation[row * ncols + col]; }
    bool is_nodata(double v) const noexcept { return v == nodata; }

    // Bilinear interpolation between cell centres; positions beyond the
    // outermost centres clamp to the edge. Empty when any contributing
    // cell is nodata or the point lies more than one cell outside.
    std::optional<double> sample(double x, double y) const;
};

struct NormalizeResult {
    std::vector<Echo> echoes;
    std::size_t dropped_nodata = 0;
    std::size_t dropped_outside = 0;
};

// z' = z - terrain(x, y), floored at 0.
NormalizeResult normalize_heights(std::span<const Echo> echoes, const TerrainRaster& terrain);

// Echoes inside the geometry, boundary included. Throws DomainError for a
// zero-area geometry.
std::vector<Echo> clip(std::span<const Echo> echoes, const geom::Shape& shape);

struct MetricsVector {
    double hmean = 0.0;
    double hvar = 0.0;
    double h10 = 0.0;
    double h25 = 0.0;
    double h50 = 0.0;
    double h75 = 0.0;
    double h95 = 0.0;
    double d2 = 0.0;
    int time_diff = 0;
    std::size_t n_first_echoes = 0;
    bool low_count = false;  // a single first echo; hvar reported as 0
};

inline constexpr std::string_view kMetricNames[] = {"hmean", "hvar", "h10", "h25", "h50",
                                                     "h75",   "h95",  "d2",  "time_diff"};

bool is_metric_name(std::string_view name) noexcept;
// Value of the named metric; empty for an unknown name.
std::optional<double> metric_value(const MetricsVector& m, std::string_view name) noexcept;
// Sets the named metric; false for an unknown name.
bool set_metric(MetricsVector& m, std::string_view name, double value) noexcept;

struct MetricsOptions {
    double d2_threshold_m = 2.0;
};

// Metrics over first echoes (return_number == 1). Empty when there are no
// first echoes. Heights are expected to be normalized already.
std::optional<MetricsVector> compute_metrics(std::span<const Echo> echoes, int reference_year, int acquisition_year,
                                             const MetricsOptions& options = {});

inline int growing_seasons(int reference_year, int acquisition_year) noexcept {
    return reference_year > acquisition_year ? reference_year - acquisition_year : 0;
}

// ---------------------------------------------------------------------------
// IO

// CSV `x,y,z,return_number,num_returns,classification`.
std::vector<Echo> read_echoes_csv(std::istream& in);
void write_echoes_csv(std::ostream& out, std::span<const Echo> echoes);

// Little-endian columnar binary: "FEM1", u64 record count, then per record
// x, y, z as f64 followed by return_number, num_returns, classification as u8.
std::vector<Echo> read_echoes_binary(std::istream& in);
void write_echoes_binary(std::ostream& out, std::span<const Echo> echoes);

// Dispatches on the leading magic bytes.
std::vector<Echo> read_echoes(const std::string& path);

TerrainRaster read_esri_ascii(std::istream& in);
void write_esri_ascii(std::ostream& out, const TerrainRaster& raster);

struct UnitMetrics {
    std::string unit_id;
    std::optional<MetricsVector> metrics;  // empty: no first echoes
};

// `unit_id,hmean,hvar,h10,h25,h50,h75,h95,d2,time_diff,n_first_echoes,status`
void write_metrics_csv(std::ostream& out, std::span<const UnitMetrics> rows);
std::vector<UnitMetrics> read_metrics_csv(std::istream& in);

}  // namespace aba::als
