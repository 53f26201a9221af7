#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aba/als.hpp"
#include "aba/forest.hpp"
#include "aba/harvester.hpp"
#include "aba/regression.hpp"
#include "aba/segmentation.hpp"

// Multi-module workflows used by the command-line tool.
namespace aba::pipeline {

struct MetricsRun {
    std::vector<als::UnitMetrics> rows;  // one per unit, input order
    std::size_t dropped_nodata = 0;
    std::size_t dropped_outside = 0;
    std::size_t empty_units = 0;
};

// Normalizes echoes (unless `terrain` is null), clips them to each unit and
// computes metrics with time_diff against the unit's measurement year.
MetricsRun unit_metrics(std::span<const als::Echo> echoes, const als::TerrainRaster* terrain,
                        std::span<const PlotUnit> units, int acquisition_year, const als::MetricsOptions& options = {});

struct CellsOptions {
    double alpha_m = 25.0;
    double jitter_m = 8.0;
    std::uint64_t seed = 1;
    std::string source_stand_id;
    harvester::TessellationOptions tessellation;
    harvester::ReconstructionOptions reconstruction;
    harvester::AllometryConfig allometry = harvester::AllometryConfig::defaults();
};

struct TreeFailure {
    std::string tree_id;
    std::string message;
};

struct CellsRun {
    std::vector<harvester::ReconstructedTree> trees;
    std::vector<TreeFailure> failed;
    std::vector<harvester::HarvestedSegment> segments;
    std::vector<harvester::HarvestedGridCell> cells;  // accepted and rejected
    int harvest_year = 0;                              // latest in the file

    std::size_t accepted() const noexcept;
};

// Jitter, stem reconstruction, alpha-shape segmentation and tessellation.
// Trees are assigned to the segment containing them, ties to the first.
CellsRun harvested_cells(std::span<const harvester::StemProfile> profiles, const CellsOptions& options);

// Accepted cells as plot units: square geometry, cell area, harvest year
// as measurement year.
std::vector<PlotUnit> cells_as_units(const CellsRun& run);

struct UnitAttributes {
    std::string unit_id;
    AttributeVector attributes;
};

// `unit_id,HL,V,N,AGB,G,QMD` with NA for undefined values.
void write_attributes_csv(std::ostream& out, std::span<const UnitAttributes> rows);
std::vector<UnitAttributes> read_attributes_csv(std::istream& in);

// Joins metrics and attributes on unit id; units with no metrics are left
// out and counted.
std::vector<regression::LabeledUnit> join_units(std::span<const als::UnitMetrics> metrics,
                                                std::span<const UnitAttributes> attributes,
                                                std::size_t* missing = nullptr);

struct EvalInput {
    std::map<Attribute, std::vector<regression::EvalPlot>> plots;
    std::size_t missing_metrics = 0;
};

// Observed attributes from the plot trees, predictions from the models,
// domain labels and dominant species per plot. Plots without metrics are
// counted and skipped.
EvalInput evaluation_plots(std::span<const PlotUnit> plots, std::span<const als::UnitMetrics> metrics,
                           std::span<const regression::FittedModel> models, const DomainRuleSet& rules = {});

}  // namespace aba::pipeline
