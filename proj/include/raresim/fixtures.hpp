#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "raresim/config.hpp"
#include "raresim/region.hpp"

namespace raresim {

/// Target moments of the bundled incident fixture.
struct IncidentFixtureSpec {
    std::size_t rows = 13274;
    std::size_t zeros = 12100;
    double mean = 4.2;
    double variance = 727.0;
    int first_year = 1968;
    int last_year = 2008;
};

/// Deterministic synthetic incident table with the requested moments. The
/// positive tail is a discrete Pareto body whose two largest values are solved
/// for so that the sum and the sum of squares land on the targets.
IncidentDataset generate_incident_fixture(const IncidentFixtureSpec& spec = {});

/// Region used by the default config and the acceptance runs.
RegionIndicators default_region();

/// Three contrasting illustrative profiles (values are not sourced).
std::vector<RegionIndicators> contrast_regions();

/// Writes regions, the default config and the incident fixture into `dir`.
/// Returns the written paths. Existing files are overwritten only with `force`.
std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& dir, bool force);

} // namespace raresim
