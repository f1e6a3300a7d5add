#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace raresim {

inline constexpr std::string_view kRegionFormatTag = "raresim-region 1";
inline constexpr std::string_view kIncidentFormatTag = "raresim-incidents 1";

/// Demographic indicators of one geographic region. They parameterize the
/// sampling of the five constant traits.
struct RegionIndicators {
    std::string name;
    double married_fraction = 0.5;
    std::array<double, 4> education{0.25, 0.25, 0.25, 0.25};  // none, primary, secondary, tertiary
    double wealth_rate = 4.0;
    double religiosity_mean = 0.5;
    double religiosity_sd = 0.2;
    double crime_density_mean = 0.3;
    double crime_density_sd = 0.15;

    /// Throws ValidationError on the first violated constraint.
    void validate() const;
};

/// Parses the key = value region format. The first non-empty line must be the
/// format tag. Education fractions drifting from a unit sum by at most 1e-6 are
/// renormalized; anything further is rejected.
RegionIndicators parse_region(std::string_view text);
RegionIndicators load_region(const std::filesystem::path& path);
std::string format_region(const RegionIndicators& region);

struct Incident {
    std::string date;
    std::int64_t deaths = 0;
    std::optional<int> weapon;  // 1..6
};

struct IncidentDataset {
    std::vector<Incident> incidents;

    std::vector<double> deaths() const;
};

/// Parses the comma-delimited incident format: format tag line, then the
/// `year,deaths,weapon` header, then one row per incident.
IncidentDataset parse_incidents(std::string_view text);
IncidentDataset load_incidents(const std::filesystem::path& path);
std::string format_incidents(const IncidentDataset& data);

} // namespace raresim
