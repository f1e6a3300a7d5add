#include "raresim/region.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "raresim/error.hpp"
#include "text_util.hpp"

namespace raresim {

namespace {

void check_unit(double value, const char* field, std::size_t line = 0) {
    if (!std::isfinite(value) || value < 0.0 || value > 1.0)
        throw ValidationError(field, "must be in [0, 1]", line);
}

void check_non_negative(double value, const char* field, std::size_t line = 0) {
    if (!std::isfinite(value) || value < 0.0)
        throw ValidationError(field, "must be finite and >= 0", line);
}

} // namespace

void RegionIndicators::validate() const {
    check_unit(married_fraction, "married_fraction");
    double sum = 0.0;
    for (double e : education) {
        check_unit(e, "education");
        sum += e;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ValidationError("education", "fractions must sum to 1");
    if (!std::isfinite(wealth_rate) || wealth_rate <= 0.0)
        throw ValidationError("wealth_rate", "must be finite and > 0");
    check_unit(religiosity_mean, "religiosity_mean");
    check_non_negative(religiosity_sd, "religiosity_sd");
    check_unit(crime_density_mean, "crime_density_mean");
    check_non_negative(crime_density_sd, "crime_density_sd");
}

RegionIndicators parse_region(std::string_view text) {
    const auto lines = detail::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
    if (i == lines.size() || detail::trim(lines[i]) != kRegionFormatTag)
        throw ValidationError("format", "first line must be '" + std::string(kRegionFormatTag) + "'",
                              i < lines.size() ? i + 1 : 1);

    std::map<std::string, std::pair<std::string, std::size_t>> fields;
    for (++i; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ValidationError("syntax", "expected 'key = value'", i + 1);
        std::string key(detail::trim(line.substr(0, eq)));
        std::string value(detail::trim(line.substr(eq + 1)));
        if (fields.count(key)) throw ValidationError(key, "duplicate key", i + 1);
        fields.emplace(std::move(key), std::make_pair(std::move(value), i + 1));
    }

    auto take = [&](const char* key) -> const std::pair<std::string, std::size_t>& {
        auto it = fields.find(key);
        if (it == fields.end()) throw ValidationError(key, "missing field");
        return it->second;
    };
    auto number = [&](const char* key) {
        const auto& [value, line] = take(key);
        auto parsed = detail::parse_double(value);
        if (!parsed) throw ValidationError(key, "not a number", line);
        return std::make_pair(*parsed, line);
    };

    RegionIndicators r;
    r.name = take("name").first;
    if (r.name.empty()) throw ValidationError("name", "must not be empty", take("name").second);

    auto [married, married_line] = number("married_fraction");
    check_unit(married, "married_fraction", married_line);
    r.married_fraction = married;

    {
        const auto& [value, line] = take("education");
        const auto parts = detail::split(value, ',');
        if (parts.size() != 4) throw ValidationError("education", "expected 4 comma-separated fractions", line);
        double sum = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
            auto e = detail::parse_double(detail::trim(parts[k]));
            if (!e) throw ValidationError("education", "not a number", line);
            check_unit(*e, "education", line);
            r.education[k] = *e;
            sum += *e;
        }
        const double drift = std::fabs(sum - 1.0);
        if (drift > 1e-6)
            throw ValidationError("education", "fractions must sum to 1 (sum " + detail::format_double(sum) + ")",
                                  line);
        if (drift > 0.0)
            for (double& e : r.education) e /= sum;
    }

    auto [wealth, wealth_line] = number("wealth_rate");
    if (!(wealth > 0.0) || !std::isfinite(wealth)) throw ValidationError("wealth_rate", "must be finite and > 0", wealth_line);
    r.wealth_rate = wealth;

    auto [rel_mean, rel_mean_line] = number("religiosity_mean");
    check_unit(rel_mean, "religiosity_mean", rel_mean_line);
    r.religiosity_mean = rel_mean;
    auto [rel_sd, rel_sd_line] = number("religiosity_sd");
    check_non_negative(rel_sd, "religiosity_sd", rel_sd_line);
    r.religiosity_sd = rel_sd;

    auto [crime_mean, crime_mean_line] = number("crime_density_mean");
    check_unit(crime_mean, "crime_density_mean", crime_mean_line);
    r.crime_density_mean = crime_mean;
    auto [crime_sd, crime_sd_line] = number("crime_density_sd");
    check_non_negative(crime_sd, "crime_density_sd", crime_sd_line);
    r.crime_density_sd = crime_sd;

    for (const auto& [key, entry] : fields) {
        static const char* known[] = {"name", "married_fraction", "education", "wealth_rate",
                                      "religiosity_mean", "religiosity_sd", "crime_density_mean",
                                      "crime_density_sd"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ValidationError(key, "unknown field", entry.second);
    }

    r.validate();
    return r;
}

RegionIndicators load_region(const std::filesystem::path& path) {
    return parse_region(detail::read_file(path));
}

std::string format_region(const RegionIndicators& r) {
    std::ostringstream out;
    out << kRegionFormatTag << '\n';
    out << "name = " << r.name << '\n';
    out << "married_fraction = " << detail::format_double(r.married_fraction) << '\n';
    out << "education = ";
    for (std::size_t k = 0; k < 4; ++k) out << (k ? ", " : "") << detail::format_double(r.education[k]);
    out << '\n';
    out << "wealth_rate = " << detail::format_double(r.wealth_rate) << '\n';
    out << "religiosity_mean = " << detail::format_double(r.religiosity_mean) << '\n';
    out << "religiosity_sd = " << detail::format_double(r.religiosity_sd) << '\n';
    out << "crime_density_mean = " << detail::format_double(r.crime_density_mean) << '\n';
    out << "crime_density_sd = " << detail::format_double(r.crime_density_sd) << '\n';
    return out.str();
}

std::vector<double> IncidentDataset::deaths() const {
    std::vector<double> out;
    out.reserve(incidents.size());
    for (const auto& incident : incidents) out.push_back(static_cast<double>(incident.deaths));
    return out;
}

IncidentDataset parse_incidents(std::string_view text) {
    const auto lines = detail::split_lines(text);
    std::size_t i = 0;
    while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
    if (i == lines.size() || detail::trim(lines[i]) != kIncidentFormatTag)
        throw ValidationError("format", "first line must be '" + std::string(kIncidentFormatTag) + "'",
                              i < lines.size() ? i + 1 : 1);
    ++i;
    while (i < lines.size() && detail::trim(lines[i]).empty()) ++i;
    if (i == lines.size() || detail::trim(lines[i]) != "year,deaths,weapon")
        throw ValidationError("header", "expected 'year,deaths,weapon'", i < lines.size() ? i + 1 : 2);

    IncidentDataset data;
    for (++i; i < lines.size(); ++i) {
        const std::string_view line = detail::trim(lines[i]);
        if (line.empty()) continue;
        const std::size_t line_no = i + 1;
        const auto cols = detail::split(line, ',');
        if (cols.size() < 2 || cols.size() > 3) throw ValidationError("row", "expected 2 or 3 columns", line_no);

        Incident incident;
        incident.date = std::string(detail::trim(cols[0]));
        if (incident.date.empty()) throw ValidationError("year", "must not be empty", line_no);

        const std::string_view deaths = detail::trim(cols[1]);
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(deaths.data(), deaths.data() + deaths.size(), value);
        if (ec != std::errc{} || ptr != deaths.data() + deaths.size() || deaths.empty())
            throw ValidationError("deaths", "must be an integer", line_no);
        if (value < 0) throw ValidationError("deaths", "must be >= 0", line_no);
        incident.deaths = value;

        if (cols.size() == 3) {
            const std::string_view weapon = detail::trim(cols[2]);
            if (!weapon.empty()) {
                int code = 0;
                auto [wp, wec] = std::from_chars(weapon.data(), weapon.data() + weapon.size(), code);
                if (wec != std::errc{} || wp != weapon.data() + weapon.size() || code < 1 || code > 6)
                    throw ValidationError("weapon", "must be an integer code in 1..6", line_no);
                incident.weapon = code;
            }
        }
        data.incidents.push_back(std::move(incident));
    }
    return data;
}

IncidentDataset load_incidents(const std::filesystem::path& path) {
    return parse_incidents(detail::read_file(path));
}

std::string format_incidents(const IncidentDataset& data) {
    std::string out;
    out.reserve(data.incidents.size() * 12 + 64);
    out += kIncidentFormatTag;
    out += "\nyear,deaths,weapon\n";
    for (const auto& incident : data.incidents) {
        out += incident.date;
        out += ',';
        out += std::to_string(incident.deaths);
        out += ',';
        if (incident.weapon) out += std::to_string(*incident.weapon);
        out += '\n';
    }
    return out;
}

} // namespace raresim
