#include "raresim/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "raresim/error.hpp"
#include "raresim/rng.hpp"

namespace raresim {

namespace {

constexpr std::uint64_t kFixtureSeed = 1968;
constexpr double kBodyAlpha = 2.5;
constexpr double kBodyCap = 60.0;  // cap on the unscaled Pareto draw

struct Tail {
    std::vector<std::int64_t> body;
    std::int64_t record = 0;  // the single largest event
};

std::vector<std::int64_t> scale_body(const std::vector<double>& raw, double c) {
    std::vector<std::int64_t> out;
    out.reserve(raw.size());
    for (double y : raw) out.push_back(std::max<std::int64_t>(1, std::llround(c * y)));
    return out;
}

double sum_of(const std::vector<std::int64_t>& xs) {
    double s = 0.0;
    for (auto x : xs) s += static_cast<double>(x);
    return s;
}

double sumsq_of(const std::vector<std::int64_t>& xs) {
    double s = 0.0;
    for (auto x : xs) s += static_cast<double>(x) * static_cast<double>(x);
    return s;
}

// Finds a scale c for the body such that one extra record event closes both
// the sum and the sum of squares.
Tail solve_tail(const std::vector<double>& raw, double target_sum, double target_sumsq) {
    auto residual = [&](double c) {
        const auto body = scale_body(raw, c);
        const double record = target_sum - sum_of(body);
        return sumsq_of(body) + record * record - target_sumsq;
    };
    // Largest scale that still leaves a positive record event.
    double lo = 1e-6, hi = 1e6;
    for (int i = 0; i < 200; ++i) {
        const double mid = std::sqrt(lo * hi);
        (sum_of(scale_body(raw, mid)) < target_sum - 1.0 ? lo : hi) = mid;
    }
    double c_hi = lo, c_lo = 1e-6;
    if (residual(c_hi) > 0.0) throw ContractViolation("incident fixture: body too light for the target variance");
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (c_lo + c_hi);
        (residual(mid) > 0.0 ? c_lo : c_hi) = mid;
    }
    Tail tail;
    tail.body = scale_body(raw, c_hi);
    tail.record = std::llround(target_sum - sum_of(tail.body));
    return tail;
}

int draw_weapon(Rng& rng, bool deadly) {
    static constexpr double quiet[6] = {0.01, 0.50, 0.15, 0.20, 0.04, 0.10};
    static constexpr double lethal[6] = {0.01, 0.55, 0.05, 0.32, 0.03, 0.04};
    const double* w = deadly ? lethal : quiet;
    double u = rng.uniform();
    for (int k = 0; k < 6; ++k) {
        if (u < w[k]) return k + 1;
        u -= w[k];
    }
    return 6;
}

void write_text(const std::filesystem::path& path, const std::string& text, bool force) {
    if (std::filesystem::exists(path) && !force)
        throw ValidationError(path.string(), "file exists; pass --force to overwrite");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw ValidationError(path.string(), "write failed");
}

} // namespace

IncidentDataset generate_incident_fixture(const IncidentFixtureSpec& spec) {
    if (spec.zeros + 2 > spec.rows) throw ContractViolation("incident fixture: too many zeros");
    const double n = static_cast<double>(spec.rows);
    const double target_sum = std::round(spec.mean * n);
    const double target_sumsq = std::round(spec.variance * (n - 1.0) + target_sum * target_sum / n);

    Rng rng(kFixtureSeed);
    const std::size_t positives = spec.rows - spec.zeros;
    std::vector<double> raw;
    raw.reserve(positives - 1);
    while (raw.size() < positives - 1) {
        const double y = std::pow(rng.uniform_open(), -1.0 / kBodyAlpha);
        if (y <= kBodyCap) raw.push_back(y);
    }
    const Tail tail = solve_tail(raw, target_sum, target_sumsq);

    std::vector<std::int64_t> deaths(spec.zeros, 0);
    deaths.insert(deaths.end(), tail.body.begin(), tail.body.end());
    deaths.push_back(tail.record);

    const auto span = static_cast<std::uint64_t>(spec.last_year - spec.first_year + 1);
    IncidentDataset data;
    data.incidents.reserve(deaths.size());
    for (auto d : deaths) {
        Incident inc;
        inc.date = std::to_string(spec.first_year + static_cast<int>(rng.below(span)));
        inc.deaths = d;
        inc.weapon = draw_weapon(rng, d > 0);
        data.incidents.push_back(std::move(inc));
    }
    std::stable_sort(data.incidents.begin(), data.incidents.end(),
                     [](const Incident& a, const Incident& b) { return a.date < b.date; });
    return data;
}

RegionIndicators default_region() {
    RegionIndicators r;
    r.name = "baseline";
    r.married_fraction = 0.55;
    r.education = {0.3, 0.3, 0.25, 0.15};
    r.wealth_rate = 3.0;
    r.religiosity_mean = 0.6;
    r.religiosity_sd = 0.2;
    r.crime_density_mean = 0.3;
    r.crime_density_sd = 0.15;
    return r;
}

std::vector<RegionIndicators> contrast_regions() {
    RegionIndicators low_edu_mid_wealth;
    low_edu_mid_wealth.name = "north-africa-like";
    low_edu_mid_wealth.married_fraction = 0.6;
    low_edu_mid_wealth.education = {0.35, 0.3, 0.25, 0.1};
    low_edu_mid_wealth.wealth_rate = 3.5;
    low_edu_mid_wealth.religiosity_mean = 0.75;
    low_edu_mid_wealth.religiosity_sd = 0.15;
    low_edu_mid_wealth.crime_density_mean = 0.45;
    low_edu_mid_wealth.crime_density_sd = 0.2;

    RegionIndicators high_edu_high_wealth;
    high_edu_high_wealth.name = "western-europe-like";
    high_edu_high_wealth.married_fraction = 0.45;
    high_edu_high_wealth.education = {0.05, 0.2, 0.45, 0.3};
    high_edu_high_wealth.wealth_rate = 6.0;
    high_edu_high_wealth.religiosity_mean = 0.35;
    high_edu_high_wealth.religiosity_sd = 0.25;
    high_edu_high_wealth.crime_density_mean = 0.2;
    high_edu_high_wealth.crime_density_sd = 0.1;

    RegionIndicators low_edu_low_wealth;
    low_edu_low_wealth.name = "south-asia-like";
    low_edu_low_wealth.married_fraction = 0.65;
    low_edu_low_wealth.education = {0.45, 0.3, 0.17, 0.08};
    low_edu_low_wealth.wealth_rate = 1.5;
    low_edu_low_wealth.religiosity_mean = 0.85;
    low_edu_low_wealth.religiosity_sd = 0.1;
    low_edu_low_wealth.crime_density_mean = 0.4;
    low_edu_low_wealth.crime_density_sd = 0.2;

    return {low_edu_mid_wealth, high_edu_high_wealth, low_edu_low_wealth};
}

std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& dir, bool force) {
    std::filesystem::create_directories(dir / "regions");
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::filesystem::path& path, const std::string& text) {
        write_text(path, text, force);
        written.push_back(path);
    };
    put(dir / "regions" / "baseline.region", format_region(default_region()));
    for (const auto& r : contrast_regions()) put(dir / "regions" / (r.name + ".region"), format_region(r));
    put(dir / "default_config.json", to_json(SimulationConfig{}).dump(2) + "\n");
    put(dir / "incidents.csv", format_incidents(generate_incident_fixture()));
    return written;
}

} // namespace raresim
