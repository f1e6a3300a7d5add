#include "raresim/agent.hpp"

#include <cmath>

#include "raresim/error.hpp"

namespace raresim {

bool FeatureTensor::is_valid() const {
    const auto& c = constant;
    const auto& v = variable;
    for (double x : c.as_array())
        if (!std::isfinite(x)) return false;
    if (c.education < 0.0 || c.education > 1.0) return false;
    if (c.married != 0.0 && c.married != 1.0) return false;
    if (c.wealth < 0.0) return false;
    if (c.religious_training < 0.0 || c.religious_training > 1.0) return false;
    if (c.crime_exposure < 0.0 || c.crime_exposure > 1.0) return false;
    if (v.crimes_committed < 0) return false;
    for (double x : {v.police_predisposition, v.terror_predisposition, v.power})
        if (!std::isfinite(x) || x < 0.0) return false;
    return true;
}

std::string_view to_string(Role role) {
    switch (role) {
        case Role::Civilian: return "civilian";
        case Role::Police: return "police";
        case Role::Perpetrator: return "perpetrator";
        case Role::Leader: return "leader";
        case Role::Financier: return "financier";
    }
    return "unknown";
}

void RoleThresholds::validate() const {
    auto positive = [](double value, const char* field) {
        if (!(value > 0.0) || !std::isfinite(value))
            throw ValidationError(std::string("thresholds.") + field, "must be finite and > 0");
    };
    positive(police_pred_threshold, "police_pred_threshold");
    positive(terror_pred_threshold, "terror_pred_threshold");
    if (!(leader_education_min > 0.0 && leader_education_min <= 1.0))
        throw ValidationError("thresholds.leader_education_min", "must be in (0, 1]");
    positive(financier_wealth_min, "financier_wealth_min");
    positive(leader_power_attack_threshold, "leader_power_attack_threshold");
    positive(financier_power_min, "financier_power_min");
    if (!(power_removal_floor >= 0.0) || !std::isfinite(power_removal_floor))
        throw ValidationError("thresholds.power_removal_floor", "must be finite and >= 0");
}

Role classify_role(const AgentState& state, const RoleThresholds& t) {
    const auto& c = state.tensor.constant;
    const auto& v = state.tensor.variable;
    const double police = v.police_predisposition;
    const double terror = v.terror_predisposition;

    // Contested agent, equally pulled by both sides above both thresholds.
    if (police == terror && police >= t.police_pred_threshold && terror >= t.terror_pred_threshold)
        return Role::Civilian;

    if (police >= t.police_pred_threshold && police > terror) return Role::Police;

    if (terror >= t.terror_pred_threshold) {
        const bool married = c.married == 1.0;
        if (married && c.education >= t.leader_education_min) return Role::Leader;
        if (married && c.wealth >= t.financier_wealth_min) return Role::Financier;
        return Role::Perpetrator;
    }
    return Role::Civilian;
}

} // namespace raresim
