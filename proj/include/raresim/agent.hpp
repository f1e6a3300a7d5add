#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace raresim {

using AgentId = std::uint64_t;
using Tick = std::uint64_t;

/// Traits fixed at birth (tau1..tau5).
struct ConstantTraits {
    double education = 0.0;           // [0,1], 0 = none, 1 = tertiary
    double married = 0.0;             // {0,1}
    double wealth = 0.0;              // >= 0, relative to the region
    double religious_training = 0.0;  // [0,1]
    double crime_exposure = 0.0;      // [0,1]

    std::array<double, 5> as_array() const {
        return {education, married, wealth, religious_training, crime_exposure};
    }

    friend bool operator==(const ConstantTraits&, const ConstantTraits&) = default;
};

/// Traits that evolve through interactions (tau6..tau9).
struct VariableTraits {
    std::int64_t crimes_committed = 0;   // non-decreasing
    double police_predisposition = 0.0;  // >= 0
    double terror_predisposition = 0.0;  // >= 0
    double power = 0.0;                  // >= 0

    friend bool operator==(const VariableTraits&, const VariableTraits&) = default;
};

/// Rank-9 agent state. The constant block is never written after creation;
/// all interaction deltas target the variable block.
struct FeatureTensor {
    ConstantTraits constant;
    VariableTraits variable;

    bool is_valid() const;

    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;
};

struct AgentState {
    AgentId id = 0;
    FeatureTensor tensor;
    Tick born_tick = 0;
};

enum class Role : std::uint8_t { Civilian, Police, Perpetrator, Leader, Financier };

std::string_view to_string(Role role);

inline bool is_terrorist(Role role) {
    return role == Role::Perpetrator || role == Role::Leader || role == Role::Financier;
}

struct RoleThresholds {
    double police_pred_threshold = 1.22;
    double terror_pred_threshold = 0.75;
    double leader_education_min = 0.3;
    double financier_wealth_min = 1.0;
    double leader_power_attack_threshold = 1.65;
    double financier_power_min = 1.0;
    double power_removal_floor = 0.1;

    /// Throws ValidationError naming the first offending field.
    void validate() const;
};

/// tau7 - tau8. Negative leans towards terrorism, positive towards police.
inline double signed_predisposition(const FeatureTensor& tensor) {
    return tensor.variable.police_predisposition - tensor.variable.terror_predisposition;
}

/// Derives the current role from the tensor. Religion and crime exposure do not
/// take part in the gate.
Role classify_role(const AgentState& state, const RoleThresholds& thresholds);

} // namespace raresim
