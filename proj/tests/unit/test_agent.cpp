#include <doctest.h>

#include <cmath>

#include "raresim/agent.hpp"
#include "raresim/error.hpp"
#include "raresim/rng.hpp"

using namespace raresim;

namespace {

FeatureTensor with_pred(double police, double terror) {
    FeatureTensor t;
    t.variable.police_predisposition = police;
    t.variable.terror_predisposition = terror;
    return t;
}

RoleThresholds unit_thresholds() {
    RoleThresholds t;
    t.police_pred_threshold = 1.0;
    t.terror_pred_threshold = 1.0;
    t.leader_education_min = 0.7;
    t.financier_wealth_min = 1.0;
    return t;
}

AgentState random_state(Rng& rng) {
    AgentState s;
    auto& c = s.tensor.constant;
    c.education = std::floor(rng.uniform() * 4.0) / 3.0;
    c.married = rng.bernoulli(0.5) ? 1.0 : 0.0;
    c.wealth = static_cast<double>(rng.below(5)) / 2.0;
    c.religious_training = rng.uniform();
    c.crime_exposure = rng.uniform();
    auto& v = s.tensor.variable;
    v.police_predisposition = rng.uniform() * 3.0;
    v.terror_predisposition = rng.uniform() * 3.0;
    v.power = rng.uniform() * 3.0;
    return s;
}

} // namespace

TEST_SUITE("agent-model") {
    TEST_CASE("signed predisposition is police minus terror") {
        CHECK(signed_predisposition(with_pred(0.0, 0.0)) == 0.0);
        CHECK(signed_predisposition(with_pred(2.0, 0.5)) == doctest::Approx(1.5));
        CHECK(signed_predisposition(with_pred(0.5, 2.0)) == doctest::Approx(-1.5));
    }

    TEST_CASE("classification examples") {
        const RoleThresholds t = unit_thresholds();
        AgentState s;
        s.tensor = with_pred(0.1, 0.1);
        CHECK(classify_role(s, t) == Role::Civilian);

        s.tensor = with_pred(0.0, 1.5);
        s.tensor.constant.education = 0.9;
        s.tensor.constant.married = 1.0;
        CHECK(classify_role(s, t) == Role::Leader);

        s.tensor = with_pred(0.0, 1.5);
        s.tensor.constant.education = 0.2;
        s.tensor.constant.married = 0.0;
        s.tensor.constant.wealth = 0.3;
        CHECK(classify_role(s, t) == Role::Perpetrator);

        s.tensor = with_pred(0.0, 1.5);
        s.tensor.constant.married = 1.0;
        s.tensor.constant.wealth = 2.0;
        CHECK(classify_role(s, t) == Role::Financier);

        s.tensor = with_pred(1.5, 0.2);
        CHECK(classify_role(s, t) == Role::Police);
    }

    TEST_CASE("a tie above both thresholds stays civilian") {
        AgentState s;
        s.tensor = with_pred(1.5, 1.5);
        CHECK(classify_role(s, unit_thresholds()) == Role::Civilian);
    }

    TEST_CASE("police needs to outweigh terror") {
        AgentState s;
        s.tensor = with_pred(1.2, 1.4);
        s.tensor.constant.married = 0.0;
        CHECK(classify_role(s, unit_thresholds()) == Role::Perpetrator);
    }

    TEST_CASE("property: classification is pure and ignores religion and crime exposure") {
        Rng rng(11);
        const RoleThresholds t = unit_thresholds();
        for (int i = 0; i < 20000; ++i) {
            AgentState s = random_state(rng);
            const Role r = classify_role(s, t);
            CHECK(classify_role(s, t) == r);
            s.tensor.constant.religious_training = rng.uniform();
            s.tensor.constant.crime_exposure = rng.uniform();
            REQUIRE(classify_role(s, t) == r);
        }
    }

    TEST_CASE("property: raising terror predisposition never returns a terrorist to civilian") {
        Rng rng(12);
        const RoleThresholds t = unit_thresholds();
        for (int i = 0; i < 20000; ++i) {
            AgentState s = random_state(rng);
            bool was_terrorist = is_terrorist(classify_role(s, t));
            for (int k = 0; k < 20; ++k) {
                s.tensor.variable.terror_predisposition += 0.25 * rng.uniform();
                const Role r = classify_role(s, t);
                if (was_terrorist) REQUIRE(r != Role::Civilian);
                was_terrorist = was_terrorist || is_terrorist(r);
            }
        }
    }

    TEST_CASE("property: every state maps to exactly one declared role") {
        Rng rng(13);
        const RoleThresholds t = unit_thresholds();
        int seen[5] = {0, 0, 0, 0, 0};
        for (int i = 0; i < 20000; ++i) {
            const int r = static_cast<int>(classify_role(random_state(rng), t));
            REQUIRE(r >= 0);
            REQUIRE(r < 5);
            ++seen[r];
        }
        for (int r = 0; r < 5; ++r) CHECK(seen[r] > 0);
    }

    TEST_CASE("tensor validity") {
        FeatureTensor t;
        CHECK(t.is_valid());
        t.constant.married = 0.5;
        CHECK_FALSE(t.is_valid());
        t.constant.married = 1.0;
        t.variable.power = -0.1;
        CHECK_FALSE(t.is_valid());
        t.variable.power = 0.0;
        t.constant.education = 1.5;
        CHECK_FALSE(t.is_valid());
    }

    TEST_CASE("threshold validation") {
        RoleThresholds t;
        CHECK_NOTHROW(t.validate());
        t.terror_pred_threshold = -1.0;
        CHECK_THROWS_AS(t.validate(), ValidationError);
        t = RoleThresholds{};
        t.power_removal_floor = 0.0;
        CHECK_NOTHROW(t.validate());
        t.power_removal_floor = -0.5;
        CHECK_THROWS_AS(t.validate(), ValidationError);
    }
}
