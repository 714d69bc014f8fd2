#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "retroinc/model.hpp"
#include "retroinc/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

using namespace retroinc;

namespace {

SimParams default_params() {
    SimParams p;
    p.m = -1.5;
    p.b = 0.5;
    p.c = -0.5;
    p.s = -1.5;
    p.r = -5.0;
    return p;
}

} // namespace

TEST_CASE("chain reduction: marriage ages are exponential when only 3->4 is active") {
    // Start everyone out of school with negligible mortality, so the only
    // live transition is marriage at rate exp(m + b x). The empirical
    // marriage-age distribution must match the shifted exponential.
    SimParams p = default_params();
    p.r = -60.0; // mortality never fires over any humane horizon
    p.c = 0.0;
    const ModelConfig config;
    Rng rng(1234);

    for (int x : {0, 1}) {
        const double rate = std::exp(p.m + p.b * x);
        const int n = 100000;
        std::vector<double> ages;
        ages.reserve(n);
        for (int i = 0; i < n; ++i) {
            const auto transitions = simulate_chain(rng, p, x, State::OutOfSchoolUnmarried,
                                                    config.min_marriage_age, 1.0e6);
            REQUIRE(!transitions.empty());
            REQUIRE(transitions.front().to == State::OutOfSchoolMarried);
            ages.push_back(transitions.front().age - config.min_marriage_age);
        }
        std::sort(ages.begin(), ages.end());
        double ks = 0.0;
        for (int i = 0; i < n; ++i) {
            const double cdf = -std::expm1(-rate * ages[static_cast<std::size_t>(i)]);
            const double hi = static_cast<double>(i + 1) / n;
            const double lo = static_cast<double>(i) / n;
            ks = std::max(ks, std::max(std::abs(cdf - hi), std::abs(cdf - lo)));
        }
        CHECK(ks < 0.01);
    }
}

TEST_CASE("zero-mortality parameters never reach the dead state") {
    SimParams p = default_params();
    p.r = -60.0;
    const ModelConfig config;
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const EventHistory h = simulate_history(rng, p, config);
        for (const Transition& tr : h.transitions) {
            CHECK(tr.to != State::Dead);
        }
    }
}

TEST_CASE("extreme marriage rate makes the two cohorts coincide") {
    SimParams p = default_params();
    p.m = 8.0;   // marriage within hours of eligibility
    p.r = -60.0; // and nobody dies
    ScenarioConfig sc;
    sc.params = p;
    sc.n_per_design = 800;
    const CohortSample cohort_I = simulate_cohort(sc, Design::I, 7, 0);
    const CohortSample cohort_II = simulate_cohort(sc, Design::II, 7, 0);
    CHECK(cohort_I.records.size() == cohort_II.records.size());
    CHECK(cohort_II.records.size() == 800);
}

TEST_CASE("sample-path conversion: school end at 18, marriage at 21, surveyed at 25") {
    const ModelConfig config;
    EventHistory h;
    h.birth_year = config.cross_section_time - 25.0;
    h.x = 0;
    h.initial_state = State::AtSchoolUnmarried;
    h.transitions = {{18.0, State::OutOfSchoolUnmarried}, {21.0, State::OutOfSchoolMarried}};

    for (Design design : {Design::I, Design::II}) {
        const CohortSample cohort = build_cohort({h}, design, config);
        REQUIRE(cohort.records.size() == 1);
        const SurveyRecord& rec = cohort.records.front();
        CHECK(rec.age_at_survey == doctest::Approx(25.0));
        REQUIRE(rec.married());
        CHECK(*rec.marriage_age == doctest::Approx(21.0));
        REQUIRE(rec.schooling_end_age.has_value());
        CHECK(*rec.schooling_end_age == doctest::Approx(18.0));
    }
}

TEST_CASE("cohort membership rules") {
    const ModelConfig config;

    SUBCASE("dead before the cross-section is excluded from both designs") {
        EventHistory h;
        h.birth_year = 1975.0;
        h.initial_state = State::OutOfSchoolUnmarried;
        h.transitions = {{20.0, State::OutOfSchoolMarried}, {24.0, State::Dead}};
        CHECK(build_cohort({h}, Design::I, config).records.empty());
        CHECK(build_cohort({h}, Design::II, config).records.empty());
    }

    SUBCASE("unmarried at the cross-section: design II only, unmarried record") {
        EventHistory h;
        h.birth_year = 1980.0;
        h.initial_state = State::AtSchoolUnmarried;
        h.transitions = {{16.0, State::OutOfSchoolUnmarried}};
        CHECK(build_cohort({h}, Design::I, config).records.empty());
        const CohortSample cohort = build_cohort({h}, Design::II, config);
        REQUIRE(cohort.records.size() == 1);
        CHECK(!cohort.records.front().married());
        CHECK(*cohort.records.front().schooling_end_age == doctest::Approx(16.0));
    }

    SUBCASE("still in school at the cross-section: censored schooling age") {
        EventHistory h;
        h.birth_year = 1990.0; // aged 15 in 2005
        h.initial_state = State::AtSchoolUnmarried;
        const CohortSample cohort = build_cohort({h}, Design::II, config);
        REQUIRE(cohort.records.size() == 1);
        CHECK(!cohort.records.front().schooling_end_age.has_value());
    }

    SUBCASE("never schooled: schooling ended at the school start age") {
        EventHistory h;
        h.birth_year = 1980.0;
        h.initial_state = State::OutOfSchoolUnmarried;
        const CohortSample cohort = build_cohort({h}, Design::II, config);
        REQUIRE(cohort.records.size() == 1);
        CHECK(*cohort.records.front().schooling_end_age ==
              doctest::Approx(config.school_start_age));
    }

    SUBCASE("married in school and still in school: censored schooling, marriage kept") {
        EventHistory h;
        h.birth_year = 1987.0; // aged 18
        h.initial_state = State::AtSchoolUnmarried;
        h.transitions = {{16.5, State::AtSchoolMarried}};
        const CohortSample cohort = build_cohort({h}, Design::I, config);
        REQUIRE(cohort.records.size() == 1);
        CHECK(*cohort.records.front().marriage_age == doctest::Approx(16.5));
        CHECK(!cohort.records.front().schooling_end_age.has_value());
    }
}

TEST_CASE("every design-I admission is a design-II admission") {
    ScenarioConfig sc;
    sc.params = default_params();
    sc.n_per_design = 4000;
    Rng rng(sc.seed, 0);
    std::vector<EventHistory> histories;
    for (int i = 0; i < sc.n_per_design; ++i) {
        histories.push_back(simulate_history(rng, sc.params, sc.model));
    }
    const CohortSample cohort_I = build_cohort(histories, Design::I, sc.model);
    const CohortSample cohort_II = build_cohort(histories, Design::II, sc.model);
    CHECK(cohort_I.records.size() <= cohort_II.records.size());
    // build_cohort preserves history order, so design-I records appear as an
    // ordered sub-sequence of design-II records.
    std::size_t j = 0;
    for (const SurveyRecord& rec : cohort_I.records) {
        bool found = false;
        for (; j < cohort_II.records.size(); ++j) {
            const SurveyRecord& other = cohort_II.records[j];
            if (other.age_at_survey == rec.age_at_survey && other.x == rec.x &&
                other.marriage_age == rec.marriage_age) {
                found = true;
                ++j;
                break;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("simulated histories satisfy the event-history invariants") {
    ScenarioConfig sc;
    sc.params = default_params();
    sc.params.d = 1.0;
    sc.params.g = 1.0;
    Rng rng(5, 3);
    for (int i = 0; i < 3000; ++i) {
        const EventHistory h = simulate_history(rng, sc.params, sc.model);
        CHECK((h.initial_state == State::AtSchoolUnmarried ||
               h.initial_state == State::OutOfSchoolUnmarried));
        State current = h.initial_state;
        double last_age = sc.model.min_marriage_age;
        for (const Transition& tr : h.transitions) {
            CHECK(tr.age > last_age);
            CHECK(current != State::Dead);
            // legality via the rate table: throws on an illegal pair
            CHECK_NOTHROW(transition_rate(current, tr.to, h.x, sc.params));
            last_age = tr.age;
            current = tr.to;
        }
    }
}

TEST_CASE("seed determinism: identical seeds give byte-identical cohort files") {
    ScenarioConfig sc;
    sc.params = default_params();
    sc.n_per_design = 500;

    auto csv_for = [&](std::uint64_t seed, std::uint64_t stream) {
        const CohortSample cohort = simulate_cohort(sc, Design::I, seed, stream);
        std::ostringstream out;
        write_cohort_csv(cohort, out);
        return out.str();
    };
    CHECK(csv_for(42, 0) == csv_for(42, 0));
    CHECK(csv_for(42, 0) != csv_for(42, 1));
    CHECK(csv_for(42, 0) != csv_for(43, 0));
}

TEST_CASE("cohort CSV round trip preserves the fitted fields") {
    ScenarioConfig sc;
    sc.params = default_params();
    sc.n_per_design = 400;
    const CohortSample cohort = simulate_cohort(sc, Design::II, 11, 1);

    const std::string path = "round_trip_cohort.csv";
    write_cohort_csv(cohort, path);
    const CohortSample loaded = read_cohort_csv(path);
    std::remove(path.c_str());

    REQUIRE(loaded.records.size() == cohort.records.size());
    CHECK(loaded.design == cohort.design);
    for (std::size_t i = 0; i < cohort.records.size(); ++i) {
        const SurveyRecord& a = cohort.records[i];
        const SurveyRecord& b = loaded.records[i];
        CHECK(a.age_at_survey == b.age_at_survey);
        CHECK(a.marriage_age == b.marriage_age);
        CHECK(a.schooling_end_age == b.schooling_end_age);
        CHECK(a.x == b.x);
        CHECK(a.covariates.education == b.covariates.education);
    }
}

TEST_CASE("mean cohort sizes under the calibrated scenario") {
    // Spot check at reduced replication count; the full-scale version is
    // acceptance criterion 7.
    ScenarioConfig sc;
    sc.params = default_params();
    sc.n_per_design = 2500;
    double sum_I = 0.0;
    double sum_II = 0.0;
    const int reps = 60;
    for (int rep = 0; rep < reps; ++rep) {
        sum_I += static_cast<double>(
            simulate_cohort(sc, Design::I, 2024, 2 * static_cast<std::uint64_t>(rep))
                .records.size());
        sum_II += static_cast<double>(
            simulate_cohort(sc, Design::II, 2024, 2 * static_cast<std::uint64_t>(rep) + 1)
                .records.size());
    }
    CHECK(sum_I / reps == doctest::Approx(1864.0).epsilon(0.03));
    CHECK(sum_II / reps == doctest::Approx(2229.0).epsilon(0.03));
}
