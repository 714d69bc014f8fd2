#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "retroinc/errors.hpp"
#include "retroinc/estimate.hpp"
#include "retroinc/simulate.hpp"

#include <cmath>
#include <sstream>

using namespace retroinc;

namespace {

const ModelConfig kConfig{};

ScenarioConfig default_scenario() {
    ScenarioConfig sc;
    sc.params.m = -1.5;
    sc.params.b = 0.5;
    sc.params.c = -0.5;
    sc.params.s = -1.5;
    sc.params.r = -5.0;
    return sc;
}

} // namespace

TEST_CASE("maximizer finds the peak of a smooth concave objective") {
    Objective objective;
    objective.value = [](std::span<const double> th) {
        const double a = th[0] - 1.0;
        const double b = th[1] + 2.0;
        return -(a * a + 0.5 * b * b + 0.1 * a * b);
    };
    objective.gradient = [](std::span<const double> th) {
        const double a = th[0] - 1.0;
        const double b = th[1] + 2.0;
        return std::vector<double>{-(2.0 * a + 0.1 * b), -(b + 0.1 * a)};
    };
    const MaximizeResult res = maximize(objective, {5.0, 5.0});
    CHECK(res.converged);
    CHECK(res.theta[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(res.theta[1] == doctest::Approx(-2.0).epsilon(1e-6));

    SUBCASE("derivative-free fallback reaches the same peak") {
        Objective value_only;
        value_only.value = objective.value;
        const MaximizeResult nm = maximize(value_only, {5.0, 5.0});
        CHECK(nm.converged);
        CHECK(nm.used_fallback);
        CHECK(nm.theta[0] == doctest::Approx(1.0).epsilon(1e-4));
        CHECK(nm.theta[1] == doctest::Approx(-2.0).epsilon(1e-4));
    }
}

TEST_CASE("numerical hessian of a known quadratic") {
    Objective objective;
    objective.gradient = [](std::span<const double> th) {
        return std::vector<double>{-4.0 * th[0] - th[1], -th[0] - 2.0 * th[1]};
    };
    const std::vector<double> at{0.3, -0.7};
    const Matrix h = numerical_hessian(objective.gradient, at);
    CHECK(h(0, 0) == doctest::Approx(-4.0).epsilon(1e-8));
    CHECK(h(0, 1) == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(h(1, 0) == doctest::Approx(-1.0).epsilon(1e-8));
    CHECK(h(1, 1) == doctest::Approx(-2.0).epsilon(1e-8));
}

TEST_CASE("standard errors from the hessian") {
    SUBCASE("one-dimensional curvature -4 gives se 0.5") {
        Matrix h(1, 1);
        h(0, 0) = -4.0;
        const auto se = standard_errors(h);
        REQUIRE(se.has_value());
        CHECK((*se)[0] == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("diagonal hessian") {
        Matrix h(2, 2, 0.0);
        h(0, 0) = -2.5;
        h(1, 1) = -9.0;
        const auto se = standard_errors(h);
        REQUIRE(se.has_value());
        CHECK((*se)[0] == doctest::Approx(1.0 / std::sqrt(2.5)).epsilon(1e-12));
        CHECK((*se)[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("singular hessian is reported unavailable") {
        Matrix h(2, 2, 0.0);
        h(0, 0) = -1.0; // second row all zero
        CHECK(!standard_errors(h).has_value());
    }
    SUBCASE("saddle curvature is reported unavailable") {
        Matrix h(2, 2, 0.0);
        h(0, 0) = -1.0;
        h(1, 1) = 1.0;
        CHECK(!standard_errors(h).has_value());
    }
}

TEST_CASE("closed-form exponential maximum likelihood") {
    // Design-II records, everyone out of school, single free parameter m:
    // the MLE is log(events / exposure) and se(m) = 1/sqrt(events).
    ScenarioConfig sc = default_scenario();
    sc.params.b = 0.0;
    sc.params.c = 0.0;
    sc.n_per_design = 3000;
    std::vector<CohortSample> cohorts{simulate_cohort(sc, Design::II, 2, 1)};

    double events = 0.0;
    double exposure = 0.0;
    for (SurveyRecord& rec : cohorts[0].records) {
        rec.schooling_end_age = 6.0; // out of school over the whole window
        rec.x = 0;
        const double end = rec.married() ? *rec.marriage_age : rec.age_at_survey;
        exposure += std::max(0.0, end - kConfig.min_marriage_age);
        events += rec.married() ? 1.0 : 0.0;
    }
    REQUIRE(events > 50.0);

    const ConstantRateModel model;
    FitOptions options;
    options.variant = FitVariant::design_II;
    options.theta_init = {std::log(0.5 * events / exposure), 0.0, 0.0};
    options.free_mask = {true, false, false};
    const FitResult fr = fit(cohorts, model, kConfig, options);
    REQUIRE(fr.converged);
    CHECK(fr.theta[0] == doctest::Approx(std::log(events / exposure)).epsilon(1e-8));
    CHECK(fr.theta[1] == 0.0);
    CHECK(fr.fixed[1]);
    CHECK(fr.se[0] == doctest::Approx(1.0 / std::sqrt(events)).epsilon(1e-5));
    CHECK(std::isnan(fr.se[1]));
    CHECK(fr.covers(0, std::log(events / exposure)));
}

TEST_CASE("degenerate data: no marriages drives the rate to the boundary") {
    ScenarioConfig sc = default_scenario();
    sc.params.m = -40.0; // essentially nobody marries
    sc.params.r = -60.0;
    sc.n_per_design = 300;
    const std::vector<CohortSample> cohorts{simulate_cohort(sc, Design::II, 4, 1)};
    for (const SurveyRecord& rec : cohorts[0].records) {
        REQUIRE(!rec.married());
    }
    const ConstantRateModel model;
    FitOptions options;
    options.variant = FitVariant::design_II;
    options.free_mask = {true, false, false};
    const FitResult fr = fit(cohorts, model, kConfig, options);
    CHECK(!fr.converged);
    CHECK(fr.message.find("bound") != std::string::npos);
}

TEST_CASE("replication harness") {
    ScenarioConfig sc = default_scenario();
    sc.n_per_design = 600;
    sc.replications = 60;
    sc.seed = 31;

    SUBCASE("deterministic and schedule independent") {
        const ReplicationSummary one = run_scenario(sc, 1);
        const ReplicationSummary two = run_scenario(sc, 2);
        const ReplicationSummary again = run_scenario(sc, 2);
        REQUIRE(one.rows.size() == two.rows.size());
        for (std::size_t i = 0; i < one.rows.size(); ++i) {
            CHECK(one.rows[i].mean == two.rows[i].mean);
            CHECK(one.rows[i].mc_sd == two.rows[i].mc_sd);
            CHECK(one.rows[i].coverage == two.rows[i].coverage);
            CHECK(two.rows[i].mean == again.rows[i].mean);
        }
        CHECK(one.mean_cohort_size_I == two.mean_cohort_size_I);
    }

    SUBCASE("summary schema and small-sample sanity") {
        const ReplicationSummary summary = run_scenario(sc, 2);
        REQUIRE(summary.rows.size() == 12); // 4 variants x 3 parameters
        CHECK(summary.replications == 60);
        for (int v = 0; v < 4; ++v) {
            CHECK(summary.excluded[static_cast<std::size_t>(v)] <= 1);
        }
        for (const ReplicationRow& row : summary.rows) {
            CHECK(row.bias == doctest::Approx(row.mean - row.truth).epsilon(1e-12));
            CHECK(row.coverage >= 0.0);
            CHECK(row.coverage <= 1.0);
            if (row.variant != FitVariant::design_I_no_correction) {
                CHECK(std::abs(row.bias) < 0.1);
                CHECK(row.coverage > 0.8);
            }
        }
        // the uncorrected prevalent-cohort fit is visibly biased upward in m
        for (const ReplicationRow& row : summary.rows) {
            if (row.variant == FitVariant::design_I_no_correction && row.parameter == "m") {
                CHECK(row.bias > 0.15);
                CHECK(row.coverage < 0.2);
            }
        }

        std::ostringstream csv;
        write_replication_csv(summary, csv);
        CHECK(csv.str().rfind("likelihood,parameter,truth,mean,bias,mc_sd,mean_se,coverage\n",
                              0) == 0);
        CHECK(csv.str().find("design_I_no_correction,m,") != std::string::npos);
    }
}

TEST_CASE("doubling the sample size shrinks the Monte Carlo spread like 1/sqrt(2)") {
    ScenarioConfig sc = default_scenario();
    sc.replications = 400;
    sc.seed = 77;

    sc.n_per_design = 800;
    const ReplicationSummary small = run_scenario(sc, 2);
    sc.n_per_design = 1600;
    const ReplicationSummary big = run_scenario(sc, 2);

    for (std::size_t i = 0; i < small.rows.size(); ++i) {
        const ReplicationRow& a = small.rows[i];
        const ReplicationRow& b = big.rows[i];
        if (a.variant == FitVariant::design_I_no_correction) {
            continue; // biased variant: spread ratios still apply but skip
        }
        const double ratio = b.mc_sd / a.mc_sd;
        INFO(to_string(a.variant) << " " << a.parameter << " ratio " << ratio);
        CHECK(ratio > 0.63);
        CHECK(ratio < 0.78);
    }

    SUBCASE("combining the cohorts is more efficient than either alone") {
        double combined[3] = {0, 0, 0};
        double only_I[3] = {0, 0, 0};
        double only_II[3] = {0, 0, 0};
        for (const ReplicationRow& row : big.rows) {
            const int k = row.parameter == "m" ? 0 : row.parameter == "b" ? 1 : 2;
            if (row.variant == FitVariant::combined) {
                combined[k] = row.mc_sd;
            } else if (row.variant == FitVariant::design_I) {
                only_I[k] = row.mc_sd;
            } else if (row.variant == FitVariant::design_II) {
                only_II[k] = row.mc_sd;
            }
        }
        for (int k = 0; k < 3; ++k) {
            CHECK(combined[k] < only_I[k]);
            CHECK(combined[k] < only_II[k]);
        }
    }
}

TEST_CASE("fit result serializes to JSON with nulls for unavailable entries") {
    ScenarioConfig sc = default_scenario();
    sc.n_per_design = 500;
    std::array<CohortSample, 2> cohorts{simulate_cohort(sc, Design::I, 5, 0),
                                        simulate_cohort(sc, Design::II, 5, 1)};
    const ConstantRateModel model;
    const FitResult fr = fit(std::span<const CohortSample>(cohorts.data(), 2), model, kConfig);
    REQUIRE(fr.converged);
    std::ostringstream out;
    write_fit_json(fr, "constant", out);
    const std::string text = out.str();
    CHECK(text.find("\"model\": \"constant\"") != std::string::npos);
    CHECK(text.find("\"name\": \"m\"") != std::string::npos);
    CHECK(text.find("\"converged\": true") != std::string::npos);
}
