#include "retroinc/estimate.hpp"
#include "retroinc/kernels.hpp"
#include "retroinc/likelihood.hpp"
#include "retroinc/model.hpp"
#include "retroinc/predict.hpp"
#include "retroinc/simulate.hpp"
#include "retroinc/survey.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <vector>

namespace py = pybind11;
using namespace retroinc;

namespace {

std::vector<std::vector<double>> covariance_rows(const FitResult& r) {
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < r.covariance.rows(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < r.covariance.cols(); ++j) {
            row.push_back(r.covariance(i, j));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Incidence-rate estimation from retrospective cross-sectional cohorts";

    py::enum_<State>(m, "State")
        .value("AT_SCHOOL_UNMARRIED", State::AtSchoolUnmarried)
        .value("AT_SCHOOL_MARRIED", State::AtSchoolMarried)
        .value("OUT_OF_SCHOOL_UNMARRIED", State::OutOfSchoolUnmarried)
        .value("OUT_OF_SCHOOL_MARRIED", State::OutOfSchoolMarried)
        .value("DEAD", State::Dead);

    py::enum_<Design>(m, "Design").value("I", Design::I).value("II", Design::II);

    py::enum_<FitVariant>(m, "FitVariant")
        .value("COMBINED", FitVariant::combined)
        .value("DESIGN_I", FitVariant::design_I)
        .value("DESIGN_I_NO_CORRECTION", FitVariant::design_I_no_correction)
        .value("DESIGN_II", FitVariant::design_II);

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("school_start_age", &ModelConfig::school_start_age)
        .def_readwrite("min_marriage_age", &ModelConfig::min_marriage_age)
        .def_readwrite("cross_section_time", &ModelConfig::cross_section_time);

    py::class_<SimParams>(m, "SimParams")
        .def(py::init<>())
        .def_readwrite("m", &SimParams::m)
        .def_readwrite("b", &SimParams::b)
        .def_readwrite("c", &SimParams::c)
        .def_readwrite("d", &SimParams::d)
        .def_readwrite("g", &SimParams::g)
        .def_readwrite("s", &SimParams::s)
        .def_readwrite("r", &SimParams::r)
        .def("non_differential", &SimParams::non_differential);

    py::class_<PiecewiseRate>(m, "PiecewiseRate")
        .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("cuts"),
             py::arg("values"))
        .def_static("constant", &PiecewiseRate::constant, py::arg("rate"), py::arg("age_lo"),
                    py::arg("age_hi"))
        .def("value_at", &PiecewiseRate::value_at)
        .def("integral", &PiecewiseRate::integral, py::arg("u"), py::arg("v"))
        .def_property_readonly("cuts", &PiecewiseRate::cuts)
        .def_property_readonly("values", &PiecewiseRate::values);

    py::class_<Covariates>(m, "Covariates")
        .def(py::init<>())
        .def_readwrite("birth_cohort", &Covariates::birth_cohort)
        .def_readwrite("residence", &Covariates::residence)
        .def_readwrite("caste", &Covariates::caste)
        .def_readwrite("religion", &Covariates::religion)
        .def_readwrite("education", &Covariates::education);

    py::class_<SurveyRecord>(m, "SurveyRecord")
        .def(py::init<>())
        .def_readwrite("design", &SurveyRecord::design)
        .def_readwrite("age_at_survey", &SurveyRecord::age_at_survey)
        .def_readwrite("marriage_age", &SurveyRecord::marriage_age)
        .def_readwrite("schooling_end_age", &SurveyRecord::schooling_end_age)
        .def_readwrite("x", &SurveyRecord::x)
        .def_readwrite("covariates", &SurveyRecord::covariates)
        .def("married", &SurveyRecord::married);

    py::class_<CohortSample>(m, "CohortSample")
        .def(py::init<>())
        .def_readwrite("design", &CohortSample::design)
        .def_readwrite("records", &CohortSample::records)
        .def("__len__", [](const CohortSample& c) { return c.records.size(); });

    py::class_<ScenarioConfig>(m, "ScenarioConfig")
        .def(py::init<>())
        .def_static("load", &ScenarioConfig::load)
        .def_readwrite("model", &ScenarioConfig::model)
        .def_readwrite("params", &ScenarioConfig::params)
        .def_readwrite("n_per_design", &ScenarioConfig::n_per_design)
        .def_readwrite("replications", &ScenarioConfig::replications)
        .def_readwrite("seed", &ScenarioConfig::seed);

    m.def("transition_rate", &transition_rate, py::arg("from_state"), py::arg("to_state"),
          py::arg("x"), py::arg("params"));

    m.def("simulate_cohort", &simulate_cohort, py::arg("scenario"), py::arg("design"),
          py::arg("seed"), py::arg("stream_index"));
    m.def("write_cohort_csv",
          py::overload_cast<const CohortSample&, const std::string&>(&write_cohort_csv));
    m.def("read_cohort_csv", &read_cohort_csv);

    // marriage rate models
    py::class_<MarriageRateModel>(m, "MarriageRateModel")
        .def("n_params", &MarriageRateModel::n_params)
        .def("param_names", &MarriageRateModel::param_names)
        .def("log_rate",
             [](const MarriageRateModel& model, const SurveyRecord& rec, double age,
                const std::vector<double>& theta) { return model.log_rate(rec, age, theta); })
        .def("cumulative_hazard",
             [](const MarriageRateModel& model, const SurveyRecord& rec, double lo, double hi,
                const std::vector<double>& theta) {
                 return model.cumulative_hazard(rec, lo, hi, theta);
             });
    py::class_<ConstantRateModel, MarriageRateModel>(m, "ConstantRateModel").def(py::init<>());
    py::class_<BandRateModel, MarriageRateModel>(m, "BandRateModel").def(py::init<>());

    m.def("loglik_design_I",
          [](const SurveyRecord& rec, const MarriageRateModel& model,
             const std::vector<double>& theta, const ModelConfig& cfg) {
              return loglik_design_I(rec, model, theta, cfg);
          });
    m.def("loglik_design_I_uncorrected",
          [](const SurveyRecord& rec, const MarriageRateModel& model,
             const std::vector<double>& theta, const ModelConfig& cfg) {
              return loglik_design_I_uncorrected(rec, model, theta, cfg);
          });
    m.def("loglik_design_II",
          [](const SurveyRecord& rec, const MarriageRateModel& model,
             const std::vector<double>& theta, const ModelConfig& cfg) {
              return loglik_design_II(rec, model, theta, cfg);
          });
    m.def("joint_loglik",
          [](const std::vector<CohortSample>& cohorts, const MarriageRateModel& model,
             const std::vector<double>& theta, const ModelConfig& cfg) {
              return joint_loglik(cohorts, model, theta, cfg);
          });
    m.def("loglik_gradient",
          [](const std::vector<CohortSample>& cohorts, const MarriageRateModel& model,
             const std::vector<double>& theta, const ModelConfig& cfg) {
              return loglik_gradient(cohorts, model, theta, cfg);
          });

    py::class_<FitResult>(m, "FitResult")
        .def_readonly("names", &FitResult::names)
        .def_readonly("theta", &FitResult::theta)
        .def_readonly("se", &FitResult::se)
        .def_readonly("ci_low", &FitResult::ci_low)
        .def_readonly("ci_high", &FitResult::ci_high)
        .def_readonly("fixed", &FitResult::fixed)
        .def_readonly("loglik", &FitResult::loglik)
        .def_readonly("converged", &FitResult::converged)
        .def_readonly("iterations", &FitResult::iterations)
        .def_readonly("message", &FitResult::message)
        .def_readonly("covariance_ok", &FitResult::covariance_ok)
        .def_property_readonly("covariance", &covariance_rows);

    m.def(
        "fit",
        [](const std::vector<CohortSample>& cohorts, const MarriageRateModel& model,
           const ModelConfig& cfg, FitVariant variant, const std::vector<double>& theta_init) {
            FitOptions options;
            options.variant = variant;
            options.theta_init = theta_init;
            return fit(cohorts, model, cfg, options);
        },
        py::arg("cohorts"), py::arg("model"), py::arg("config"),
        py::arg("variant") = FitVariant::combined,
        py::arg("theta_init") = std::vector<double>{});

    py::class_<ReplicationRow>(m, "ReplicationRow")
        .def_readonly("variant", &ReplicationRow::variant)
        .def_readonly("parameter", &ReplicationRow::parameter)
        .def_readonly("truth", &ReplicationRow::truth)
        .def_readonly("mean", &ReplicationRow::mean)
        .def_readonly("bias", &ReplicationRow::bias)
        .def_readonly("mc_sd", &ReplicationRow::mc_sd)
        .def_readonly("mean_se", &ReplicationRow::mean_se)
        .def_readonly("coverage", &ReplicationRow::coverage);

    py::class_<ReplicationSummary>(m, "ReplicationSummary")
        .def_readonly("rows", &ReplicationSummary::rows)
        .def_readonly("replications", &ReplicationSummary::replications)
        .def_readonly("excluded", &ReplicationSummary::excluded)
        .def_readonly("mean_cohort_size_I", &ReplicationSummary::mean_cohort_size_I)
        .def_readonly("mean_cohort_size_II", &ReplicationSummary::mean_cohort_size_II);

    m.def("run_scenario",
          [](const ScenarioConfig& sc, int workers) { return run_scenario(sc, workers); },
          py::arg("scenario"), py::arg("workers") = 1,
          py::call_guard<py::gil_scoped_release>());

    // survey model
    m.def("education_at_band", &education_at_band, py::arg("education"), py::arg("band"));
    m.def("interval_censored_numerator",
          [](const std::vector<double>& theta, const Covariates& covs, int y_floor,
             const ModelConfig& cfg) {
              const BandRateModel model;
              return interval_censored_numerator(model, theta, covs, y_floor, cfg);
          });
    m.def("parse_survey_csv",
          [](const std::string& path, std::optional<Design> design) {
              SurveyParse parsed = parse_survey_csv(path, design);
              return py::make_tuple(parsed.cohort_I, parsed.cohort_II, parsed.rejected,
                                    parsed.warnings);
          },
          py::arg("path"), py::arg("design") = std::nullopt);
    m.def(
        "fit_survey",
        [](const CohortSample& cohort_I, const CohortSample& cohort_II, const ModelConfig& cfg,
           FitVariant variant) {
            SurveyFitOptions options;
            options.variant = variant;
            return fit_survey(cohort_I, cohort_II, cfg, options);
        },
        py::arg("cohort_I"), py::arg("cohort_II"), py::arg("config"),
        py::arg("variant") = FitVariant::combined,
        py::call_guard<py::gil_scoped_release>());
    m.def("generate_synthetic_survey",
          [](const std::vector<double>& theta, int n, Design design, std::uint64_t seed,
             const ModelConfig& cfg) {
              return generate_synthetic_survey(theta, n, design, seed, cfg);
          });

    // kernels
    py::class_<RateBundle>(m, "RateBundle")
        .def(py::init<>())
        .def_readwrite("alpha0", &RateBundle::alpha0)
        .def_readwrite("alpha1", &RateBundle::alpha1)
        .def_readwrite("lambda0", &RateBundle::lambda0)
        .def_readwrite("lambda1", &RateBundle::lambda1)
        .def("local_independence", &RateBundle::local_independence)
        .def("nondifferential_mortality", &RateBundle::nondifferential_mortality)
        .def_static("from_params", &RateBundle::from_params, py::arg("params"), py::arg("x"),
                    py::arg("config"), py::arg("age_max"));
    m.def("kernel_k", &kernel_k, py::arg("rates"), py::arg("t"), py::arg("z"),
          py::arg("school_end_age"), py::arg("config"));
    m.def("kernel_h", &kernel_h, py::arg("rates"), py::arg("t"), py::arg("marriage_age"),
          py::arg("z"), py::arg("school_end_age"), py::arg("config"));
    m.def("normalizer_design_I", &normalizer_design_I);
    m.def("normalizer_design_II", &normalizer_design_II);

    // prediction
    py::class_<MortalityTable>(m, "MortalityTable")
        .def(py::init([](const PiecewiseRate& rate) { return MortalityTable{rate}; }))
        .def_static("load_csv", &MortalityTable::load_csv)
        .def_static("zero", &MortalityTable::zero)
        .def_readwrite("rate", &MortalityTable::rate);
    m.def("predict_marriage_by_age", &predict_marriage_by_age, py::arg("marriage_rate"),
          py::arg("mortality"), py::arg("a1"), py::arg("a2"), py::arg("config"));
    m.def("predict_married_and_alive", &predict_married_and_alive, py::arg("marriage_rate"),
          py::arg("mortality"), py::arg("a1"), py::arg("a2"), py::arg("config"));
    m.def("marriage_rate_for",
          [](const std::vector<double>& theta, const Covariates& covs) {
              return marriage_rate_for(theta, covs);
          });
}
