#pragma once

#include "retroinc/estimate.hpp"
#include "retroinc/likelihood.hpp"
#include "retroinc/model.hpp"
#include "retroinc/simulate.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retroinc {

// The 17 age bands of the survey incidence model:
// [12,15), [15,16), ..., [29,30), [30,50).
inline constexpr int kAgeBandCount = 17;
const std::array<double, kAgeBandCount + 1>& age_band_cuts();

// 0-based band index containing `age`; requires 12 <= age <= 50.
int age_band_of(double age);

// Education level in effect during band j (1-based) for a woman whose
// highest attained level is `education`: capped at Primary in the first
// band and at Secondary up to band 4, her reported level afterwards.
int education_at_band(int education, int band);

// Piecewise-constant proportional hazards model on the 17 age bands with
// covariates birth cohort, residence, caste, religion, and the
// time-dependent education level. 31 parameters: 17 log baseline rates
// followed by 14 log rate ratios.
class BandRateModel final : public MarriageRateModel {
  public:
    static constexpr std::size_t kParamCount = 31;

    static std::size_t baseline_index(int band);       // band 1..17
    static std::size_t birth_cohort_index(int level);  // level 1..3
    static std::size_t residence_index();              // rural
    static std::size_t caste_index(int level);         // level 1..3
    static std::size_t religion_index(int level);      // level 1..4
    static std::size_t education_index(int level);     // level 1..3

    // Linear predictor shared by every band: all covariate effects except
    // the time-dependent education term.
    static double fixed_linear_predictor(const Covariates& covs, std::span<const double> theta);
    // Log rate during band j (1-based) for the given covariates.
    static double band_log_rate(int band, const Covariates& covs, std::span<const double> theta);

    std::size_t n_params() const override { return kParamCount; }
    std::vector<std::string> param_names() const override;

    double log_rate(const SurveyRecord& record, double age,
                    std::span<const double> theta) const override;
    double cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                             std::span<const double> theta) const override;
    void add_log_rate_grad(const SurveyRecord& record, double age, std::span<const double> theta,
                           double weight, std::span<double> grad) const override;
    void add_cumulative_hazard_grad(const SurveyRecord& record, double lo, double hi,
                                    std::span<const double> theta, double weight,
                                    std::span<double> grad) const override;
    std::vector<double> default_init(std::span<const SurveyRecord* const> records,
                                     const ModelConfig& config) const override;
};

// Probability that a woman with covariates `covs` marries during the
// reported one-year age interval [y_floor, y_floor + 1):
// exp(-Hazard(a0, y_floor)) * (1 - exp(-Hazard(y_floor, y_floor + 1))).
double interval_censored_numerator(const BandRateModel& model, std::span<const double> theta,
                                   const Covariates& covs, int y_floor, const ModelConfig& config);
double interval_censored_log_numerator(const BandRateModel& model, std::span<const double> theta,
                                       const Covariates& covs, int y_floor,
                                       const ModelConfig& config);

// Interval-censored per-record contribution (marriage ages reported at
// one-year precision; unmarried records censored at min(survey age, 50)).
double survey_record_loglik(const SurveyRecord& record, std::span<const double> theta,
                            const ModelConfig& config, bool correct_design_I = true);
void add_survey_record_loglik_grad(const SurveyRecord& record, std::span<const double> theta,
                                   const ModelConfig& config, bool correct_design_I,
                                   std::span<double> grad);

// --- survey CSV ingestion ---------------------------------------------------

struct SurveyParse {
    CohortSample cohort_I{Design::I, {}};
    CohortSample cohort_II{Design::II, {}};
    std::size_t rejected = 0; // rows outside the model support (z or y < 12)
    std::vector<std::string> warnings;
};

// Reads the survey schema (design, age_at_survey, age_at_marriage,
// birth_cohort, residence, caste, religion, education). `file_design` tags
// files without a design column. Ages are floored to whole years.
// Structural problems (missing columns, bad category codes, design-I rows
// without a marriage age) throw ValidationError naming the line; rows
// without exposure are rejected and counted.
SurveyParse parse_survey_csv(const std::string& path,
                             std::optional<Design> file_design = std::nullopt);

// --- fitting -----------------------------------------------------------------

struct SurveyFitOptions {
    FitVariant variant = FitVariant::combined;
    std::vector<double> theta_init; // empty = crude-rate baselines, zero effects
    MaximizeOptions maximize{.max_iterations = 2000};
};

// Maximum likelihood over the interval-censored contributions of both
// cohorts. Parameters whose event design-matrix column is degenerate (empty
// category, empty band) are profiled out, flagged `fixed`, and reported in
// the result message.
FitResult fit_survey(const CohortSample& cohort_I, const CohortSample& cohort_II,
                     const ModelConfig& config, const SurveyFitOptions& options = {});

// band,rate,ci_low,ci_high for the 17 baseline parameters (rates per
// person-year).
void write_baseline_rates_csv(const FitResult& result, std::ostream& out);
// covariate,level,rr,ci_low,ci_high for the 14 rate ratios.
void write_rate_ratios_csv(const FitResult& result, std::ostream& out);

// --- synthetic survey data ----------------------------------------------------

// Draws survey records from a known parameter vector: covariates uniform
// over their categories, survey ages uniform on 15..49, marriage ages from
// the band model (design I keeps redrawing until the woman is married by
// the survey, matching ever-married sampling).
CohortSample generate_synthetic_survey(std::span<const double> theta, int n, Design design,
                                       std::uint64_t seed, const ModelConfig& config);

} // namespace retroinc
