#pragma once

#include "retroinc/model.hpp"
#include "retroinc/simulate.hpp"

#include <span>
#include <string>
#include <vector>

namespace retroinc {

// Parametric family of marriage rates. A model maps (record, age) to a
// rate given a parameter vector, and must provide the exact integrated
// hazard over age intervals plus gradients with respect to the parameters.
// Implementations are immutable; the parameter vector is always passed in.
class MarriageRateModel {
  public:
    virtual ~MarriageRateModel() = default;

    virtual std::size_t n_params() const = 0;
    virtual std::vector<std::string> param_names() const = 0;

    virtual double log_rate(const SurveyRecord& record, double age,
                            std::span<const double> theta) const = 0;
    // Exact integral of the rate over [lo, hi] (lo <= hi).
    virtual double cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                                     std::span<const double> theta) const = 0;

    // Accumulate weight * d(log_rate)/d(theta) into grad.
    virtual void add_log_rate_grad(const SurveyRecord& record, double age,
                                   std::span<const double> theta, double weight,
                                   std::span<double> grad) const = 0;
    // Accumulate weight * d(cumulative_hazard)/d(theta) into grad.
    virtual void add_cumulative_hazard_grad(const SurveyRecord& record, double lo, double hi,
                                            std::span<const double> theta, double weight,
                                            std::span<double> grad) const = 0;

    // A feasible starting point for fitting the model to these records.
    virtual std::vector<double> default_init(std::span<const SurveyRecord* const> records,
                                             const ModelConfig& config) const;
};

// Constant marriage rate exp(m + b x + c * in_school) with parameters
// theta = (m, b, c); the schooling indicator switches at the record's
// schooling end age.
class ConstantRateModel final : public MarriageRateModel {
  public:
    std::size_t n_params() const override { return 3; }
    std::vector<std::string> param_names() const override { return {"m", "b", "c"}; }

    // Crude-rate start: m = log(events / person-years), b = c = 0.
    std::vector<double> default_init(std::span<const SurveyRecord* const> records,
                                     const ModelConfig& config) const override;

    double log_rate(const SurveyRecord& record, double age,
                    std::span<const double> theta) const override;
    double cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                             std::span<const double> theta) const override;
    void add_log_rate_grad(const SurveyRecord& record, double age, std::span<const double> theta,
                           double weight, std::span<double> grad) const override;
    void add_cumulative_hazard_grad(const SurveyRecord& record, double lo, double hi,
                                    std::span<const double> theta, double weight,
                                    std::span<double> grad) const override;
};

// Fixed piecewise rates (no free parameters); the in-school/out-of-school
// pair switches at the record's schooling end age. Used to cross-check the
// simplified likelihood against the kernel ratios.
class PiecewiseMarriageModel final : public MarriageRateModel {
  public:
    PiecewiseMarriageModel(PiecewiseRate out_of_school, PiecewiseRate in_school);

    std::size_t n_params() const override { return 0; }
    std::vector<std::string> param_names() const override { return {}; }

    double log_rate(const SurveyRecord& record, double age,
                    std::span<const double> theta) const override;
    double cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                             std::span<const double> theta) const override;
    void add_log_rate_grad(const SurveyRecord&, double, std::span<const double>, double,
                           std::span<double>) const override {}
    void add_cumulative_hazard_grad(const SurveyRecord&, double, double, std::span<const double>,
                                    double, std::span<double>) const override {}

  private:
    PiecewiseRate out_of_school_;
    PiecewiseRate in_school_;
};

// Log-likelihood contribution of a prevalent-cohort record, conditioned on
// being married by the survey age: log density of the marriage age minus
// the log probability of marrying before the survey age. Throws
// EvaluationError when the model makes marriage by the survey age
// impossible.
double loglik_design_I(const SurveyRecord& record, const MarriageRateModel& model,
                       std::span<const double> theta, const ModelConfig& config);

// The numerator of the design-I contribution alone, i.e. without the
// sampling correction. Kept to quantify the selection bias it causes.
double loglik_design_I_uncorrected(const SurveyRecord& record, const MarriageRateModel& model,
                                   std::span<const double> theta, const ModelConfig& config);

// Standard right-censored contribution of a general-cohort record.
double loglik_design_II(const SurveyRecord& record, const MarriageRateModel& model,
                        std::span<const double> theta, const ModelConfig& config);

// Design-appropriate contribution of one record.
double record_loglik(const SurveyRecord& record, const MarriageRateModel& model,
                     std::span<const double> theta, const ModelConfig& config,
                     bool correct_design_I = true);

// Accumulates the gradient of the record contribution into grad.
void add_record_loglik_grad(const SurveyRecord& record, const MarriageRateModel& model,
                            std::span<const double> theta, const ModelConfig& config,
                            bool correct_design_I, std::span<double> grad);

// Sum of the design-appropriate contributions over all cohorts. The sum is
// evaluated order-independently (sorted compensated summation), so cohort
// splits and record permutations leave the value unchanged.
double joint_loglik(std::span<const CohortSample> cohorts, const MarriageRateModel& model,
                    std::span<const double> theta, const ModelConfig& config);

// Analytic gradient of joint_loglik with respect to theta.
std::vector<double> loglik_gradient(std::span<const CohortSample> cohorts,
                                    const MarriageRateModel& model, std::span<const double> theta,
                                    const ModelConfig& config);

} // namespace retroinc
