#include "retroinc/likelihood.hpp"

#include "retroinc/errors.hpp"
#include "retroinc/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace retroinc {

double ConstantRateModel::log_rate(const SurveyRecord& record, double age,
                                   std::span<const double> theta) const {
    const bool in_school = age < record.school_end_or_inf();
    return theta[0] + theta[1] * record.x + (in_school ? theta[2] : 0.0);
}

double ConstantRateModel::cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                                            std::span<const double> theta) const {
    if (!(lo <= hi)) {
        throw std::domain_error("cumulative hazard needs lo <= hi");
    }
    const double school_end = record.school_end_or_inf();
    const double in_years = std::max(0.0, std::min(hi, school_end) - lo);
    const double out_years = std::max(0.0, hi - std::max(lo, school_end));
    const double base = std::exp(theta[0] + theta[1] * record.x);
    return base * (std::exp(theta[2]) * in_years + out_years);
}

void ConstantRateModel::add_log_rate_grad(const SurveyRecord& record, double age,
                                          std::span<const double> /*theta*/, double weight,
                                          std::span<double> grad) const {
    grad[0] += weight;
    grad[1] += weight * record.x;
    if (age < record.school_end_or_inf()) {
        grad[2] += weight;
    }
}

void ConstantRateModel::add_cumulative_hazard_grad(const SurveyRecord& record, double lo,
                                                   double hi, std::span<const double> theta,
                                                   double weight, std::span<double> grad) const {
    const double school_end = record.school_end_or_inf();
    const double in_years = std::max(0.0, std::min(hi, school_end) - lo);
    const double out_years = std::max(0.0, hi - std::max(lo, school_end));
    const double base = std::exp(theta[0] + theta[1] * record.x);
    const double in_part = base * std::exp(theta[2]) * in_years;
    const double total = in_part + base * out_years;
    grad[0] += weight * total;
    grad[1] += weight * record.x * total;
    grad[2] += weight * in_part;
}

std::vector<double> MarriageRateModel::default_init(std::span<const SurveyRecord* const>,
                                                    const ModelConfig&) const {
    return std::vector<double>(n_params(), 0.0);
}

std::vector<double> ConstantRateModel::default_init(std::span<const SurveyRecord* const> records,
                                                    const ModelConfig& config) const {
    double events = 0.0;
    double exposure = 0.0;
    for (const SurveyRecord* rec : records) {
        const double end = rec->married() ? *rec->marriage_age : rec->age_at_survey;
        exposure += std::max(0.0, end - config.min_marriage_age);
        if (rec->married()) {
            events += 1.0;
        }
    }
    if (!(exposure > 0.0)) {
        return {0.0, 0.0, 0.0};
    }
    const double crude = std::max(events, 0.5) / exposure;
    return {std::log(crude), 0.0, 0.0};
}

PiecewiseMarriageModel::PiecewiseMarriageModel(PiecewiseRate out_of_school, PiecewiseRate in_school)
    : out_of_school_(std::move(out_of_school)), in_school_(std::move(in_school)) {}

double PiecewiseMarriageModel::log_rate(const SurveyRecord& record, double age,
                                        std::span<const double> /*theta*/) const {
    const bool in_school = age < record.school_end_or_inf();
    return std::log((in_school ? in_school_ : out_of_school_).value_at(age));
}

double PiecewiseMarriageModel::cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                                                 std::span<const double> /*theta*/) const {
    if (!(lo <= hi)) {
        throw std::domain_error("cumulative hazard needs lo <= hi");
    }
    const double school_end = std::clamp(record.school_end_or_inf(), lo, hi);
    return in_school_.integral(lo, school_end) + out_of_school_.integral(school_end, hi);
}

namespace {

void check_design(const SurveyRecord& record, Design expected) {
    if (record.design != expected) {
        throw ValidationError("record design tag does not match the likelihood contribution");
    }
}

void check_marriage_age(const SurveyRecord& record, const ModelConfig& config) {
    if (!record.marriage_age) {
        throw ValidationError("married contribution requires a marriage age");
    }
    if (*record.marriage_age < config.min_marriage_age) {
        throw std::domain_error("marriage age below the minimum marriageable age");
    }
    if (*record.marriage_age > record.age_at_survey) {
        throw ValidationError("marriage age after the survey age");
    }
}

} // namespace

double loglik_design_I(const SurveyRecord& record, const MarriageRateModel& model,
                       std::span<const double> theta, const ModelConfig& config) {
    check_design(record, Design::I);
    check_marriage_age(record, config);
    const double a_0 = config.min_marriage_age;
    const double hazard_to_survey =
        model.cumulative_hazard(record, a_0, std::max(a_0, record.age_at_survey), theta);
    if (!(hazard_to_survey > 0.0)) {
        throw EvaluationError("design-I record is impossible: the model gives zero probability "
                              "of marriage by the survey age");
    }
    return loglik_design_I_uncorrected(record, model, theta, config) - log1mexp(hazard_to_survey);
}

double loglik_design_I_uncorrected(const SurveyRecord& record, const MarriageRateModel& model,
                                   std::span<const double> theta, const ModelConfig& config) {
    check_design(record, Design::I);
    check_marriage_age(record, config);
    const double a_0 = config.min_marriage_age;
    const double y = *record.marriage_age;
    return model.log_rate(record, y, theta) - model.cumulative_hazard(record, a_0, y, theta);
}

double loglik_design_II(const SurveyRecord& record, const MarriageRateModel& model,
                        std::span<const double> theta, const ModelConfig& config) {
    check_design(record, Design::II);
    const double a_0 = config.min_marriage_age;
    if (record.married()) {
        check_marriage_age(record, config);
        const double y = *record.marriage_age;
        return model.log_rate(record, y, theta) - model.cumulative_hazard(record, a_0, y, theta);
    }
    if (record.age_at_survey <= a_0) {
        return 0.0; // no exposure yet
    }
    return -model.cumulative_hazard(record, a_0, record.age_at_survey, theta);
}

double record_loglik(const SurveyRecord& record, const MarriageRateModel& model,
                     std::span<const double> theta, const ModelConfig& config,
                     bool correct_design_I) {
    if (record.design == Design::I) {
        return correct_design_I ? loglik_design_I(record, model, theta, config)
                                : loglik_design_I_uncorrected(record, model, theta, config);
    }
    return loglik_design_II(record, model, theta, config);
}

void add_record_loglik_grad(const SurveyRecord& record, const MarriageRateModel& model,
                            std::span<const double> theta, const ModelConfig& config,
                            bool correct_design_I, std::span<double> grad) {
    const double a_0 = config.min_marriage_age;
    if (record.married()) {
        check_marriage_age(record, config);
        const double y = *record.marriage_age;
        model.add_log_rate_grad(record, y, theta, 1.0, grad);
        model.add_cumulative_hazard_grad(record, a_0, y, theta, -1.0, grad);
    } else if (record.design == Design::II) {
        if (record.age_at_survey > a_0) {
            model.add_cumulative_hazard_grad(record, a_0, record.age_at_survey, theta, -1.0, grad);
        }
        return;
    } else {
        throw ValidationError("design-I record without a marriage age");
    }
    if (record.design == Design::I && correct_design_I) {
        const double z = std::max(a_0, record.age_at_survey);
        const double hazard_to_survey = model.cumulative_hazard(record, a_0, z, theta);
        if (!(hazard_to_survey > 0.0)) {
            throw EvaluationError("design-I record is impossible under the model");
        }
        model.add_cumulative_hazard_grad(record, a_0, z, theta,
                                         -1.0 / std::expm1(hazard_to_survey), grad);
    }
}

double joint_loglik(std::span<const CohortSample> cohorts, const MarriageRateModel& model,
                    std::span<const double> theta, const ModelConfig& config) {
    std::vector<double> contributions;
    for (const CohortSample& cohort : cohorts) {
        for (const SurveyRecord& record : cohort.records) {
            if (record.design != cohort.design) {
                throw ValidationError("record design tag differs from its cohort design");
            }
            contributions.push_back(record_loglik(record, model, theta, config, true));
        }
    }
    return stable_sum(std::move(contributions));
}

std::vector<double> loglik_gradient(std::span<const CohortSample> cohorts,
                                    const MarriageRateModel& model, std::span<const double> theta,
                                    const ModelConfig& config) {
    std::vector<double> grad(model.n_params(), 0.0);
    for (const CohortSample& cohort : cohorts) {
        for (const SurveyRecord& record : cohort.records) {
            add_record_loglik_grad(record, model, theta, config, true, grad);
        }
    }
    return grad;
}

} // namespace retroinc
