#pragma once

#include "retroinc/model.hpp"

#include <array>

namespace retroinc {

// Full set of transition intensities as functions of age, on a common grid
// covering [school_start_age, age_max]:
//   alpha0 / alpha1  stopping school while unmarried / married
//   lambda0 / lambda1 marriage while out of school / in school
//   mu[school][married] mortality by current schooling and marital status
struct RateBundle {
    PiecewiseRate alpha0;
    PiecewiseRate alpha1;
    PiecewiseRate lambda0;
    PiecewiseRate lambda1;
    std::array<std::array<PiecewiseRate, 2>, 2> mu;

    // Stopping school does not depend on marital status (local independence
    // of the education process).
    bool local_independence() const { return alpha0 == alpha1; }
    // Mortality does not depend on marital status given schooling status.
    bool nondifferential_mortality() const {
        return mu[0][0] == mu[0][1] && mu[1][0] == mu[1][1];
    }

    // Constant rates of the simulation intensity matrix for covariate x.
    static RateBundle from_params(const SimParams& params, int x, const ModelConfig& config,
                                  double age_max);
};

// Probability density of being unmarried at age z with schooling ended at
// school_end_age (school_end_age = school_start_age for the never-schooled
// path; +infinity for records still in school, which drops the schooling
// exit factor). `t` is the calendar time of observation; the bundle's rates
// are age-indexed, so t only documents the Lexis position.
double kernel_k(const RateBundle& rates, double t, double z, double school_end_age,
                const ModelConfig& config);

// Probability density of first marriage at age y and being alive at age z,
// with the given schooling history.
double kernel_h(const RateBundle& rates, double t, double marriage_age, double z,
                double school_end_age, const ModelConfig& config);

// Integral of kernel_h over marriage ages in (min_marriage_age, z): the
// normalizing factor of the prevalent-cohort (design I) sampling event.
// Uses the factored closed form when both assumption flags hold, adaptive
// quadrature otherwise.
double normalizer_design_I(const RateBundle& rates, double t, double z, double school_end_age,
                           const ModelConfig& config);

// kernel_k + the design-I integral: the normalizing factor of the general
// cohort (design II) sampling event.
double normalizer_design_II(const RateBundle& rates, double t, double z, double school_end_age,
                            const ModelConfig& config);

// Quadrature-only evaluations, kept as the independent cross-check of the
// closed forms.
double normalizer_design_I_quadrature(const RateBundle& rates, double t, double z,
                                      double school_end_age, const ModelConfig& config);
double normalizer_design_II_quadrature(const RateBundle& rates, double t, double z,
                                       double school_end_age, const ModelConfig& config);

} // namespace retroinc
