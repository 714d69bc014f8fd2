#include "retroinc/kernels.hpp"

#include "retroinc/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace retroinc {

RateBundle RateBundle::from_params(const SimParams& p, int x, const ModelConfig& config,
                                   double age_max) {
    const double bx = p.b * x;
    const double lo = config.school_start_age;
    auto flat = [&](double log_rate) {
        return PiecewiseRate::constant(std::exp(log_rate), lo, age_max);
    };
    RateBundle bundle;
    bundle.alpha0 = flat(p.s + bx);
    bundle.alpha1 = flat(p.s + bx + p.d);
    bundle.lambda0 = flat(p.m + bx);
    bundle.lambda1 = flat(p.m + bx + p.c);
    bundle.mu[0][0] = flat(p.r + bx);
    bundle.mu[0][1] = flat(p.r + bx + p.g);
    bundle.mu[1][0] = flat(p.r + bx + p.c);
    bundle.mu[1][1] = flat(p.r + bx + p.c + p.g);
    return bundle;
}

namespace {

void check_args(double z, double school_end_age, const ModelConfig& config) {
    if (school_end_age < config.school_start_age) {
        throw std::domain_error("schooling cannot end before it starts");
    }
    if (z < config.min_marriage_age) {
        throw std::domain_error("cross-sectional age below the minimum marriageable age");
    }
}

// Cumulative mortality over [school_start, z] with the schooling indicator
// switching at school_end_age and the marital indicator at marriage_age
// (+infinity for never-married paths).
double mortality_exponent(const RateBundle& rates, double z, double school_end_age,
                          double marriage_age, const ModelConfig& config) {
    const double a_e = config.school_start_age;
    double points[4] = {a_e, std::clamp(school_end_age, a_e, z), std::clamp(marriage_age, a_e, z),
                        z};
    std::sort(std::begin(points), std::end(points));
    double total = 0.0;
    for (int i = 0; i < 3; ++i) {
        if (points[i + 1] <= points[i]) {
            continue;
        }
        const double mid = 0.5 * (points[i] + points[i + 1]);
        const int school = mid < school_end_age ? 1 : 0;
        const int married = marriage_age < mid ? 1 : 0;
        total += rates.mu[school][married].integral(points[i], points[i + 1]);
    }
    return total;
}

// Cumulative marriage intensity over [min_marriage_age, upper] with the
// schooling switch at school_end_age.
double marriage_exponent(const RateBundle& rates, double upper, double school_end_age,
                         const ModelConfig& config) {
    const double a_0 = config.min_marriage_age;
    if (upper <= a_0) {
        return 0.0;
    }
    const double sw = std::clamp(school_end_age, a_0, upper);
    return rates.lambda1.integral(a_0, sw) + rates.lambda0.integral(sw, upper);
}

} // namespace

double kernel_k(const RateBundle& rates, double /*t*/, double z, double school_end_age,
                const ModelConfig& config) {
    check_args(z, school_end_age, config);
    const double a_e = config.school_start_age;
    const double school_cap = std::min(school_end_age, z);

    double exponent = rates.alpha0.integral(a_e, std::max(a_e, school_cap));
    exponent += mortality_exponent(rates, z, school_end_age,
                                   std::numeric_limits<double>::infinity(), config);
    exponent += marriage_exponent(rates, z, school_end_age, config);

    double density = std::exp(-exponent);
    if (school_end_age > a_e && school_end_age <= z) {
        density *= rates.alpha0.value_at(school_end_age);
    }
    return density;
}

double kernel_h(const RateBundle& rates, double /*t*/, double marriage_age, double z,
                double school_end_age, const ModelConfig& config) {
    check_args(z, school_end_age, config);
    if (marriage_age < config.min_marriage_age) {
        throw std::domain_error("marriage before the minimum marriageable age");
    }
    if (marriage_age > z) {
        throw std::domain_error("marriage after the cross-sectional age");
    }
    const double a_e = config.school_start_age;
    const double school_cap = std::min(school_end_age, z);

    // Schooling exit exposure, switching rate at the marriage age.
    const double split = std::clamp(marriage_age, a_e, school_cap);
    double exponent = rates.alpha0.integral(a_e, std::max(a_e, split));
    if (school_cap > split) {
        exponent += rates.alpha1.integral(split, school_cap);
    }
    exponent += mortality_exponent(rates, z, school_end_age, marriage_age, config);
    exponent += marriage_exponent(rates, marriage_age, school_end_age, config);

    // Ties marriage_age == school_end_age take the out-of-school branch.
    const bool married_in_school = marriage_age < school_end_age;
    double density = std::exp(-exponent);
    density *= (married_in_school ? rates.lambda1 : rates.lambda0).value_at(marriage_age);
    if (school_end_age > a_e && school_end_age <= z) {
        density *= (marriage_age < school_end_age ? rates.alpha1 : rates.alpha0)
                       .value_at(school_end_age);
    }
    return density;
}

namespace {

double integrate_h(const RateBundle& rates, double t, double z, double school_end_age,
                   const ModelConfig& config) {
    std::vector<double> breaks(rates.lambda0.cuts());
    breaks.insert(breaks.end(), rates.lambda1.cuts().begin(), rates.lambda1.cuts().end());
    breaks.insert(breaks.end(), rates.alpha0.cuts().begin(), rates.alpha0.cuts().end());
    breaks.insert(breaks.end(), rates.alpha1.cuts().begin(), rates.alpha1.cuts().end());
    for (const auto& row : rates.mu) {
        for (const auto& rate : row) {
            breaks.insert(breaks.end(), rate.cuts().begin(), rate.cuts().end());
        }
    }
    if (std::isfinite(school_end_age)) {
        breaks.push_back(school_end_age);
    }
    return integrate_segmented(
        [&](double y) { return kernel_h(rates, t, y, z, school_end_age, config); },
        config.min_marriage_age, z, breaks);
}

// Shared survival-and-schooling factor of the factored normalizers: the
// schooling exit exposure, its point mass, and the mortality exposure. Only
// valid when both assumption flags hold (the marital indicators drop out).
double factored_survival(const RateBundle& rates, double z, double school_end_age,
                         const ModelConfig& config) {
    const double a_e = config.school_start_age;
    const double school_cap = std::min(school_end_age, z);
    double exponent = rates.alpha0.integral(a_e, std::max(a_e, school_cap));
    exponent += mortality_exponent(rates, z, school_end_age,
                                   std::numeric_limits<double>::infinity(), config);
    double value = std::exp(-exponent);
    if (school_end_age > a_e && school_end_age <= z) {
        value *= rates.alpha0.value_at(school_end_age);
    }
    return value;
}

} // namespace

double normalizer_design_I_quadrature(const RateBundle& rates, double t, double z,
                                      double school_end_age, const ModelConfig& config) {
    check_args(z, school_end_age, config);
    return integrate_h(rates, t, z, school_end_age, config);
}

double normalizer_design_I(const RateBundle& rates, double t, double z, double school_end_age,
                           const ModelConfig& config) {
    check_args(z, school_end_age, config);
    if (rates.local_independence() && rates.nondifferential_mortality()) {
        const double marriage_total = marriage_exponent(rates, z, school_end_age, config);
        return factored_survival(rates, z, school_end_age, config) * (-std::expm1(-marriage_total));
    }
    return normalizer_design_I_quadrature(rates, t, z, school_end_age, config);
}

double normalizer_design_II_quadrature(const RateBundle& rates, double t, double z,
                                       double school_end_age, const ModelConfig& config) {
    check_args(z, school_end_age, config);
    return kernel_k(rates, t, z, school_end_age, config) +
           integrate_h(rates, t, z, school_end_age, config);
}

double normalizer_design_II(const RateBundle& rates, double t, double z, double school_end_age,
                            const ModelConfig& config) {
    check_args(z, school_end_age, config);
    if (rates.local_independence() && rates.nondifferential_mortality()) {
        // The marriage terms cancel between kernel_k and the design-I
        // integral, leaving the survival/schooling product alone.
        return factored_survival(rates, z, school_end_age, config);
    }
    return normalizer_design_II_quadrature(rates, t, z, school_end_age, config);
}

} // namespace retroinc
