#pragma once

#include "retroinc/model.hpp"
#include "retroinc/simulate.hpp"

#include <span>
#include <string>

namespace retroinc {

// External mortality rates (per person-year) covering the prediction age
// range. Shared across covariate strata by default; load one table per
// stratum when differential mortality tables are available.
struct MortalityTable {
    PiecewiseRate rate;

    // CSV schema: age_low,age_high,rate with contiguous rows.
    static MortalityTable load_csv(const std::string& path);
    static MortalityTable zero(double age_lo, double age_hi);
};

// Probability that a woman unmarried and alive at age a1, with her education
// completed, marries before age a2: cumulative incidence of marriage in the
// presence of mortality, evaluated in closed form over the piecewise grid.
double predict_marriage_by_age(const PiecewiseRate& marriage_rate, const MortalityTable& mortality,
                               double a1, double a2, const ModelConfig& config);

// Probability of marrying before a2 AND being alive at a2, under the same
// conditioning. Never exceeds predict_marriage_by_age.
double predict_married_and_alive(const PiecewiseRate& marriage_rate,
                                 const MortalityTable& mortality, double a1, double a2,
                                 const ModelConfig& config);

// Per-band marriage rates implied by a fitted band model for fixed
// covariates, as a piecewise rate over the band support.
PiecewiseRate marriage_rate_for(std::span<const double> theta, const Covariates& covs);

} // namespace retroinc
