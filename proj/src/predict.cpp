#include "retroinc/predict.hpp"

#include "retroinc/errors.hpp"
#include "retroinc/survey.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

namespace retroinc {

MortalityTable MortalityTable::load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw EnvironmentError("cannot open mortality file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + ": empty file, header row required");
    }
    // header: age_low,age_high,rate
    std::vector<double> cuts;
    std::vector<double> values;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        std::stringstream ss(line);
        std::string lo_s, hi_s, rate_s;
        if (!std::getline(ss, lo_s, ',') || !std::getline(ss, hi_s, ',') ||
            !std::getline(ss, rate_s, ',')) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": expected age_low,age_high,rate");
        }
        double lo = 0.0;
        double hi = 0.0;
        double rate = 0.0;
        try {
            lo = std::stod(lo_s);
            hi = std::stod(hi_s);
            rate = std::stod(rate_s);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(lineno) + ": bad numeric value");
        }
        if (cuts.empty()) {
            cuts.push_back(lo);
        } else if (lo != cuts.back()) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": age intervals must be contiguous");
        }
        if (!(hi > lo)) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": age_high must exceed age_low");
        }
        cuts.push_back(hi);
        values.push_back(rate);
    }
    if (values.empty()) {
        throw ValidationError(path + ": no mortality rows");
    }
    return MortalityTable{PiecewiseRate(std::move(cuts), std::move(values))};
}

MortalityTable MortalityTable::zero(double age_lo, double age_hi) {
    return MortalityTable{PiecewiseRate::constant(0.0, age_lo, age_hi)};
}

namespace {

void check_prediction_args(const PiecewiseRate& marriage_rate, const MortalityTable& mortality,
                           double a1, double a2, const ModelConfig& config) {
    if (!(a2 >= a1)) {
        throw std::domain_error("prediction needs a1 <= a2");
    }
    if (a1 < config.min_marriage_age) {
        throw std::domain_error("prediction starts at or after the minimum marriageable age");
    }
    if (a1 < marriage_rate.age_min() || a2 > marriage_rate.age_max() ||
        a1 < mortality.rate.age_min() || a2 > mortality.rate.age_max()) {
        throw std::domain_error("prediction range not covered by the rate tables");
    }
}

// Merged grid of both rate tables restricted to [a1, a2].
std::vector<double> merged_grid(const PiecewiseRate& a, const PiecewiseRate& b, double a1,
                                double a2) {
    std::vector<double> grid{a1, a2};
    for (double c : a.cuts()) {
        if (c > a1 && c < a2) {
            grid.push_back(c);
        }
    }
    for (double c : b.cuts()) {
        if (c > a1 && c < a2) {
            grid.push_back(c);
        }
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

} // namespace

double predict_marriage_by_age(const PiecewiseRate& marriage_rate, const MortalityTable& mortality,
                               double a1, double a2, const ModelConfig& config) {
    check_prediction_args(marriage_rate, mortality, a1, a2, config);
    if (a2 == a1) {
        return 0.0;
    }
    // integral of exp(-Int_{a1}^{a} (mu + lambda)) lambda(a) da, exact per
    // cell: both rates are constant there.
    const std::vector<double> grid = merged_grid(marriage_rate, mortality.rate, a1, a2);
    double cumulative = 0.0; // (mu + lambda) exposure from a1 to the cell start
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const double lo = grid[i];
        const double hi = grid[i + 1];
        const double mid = 0.5 * (lo + hi);
        const double lambda = marriage_rate.value_at(mid);
        const double mu = mortality.rate.value_at(mid);
        const double both = lambda + mu;
        const double width = hi - lo;
        if (both > 0.0) {
            total += std::exp(-cumulative) * (lambda / both) * -std::expm1(-both * width);
        }
        cumulative += both * width;
    }
    return total;
}

double predict_married_and_alive(const PiecewiseRate& marriage_rate,
                                 const MortalityTable& mortality, double a1, double a2,
                                 const ModelConfig& config) {
    check_prediction_args(marriage_rate, mortality, a1, a2, config);
    if (a2 == a1) {
        return 0.0;
    }
    // The mortality exposure runs to a2 regardless of the marriage age
    // (non-differential mortality), so the integral factorizes into
    // survival-to-a2 times the probability of marrying in (a1, a2].
    const double survival_exponent = mortality.rate.integral(a1, a2);
    const double marriage_exponent = marriage_rate.integral(a1, a2);
    return std::exp(-survival_exponent) * -std::expm1(-marriage_exponent);
}

PiecewiseRate marriage_rate_for(std::span<const double> theta, const Covariates& covs) {
    const auto& cuts = age_band_cuts();
    std::vector<double> grid(cuts.begin(), cuts.end());
    std::vector<double> values;
    values.reserve(kAgeBandCount);
    for (int j = 1; j <= kAgeBandCount; ++j) {
        values.push_back(std::exp(BandRateModel::band_log_rate(j, covs, theta)));
    }
    return PiecewiseRate(std::move(grid), std::move(values));
}

} // namespace retroinc
