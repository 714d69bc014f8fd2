#include "retroinc/survey.hpp"

#include "retroinc/errors.hpp"
#include "retroinc/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace retroinc {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kSupportEnd = 50.0;
} // namespace

const std::array<double, kAgeBandCount + 1>& age_band_cuts() {
    static const std::array<double, kAgeBandCount + 1> cuts = {
        12, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 50,
    };
    return cuts;
}

int age_band_of(double age) {
    const auto& cuts = age_band_cuts();
    if (age < cuts.front() || age > cuts.back()) {
        throw std::domain_error("age outside the 12-50 band support");
    }
    for (int j = 0; j < kAgeBandCount - 1; ++j) {
        if (age < cuts[static_cast<std::size_t>(j) + 1]) {
            return j;
        }
    }
    return kAgeBandCount - 1;
}

int education_at_band(int education, int band) {
    if (education < 0 || education > 3) {
        throw std::domain_error("education level must be 0..3");
    }
    if (band < 1 || band > kAgeBandCount) {
        throw std::domain_error("band index must be 1..17");
    }
    if (band == 1) {
        return std::min(education, 1);
    }
    if (band <= 4) {
        return std::min(education, 2);
    }
    return education;
}

// --- parameter layout -------------------------------------------------------

std::size_t BandRateModel::baseline_index(int band) {
    if (band < 1 || band > kAgeBandCount) {
        throw std::domain_error("band index must be 1..17");
    }
    return static_cast<std::size_t>(band - 1);
}

std::size_t BandRateModel::birth_cohort_index(int level) {
    if (level < 1 || level > 3) {
        throw std::domain_error("birth cohort level must be 1..3");
    }
    return static_cast<std::size_t>(16 + level);
}

std::size_t BandRateModel::residence_index() { return 20; }

std::size_t BandRateModel::caste_index(int level) {
    if (level < 1 || level > 3) {
        throw std::domain_error("caste level must be 1..3");
    }
    return static_cast<std::size_t>(20 + level);
}

std::size_t BandRateModel::religion_index(int level) {
    if (level < 1 || level > 4) {
        throw std::domain_error("religion level must be 1..4");
    }
    return static_cast<std::size_t>(23 + level);
}

std::size_t BandRateModel::education_index(int level) {
    if (level < 1 || level > 3) {
        throw std::domain_error("education level must be 1..3");
    }
    return static_cast<std::size_t>(27 + level);
}

std::vector<std::string> BandRateModel::param_names() const {
    std::vector<std::string> names;
    names.reserve(kParamCount);
    const auto& cuts = age_band_cuts();
    for (int j = 0; j < kAgeBandCount; ++j) {
        char buf[48];
        std::snprintf(buf, sizeof(buf), "baseline_%g_%g", cuts[static_cast<std::size_t>(j)],
                      cuts[static_cast<std::size_t>(j) + 1]);
        names.emplace_back(buf);
    }
    for (int l = 1; l <= 3; ++l) {
        names.push_back("birth_cohort_" + std::to_string(l));
    }
    names.push_back("residence_1");
    for (int l = 1; l <= 3; ++l) {
        names.push_back("caste_" + std::to_string(l));
    }
    for (int l = 1; l <= 4; ++l) {
        names.push_back("religion_" + std::to_string(l));
    }
    for (int l = 1; l <= 3; ++l) {
        names.push_back("education_" + std::to_string(l));
    }
    return names;
}

namespace {

void check_covariates(const Covariates& covs) {
    if (covs.birth_cohort < 0 || covs.birth_cohort > 3 || covs.residence < 0 ||
        covs.residence > 1 || covs.caste < 0 || covs.caste > 3 || covs.religion < 0 ||
        covs.religion > 4 || covs.education < 0 || covs.education > 3) {
        throw std::domain_error("covariate code outside its category range");
    }
}

// Cumulative hazard of the band model over [lo, hi] clamped to the support,
// optionally accumulating weight * d(hazard)/d(theta).
double band_hazard(const Covariates& covs, std::span<const double> theta, double lo, double hi,
                   double weight = 0.0, std::span<double> grad = {}) {
    check_covariates(covs);
    const auto& cuts = age_band_cuts();
    lo = std::max(lo, cuts.front());
    hi = std::min(hi, cuts.back());
    if (!(hi > lo)) {
        return 0.0;
    }
    const double lp = BandRateModel::fixed_linear_predictor(covs, theta);
    const double scale = std::exp(lp);
    double total = 0.0;
    for (int j = 0; j < kAgeBandCount; ++j) {
        const double band_lo = cuts[static_cast<std::size_t>(j)];
        const double band_hi = cuts[static_cast<std::size_t>(j) + 1];
        const double overlap = std::min(hi, band_hi) - std::max(lo, band_lo);
        if (overlap <= 0.0) {
            continue;
        }
        const int level = education_at_band(covs.education, j + 1);
        double log_rate = theta[static_cast<std::size_t>(j)];
        if (level > 0) {
            log_rate += theta[BandRateModel::education_index(level)];
        }
        const double exposure = scale * std::exp(log_rate) * overlap;
        total += exposure;
        if (!grad.empty()) {
            grad[static_cast<std::size_t>(j)] += weight * exposure;
            if (level > 0) {
                grad[BandRateModel::education_index(level)] += weight * exposure;
            }
        }
    }
    if (!grad.empty()) {
        if (covs.birth_cohort > 0) {
            grad[BandRateModel::birth_cohort_index(covs.birth_cohort)] += weight * total;
        }
        if (covs.residence == 1) {
            grad[BandRateModel::residence_index()] += weight * total;
        }
        if (covs.caste > 0) {
            grad[BandRateModel::caste_index(covs.caste)] += weight * total;
        }
        if (covs.religion > 0) {
            grad[BandRateModel::religion_index(covs.religion)] += weight * total;
        }
    }
    return total;
}

} // namespace

double BandRateModel::fixed_linear_predictor(const Covariates& covs,
                                             std::span<const double> theta) {
    double lp = 0.0;
    if (covs.birth_cohort > 0) {
        lp += theta[birth_cohort_index(covs.birth_cohort)];
    }
    if (covs.residence == 1) {
        lp += theta[residence_index()];
    }
    if (covs.caste > 0) {
        lp += theta[caste_index(covs.caste)];
    }
    if (covs.religion > 0) {
        lp += theta[religion_index(covs.religion)];
    }
    return lp;
}

double BandRateModel::band_log_rate(int band, const Covariates& covs,
                                    std::span<const double> theta) {
    double lp = theta[baseline_index(band)] + fixed_linear_predictor(covs, theta);
    const int level = education_at_band(covs.education, band);
    if (level > 0) {
        lp += theta[education_index(level)];
    }
    return lp;
}

double BandRateModel::log_rate(const SurveyRecord& record, double age,
                               std::span<const double> theta) const {
    check_covariates(record.covariates);
    return band_log_rate(age_band_of(age) + 1, record.covariates, theta);
}

double BandRateModel::cumulative_hazard(const SurveyRecord& record, double lo, double hi,
                                        std::span<const double> theta) const {
    if (!(lo <= hi)) {
        throw std::domain_error("cumulative hazard needs lo <= hi");
    }
    return band_hazard(record.covariates, theta, lo, hi);
}

void BandRateModel::add_log_rate_grad(const SurveyRecord& record, double age,
                                      std::span<const double> theta, double weight,
                                      std::span<double> grad) const {
    (void)theta;
    check_covariates(record.covariates);
    const Covariates& covs = record.covariates;
    const int band = age_band_of(age) + 1;
    grad[baseline_index(band)] += weight;
    if (covs.birth_cohort > 0) {
        grad[birth_cohort_index(covs.birth_cohort)] += weight;
    }
    if (covs.residence == 1) {
        grad[residence_index()] += weight;
    }
    if (covs.caste > 0) {
        grad[caste_index(covs.caste)] += weight;
    }
    if (covs.religion > 0) {
        grad[religion_index(covs.religion)] += weight;
    }
    const int level = education_at_band(covs.education, band);
    if (level > 0) {
        grad[education_index(level)] += weight;
    }
}

void BandRateModel::add_cumulative_hazard_grad(const SurveyRecord& record, double lo, double hi,
                                               std::span<const double> theta, double weight,
                                               std::span<double> grad) const {
    band_hazard(record.covariates, theta, lo, hi, weight, grad);
}

std::vector<double> BandRateModel::default_init(std::span<const SurveyRecord* const> records,
                                                const ModelConfig& config) const {
    double events = 0.0;
    double exposure = 0.0;
    for (const SurveyRecord* rec : records) {
        const double end = rec->married() ? std::floor(*rec->marriage_age) + 0.5
                                          : rec->age_at_survey;
        exposure += std::max(0.0, std::min(end, kSupportEnd) - config.min_marriage_age);
        if (rec->married()) {
            events += 1.0;
        }
    }
    std::vector<double> init(kParamCount, 0.0);
    const double crude = exposure > 0.0 ? std::max(events, 0.5) / exposure : 0.1;
    for (int j = 0; j < kAgeBandCount; ++j) {
        init[static_cast<std::size_t>(j)] = std::log(crude);
    }
    return init;
}

// --- interval-censored contributions -----------------------------------------

double interval_censored_log_numerator(const BandRateModel& /*model*/,
                                       std::span<const double> theta, const Covariates& covs,
                                       int y_floor, const ModelConfig& config) {
    if (y_floor < config.min_marriage_age) {
        throw std::domain_error("marriage year below the minimum marriageable age");
    }
    if (y_floor >= static_cast<int>(kSupportEnd)) {
        throw std::domain_error("marriage year beyond the model support");
    }
    const double lead = band_hazard(covs, theta, config.min_marriage_age, y_floor);
    const double within = band_hazard(covs, theta, y_floor, y_floor + 1.0);
    return -lead + log1mexp(within);
}

double interval_censored_numerator(const BandRateModel& model, std::span<const double> theta,
                                   const Covariates& covs, int y_floor,
                                   const ModelConfig& config) {
    return std::exp(interval_censored_log_numerator(model, theta, covs, y_floor, config));
}

namespace {

double censor_age(const SurveyRecord& record) {
    return std::min(record.age_at_survey, kSupportEnd);
}

int marriage_year(const SurveyRecord& record) {
    return static_cast<int>(std::floor(*record.marriage_age));
}

} // namespace

double survey_record_loglik(const SurveyRecord& record, std::span<const double> theta,
                            const ModelConfig& config, bool correct_design_I) {
    static const BandRateModel model;
    if (!record.married()) {
        if (record.design == Design::I) {
            throw ValidationError("design-I record without a marriage age");
        }
        return -band_hazard(record.covariates, theta, config.min_marriage_age,
                            censor_age(record));
    }
    const int fy = marriage_year(record);
    if (fy >= static_cast<int>(kSupportEnd)) {
        if (record.design == Design::I) {
            throw EvaluationError("design-I marriage age beyond the model support");
        }
        return -band_hazard(record.covariates, theta, config.min_marriage_age, kSupportEnd);
    }
    double ll = interval_censored_log_numerator(model, theta, record.covariates, fy, config);
    if (record.design == Design::I && correct_design_I) {
        const double hazard_to_survey =
            band_hazard(record.covariates, theta, config.min_marriage_age, censor_age(record));
        if (!(hazard_to_survey > 0.0)) {
            throw EvaluationError("design-I record is impossible under the model");
        }
        ll -= log1mexp(hazard_to_survey);
    }
    return ll;
}

void add_survey_record_loglik_grad(const SurveyRecord& record, std::span<const double> theta,
                                   const ModelConfig& config, bool correct_design_I,
                                   std::span<double> grad) {
    const double a_0 = config.min_marriage_age;
    if (!record.married()) {
        if (record.design == Design::I) {
            throw ValidationError("design-I record without a marriage age");
        }
        band_hazard(record.covariates, theta, a_0, censor_age(record), -1.0, grad);
        return;
    }
    const int fy = marriage_year(record);
    if (fy >= static_cast<int>(kSupportEnd)) {
        band_hazard(record.covariates, theta, a_0, kSupportEnd, -1.0, grad);
        return;
    }
    band_hazard(record.covariates, theta, a_0, fy, -1.0, grad);
    const double within = band_hazard(record.covariates, theta, fy, fy + 1.0);
    band_hazard(record.covariates, theta, fy, fy + 1.0, 1.0 / std::expm1(within), grad);
    if (record.design == Design::I && correct_design_I) {
        const double hazard_to_survey =
            band_hazard(record.covariates, theta, a_0, censor_age(record));
        band_hazard(record.covariates, theta, a_0, censor_age(record),
                    -1.0 / std::expm1(hazard_to_survey), grad);
    }
}

// --- CSV ingestion ------------------------------------------------------------

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(field);
            field.clear();
        } else if (ch != '\r') {
            field += ch;
        }
    }
    fields.push_back(field);
    return fields;
}

} // namespace

SurveyParse parse_survey_csv(const std::string& path, std::optional<Design> file_design) {
    std::ifstream in(path);
    if (!in) {
        throw EnvironmentError("cannot open survey file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + ": empty file, header row required");
    }
    const std::vector<std::string> header = split_line(line);
    auto column = [&](const std::string& name) {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    const int c_design = column("design");
    struct Col {
        const char* name;
        int index;
    };
    const Col c_z{"age_at_survey", column("age_at_survey")};
    const Col c_y{"age_at_marriage", column("age_at_marriage")};
    const Col c_bc{"birth_cohort", column("birth_cohort")};
    const Col c_res{"residence", column("residence")};
    const Col c_caste{"caste", column("caste")};
    const Col c_rel{"religion", column("religion")};
    const Col c_edu{"education", column("education")};
    for (const Col& col : {c_z, c_y, c_bc, c_res, c_caste, c_rel, c_edu}) {
        if (col.index < 0) {
            throw ValidationError(path + ": missing required column `" + col.name + "`");
        }
    }
    if (c_design < 0 && !file_design) {
        throw ValidationError(path +
                              ": no `design` column and no design supplied for the file");
    }

    SurveyParse parse;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = split_line(line);
        auto at = [&](const Col& col) -> std::string {
            return static_cast<std::size_t>(col.index) < f.size()
                       ? f[static_cast<std::size_t>(col.index)]
                       : "";
        };
        auto where = [&] { return path + ":" + std::to_string(lineno); };
        auto parse_number = [&](const std::string& text, const char* what) {
            try {
                std::size_t pos = 0;
                const double v = std::stod(text, &pos);
                if (pos != text.size()) {
                    throw std::invalid_argument("");
                }
                return v;
            } catch (const std::exception&) {
                throw ValidationError(where() + ": bad " + std::string(what) + " value `" +
                                      text + "`");
            }
        };
        auto category = [&](const Col& col, int hi) {
            const int v = static_cast<int>(parse_number(at(col), col.name));
            if (v < 0 || v > hi) {
                throw ValidationError(where() + ": " + col.name + " code " + std::to_string(v) +
                                      " outside 0.." + std::to_string(hi));
            }
            return v;
        };

        SurveyRecord rec;
        if (c_design >= 0 && static_cast<std::size_t>(c_design) < f.size() &&
            !f[static_cast<std::size_t>(c_design)].empty()) {
            const std::string& d = f[static_cast<std::size_t>(c_design)];
            if (d == "I") {
                rec.design = Design::I;
            } else if (d == "II") {
                rec.design = Design::II;
            } else {
                throw ValidationError(where() + ": design must be I or II, got `" + d + "`");
            }
        } else if (file_design) {
            rec.design = *file_design;
        } else {
            throw ValidationError(where() + ": blank design and no file design supplied");
        }

        rec.age_at_survey = std::floor(parse_number(at(c_z), "age_at_survey"));
        const std::string y_text = at(c_y);
        if (!y_text.empty()) {
            rec.marriage_age = std::floor(parse_number(y_text, "age_at_marriage"));
        } else if (rec.design == Design::I) {
            throw ValidationError(where() + ": design-I record without age_at_marriage");
        }
        rec.covariates.birth_cohort = category(c_bc, 3);
        rec.covariates.residence = category(c_res, 1);
        rec.covariates.caste = category(c_caste, 3);
        rec.covariates.religion = category(c_rel, 4);
        rec.covariates.education = category(c_edu, 3);

        if (rec.married() && *rec.marriage_age > rec.age_at_survey) {
            throw ValidationError(where() + ": age_at_marriage after age_at_survey");
        }
        if (rec.age_at_survey < 12.0) {
            parse.rejected += 1;
            parse.warnings.push_back(where() + ": rejected, age_at_survey below 12");
            continue;
        }
        if (rec.married() && *rec.marriage_age < 12.0) {
            parse.rejected += 1;
            parse.warnings.push_back(where() + ": rejected, age_at_marriage below 12");
            continue;
        }
        (rec.design == Design::I ? parse.cohort_I : parse.cohort_II)
            .records.push_back(std::move(rec));
    }
    return parse;
}

// --- fitting -------------------------------------------------------------------

namespace {

// Columns of the event design matrix that carry no identifying events are
// profiled out: symmetric elimination of the event Gram matrix, zero pivots
// flag the dependent parameters.
std::vector<bool> identifiable_parameters(const std::vector<const SurveyRecord*>& records,
                                          std::vector<std::string>* dropped) {
    constexpr std::size_t p = BandRateModel::kParamCount;
    Matrix gram(p, p, 0.0);
    std::vector<std::size_t> active;
    for (const SurveyRecord* rec : records) {
        if (!rec->married()) {
            continue;
        }
        const int fy = static_cast<int>(std::floor(*rec->marriage_age));
        if (fy >= static_cast<int>(kSupportEnd)) {
            continue;
        }
        const int band = age_band_of(fy) + 1;
        const Covariates& covs = rec->covariates;
        active.clear();
        active.push_back(BandRateModel::baseline_index(band));
        if (covs.birth_cohort > 0) {
            active.push_back(BandRateModel::birth_cohort_index(covs.birth_cohort));
        }
        if (covs.residence == 1) {
            active.push_back(BandRateModel::residence_index());
        }
        if (covs.caste > 0) {
            active.push_back(BandRateModel::caste_index(covs.caste));
        }
        if (covs.religion > 0) {
            active.push_back(BandRateModel::religion_index(covs.religion));
        }
        const int level = education_at_band(covs.education, band);
        if (level > 0) {
            active.push_back(BandRateModel::education_index(level));
        }
        for (std::size_t a : active) {
            for (std::size_t b : active) {
                gram(a, b) += 1.0;
            }
        }
    }

    std::vector<double> original_diag(p);
    for (std::size_t j = 0; j < p; ++j) {
        original_diag[j] = gram(j, j);
    }
    std::vector<bool> free_mask(p, true);
    const std::vector<std::string> names = BandRateModel{}.param_names();
    for (std::size_t j = 0; j < p; ++j) {
        const double pivot = gram(j, j);
        if (!(pivot > std::max(1e-9 * original_diag[j], 1e-12))) {
            free_mask[j] = false;
            if (dropped) {
                dropped->push_back(names[j]);
            }
            for (std::size_t k = 0; k < p; ++k) {
                gram(j, k) = 0.0;
                gram(k, j) = 0.0;
            }
            continue;
        }
        for (std::size_t r = j + 1; r < p; ++r) {
            const double factor = gram(r, j) / pivot;
            if (factor == 0.0) {
                continue;
            }
            for (std::size_t c = j; c < p; ++c) {
                gram(r, c) -= factor * gram(j, c);
            }
        }
        for (std::size_t r = j + 1; r < p; ++r) {
            gram(r, j) = 0.0;
            // keep symmetry for the pivots still to come
            gram(j, r) = 0.0;
        }
    }
    return free_mask;
}

std::vector<const SurveyRecord*> select_survey_records(const CohortSample& cohort_I,
                                                       const CohortSample& cohort_II,
                                                       FitVariant variant) {
    if (cohort_I.design != Design::I || cohort_II.design != Design::II) {
        throw ValidationError("fit_survey expects (design I, design II) cohorts in that order");
    }
    const bool want_I = variant != FitVariant::design_II;
    const bool want_II = variant == FitVariant::combined || variant == FitVariant::design_II;
    std::vector<const SurveyRecord*> records;
    if (want_I) {
        for (const SurveyRecord& rec : cohort_I.records) {
            records.push_back(&rec);
        }
    }
    if (want_II) {
        for (const SurveyRecord& rec : cohort_II.records) {
            records.push_back(&rec);
        }
    }
    return records;
}

} // namespace

FitResult fit_survey(const CohortSample& cohort_I, const CohortSample& cohort_II,
                     const ModelConfig& config, const SurveyFitOptions& options) {
    const std::vector<const SurveyRecord*> records =
        select_survey_records(cohort_I, cohort_II, options.variant);
    const bool correct = options.variant != FitVariant::design_I_no_correction;
    if (records.empty()) {
        throw ValidationError("no survey records to fit");
    }

    const BandRateModel model;
    constexpr std::size_t p = BandRateModel::kParamCount;
    std::vector<double> init = options.theta_init;
    if (init.empty()) {
        init = model.default_init(records, config);
    }
    if (init.size() != p) {
        throw ValidationError("theta_init size does not match the band model");
    }

    std::vector<std::string> dropped;
    const std::vector<bool> free_mask = identifiable_parameters(records, &dropped);
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < p; ++i) {
        if (free_mask[i]) {
            free_idx.push_back(i);
        }
    }
    if (free_idx.empty()) {
        throw ValidationError("no identifiable parameters (no events)");
    }

    std::vector<double> full = init;
    auto expand = [&](std::span<const double> reduced) -> const std::vector<double>& {
        for (std::size_t k = 0; k < free_idx.size(); ++k) {
            full[free_idx[k]] = reduced[k];
        }
        return full;
    };

    Objective objective;
    objective.value = [&](std::span<const double> reduced) {
        const std::vector<double>& theta = expand(reduced);
        double total = 0.0;
        try {
            for (const SurveyRecord* rec : records) {
                total += survey_record_loglik(*rec, theta, config, correct);
            }
        } catch (const EvaluationError&) {
            return -std::numeric_limits<double>::infinity();
        }
        return total;
    };
    objective.gradient = [&](std::span<const double> reduced) {
        const std::vector<double>& theta = expand(reduced);
        std::vector<double> grad_full(p, 0.0);
        for (const SurveyRecord* rec : records) {
            add_survey_record_loglik_grad(*rec, theta, config, correct, grad_full);
        }
        std::vector<double> grad(free_idx.size());
        for (std::size_t k = 0; k < free_idx.size(); ++k) {
            grad[k] = grad_full[free_idx[k]];
        }
        return grad;
    };

    std::vector<double> reduced_init(free_idx.size());
    for (std::size_t k = 0; k < free_idx.size(); ++k) {
        reduced_init[k] = init[free_idx[k]];
    }
    const MaximizeResult mx = maximize(objective, std::move(reduced_init), options.maximize);

    FitResult result;
    result.names = model.param_names();
    result.theta = expand(mx.theta);
    result.fixed.assign(p, false);
    for (std::size_t i = 0; i < p; ++i) {
        result.fixed[i] = !free_mask[i];
    }
    result.converged = mx.converged;
    result.iterations = mx.iterations;
    result.message = mx.message;
    if (!dropped.empty()) {
        std::string note = "; profiled out (no identifying events):";
        for (const std::string& name : dropped) {
            note += " " + name;
        }
        result.message += note;
    }
    result.se.assign(p, kNaN);
    result.ci_low.assign(p, kNaN);
    result.ci_high.assign(p, kNaN);
    result.covariance = Matrix(p, p, kNaN);
    {
        std::vector<double> contributions;
        contributions.reserve(records.size());
        for (const SurveyRecord* rec : records) {
            contributions.push_back(survey_record_loglik(*rec, result.theta, config, correct));
        }
        result.loglik = stable_sum(std::move(contributions));
    }
    if (mx.converged) {
        finalize_covariance(result, objective, mx.theta, free_idx);
    }
    return result;
}

// --- result files ----------------------------------------------------------------

namespace {

std::string fmt_or_blank(double v) {
    if (!std::isfinite(v)) {
        return "";
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

void write_baseline_rates_csv(const FitResult& result, std::ostream& out) {
    out << "band,rate,ci_low,ci_high\n";
    const auto& cuts = age_band_cuts();
    for (int j = 0; j < kAgeBandCount; ++j) {
        const std::size_t i = static_cast<std::size_t>(j);
        char band[32];
        std::snprintf(band, sizeof(band), "%g-%g", cuts[i], cuts[i + 1]);
        out << band << ',' << fmt_or_blank(std::exp(result.theta[i])) << ','
            << fmt_or_blank(std::exp(result.ci_low[i])) << ','
            << fmt_or_blank(std::exp(result.ci_high[i])) << "\n";
    }
}

void write_rate_ratios_csv(const FitResult& result, std::ostream& out) {
    out << "covariate,level,rr,ci_low,ci_high\n";
    struct Block {
        const char* covariate;
        std::size_t first;
        int levels;
    };
    const Block blocks[] = {
        {"birth_cohort", 17, 3}, {"residence", 20, 1}, {"caste", 21, 3},
        {"religion", 24, 4},     {"education", 28, 3},
    };
    for (const Block& block : blocks) {
        for (int l = 0; l < block.levels; ++l) {
            const std::size_t i = block.first + static_cast<std::size_t>(l);
            out << block.covariate << ',' << (l + 1) << ','
                << fmt_or_blank(std::exp(result.theta[i])) << ','
                << fmt_or_blank(std::exp(result.ci_low[i])) << ','
                << fmt_or_blank(std::exp(result.ci_high[i])) << "\n";
        }
    }
}

// --- synthetic survey records -------------------------------------------------

CohortSample generate_synthetic_survey(std::span<const double> theta, int n, Design design,
                                       std::uint64_t seed, const ModelConfig& /*config*/) {
    if (theta.size() != BandRateModel::kParamCount) {
        throw ValidationError("synthetic survey needs a full 31-parameter vector");
    }
    Rng rng(seed);
    CohortSample cohort;
    cohort.design = design;
    const auto& cuts = age_band_cuts();
    while (cohort.records.size() < static_cast<std::size_t>(n)) {
        Covariates covs;
        covs.birth_cohort = rng.uniform_int(0, 3);
        covs.residence = rng.uniform_int(0, 1);
        covs.caste = rng.uniform_int(0, 3);
        covs.religion = rng.uniform_int(0, 4);
        covs.education = rng.uniform_int(0, 3);
        const int z = rng.uniform_int(15, 49);

        // Inverse-CDF draw of the marriage age from the piecewise
        // exponential over [12, 50).
        double target = rng.exponential(1.0);
        double y = std::numeric_limits<double>::infinity();
        for (int j = 0; j < kAgeBandCount; ++j) {
            const double lo = cuts[static_cast<std::size_t>(j)];
            const double hi = cuts[static_cast<std::size_t>(j) + 1];
            const double rate = std::exp(BandRateModel::band_log_rate(j + 1, covs, theta));
            const double mass = rate * (hi - lo);
            if (target < mass) {
                y = lo + target / rate;
                break;
            }
            target -= mass;
        }

        const bool married = y <= z;
        if (design == Design::I && !married) {
            continue; // ever-married sampling: redraw the whole individual
        }
        SurveyRecord rec;
        rec.design = design;
        rec.age_at_survey = z;
        rec.covariates = covs;
        if (married) {
            rec.marriage_age = std::floor(y);
        }
        cohort.records.push_back(std::move(rec));
    }
    return cohort;
}

} // namespace retroinc
