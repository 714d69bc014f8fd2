#include "retroinc/estimate.hpp"

#include "retroinc/errors.hpp"
#include "retroinc/numeric.hpp"
#include "retroinc/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace retroinc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

bool out_of_bounds(std::span<const double> theta, double bound) {
    for (double v : theta) {
        if (!std::isfinite(v) || std::abs(v) > bound) {
            return true;
        }
    }
    return false;
}

// Nelder-Mead simplex search, minimizing f. Used as the derivative-free
// fallback when the quasi-Newton line search cannot make progress.
MaximizeResult nelder_mead(const std::function<double(std::span<const double>)>& f,
                           std::vector<double> x0, const MaximizeOptions& options) {
    const std::size_t n = x0.size();
    const int max_iter = std::max(200, options.max_iterations * 10);

    std::vector<std::vector<double>> simplex;
    simplex.push_back(x0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> v = x0;
        v[i] += 0.05 * std::max(1.0, std::abs(v[i]));
        simplex.push_back(std::move(v));
    }
    std::vector<double> values(simplex.size());
    for (std::size_t i = 0; i < simplex.size(); ++i) {
        values[i] = f(simplex[i]);
    }

    MaximizeResult out;
    out.used_fallback = true;
    int it = 0;
    for (; it < max_iter; ++it) {
        std::vector<std::size_t> order(simplex.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second_worst = order[order.size() - 2];

        if (out_of_bounds(simplex[best], options.param_bound)) {
            out.theta = simplex[best];
            out.value = -values[best];
            out.iterations = it;
            out.hit_bound = true;
            out.message = "parameter reached the search bound (monotone likelihood)";
            return out;
        }

        double spread = 0.0;
        double size = 0.0;
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            spread = std::max(spread, std::abs(values[i] - values[best]));
            for (std::size_t j = 0; j < n; ++j) {
                size = std::max(size, std::abs(simplex[i][j] - simplex[best][j]));
            }
        }
        if (spread <= options.value_tol * (std::abs(values[best]) + 1.0) && size <= 1e-8) {
            out.theta = simplex[best];
            out.value = -values[best];
            out.iterations = it;
            out.converged = true;
            out.message = "simplex converged";
            return out;
        }

        std::vector<double> centroid(n, 0.0);
        for (std::size_t i = 0; i < simplex.size(); ++i) {
            if (i == worst) {
                continue;
            }
            for (std::size_t j = 0; j < n; ++j) {
                centroid[j] += simplex[i][j];
            }
        }
        for (double& c : centroid) {
            c /= static_cast<double>(n);
        }

        auto blend = [&](double t) {
            std::vector<double> p(n);
            for (std::size_t j = 0; j < n; ++j) {
                p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
            }
            return p;
        };

        std::vector<double> reflected = blend(-1.0);
        const double f_reflected = f(reflected);
        if (f_reflected < values[best]) {
            std::vector<double> expanded = blend(-2.0);
            const double f_expanded = f(expanded);
            if (f_expanded < f_reflected) {
                simplex[worst] = std::move(expanded);
                values[worst] = f_expanded;
            } else {
                simplex[worst] = std::move(reflected);
                values[worst] = f_reflected;
            }
        } else if (f_reflected < values[second_worst]) {
            simplex[worst] = std::move(reflected);
            values[worst] = f_reflected;
        } else {
            std::vector<double> contracted = blend(0.5);
            const double f_contracted = f(contracted);
            if (f_contracted < values[worst]) {
                simplex[worst] = std::move(contracted);
                values[worst] = f_contracted;
            } else {
                for (std::size_t i = 0; i < simplex.size(); ++i) {
                    if (i == best) {
                        continue;
                    }
                    for (std::size_t j = 0; j < n; ++j) {
                        simplex[i][j] = 0.5 * (simplex[i][j] + simplex[best][j]);
                    }
                    values[i] = f(simplex[i]);
                }
            }
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] < values[best]) {
            best = i;
        }
    }
    out.theta = simplex[best];
    out.value = -values[best];
    out.iterations = it;
    out.message = "simplex reached the iteration limit";
    return out;
}

} // namespace

MaximizeResult maximize(const Objective& objective, std::vector<double> theta0,
                        const MaximizeOptions& options) {
    const std::size_t n = theta0.size();
    MaximizeResult out;
    if (n == 0) {
        out.theta = theta0;
        out.value = objective.value(theta0);
        out.converged = true;
        return out;
    }

    // Minimize f = -value.
    auto f = [&](std::span<const double> th) {
        const double v = objective.value(th);
        return std::isfinite(v) ? -v : kInf;
    };

    if (!objective.gradient) {
        return nelder_mead(f, std::move(theta0), options);
    }

    auto neg_grad = [&](std::span<const double> th) {
        std::vector<double> g = objective.gradient(th);
        for (double& v : g) {
            v = -v;
        }
        return g;
    };

    std::vector<double> x = std::move(theta0);
    double fx = f(x);
    if (!std::isfinite(fx)) {
        return nelder_mead(f, std::move(x), options);
    }
    std::vector<double> g = neg_grad(x);
    Matrix h_inv = Matrix::identity(n);

    for (int it = 0; it < options.max_iterations; ++it) {
        out.iterations = it;
        if (inf_norm(g) <= options.gradient_tol) {
            out.theta = x;
            out.value = -fx;
            out.converged = true;
            out.message = "gradient tolerance met";
            return out;
        }
        if (out_of_bounds(x, options.param_bound)) {
            out.theta = x;
            out.value = -fx;
            out.hit_bound = true;
            out.message = "parameter reached the search bound (monotone likelihood)";
            return out;
        }

        std::vector<double> p = matvec(h_inv, g);
        for (double& v : p) {
            v = -v;
        }
        double slope = dot(g, p);
        if (!(slope < -1e-16) || !std::isfinite(slope)) {
            h_inv = Matrix::identity(n);
            p = g;
            for (double& v : p) {
                v = -v;
            }
            slope = dot(g, p);
        }

        double alpha = 1.0;
        bool accepted = false;
        std::vector<double> xn(n);
        double fn = fx;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) {
                xn[i] = x[i] + alpha * p[i];
            }
            fn = f(xn);
            if (fn <= fx + 1e-4 * alpha * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (inf_norm(g) <= 100.0 * options.gradient_tol) {
                out.theta = x;
                out.value = -fx;
                out.converged = true;
                out.message = "line search floor at a near-stationary point";
                return out;
            }
            MaximizeResult fallback = nelder_mead(f, x, options);
            fallback.iterations += it;
            return fallback;
        }

        std::vector<double> gn = neg_grad(xn);
        std::vector<double> s(n), yv(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = xn[i] - x[i];
            yv[i] = gn[i] - g[i];
        }
        const double ys = dot(yv, s);
        if (ys > 1e-12 * std::max(1e-300, inf_norm(yv) * inf_norm(s))) {
            const double rho = 1.0 / ys;
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            std::vector<double> hy = matvec(h_inv, yv);
            const double yhy = dot(yv, hy);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    h_inv(i, j) += rho * rho * yhy * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]) +
                                   rho * s[i] * s[j];
                }
            }
        } else {
            h_inv = Matrix::identity(n);
        }

        const bool tiny_step = inf_norm(s) <= 1e-10 * (1.0 + inf_norm(x));
        const bool tiny_gain = std::abs(fx - fn) <= options.value_tol * (std::abs(fx) + 1.0);
        x = std::move(xn);
        fx = fn;
        g = std::move(gn);
        if (tiny_step && tiny_gain) {
            out.theta = x;
            out.value = -fx;
            out.converged = true;
            out.message = "step and value tolerance met";
            out.iterations = it + 1;
            return out;
        }
        xn.assign(n, 0.0);
    }

    out.theta = x;
    out.value = -fx;
    out.message = "iteration limit reached";
    return out;
}

Matrix numerical_hessian(const std::function<std::vector<double>(std::span<const double>)>& grad,
                         std::span<const double> theta, double rel_step) {
    const std::size_t n = theta.size();
    Matrix h(n, n, 0.0);
    std::vector<double> point(theta.begin(), theta.end());
    for (std::size_t j = 0; j < n; ++j) {
        const double step = rel_step * std::max(1.0, std::abs(theta[j]));
        point[j] = theta[j] + step;
        const std::vector<double> plus = grad(point);
        point[j] = theta[j] - step;
        const std::vector<double> minus = grad(point);
        point[j] = theta[j];
        for (std::size_t i = 0; i < n; ++i) {
            h(i, j) = (plus[i] - minus[i]) / (2.0 * step);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double sym = 0.5 * (h(i, j) + h(j, i));
            h(i, j) = sym;
            h(j, i) = sym;
        }
    }
    return h;
}

std::optional<Matrix> covariance_from_hessian(const Matrix& hessian) {
    Matrix neg = hessian;
    for (std::size_t i = 0; i < neg.rows(); ++i) {
        for (std::size_t j = 0; j < neg.cols(); ++j) {
            neg(i, j) = -neg(i, j);
        }
    }
    return invert(neg);
}

std::optional<std::vector<double>> standard_errors(const Matrix& hessian) {
    const std::optional<Matrix> cov = covariance_from_hessian(hessian);
    if (!cov) {
        return std::nullopt;
    }
    std::vector<double> se(hessian.rows());
    for (std::size_t i = 0; i < se.size(); ++i) {
        const double var = (*cov)(i, i);
        if (!(var > 0.0) || !std::isfinite(var)) {
            return std::nullopt;
        }
        se[i] = std::sqrt(var);
    }
    return se;
}

bool FitResult::covers(std::size_t i, double truth) const {
    return std::isfinite(se[i]) && ci_low[i] <= truth && truth <= ci_high[i];
}

const char* to_string(FitVariant variant) {
    switch (variant) {
    case FitVariant::combined: return "combined";
    case FitVariant::design_I: return "design_I";
    case FitVariant::design_I_no_correction: return "design_I_no_correction";
    case FitVariant::design_II: return "design_II";
    }
    return "?";
}

namespace {

std::vector<const SurveyRecord*> select_records(std::span<const CohortSample> cohorts,
                                                FitVariant variant) {
    const bool want_I = variant != FitVariant::design_II;
    const bool want_II = variant == FitVariant::combined || variant == FitVariant::design_II;
    std::vector<const SurveyRecord*> records;
    for (const CohortSample& cohort : cohorts) {
        for (const SurveyRecord& record : cohort.records) {
            if (record.design != cohort.design) {
                throw ValidationError("record design tag differs from its cohort design");
            }
            if ((record.design == Design::I && want_I) ||
                (record.design == Design::II && want_II)) {
                records.push_back(&record);
            }
        }
    }
    return records;
}

} // namespace

FitResult fit(std::span<const CohortSample> cohorts, const MarriageRateModel& model,
              const ModelConfig& config, const FitOptions& options) {
    const std::vector<const SurveyRecord*> records = select_records(cohorts, options.variant);
    const bool correct = options.variant != FitVariant::design_I_no_correction;

    bool any_exposure = false;
    for (const SurveyRecord* rec : records) {
        if (rec->design == Design::I && !(rec->age_at_survey > config.min_marriage_age)) {
            throw ValidationError("design-I record without exposure (survey age at or below "
                                  "the minimum marriageable age)");
        }
        if (rec->married() || rec->age_at_survey > config.min_marriage_age) {
            any_exposure = true;
        }
    }
    if (!any_exposure) {
        throw ValidationError("no records with exposure to fit");
    }

    const std::size_t p = model.n_params();
    std::vector<double> init = options.theta_init;
    if (init.empty()) {
        init = model.default_init(records, config);
    }
    if (init.size() != p) {
        throw ValidationError("theta_init size does not match the model");
    }
    std::vector<bool> free_mask = options.free_mask;
    if (free_mask.empty()) {
        free_mask.assign(p, true);
    }
    if (free_mask.size() != p) {
        throw ValidationError("free_mask size does not match the model");
    }
    std::vector<std::size_t> free_idx;
    for (std::size_t i = 0; i < p; ++i) {
        if (free_mask[i]) {
            free_idx.push_back(i);
        }
    }
    if (free_idx.empty()) {
        throw ValidationError("no free parameters to fit");
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
        // Extreme trial points can underflow the cumulative hazard to zero;
        // report them as -inf so the line search retreats.
        try {
            for (const SurveyRecord* rec : records) {
                total += record_loglik(*rec, model, theta, config, correct);
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
            add_record_loglik_grad(*rec, model, theta, config, correct, grad_full);
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
    result.se.assign(p, kNaN);
    result.ci_low.assign(p, kNaN);
    result.ci_high.assign(p, kNaN);
    result.covariance = Matrix(p, p, kNaN);

    {
        std::vector<double> contributions;
        contributions.reserve(records.size());
        for (const SurveyRecord* rec : records) {
            contributions.push_back(record_loglik(*rec, model, result.theta, config, correct));
        }
        result.loglik = stable_sum(std::move(contributions));
    }

    if (mx.converged) {
        finalize_covariance(result, objective, mx.theta, free_idx);
    }
    return result;
}

void finalize_covariance(FitResult& result, const Objective& objective,
                         std::span<const double> reduced_theta,
                         std::span<const std::size_t> free_idx) {
    const Matrix hessian = numerical_hessian(objective.gradient, reduced_theta);
    const std::optional<Matrix> cov = covariance_from_hessian(hessian);
    if (!cov) {
        result.message += "; covariance unavailable (singular Hessian)";
        return;
    }
    result.covariance_ok = true;
    for (std::size_t a = 0; a < free_idx.size(); ++a) {
        for (std::size_t b = 0; b < free_idx.size(); ++b) {
            result.covariance(free_idx[a], free_idx[b]) = (*cov)(a, b);
        }
        const double var = (*cov)(a, a);
        if (var > 0.0 && std::isfinite(var)) {
            const std::size_t i = free_idx[a];
            result.se[i] = std::sqrt(var);
            result.ci_low[i] = result.theta[i] - kZ95 * result.se[i];
            result.ci_high[i] = result.theta[i] + kZ95 * result.se[i];
        } else {
            result.covariance_ok = false;
        }
    }
}

void write_fit_json(const FitResult& result, const std::string& model_kind, std::ostream& out) {
    nlohmann::json doc;
    doc["model"] = model_kind;
    doc["loglik"] = result.loglik;
    doc["converged"] = result.converged;
    doc["iterations"] = result.iterations;
    doc["message"] = result.message;
    nlohmann::json params = nlohmann::json::array();
    for (std::size_t i = 0; i < result.names.size(); ++i) {
        nlohmann::json p;
        p["name"] = result.names[i];
        p["estimate"] = result.theta[i];
        p["se"] = result.se[i];
        p["ci_low"] = result.ci_low[i];
        p["ci_high"] = result.ci_high[i];
        p["fixed"] = static_cast<bool>(result.fixed[i]);
        params.push_back(std::move(p));
    }
    doc["parameters"] = std::move(params);
    out << doc.dump(2) << "\n";
}

// --- replication harness ---------------------------------------------------

namespace {

constexpr std::array<FitVariant, 4> kVariants = {
    FitVariant::combined,
    FitVariant::design_I,
    FitVariant::design_I_no_correction,
    FitVariant::design_II,
};

struct RepOutcome {
    std::array<std::array<double, 3>, 4> estimate{};
    std::array<std::array<double, 3>, 4> se{};
    std::array<bool, 4> usable{};
    std::size_t size_I = 0;
    std::size_t size_II = 0;
};

} // namespace

ReplicationSummary run_scenario(const ScenarioConfig& scenario, int workers,
                                const std::function<void(int, int)>& progress) {
    scenario.params.validate();
    scenario.model.validate();
    const int reps = scenario.replications;
    std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
    const ConstantRateModel model;
    std::atomic<int> done{0};

    parallel_for(static_cast<std::size_t>(reps), workers, [&](std::size_t rep) {
        RepOutcome& outcome = outcomes[rep];
        std::array<CohortSample, 2> cohorts{
            simulate_cohort(scenario, Design::I, scenario.seed, 2 * rep),
            simulate_cohort(scenario, Design::II, scenario.seed, 2 * rep + 1),
        };
        outcome.size_I = cohorts[0].records.size();
        outcome.size_II = cohorts[1].records.size();
        for (std::size_t v = 0; v < kVariants.size(); ++v) {
            std::span<const CohortSample> data;
            switch (kVariants[v]) {
            case FitVariant::combined: data = {cohorts.data(), 2}; break;
            case FitVariant::design_I:
            case FitVariant::design_I_no_correction: data = {cohorts.data(), 1}; break;
            case FitVariant::design_II: data = {cohorts.data() + 1, 1}; break;
            }
            FitOptions options;
            options.variant = kVariants[v];
            const FitResult fr = fit(data, model, scenario.model, options);
            outcome.usable[v] = fr.converged && fr.covariance_ok;
            for (std::size_t k = 0; k < 3; ++k) {
                outcome.estimate[v][k] = fr.theta[k];
                outcome.se[v][k] = fr.se[k];
            }
        }
        if (progress) {
            progress(done.fetch_add(1) + 1, reps);
        }
    });

    ReplicationSummary summary;
    summary.replications = reps;
    const std::array<double, 3> truth = {scenario.params.m, scenario.params.b, scenario.params.c};
    const std::array<const char*, 3> param_names = {"m", "b", "c"};

    double sum_I = 0.0;
    double sum_II = 0.0;
    for (const RepOutcome& outcome : outcomes) {
        sum_I += static_cast<double>(outcome.size_I);
        sum_II += static_cast<double>(outcome.size_II);
    }
    summary.mean_cohort_size_I = reps > 0 ? sum_I / reps : 0.0;
    summary.mean_cohort_size_II = reps > 0 ? sum_II / reps : 0.0;

    for (std::size_t v = 0; v < kVariants.size(); ++v) {
        int usable = 0;
        for (const RepOutcome& outcome : outcomes) {
            if (outcome.usable[v]) {
                ++usable;
            }
        }
        summary.excluded[v] = reps - usable;
        for (std::size_t k = 0; k < 3; ++k) {
            ReplicationRow row;
            row.variant = kVariants[v];
            row.parameter = param_names[k];
            row.truth = truth[k];
            if (usable > 0) {
                double mean = 0.0;
                double mean_se = 0.0;
                int covered = 0;
                for (const RepOutcome& outcome : outcomes) {
                    if (!outcome.usable[v]) {
                        continue;
                    }
                    mean += outcome.estimate[v][k];
                    mean_se += outcome.se[v][k];
                    const double lo = outcome.estimate[v][k] - kZ95 * outcome.se[v][k];
                    const double hi = outcome.estimate[v][k] + kZ95 * outcome.se[v][k];
                    if (lo <= truth[k] && truth[k] <= hi) {
                        ++covered;
                    }
                }
                mean /= usable;
                mean_se /= usable;
                double var = 0.0;
                for (const RepOutcome& outcome : outcomes) {
                    if (!outcome.usable[v]) {
                        continue;
                    }
                    const double d = outcome.estimate[v][k] - mean;
                    var += d * d;
                }
                row.mean = mean;
                row.bias = mean - truth[k];
                row.mc_sd = usable > 1 ? std::sqrt(var / (usable - 1)) : kNaN;
                row.mean_se = mean_se;
                row.coverage = static_cast<double>(covered) / usable;
            } else {
                row.mean = kNaN;
                row.bias = kNaN;
                row.mc_sd = kNaN;
                row.mean_se = kNaN;
                row.coverage = kNaN;
            }
            summary.rows.push_back(std::move(row));
        }
    }
    return summary;
}

void write_replication_csv(const ReplicationSummary& summary, std::ostream& out) {
    out << "likelihood,parameter,truth,mean,bias,mc_sd,mean_se,coverage\n";
    char buf[64];
    // undefined statistics (e.g. MC SD of a single replication) stay blank
    auto fmt = [&](double v) {
        if (!std::isfinite(v)) {
            return std::string();
        }
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    for (const ReplicationRow& row : summary.rows) {
        out << to_string(row.variant) << ',' << row.parameter << ',' << fmt(row.truth) << ','
            << fmt(row.mean) << ',' << fmt(row.bias) << ',' << fmt(row.mc_sd) << ','
            << fmt(row.mean_se) << ',' << fmt(row.coverage) << "\n";
    }
}

} // namespace retroinc
