#pragma once

#include "retroinc/likelihood.hpp"
#include "retroinc/linalg.hpp"
#include "retroinc/model.hpp"
#include "retroinc/simulate.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace retroinc {

// Two-sided 95% normal quantile used for every confidence interval.
inline constexpr double kZ95 = 1.959964;

struct Objective {
    std::function<double(std::span<const double>)> value;
    // Optional analytic gradient; simplex search is used when absent.
    std::function<std::vector<double>(std::span<const double>)> gradient;
};

struct MaximizeOptions {
    int max_iterations = 400;
    double gradient_tol = 1e-7;
    double value_tol = 1e-12;
    // A parameter walking past this magnitude is treated as a boundary
    // (monotone likelihood, e.g. zero events for a log rate) and reported
    // as non-convergence. Log rates below -20 mean less than one event per
    // 5e8 person-years, far outside the model's domain.
    double param_bound = 20.0;
};

struct MaximizeResult {
    std::vector<double> theta;
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
    bool hit_bound = false;
    bool used_fallback = false;
    std::string message;
};

// Quasi-Newton (BFGS) ascent with backtracking line search; falls back to a
// Nelder-Mead simplex search when no gradient is available or the line
// search stalls.
MaximizeResult maximize(const Objective& objective, std::vector<double> theta0,
                        const MaximizeOptions& options = {});

// Hessian of the objective by central finite differences of its gradient,
// step 1e-5 * max(1, |theta_i|) per coordinate, symmetrized.
Matrix numerical_hessian(const std::function<std::vector<double>(std::span<const double>)>& grad,
                         std::span<const double> theta, double rel_step = 1e-5);

// Covariance = inverse of the negative Hessian; empty when not invertible.
std::optional<Matrix> covariance_from_hessian(const Matrix& hessian);

// sqrt of the covariance diagonal; empty when the Hessian cannot be
// inverted or yields a negative variance.
std::optional<std::vector<double>> standard_errors(const Matrix& hessian);

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> theta;
    std::vector<double> se;      // NaN where unavailable
    std::vector<double> ci_low;  // theta -/+ kZ95 * se
    std::vector<double> ci_high;
    std::vector<bool> fixed;     // profiled-out parameters
    Matrix covariance;           // NaN rows/cols at fixed parameters
    bool covariance_ok = false;
    double loglik = 0.0;
    bool converged = false;
    int iterations = 0;
    std::string message;

    bool covers(std::size_t i, double truth) const;
};

// Which likelihood is maximised over the supplied cohorts.
enum class FitVariant {
    combined,                // design-appropriate contribution of every record
    design_I,                // prevalent cohort only, with sampling correction
    design_I_no_correction,  // prevalent cohort only, numerator alone
    design_II,               // general cohort only
};
const char* to_string(FitVariant variant);

struct FitOptions {
    FitVariant variant = FitVariant::combined;
    std::vector<double> theta_init; // empty = model default
    std::vector<bool> free_mask;    // empty = all parameters free
    MaximizeOptions maximize;
};

// Maximum likelihood fit of the model over the cohorts. Never reports a
// silent success: non-convergence and boundary estimates come back with
// converged == false and a message.
FitResult fit(std::span<const CohortSample> cohorts, const MarriageRateModel& model,
              const ModelConfig& config, const FitOptions& options = {});

// Shared fit post-processing: numerically differentiated Hessian at the
// optimum, covariance by inversion, standard errors and 95% intervals for
// the free parameters. Marks the covariance unavailable instead of
// propagating NaN when the Hessian cannot be inverted.
void finalize_covariance(FitResult& result, const Objective& objective,
                         std::span<const double> reduced_theta,
                         std::span<const std::size_t> free_idx);

// Writes parameter names, estimates, standard errors, confidence bounds,
// the log-likelihood and convergence state as JSON.
void write_fit_json(const FitResult& result, const std::string& model_kind, std::ostream& out);

// --- Monte Carlo replication harness --------------------------------------

struct ReplicationRow {
    FitVariant variant = FitVariant::combined;
    std::string parameter;
    double truth = 0.0;
    double mean = 0.0;
    double bias = 0.0;
    double mc_sd = 0.0;
    double mean_se = 0.0;
    double coverage = 0.0;
};

struct ReplicationSummary {
    std::vector<ReplicationRow> rows;
    int replications = 0;
    // Replications dropped per variant because the fit did not converge or
    // its covariance was unavailable.
    std::vector<int> excluded = std::vector<int>(4, 0);
    double mean_cohort_size_I = 0.0;
    double mean_cohort_size_II = 0.0;
};

// Simulates both cohorts and fits all four likelihood variants,
// `scenario.replications` times, accumulating mean/bias/MC SD/mean SE and
// 95% coverage for the marriage parameters (m, b, c). Replications run in
// parallel; each owns the random stream derived from (seed, replication),
// so the summary does not depend on the worker count. `progress`, when set,
// is called after each completed replication with (done, total).
ReplicationSummary run_scenario(const ScenarioConfig& scenario, int workers = 1,
                                const std::function<void(int, int)>& progress = {});

void write_replication_csv(const ReplicationSummary& summary, std::ostream& out);

} // namespace retroinc
