#pragma once

#include "retroinc/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace retroinc {

// Deterministic random stream. All draws are derived from raw 64-bit engine
// output with fixed arithmetic, so sequences are identical across platforms
// and standard library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);
    // Independent stream for replication `stream` under a master seed.
    Rng(std::uint64_t master_seed, std::uint64_t stream);

    double u01(); // uniform on [0, 1)
    double uniform(double lo, double hi);
    double exponential(double rate); // rate > 0
    bool bernoulli(double p);
    int uniform_int(int lo, int hi); // inclusive bounds

  private:
    std::mt19937_64 engine_;
};

// Fixed covariates in the survey coding: birth cohort 0..3, residence 0..1,
// caste 0..3, religion 0..4, education 0..3 (ordinal). Code 0 is the
// reference level of each.
struct Covariates {
    int birth_cohort = 0;
    int residence = 0;
    int caste = 0;
    int religion = 0;
    int education = 0;
};

// One observed individual at the cross-section.
struct SurveyRecord {
    Design design = Design::II;
    double age_at_survey = 0.0;              // z
    std::optional<double> marriage_age;      // y, present iff married by z
    std::optional<double> schooling_end_age; // a_w; empty = still in school
    int x = 0;                               // binary scenario covariate
    Covariates covariates;

    bool married() const { return marriage_age.has_value(); }
    // Age at which schooling ended, with +infinity standing in for records
    // still in school, so that `age < school_end` reads as "in school".
    double school_end_or_inf() const {
        return schooling_end_age ? *schooling_end_age : std::numeric_limits<double>::infinity();
    }
};

struct CohortSample {
    Design design = Design::II;
    std::vector<SurveyRecord> records;
};

struct Transition {
    double age = 0.0;
    State to = State::Dead;
};

// One simulated individual. `initial_state` is the state occupied at the
// minimum marriageable age (1 or 3); transitions are strictly increasing in
// age and all beyond that age.
struct EventHistory {
    double birth_year = 0.0;
    int x = 0;
    State initial_state = State::AtSchoolUnmarried;
    std::vector<Transition> transitions;
};

// State occupied at `age` (>= min marriage age).
State state_at(const EventHistory& history, double age, const ModelConfig& config);

// Simulates the constant-rate chain from `initial` at `age_start` until
// death or `age_end`, using competing exponentials (exact for constant
// rates).
std::vector<Transition> simulate_chain(Rng& rng, const SimParams& params, int x, State initial,
                                       double age_start, double age_end);

// Draws one full event history: covariate, birth year, initial state at the
// minimum marriageable age, then the chain up to the cross-section.
EventHistory simulate_history(Rng& rng, const SimParams& params, const ModelConfig& config);

// Keeps the histories alive at the cross-section that match the design
// (design I: married states only; design II: any living state) and converts
// them to survey records.
CohortSample build_cohort(const std::vector<EventHistory>& histories, Design design,
                          const ModelConfig& config);

// Scenario file: model constants, rate parameters and the Monte Carlo plan.
struct ScenarioConfig {
    ModelConfig model;
    SimParams params;
    int n_per_design = 2500;
    int replications = 1000;
    std::uint64_t seed = 1;

    static ScenarioConfig load(const std::string& path);
    static ScenarioConfig from(const KeyValues& kv);
    void save(const std::string& path) const;
};

// Simulates `n` histories on stream (seed, stream_index) and builds the
// requested cohort.
CohortSample simulate_cohort(const ScenarioConfig& scenario, Design design, std::uint64_t seed,
                             std::uint64_t stream_index);

// Cohort CSV: the survey schema columns first, then the scenario columns
// (x, schooling_end_age) that make simulated cohorts exactly refittable.
// Ages are written with full precision.
void write_cohort_csv(const CohortSample& cohort, std::ostream& out);
void write_cohort_csv(const CohortSample& cohort, const std::string& path);
CohortSample read_cohort_csv(const std::string& path);

} // namespace retroinc
