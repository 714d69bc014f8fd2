#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace retroinc {

// Joint education/marriage state space. Dead is absorbing; the eight legal
// transitions are 1->2, 1->3, 1->5, 2->4, 2->5, 3->4, 3->5, 4->5.
enum class State : int {
    AtSchoolUnmarried = 1,
    AtSchoolMarried = 2,
    OutOfSchoolUnmarried = 3,
    OutOfSchoolMarried = 4,
    Dead = 5,
};

enum class Design { I, II };

std::string to_string(State s);
std::string to_string(Design d);

inline bool is_married(State s) {
    return s == State::AtSchoolMarried || s == State::OutOfSchoolMarried;
}
inline bool is_in_school(State s) {
    return s == State::AtSchoolUnmarried || s == State::AtSchoolMarried;
}

// Global age constants plus the calendar year of the cross-sectional survey.
// Ages and calendar times are continuous; calendar time = birth year + age.
struct ModelConfig {
    double school_start_age = 6.0;  // minimum age of starting basic education
    double min_marriage_age = 12.0; // minimum marriageable age
    double cross_section_time = 2005.0;

    void validate() const; // requires min_marriage_age > school_start_age > 0
};

// Log-rate parameters of the five-state transition intensity matrix:
//   m  baseline marriage rate
//   b  effect of the binary covariate x on every rate
//   c  effect of being in school on marriage and mortality rates
//   d  effect of being married on the rate of stopping school
//   g  effect of being married on mortality
//   s  baseline rate of stopping school
//   r  baseline mortality rate
// d = 0 and g = 0 together give the non-differential scenario.
struct SimParams {
    double m = 0.0;
    double b = 0.0;
    double c = 0.0;
    double d = 0.0;
    double g = 0.0;
    double s = 0.0;
    double r = 0.0;

    void validate() const; // all fields finite
    bool non_differential() const { return d == 0.0 && g == 0.0; }
};

// Per person-year intensity of the (from, to) transition for covariate x.
// Throws std::domain_error for pairs outside the eight legal transitions.
double transition_rate(State from, State to, int x, const SimParams& params);

// Total exit rate out of `from` (sum over its legal destinations).
double total_exit_rate(State from, int x, const SimParams& params);

// A hazard that is constant on each cell of a strictly increasing age grid.
// Supports exact integration, so cumulative hazards carry no quadrature
// error.
class PiecewiseRate {
  public:
    PiecewiseRate();
    // cuts.size() == values.size() + 1; cuts strictly increasing; values
    // non-negative and finite. Throws std::invalid_argument otherwise.
    PiecewiseRate(std::vector<double> cuts, std::vector<double> values);

    static PiecewiseRate constant(double rate, double age_lo, double age_hi);

    double age_min() const { return cuts_.front(); }
    double age_max() const { return cuts_.back(); }
    std::size_t pieces() const { return values_.size(); }
    const std::vector<double>& cuts() const { return cuts_; }
    const std::vector<double>& values() const { return values_; }

    // Rate at `age`; the last grid point belongs to the last piece.
    double value_at(double age) const;

    // Exact cumulative hazard over [u, v]. Requires
    // age_min() <= u <= v <= age_max(); throws std::domain_error otherwise.
    double integral(double u, double v) const;

    bool operator==(const PiecewiseRate&) const = default;

  private:
    std::vector<double> cuts_;
    std::vector<double> values_;
};

// Plain-text `name = value` configuration files with `#` comments.
// Preserves insertion order so writes are deterministic.
class KeyValues {
  public:
    static KeyValues load(const std::string& path);
    static KeyValues parse(std::istream& in, const std::string& origin);

    bool has(const std::string& key) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::string get_string(const std::string& key, std::string fallback) const;

    void set(const std::string& key, double value);
    void set(const std::string& key, const std::string& value);

    void save(const std::string& path) const;
    void write(std::ostream& out) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
    const std::string* find(const std::string& key) const;
};

ModelConfig model_config_from(const KeyValues& kv);
SimParams sim_params_from(const KeyValues& kv);
void store(KeyValues& kv, const ModelConfig& config);
void store(KeyValues& kv, const SimParams& params);

} // namespace retroinc
