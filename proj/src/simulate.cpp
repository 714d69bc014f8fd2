#include "retroinc/simulate.hpp"

#include "retroinc/errors.hpp"
#include "retroinc/numeric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace retroinc {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed) {
    std::uint64_t state = seed;
    std::array<std::uint32_t, 8> words{};
    for (auto& w : words) {
        w = static_cast<std::uint32_t>(splitmix64(state) >> 32);
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

} // namespace

Rng::Rng(std::uint64_t seed) : engine_(make_engine(seed)) {}

Rng::Rng(std::uint64_t master_seed, std::uint64_t stream)
    : engine_(make_engine(master_seed ^ (0x9e3779b97f4a7c15ULL * (stream + 1)))) {}

double Rng::u01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

double Rng::exponential(double rate) { return -std::log1p(-u01()) / rate; }

bool Rng::bernoulli(double p) { return u01() < p; }

int Rng::uniform_int(int lo, int hi) {
    const int span = hi - lo + 1;
    int v = lo + static_cast<int>(u01() * span);
    return std::min(v, hi);
}

State state_at(const EventHistory& history, double age, const ModelConfig& config) {
    if (age < config.min_marriage_age) {
        throw std::domain_error("state_at is defined from the minimum marriageable age on");
    }
    State current = history.initial_state;
    for (const Transition& tr : history.transitions) {
        if (tr.age <= age) {
            current = tr.to;
        } else {
            break;
        }
    }
    return current;
}

std::vector<Transition> simulate_chain(Rng& rng, const SimParams& params, int x, State initial,
                                       double age_start, double age_end) {
    std::vector<Transition> transitions;
    State current = initial;
    double age = age_start;
    while (current != State::Dead && age < age_end) {
        // Destinations in fixed order so draws are reproducible.
        std::array<State, 3> dests{};
        std::array<double, 3> rates{};
        int n = 0;
        switch (current) {
        case State::AtSchoolUnmarried:
            dests = {State::AtSchoolMarried, State::OutOfSchoolUnmarried, State::Dead};
            n = 3;
            break;
        case State::AtSchoolMarried:
            dests = {State::OutOfSchoolMarried, State::Dead, State::Dead};
            n = 2;
            break;
        case State::OutOfSchoolUnmarried:
            dests = {State::OutOfSchoolMarried, State::Dead, State::Dead};
            n = 2;
            break;
        case State::OutOfSchoolMarried:
            dests = {State::Dead, State::Dead, State::Dead};
            n = 1;
            break;
        case State::Dead:
            n = 0;
            break;
        }
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            rates[i] = transition_rate(current, dests[i], x, params);
            total += rates[i];
        }
        if (!(total > 0.0)) {
            break;
        }
        const double dwell = rng.exponential(total);
        if (age + dwell >= age_end) {
            break;
        }
        age += dwell;
        double pick = rng.u01() * total;
        int chosen = n - 1;
        for (int i = 0; i < n; ++i) {
            pick -= rates[i];
            if (pick < 0.0) {
                chosen = i;
                break;
            }
        }
        current = dests[chosen];
        transitions.push_back({age, current});
    }
    return transitions;
}

EventHistory simulate_history(Rng& rng, const SimParams& params, const ModelConfig& config) {
    params.validate();
    EventHistory history;
    history.x = rng.bernoulli(0.5) ? 1 : 0;
    history.birth_year = rng.uniform(1965.0, 1993.0);
    const double p_out_of_school = expit(-1.0 + 0.5 * history.x);
    history.initial_state =
        rng.bernoulli(p_out_of_school) ? State::OutOfSchoolUnmarried : State::AtSchoolUnmarried;
    const double cross_section_age = config.cross_section_time - history.birth_year;
    history.transitions = simulate_chain(rng, params, history.x, history.initial_state,
                                         config.min_marriage_age, cross_section_age);
    return history;
}

namespace {

int birth_cohort_code(double birth_year) {
    if (birth_year < 1962.0) return 0;
    if (birth_year < 1972.0) return 1;
    if (birth_year < 1982.0) return 2;
    return 3;
}

int education_code(double schooling_years) {
    const double w = std::floor(schooling_years);
    if (w < 5.0) return 0;
    if (w <= 9.0) return 1;
    if (w <= 12.0) return 2;
    return 3;
}

} // namespace

CohortSample build_cohort(const std::vector<EventHistory>& histories, Design design,
                          const ModelConfig& config) {
    CohortSample cohort;
    cohort.design = design;
    for (const EventHistory& history : histories) {
        const double z = config.cross_section_time - history.birth_year;
        if (z < config.min_marriage_age) {
            continue; // born too late to enter the observation window
        }
        const State at_cs = state_at(history, z, config);
        if (at_cs == State::Dead) {
            continue;
        }
        if (design == Design::I && !is_married(at_cs)) {
            continue;
        }

        SurveyRecord rec;
        rec.design = design;
        rec.age_at_survey = z;
        rec.x = history.x;

        State current = history.initial_state;
        for (const Transition& tr : history.transitions) {
            if (tr.age > z) {
                break;
            }
            if (!is_married(current) && is_married(tr.to)) {
                rec.marriage_age = tr.age;
            }
            if (is_in_school(current) && !is_in_school(tr.to) && tr.to != State::Dead) {
                rec.schooling_end_age = tr.age;
            }
            current = tr.to;
        }
        if (history.initial_state == State::OutOfSchoolUnmarried) {
            rec.schooling_end_age = config.school_start_age; // never schooled
        }
        if (design == Design::I && !rec.marriage_age) {
            throw std::logic_error("design-I record without a marriage age");
        }

        rec.covariates.birth_cohort = birth_cohort_code(history.birth_year);
        rec.covariates.residence = history.x;
        const double attained = rec.schooling_end_age ? *rec.schooling_end_age : z;
        rec.covariates.education = education_code(attained - config.school_start_age);

        cohort.records.push_back(std::move(rec));
    }
    return cohort;
}

ScenarioConfig ScenarioConfig::load(const std::string& path) {
    return from(KeyValues::load(path));
}

ScenarioConfig ScenarioConfig::from(const KeyValues& kv) {
    ScenarioConfig sc;
    sc.model = model_config_from(kv);
    sc.params = sim_params_from(kv);
    sc.n_per_design = static_cast<int>(kv.get_int("n_per_design", sc.n_per_design));
    sc.replications = static_cast<int>(kv.get_int("replications", sc.replications));
    sc.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(sc.seed)));
    if (sc.n_per_design < 0 || sc.replications < 0) {
        throw ValidationError("n_per_design and replications must be non-negative");
    }
    return sc;
}

void ScenarioConfig::save(const std::string& path) const {
    KeyValues kv;
    store(kv, model);
    store(kv, params);
    kv.set("n_per_design", static_cast<double>(n_per_design));
    kv.set("replications", static_cast<double>(replications));
    kv.set("seed", static_cast<double>(seed));
    kv.save(path);
}

CohortSample simulate_cohort(const ScenarioConfig& scenario, Design design, std::uint64_t seed,
                             std::uint64_t stream_index) {
    Rng rng(seed, stream_index);
    std::vector<EventHistory> histories;
    histories.reserve(static_cast<std::size_t>(scenario.n_per_design));
    for (int i = 0; i < scenario.n_per_design; ++i) {
        histories.push_back(simulate_history(rng, scenario.params, scenario.model));
    }
    return build_cohort(histories, design, scenario.model);
}

// --- cohort CSV -----------------------------------------------------------

namespace {

constexpr const char* kCohortHeader =
    "design,age_at_survey,age_at_marriage,birth_cohort,residence,caste,religion,education,"
    "x,schooling_end_age";

std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
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

void write_cohort_csv(const CohortSample& cohort, std::ostream& out) {
    out << kCohortHeader << "\n";
    for (const SurveyRecord& r : cohort.records) {
        out << to_string(r.design) << ',' << format_full(r.age_at_survey) << ',';
        if (r.marriage_age) {
            out << format_full(*r.marriage_age);
        }
        out << ',' << r.covariates.birth_cohort << ',' << r.covariates.residence << ','
            << r.covariates.caste << ',' << r.covariates.religion << ',' << r.covariates.education
            << ',' << r.x << ',';
        if (r.schooling_end_age) {
            out << format_full(*r.schooling_end_age);
        }
        out << "\n";
    }
}

void write_cohort_csv(const CohortSample& cohort, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw EnvironmentError("cannot write cohort file: " + path);
    }
    write_cohort_csv(cohort, out);
}

CohortSample read_cohort_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw EnvironmentError("cannot open cohort file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError(path + ": empty file, header row required");
    }
    const std::vector<std::string> header = split_csv_line(line);
    auto column = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) {
                return static_cast<int>(i);
            }
        }
        return -1;
    };
    const int c_design = column("design");
    const int c_z = column("age_at_survey");
    const int c_y = column("age_at_marriage");
    const int c_x = column("x");
    const int c_aw = column("schooling_end_age");
    const int c_bc = column("birth_cohort");
    const int c_res = column("residence");
    const int c_caste = column("caste");
    const int c_rel = column("religion");
    const int c_edu = column("education");
    for (const auto& [idx, name] :
         std::initializer_list<std::pair<int, const char*>>{{c_design, "design"},
                                                            {c_z, "age_at_survey"},
                                                            {c_y, "age_at_marriage"},
                                                            {c_x, "x"},
                                                            {c_aw, "schooling_end_age"}}) {
        if (idx < 0) {
            throw ValidationError(path + ": missing column `" + name + "`");
        }
    }

    CohortSample cohort;
    bool design_set = false;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) {
            continue;
        }
        const std::vector<std::string> f = split_csv_line(line);
        auto field = [&](int idx) -> std::string {
            return (idx >= 0 && static_cast<std::size_t>(idx) < f.size()) ? f[idx] : "";
        };
        auto parse_num = [&](const std::string& text, const char* what) {
            try {
                return std::stod(text);
            } catch (const std::exception&) {
                throw ValidationError(path + ":" + std::to_string(lineno) + ": bad " +
                                      std::string(what) + " value `" + text + "`");
            }
        };
        SurveyRecord rec;
        const std::string design_text = field(c_design);
        if (design_text == "I") {
            rec.design = Design::I;
        } else if (design_text == "II") {
            rec.design = Design::II;
        } else {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": design must be I or II, got `" + design_text + "`");
        }
        if (!design_set) {
            cohort.design = rec.design;
            design_set = true;
        } else if (cohort.design != rec.design) {
            throw ValidationError(path + ": mixed designs in one cohort file");
        }
        rec.age_at_survey = parse_num(field(c_z), "age_at_survey");
        if (!field(c_y).empty()) {
            rec.marriage_age = parse_num(field(c_y), "age_at_marriage");
        }
        if (!field(c_aw).empty()) {
            rec.schooling_end_age = parse_num(field(c_aw), "schooling_end_age");
        }
        rec.x = static_cast<int>(parse_num(field(c_x), "x"));
        auto opt_int = [&](int idx, const char* what) {
            const std::string text = field(idx);
            return text.empty() ? 0 : static_cast<int>(parse_num(text, what));
        };
        rec.covariates.birth_cohort = opt_int(c_bc, "birth_cohort");
        rec.covariates.residence = opt_int(c_res, "residence");
        rec.covariates.caste = opt_int(c_caste, "caste");
        rec.covariates.religion = opt_int(c_rel, "religion");
        rec.covariates.education = opt_int(c_edu, "education");
        if (rec.design == Design::I && !rec.marriage_age) {
            throw ValidationError(path + ":" + std::to_string(lineno) +
                                  ": design-I record without age_at_marriage");
        }
        cohort.records.push_back(std::move(rec));
    }
    return cohort;
}

} // namespace retroinc
