#include "retroinc/model.hpp"

#include "retroinc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace retroinc {

std::string to_string(State s) {
    switch (s) {
    case State::AtSchoolUnmarried: return "at_school_unmarried";
    case State::AtSchoolMarried: return "at_school_married";
    case State::OutOfSchoolUnmarried: return "out_of_school_unmarried";
    case State::OutOfSchoolMarried: return "out_of_school_married";
    case State::Dead: return "dead";
    }
    return "?";
}

std::string to_string(Design d) { return d == Design::I ? "I" : "II"; }

void ModelConfig::validate() const {
    if (!(school_start_age > 0.0) || !(min_marriage_age > school_start_age)) {
        throw std::invalid_argument("model config requires min_marriage_age > school_start_age > 0");
    }
    if (!std::isfinite(cross_section_time)) {
        throw std::invalid_argument("cross_section_time must be finite");
    }
}

void SimParams::validate() const {
    for (double v : {m, b, c, d, g, s, r}) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("simulation parameters must all be finite");
        }
    }
}

double transition_rate(State from, State to, int x, const SimParams& p) {
    const double bx = p.b * x;
    switch (from) {
    case State::AtSchoolUnmarried:
        if (to == State::AtSchoolMarried) return std::exp(p.m + bx + p.c);
        if (to == State::OutOfSchoolUnmarried) return std::exp(p.s + bx);
        if (to == State::Dead) return std::exp(p.r + bx + p.c);
        break;
    case State::AtSchoolMarried:
        if (to == State::OutOfSchoolMarried) return std::exp(p.s + bx + p.d);
        if (to == State::Dead) return std::exp(p.r + bx + p.c + p.g);
        break;
    case State::OutOfSchoolUnmarried:
        if (to == State::OutOfSchoolMarried) return std::exp(p.m + bx);
        if (to == State::Dead) return std::exp(p.r + bx);
        break;
    case State::OutOfSchoolMarried:
        if (to == State::Dead) return std::exp(p.r + bx + p.g);
        break;
    case State::Dead:
        break;
    }
    throw std::domain_error("illegal transition " + to_string(from) + " -> " + to_string(to));
}

double total_exit_rate(State from, int x, const SimParams& p) {
    switch (from) {
    case State::AtSchoolUnmarried:
        return transition_rate(from, State::AtSchoolMarried, x, p) +
               transition_rate(from, State::OutOfSchoolUnmarried, x, p) +
               transition_rate(from, State::Dead, x, p);
    case State::AtSchoolMarried:
        return transition_rate(from, State::OutOfSchoolMarried, x, p) +
               transition_rate(from, State::Dead, x, p);
    case State::OutOfSchoolUnmarried:
        return transition_rate(from, State::OutOfSchoolMarried, x, p) +
               transition_rate(from, State::Dead, x, p);
    case State::OutOfSchoolMarried:
        return transition_rate(from, State::Dead, x, p);
    case State::Dead:
        return 0.0;
    }
    return 0.0;
}

PiecewiseRate::PiecewiseRate() : cuts_{0.0, 1.0}, values_{0.0} {}

PiecewiseRate::PiecewiseRate(std::vector<double> cuts, std::vector<double> values)
    : cuts_(std::move(cuts)), values_(std::move(values)) {
    if (cuts_.size() < 2 || values_.size() + 1 != cuts_.size()) {
        throw std::invalid_argument("piecewise rate needs one more cut than values");
    }
    for (std::size_t i = 0; i + 1 < cuts_.size(); ++i) {
        if (!(cuts_[i] < cuts_[i + 1])) {
            throw std::invalid_argument("piecewise rate cuts must be strictly increasing");
        }
    }
    for (double v : values_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("piecewise rate values must be finite and non-negative");
        }
    }
}

PiecewiseRate PiecewiseRate::constant(double rate, double age_lo, double age_hi) {
    return PiecewiseRate({age_lo, age_hi}, {rate});
}

double PiecewiseRate::value_at(double age) const {
    if (age < cuts_.front() || age > cuts_.back()) {
        throw std::domain_error("age outside the rate grid");
    }
    auto it = std::upper_bound(cuts_.begin(), cuts_.end(), age);
    std::size_t idx = static_cast<std::size_t>(it - cuts_.begin());
    if (idx == 0) {
        idx = 1;
    }
    if (idx > values_.size()) {
        idx = values_.size(); // age == cuts_.back()
    }
    return values_[idx - 1];
}

double PiecewiseRate::integral(double u, double v) const {
    if (!(u <= v)) {
        throw std::domain_error("integration bounds must satisfy u <= v");
    }
    if (u < cuts_.front() || v > cuts_.back()) {
        throw std::domain_error("integration bounds outside the rate grid");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const double lo = std::max(u, cuts_[i]);
        const double hi = std::min(v, cuts_[i + 1]);
        if (hi > lo) {
            total += values_[i] * (hi - lo);
        }
    }
    return total;
}

// --- key/value config files ---------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw EnvironmentError("cannot open config file: " + path);
    }
    return parse(in, path);
}

KeyValues KeyValues::parse(std::istream& in, const std::string& origin) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(origin + ":" + std::to_string(lineno) +
                                  ": expected `name = value`");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ValidationError(origin + ":" + std::to_string(lineno) + ": empty key");
        }
        kv.set(key, value);
    }
    return kv;
}

const std::string* KeyValues::find(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
        if (k == key) {
            return &v;
        }
    }
    return nullptr;
}

bool KeyValues::has(const std::string& key) const { return find(key) != nullptr; }

double KeyValues::get_double(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) {
        throw ValidationError("missing config key: " + key);
    }
    try {
        std::size_t pos = 0;
        const double d = std::stod(*v, &pos);
        if (pos != v->size()) {
            throw std::invalid_argument("");
        }
        return d;
    } catch (const std::exception&) {
        throw ValidationError("config key `" + key + "` is not a number: " + *v);
    }
}

double KeyValues::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

long long KeyValues::get_int(const std::string& key, long long fallback) const {
    if (!has(key)) {
        return fallback;
    }
    const double d = get_double(key);
    const long long i = static_cast<long long>(d);
    if (static_cast<double>(i) != d) {
        throw ValidationError("config key `" + key + "` must be an integer");
    }
    return i;
}

std::string KeyValues::get_string(const std::string& key, std::string fallback) const {
    const std::string* v = find(key);
    return v ? *v : fallback;
}

void KeyValues::set(const std::string& key, double value) { set(key, format_double(value)); }

void KeyValues::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
        if (k == key) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(key, value);
}

void KeyValues::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) {
        throw EnvironmentError("cannot write config file: " + path);
    }
    write(out);
}

void KeyValues::write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) {
        out << k << " = " << v << "\n";
    }
}

ModelConfig model_config_from(const KeyValues& kv) {
    ModelConfig cfg;
    cfg.school_start_age = kv.get_double("a_e", cfg.school_start_age);
    cfg.min_marriage_age = kv.get_double("a_0", cfg.min_marriage_age);
    cfg.cross_section_time = kv.get_double("cross_section_time", cfg.cross_section_time);
    cfg.validate();
    return cfg;
}

SimParams sim_params_from(const KeyValues& kv) {
    SimParams p;
    p.m = kv.get_double("m");
    p.b = kv.get_double("b");
    p.c = kv.get_double("c");
    p.d = kv.get_double("d", 0.0);
    p.g = kv.get_double("g", 0.0);
    p.s = kv.get_double("s");
    p.r = kv.get_double("r");
    p.validate();
    return p;
}

void store(KeyValues& kv, const ModelConfig& config) {
    kv.set("a_e", config.school_start_age);
    kv.set("a_0", config.min_marriage_age);
    kv.set("cross_section_time", config.cross_section_time);
}

void store(KeyValues& kv, const SimParams& params) {
    kv.set("m", params.m);
    kv.set("b", params.b);
    kv.set("c", params.c);
    kv.set("d", params.d);
    kv.set("g", params.g);
    kv.set("s", params.s);
    kv.set("r", params.r);
}

} // namespace retroinc
