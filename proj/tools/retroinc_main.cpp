// Command-line front end: simulate | replicate | fit | predict.

#include "retroinc/errors.hpp"
#include "retroinc/estimate.hpp"
#include "retroinc/manifest.hpp"
#include "retroinc/model.hpp"
#include "retroinc/parallel.hpp"
#include "retroinc/predict.hpp"
#include "retroinc/simulate.hpp"
#include "retroinc/survey.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace retroinc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitData = 1;
constexpr int kExitEnvironment = 2;
constexpr int kExitNoConvergence = 3;

struct CommonArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    int workers = 0; // 0 = all cores
    std::optional<int> n_per_design;
    std::optional<int> replications;
    std::string scenario; // nd | diff-school | diff-mort | diff-both
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
    auto* config = cmd->add_option("--config", args.config_path, "scenario config file");
    if (needs_config) {
        config->required();
    }
    cmd->add_option("--seed", args.seed, "master random seed (overrides config)");
    cmd->add_option("--workers", args.workers, "parallel workers (default: all cores)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--n-per-design", args.n_per_design, "histories per design (overrides config)");
    cmd->add_option("--replications", args.replications, "replications (overrides config)");
    cmd->add_option("--scenario", args.scenario, "nd | diff-school | diff-mort | diff-both")
        ->check(CLI::IsMember({"nd", "diff-school", "diff-mort", "diff-both"}));
}

ScenarioConfig load_scenario(const CommonArgs& args) {
    ScenarioConfig sc = ScenarioConfig::load(args.config_path);
    if (args.seed) {
        sc.seed = *args.seed;
    }
    if (args.n_per_design) {
        sc.n_per_design = *args.n_per_design;
    }
    if (args.replications) {
        sc.replications = *args.replications;
    }
    if (args.scenario == "nd") {
        sc.params.d = 0.0;
        sc.params.g = 0.0;
    } else if (args.scenario == "diff-school") {
        sc.params.d = 1.0;
        sc.params.g = 0.0;
    } else if (args.scenario == "diff-mort") {
        sc.params.d = 0.0;
        sc.params.g = 1.0;
    } else if (args.scenario == "diff-both") {
        sc.params.d = 1.0;
        sc.params.g = 1.0;
    }
    return sc;
}

void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec || !fs::is_directory(out_dir)) {
        throw EnvironmentError("cannot create output directory: " + out_dir);
    }
}

int effective_workers(int requested) {
    return requested > 0 ? requested : hardware_workers();
}

std::string scenario_label(const ScenarioConfig& sc, const std::string& flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (sc.params.d == 0.0 && sc.params.g == 0.0) {
        return "nd";
    }
    if (sc.params.d != 0.0 && sc.params.g == 0.0) {
        return "diff-school";
    }
    if (sc.params.d == 0.0 && sc.params.g != 0.0) {
        return "diff-mort";
    }
    return "diff-both";
}

int cmd_simulate(const CommonArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig sc = load_scenario(args);
    ensure_out_dir(args.out_dir);

    const CohortSample cohort_I = simulate_cohort(sc, Design::I, sc.seed, 0);
    const CohortSample cohort_II = simulate_cohort(sc, Design::II, sc.seed, 1);
    const std::string path_I = (fs::path(args.out_dir) / "cohort_I.csv").string();
    const std::string path_II = (fs::path(args.out_dir) / "cohort_II.csv").string();
    write_cohort_csv(cohort_I, path_I);
    write_cohort_csv(cohort_II, path_II);
    std::cerr << "cohort I: " << cohort_I.records.size() << " records, cohort II: "
              << cohort_II.records.size() << " records\n";

    RunManifest manifest;
    manifest.command = "simulate";
    manifest.config_path = args.config_path;
    manifest.seed = sc.seed;
    manifest.workers = 1;
    manifest.out_dir = args.out_dir;
    manifest.add_input(args.config_path);
    manifest.add_output(path_I);
    manifest.add_output(path_II);
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.save((fs::path(args.out_dir) / "manifest.json").string());
    return kExitOk;
}

int cmd_replicate(const CommonArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    const ScenarioConfig sc = load_scenario(args);
    ensure_out_dir(args.out_dir);
    const int workers = effective_workers(args.workers);

    const ReplicationSummary summary =
        run_scenario(sc, workers, [](int done, int total) {
            if (done % 20 == 0 || done == total) {
                std::fprintf(stderr, "\rreplication %d/%d", done, total);
                if (done == total) {
                    std::fputc('\n', stderr);
                }
                std::fflush(stderr);
            }
        });

    const std::string label = scenario_label(sc, args.scenario);
    const std::string table_path =
        (fs::path(args.out_dir) / ("replication_" + label + ".csv")).string();
    {
        std::ofstream out(table_path);
        if (!out) {
            throw EnvironmentError("cannot write " + table_path);
        }
        write_replication_csv(summary, out);
    }

    const std::string meta_path =
        (fs::path(args.out_dir) / ("replication_" + label + "_meta.json")).string();
    {
        nlohmann::json meta;
        meta["replications"] = summary.replications;
        meta["mean_cohort_size_I"] = summary.mean_cohort_size_I;
        meta["mean_cohort_size_II"] = summary.mean_cohort_size_II;
        nlohmann::json excluded;
        for (std::size_t v = 0; v < summary.excluded.size(); ++v) {
            excluded[to_string(static_cast<FitVariant>(v))] = summary.excluded[v];
        }
        meta["excluded"] = std::move(excluded);
        std::ofstream out(meta_path);
        if (!out) {
            throw EnvironmentError("cannot write " + meta_path);
        }
        out << meta.dump(2) << "\n";
    }

    RunManifest manifest;
    manifest.command = "replicate";
    manifest.config_path = args.config_path;
    manifest.seed = sc.seed;
    manifest.workers = workers;
    manifest.out_dir = args.out_dir;
    manifest.add_input(args.config_path);
    manifest.add_output(table_path);
    manifest.add_output(meta_path);
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.save((fs::path(args.out_dir) / "manifest.json").string());
    return kExitOk;
}

struct FitArgs {
    CommonArgs common;
    std::string data_I;
    std::string data_II;
    std::string data_any;
    std::string model = "bands";
    bool design_I_only = false;
    bool design_II_only = false;
    bool no_correction = false;
};

FitVariant variant_from_flags(const FitArgs& args) {
    if (args.design_I_only) {
        return args.no_correction ? FitVariant::design_I_no_correction : FitVariant::design_I;
    }
    if (args.design_II_only) {
        return FitVariant::design_II;
    }
    return FitVariant::combined;
}

int cmd_fit(const FitArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    ensure_out_dir(args.common.out_dir);
    ModelConfig config;
    if (!args.common.config_path.empty()) {
        config = model_config_from(KeyValues::load(args.common.config_path));
    }
    const FitVariant variant = variant_from_flags(args);

    FitResult result;
    std::string model_kind = args.model;
    RunManifest manifest;
    manifest.command = "fit";
    manifest.config_path = args.common.config_path;
    manifest.out_dir = args.common.out_dir;

    if (args.model == "constant") {
        if (args.data_I.empty() && args.data_II.empty()) {
            throw ValidationError("--model constant needs --data-I and/or --data-II");
        }
        std::vector<CohortSample> cohorts;
        if (!args.data_I.empty()) {
            cohorts.push_back(read_cohort_csv(args.data_I));
            manifest.add_input(args.data_I);
        }
        if (!args.data_II.empty()) {
            cohorts.push_back(read_cohort_csv(args.data_II));
            manifest.add_input(args.data_II);
        }
        const ConstantRateModel model;
        FitOptions options;
        options.variant = variant;
        result = fit(cohorts, model, config, options);
    } else {
        SurveyParse parsed;
        auto merge = [&parsed](SurveyParse&& other) {
            auto& I = parsed.cohort_I.records;
            auto& II = parsed.cohort_II.records;
            I.insert(I.end(), other.cohort_I.records.begin(), other.cohort_I.records.end());
            II.insert(II.end(), other.cohort_II.records.begin(), other.cohort_II.records.end());
            parsed.rejected += other.rejected;
            parsed.warnings.insert(parsed.warnings.end(), other.warnings.begin(),
                                   other.warnings.end());
        };
        if (!args.data_I.empty()) {
            merge(parse_survey_csv(args.data_I, Design::I));
            manifest.add_input(args.data_I);
        }
        if (!args.data_II.empty()) {
            merge(parse_survey_csv(args.data_II, Design::II));
            manifest.add_input(args.data_II);
        }
        if (!args.data_any.empty()) {
            merge(parse_survey_csv(args.data_any, std::nullopt));
            manifest.add_input(args.data_any);
        }
        if (parsed.cohort_I.records.empty() && parsed.cohort_II.records.empty()) {
            throw ValidationError("no survey records: supply --data-I/--data-II/--data");
        }
        for (const std::string& warning : parsed.warnings) {
            std::cerr << warning << "\n";
        }
        if (parsed.rejected > 0) {
            std::cerr << parsed.rejected << " row(s) rejected (outside the model support)\n";
        }
        SurveyFitOptions options;
        options.variant = variant;
        result = fit_survey(parsed.cohort_I, parsed.cohort_II, config, options);
    }

    const std::string estimates_path =
        (fs::path(args.common.out_dir) / "estimates.json").string();
    {
        std::ofstream out(estimates_path);
        if (!out) {
            throw EnvironmentError("cannot write " + estimates_path);
        }
        write_fit_json(result, model_kind, out);
    }
    manifest.add_output(estimates_path);

    if (args.model == "bands") {
        const std::string baseline_path =
            (fs::path(args.common.out_dir) / "baseline_rates.csv").string();
        const std::string ratios_path =
            (fs::path(args.common.out_dir) / "rate_ratios.csv").string();
        std::ofstream baseline(baseline_path);
        std::ofstream ratios(ratios_path);
        if (!baseline || !ratios) {
            throw EnvironmentError("cannot write fit output files");
        }
        write_baseline_rates_csv(result, baseline);
        write_rate_ratios_csv(result, ratios);
        manifest.add_output(baseline_path);
        manifest.add_output(ratios_path);
    }

    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.save((fs::path(args.common.out_dir) / "manifest.json").string());

    if (!result.converged) {
        std::cerr << "fit did not converge: " << result.message << "\n";
        return kExitNoConvergence;
    }
    std::cerr << "fit converged, loglik " << result.loglik << "\n";
    return kExitOk;
}

struct PredictArgs {
    CommonArgs common;
    std::string fit_path;
    std::string mortality_path;
    double a1 = 12.0;
    double a2 = 50.0;
    int residence = 0;
    int caste = 0;
    int religion = 0;
    int education = 0;
};

int cmd_predict(const PredictArgs& args) {
    const auto start = std::chrono::steady_clock::now();
    ensure_out_dir(args.common.out_dir);

    std::ifstream in(args.fit_path);
    if (!in) {
        throw EnvironmentError("cannot open fit file: " + args.fit_path);
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(args.fit_path + ": invalid JSON: " + e.what());
    }
    const std::string kind = doc.value("model", "");
    std::vector<double> theta;
    for (const auto& p : doc.at("parameters")) {
        theta.push_back(p.at("estimate").is_null()
                            ? 0.0
                            : p.at("estimate").get<double>());
    }

    const MortalityTable mortality = MortalityTable::load_csv(args.mortality_path);
    ModelConfig config;
    if (!args.common.config_path.empty()) {
        config = model_config_from(KeyValues::load(args.common.config_path));
    }

    struct Stratum {
        std::string label;
        PiecewiseRate rate;
    };
    std::vector<Stratum> strata;
    if (kind == "bands") {
        if (theta.size() != BandRateModel::kParamCount) {
            throw ValidationError("bands fit file must carry 31 parameters");
        }
        for (int cohort = 0; cohort <= 3; ++cohort) {
            Covariates covs;
            covs.birth_cohort = cohort;
            covs.residence = args.residence;
            covs.caste = args.caste;
            covs.religion = args.religion;
            covs.education = args.education;
            strata.push_back({"cohort_" + std::to_string(cohort), marriage_rate_for(theta, covs)});
        }
    } else if (kind == "constant") {
        if (theta.size() != 3) {
            throw ValidationError("constant fit file must carry parameters m, b, c");
        }
        for (int x = 0; x <= 1; ++x) {
            // Out-of-school rate: the predicted woman has finished school.
            const double rate = std::exp(theta[0] + theta[1] * x);
            strata.push_back({"x_" + std::to_string(x),
                              PiecewiseRate::constant(rate, config.min_marriage_age, 50.0)});
        }
    } else {
        throw ValidationError("fit file model kind must be `bands` or `constant`");
    }

    const std::string out_path =
        (fs::path(args.common.out_dir) / "predictions.csv").string();
    std::ofstream out(out_path);
    if (!out) {
        throw EnvironmentError("cannot write " + out_path);
    }
    out << "stratum,age,probability\n";
    char buf[64];
    for (const Stratum& stratum : strata) {
        for (double age = std::ceil(args.a1); age <= args.a2; age += 1.0) {
            const double p =
                predict_marriage_by_age(stratum.rate, mortality, args.a1, age, config);
            std::snprintf(buf, sizeof(buf), "%.10g", p);
            out << stratum.label << ',' << age << ',' << buf << "\n";
        }
    }
    out.close();

    RunManifest manifest;
    manifest.command = "predict";
    manifest.config_path = args.common.config_path;
    manifest.out_dir = args.common.out_dir;
    manifest.add_input(args.fit_path);
    manifest.add_input(args.mortality_path);
    manifest.add_output(out_path);
    manifest.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest.save((fs::path(args.common.out_dir) / "manifest.json").string());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Incidence-rate estimation from retrospective cross-sectional cohorts"};
    app.require_subcommand(1);

    CommonArgs simulate_args;
    auto* simulate_cmd = app.add_subcommand("simulate", "simulate the two cross-sectional cohorts");
    add_common(simulate_cmd, simulate_args, true);

    CommonArgs replicate_args;
    auto* replicate_cmd =
        app.add_subcommand("replicate", "Monte Carlo replication study of the four likelihoods");
    add_common(replicate_cmd, replicate_args, true);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "maximum likelihood fit from cohort files");
    add_common(fit_cmd, fit_args.common, false);
    fit_cmd->add_option("--data-I", fit_args.data_I, "design-I cohort CSV");
    fit_cmd->add_option("--data-II", fit_args.data_II, "design-II cohort CSV");
    fit_cmd->add_option("--data", fit_args.data_any, "survey CSV with a design column");
    fit_cmd->add_option("--model", fit_args.model, "bands (survey model) or constant (m,b,c)")
        ->check(CLI::IsMember({"bands", "constant"}));
    auto* d1 = fit_cmd->add_flag("--design-I-only", fit_args.design_I_only,
                                 "fit the prevalent cohort alone");
    fit_cmd->add_flag("--design-II-only", fit_args.design_II_only,
                      "fit the general cohort alone")
        ->excludes(d1);
    fit_cmd->add_flag("--no-correction", fit_args.no_correction,
                      "drop the design-I sampling correction")
        ->needs(d1);

    PredictArgs predict_args;
    auto* predict_cmd =
        app.add_subcommand("predict", "predictive marriage probabilities from a fit");
    add_common(predict_cmd, predict_args.common, false);
    predict_cmd->add_option("--fit", predict_args.fit_path, "estimates.json from `fit`")
        ->required();
    predict_cmd->add_option("--mortality", predict_args.mortality_path,
                            "mortality CSV (age_low,age_high,rate)")
        ->required();
    predict_cmd->add_option("--a1", predict_args.a1, "conditioning age (unmarried, alive)");
    predict_cmd->add_option("--a2", predict_args.a2, "final age of the prediction grid");
    predict_cmd->add_option("--residence", predict_args.residence, "residence code");
    predict_cmd->add_option("--caste", predict_args.caste, "caste code");
    predict_cmd->add_option("--religion", predict_args.religion, "religion code");
    predict_cmd->add_option("--education", predict_args.education, "education code");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitData;
    }

    try {
        if (simulate_cmd->parsed()) {
            return cmd_simulate(simulate_args);
        }
        if (replicate_cmd->parsed()) {
            return cmd_replicate(replicate_args);
        }
        if (fit_cmd->parsed()) {
            return cmd_fit(fit_args);
        }
        if (predict_cmd->parsed()) {
            return cmd_predict(predict_args);
        }
    } catch (const EnvironmentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEnvironment;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::domain_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitEnvironment;
    }
    return kExitData;
}
