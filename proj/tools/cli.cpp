// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include "sweepplan/analysis.hpp"
#include "sweepplan/error.hpp"
#include "sweepplan/fitting.hpp"
#include "sweepplan/io.hpp"
#include "sweepplan/mixture.hpp"
#include "sweepplan/search_space.hpp"
#include "sweepplan/surrogate.hpp"
#include "sweepplan/train_config.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace sweepplan::cli {

namespace fs = std::filesystem;

namespace {

// Settings that may come from a config file. Flags override them.
struct FileConfig {
    std::optional<int> devices;
    std::optional<std::uint64_t> seed;
    std::optional<double> epsilon;
    std::optional<std::vector<int>> compute_factors;
    std::optional<std::string> language_pair;
    std::optional<nlohmann::json> surrogate;
};

FileConfig load_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "config '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw Error(ErrorCode::Parse, "config '" + path + "' must be a JSON object");
    FileConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "devices") c.devices = value.get<int>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "epsilon") c.epsilon = value.get<double>();
            else if (key == "compute_factors") c.compute_factors = value.get<std::vector<int>>();
            else if (key == "language_pair") c.language_pair = value.get<std::string>();
            else if (key == "surrogate") c.surrogate = value;
            else throw Error(ErrorCode::Parse, "config '" + path + "': unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, "config '" + path + "': " + e.what());
    }
    return c;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    bool force = false;
    FileConfig config;
    std::vector<int> fc_flags;

    template <class T>
    T pick(const std::optional<T>& flag, const std::optional<T>& from_config, T fallback) const {
        if (flag) return *flag;
        if (from_config) return *from_config;
        return fallback;
    }

    /// Writes to `path`, or to stdout when the path is empty.
    void emit(const std::string& path, const std::string& content) const {
        if (path.empty() || path == "-") {
            out << content;
            return;
        }
        if (fs::exists(path) && !force) {
            throw Error(ErrorCode::Usage, "refusing to overwrite '" + path + "' (use --force)");
        }
        write_file_atomic(path, content);
    }

    SearchRanges ranges() const {
        auto r = SearchRanges::defaults();
        if (!fc_flags.empty()) return r.restricted_to(fc_flags);
        if (config.compute_factors) return r.restricted_to(*config.compute_factors);
        return r;
    }

    std::vector<SetupSpec> setups(const std::string& path) const {
        if (path.empty()) return enumerate_all(ranges());
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::Validation, "cannot read setups file '" + path + "'");
        try {
            return read_setups_jsonl(in);
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.what());
        }
    }

    IngestReport results(const std::string& path, std::span<const SetupSpec> catalogue) const {
        std::ifstream in(path);
        if (!in) throw Error(ErrorCode::Validation, "cannot read results file '" + path + "'");
        IngestReport rep;
        try {
            rep = ingest_csv(in, catalogue);
        } catch (const Error& e) {
            throw Error(e.code(), path + ": " + e.what());
        }
        for (const auto& r : rep.rejected) {
            err << path << ": line " << r.line << ": rejected '" << r.setup_id << "' (" << r.reason << ")\n";
        }
        return rep;
    }

    std::string pair_for(const ResultSet& rs, const std::optional<std::string>& flag) const {
        if (flag) return *flag;
        if (config.language_pair) return *config.language_pair;
        const auto pairs = rs.language_pairs();
        if (pairs.size() > 1) {
            throw Error(ErrorCode::Usage, "results hold several language pairs; select one with --pair");
        }
        return pairs.empty() ? std::string() : pairs.front();
    }
};

std::string jsonl_text(std::span<const SetupSpec> setups) {
    std::ostringstream os;
    write_setups_jsonl(os, setups);
    return os.str();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

int exit_for(const Error& e) {
    if (e.code() == ErrorCode::Usage) return kUsage;
    if (e.is_fit_error()) return kFit;
    return kData;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Plan, simulate and analyze low-resource pretraining sweeps", "sweepplan"};
    app.require_subcommand(1);

    std::optional<std::string> config_path;
    bool force = false;
    std::vector<int> fc;
    app.add_option("--config", config_path, "JSON config file (default: $SWEEPPLAN_CONFIG)");
    app.add_flag("--force", force, "Overwrite existing output files");

    // enumerate
    auto* enumerate = app.add_subcommand("enumerate", "Emit the setup catalogue as JSONL");
    std::string enum_out;
    bool single_only = false;
    enumerate->add_option("-o,--output", enum_out, "Output path (stdout if omitted)");
    enumerate->add_option("--fc", fc, "Restrict to these f_C values")->allow_extra_args(false);
    enumerate->add_flag("--single-stage", single_only, "Only single-stage setups");

    // plan
    auto* plan = app.add_subcommand("plan", "Emit the training plan and token schedule of one setup");
    std::string plan_id, plan_out, plan_csv;
    std::optional<int> devices;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> high_available;
    plan->add_option("setup_id", plan_id, "Canonical setup id")->required();
    plan->add_option("-o,--output", plan_out, "Output path (stdout if omitted)");
    plan->add_option("--devices", devices, "Data-parallel devices")->check(CLI::PositiveNumber);
    plan->add_option("--seed", seed, "Base seed for epoch shuffles");
    plan->add_option("--high-available", high_available, "High-resource tokens available");
    plan->add_option("--batches-csv", plan_csv, "Also write the expanded batch schedule as CSV");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Generate surrogate losses for a setup list");
    std::string sim_setups, sim_out, sim_params;
    std::optional<std::string> pair;
    std::optional<double> gamma, noise_sigma, r_star;
    simulate->add_option("--setups", sim_setups, "Setups JSONL (default grid if omitted)");
    simulate->add_option("-o,--output", sim_out, "Results CSV path (stdout if omitted)");
    simulate->add_option("--params", sim_params, "Surrogate parameter JSON");
    simulate->add_option("--seed", seed, "Noise seed");
    simulate->add_option("--pair", pair, "Language pair label");
    simulate->add_option("--gamma", gamma, "Second-stage ratio weight");
    simulate->add_option("--noise-sigma", noise_sigma, "Multiplicative log-noise");
    simulate->add_option("--r-star", r_star, "Repetition decay constant");
    simulate->add_option("--fc", fc, "Restrict the default grid to these f_C values");

    // analyze
    auto* analyze_cmd = app.add_subcommand("analyze", "Category minima, D*, switch thresholds and scale winners");
    std::string results_path, setups_path, an_out, tables_dir;
    std::optional<double> epsilon;
    bool summary = false;
    analyze_cmd->add_option("--results", results_path, "Results CSV")->required();
    analyze_cmd->add_option("--setups", setups_path, "Setups JSONL (default grid if omitted)");
    analyze_cmd->add_option("-o,--output", an_out, "Report JSON path (stdout if omitted)");
    analyze_cmd->add_option("--tables", tables_dir, "Directory for the plot CSV tables");
    analyze_cmd->add_option("--epsilon", epsilon, "Margin a multi-2stage win must exceed");
    analyze_cmd->add_flag("--summary", summary, "Print a text summary instead of JSON");

    // fit
    auto* fit = app.add_subcommand("fit", "Fit epochs, kstar or ratio models");
    std::string fit_kind, fit_out, category_text = "mono-1stage";
    std::optional<double> h_max;
    fit->add_option("kind", fit_kind, "epochs | kstar | ratio")
        ->required()
        ->check(CLI::IsMember({"epochs", "kstar", "ratio"}));
    fit->add_option("--results", results_path, "Results CSV")->required();
    fit->add_option("--setups", setups_path, "Setups JSONL (default grid if omitted)");
    fit->add_option("-o,--output", fit_out, "Model JSON path (stdout if omitted)");
    fit->add_option("--pair", pair, "Language pair to fit");
    fit->add_option("--category", category_text, "Setup category for epochs/kstar")
        ->check(CLI::IsMember({"mono-1stage", "multi-1stage", "multi-2stage"}));
    fit->add_option("--h-max", h_max, "Highest knot level for kstar");

    // predict
    auto* predict = app.add_subcommand("predict", "Evaluate a stored model");
    std::string predict_kind, model_path;
    double compute = 0.0, target = 0.0;
    bool round_pow2 = false;
    predict->add_option("kind", predict_kind, "kstar")->required()->check(CLI::IsMember({"kstar"}));
    predict->add_option("--model", model_path, "Model JSON from `fit kstar`")->required();
    predict->add_option("--C", compute, "Compute budget (FLOPs)")->required()->check(CLI::PositiveNumber);
    predict->add_option("--DT", target, "Target-language tokens")->required()->check(CLI::PositiveNumber);
    predict->add_flag("--round", round_pow2, "Round k* to the nearest power of two");

    // report
    auto* report = app.add_subcommand("report", "Write the figure tables (minima, scales, epochs, ratio)");
    std::string out_dir;
    report->add_option("--results", results_path, "Results CSV")->required();
    report->add_option("--setups", setups_path, "Setups JSONL (default grid if omitted)");
    report->add_option("--out-dir", out_dir, "Output directory")->required();
    report->add_option("--pair", pair, "Language pair for the epoch and ratio tables");
    report->add_option("--epsilon", epsilon, "Margin a multi-2stage win must exceed");
    report->add_flag("--summary", summary, "Also print a text summary");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        Context ctx{out, err, force, {}, fc};
        if (!config_path) {
            if (const char* env = std::getenv(kConfigEnv); env != nullptr && *env != '\0') config_path = env;
        }
        if (config_path) ctx.config = load_config(*config_path);

        if (*enumerate) {
            auto setups = single_only ? enumerate_single_stage(ctx.ranges()) : enumerate_all(ctx.ranges());
            ctx.emit(enum_out, jsonl_text(setups));
        } else if (*plan) {
            const SetupSpec setup = parse_setup_id(plan_id);
            PlanOptions opts;
            opts.devices = ctx.pick(devices, ctx.config.devices, kDefaultDevices);
            opts.high_resource_available = high_available;
            const auto tp = build_training_plan(setup, opts);
            const auto schedule = build_schedule(setup.derived, setup.split, tp.batch.global_batch_tokens,
                                                 ctx.pick(seed, ctx.config.seed, std::uint64_t{0}),
                                                 high_available);
            Json j;
            j["plan"] = plan_to_json(tp);
            j["schedule"] = schedule_to_json(schedule);
            ctx.emit(plan_out, dump(j));
            if (!plan_csv.empty()) {
                std::ostringstream os;
                write_schedule_csv(os, schedule);
                ctx.emit(plan_csv, os.str());
            }
        } else if (*simulate) {
            SurrogateParams params;
            if (ctx.config.surrogate) params = surrogate_from_json(*ctx.config.surrogate, params);
            if (!sim_params.empty()) {
                try {
                    params = surrogate_from_json(nlohmann::json::parse(read_file(sim_params)), params);
                } catch (const nlohmann::json::exception& e) {
                    throw Error(ErrorCode::Parse, sim_params + ": " + e.what());
                }
            }
            if (gamma) params.gamma = *gamma;
            if (noise_sigma) params.noise_sigma = *noise_sigma;
            if (r_star) params.R_star = *r_star;
            if (seed) params.seed = *seed;
            else if (ctx.config.seed) params.seed = *ctx.config.seed;
            const auto setups = ctx.setups(sim_setups);
            const auto records = generate_dataset(setups, params, pair.value_or(ctx.config.language_pair.value_or("synthetic")));
            std::ostringstream os;
            write_results_csv(os, records);
            ctx.emit(sim_out, os.str());
        } else if (*analyze_cmd) {
            const auto setups = ctx.setups(setups_path);
            const auto ingest_rep = ctx.results(results_path, setups);
            const auto rep = analyze(ingest_rep.results, ctx.pick(epsilon, ctx.config.epsilon, 0.0));
            if (summary) {
                ctx.emit(an_out, render_summary(rep));
            } else {
                ctx.emit(an_out, dump(report_to_json(rep, ingest_rep)));
            }
            if (!tables_dir.empty()) {
                fs::create_directories(tables_dir);
                std::ostringstream minima, scales;
                write_minima_csv(minima, rep);
                write_scale_csv(scales, rep);
                ctx.emit((fs::path(tables_dir) / "minima.csv").string(), minima.str());
                ctx.emit((fs::path(tables_dir) / "optimal_scale.csv").string(), scales.str());
            }
        } else if (*fit) {
            const auto setups = ctx.setups(setups_path);
            const auto ingest_rep = ctx.results(results_path, setups);
            const auto& rs = ingest_rep.results;
            const std::string p = ctx.pair_for(rs, pair);
            const Approach category = parse_approach(category_text);
            Json model;
            if (fit_kind == "epochs") {
                const auto fits = fit_epoch_curves(rs, p, category);
                if (fits.fits.empty()) {
                    throw Error(ErrorCode::Underdetermined, "no epoch curve has 3 distinct f_k values");
                }
                model = epoch_fits_to_json(fits, p, category);
            } else if (fit_kind == "kstar") {
                const auto inputs = kstar_inputs(fit_epoch_curves(rs, p, category));
                KStarFitOptions opts;
                if (h_max) opts.h_max = *h_max;
                model = kstar_to_json(fit_kstar_model(inputs.points, category, opts), inputs.skipped_extrapolated);
            } else {
                const auto inputs = ratio_inputs(rs, p);
                model = ratio_to_json(fit_ratio_power_law(inputs.points), inputs.dropped_groups);
            }
            ctx.emit(fit_out, dump(model));
        } else if (*predict) {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(read_file(model_path));
            } catch (const nlohmann::json::exception& e) {
                throw Error(ErrorCode::Parse, model_path + ": " + e.what());
            }
            const auto model = kstar_from_json(j);
            out << format_double(predict_kstar(model, compute, target, round_pow2)) << '\n';
        } else if (*report) {
            const auto setups = ctx.setups(setups_path);
            const auto ingest_rep = ctx.results(results_path, setups);
            const auto& rs = ingest_rep.results;
            const auto rep = analyze(rs, ctx.pick(epsilon, ctx.config.epsilon, 0.0));
            fs::create_directories(out_dir);
            const fs::path dir(out_dir);

            std::ostringstream minima, scales;
            write_minima_csv(minima, rep);
            write_scale_csv(scales, rep);
            ctx.emit((dir / "fig1_minima.csv").string(), minima.str());
            ctx.emit((dir / "fig2_optimal_scale.csv").string(), scales.str());

            const std::string p = ctx.pair_for(rs, pair);
            for (auto cat : {Approach::Mono1Stage, Approach::Multi2Stage}) {
                std::ostringstream epochs;
                write_epoch_csv(epochs, fit_epoch_curves(rs, p, cat), p);
                ctx.emit((dir / (std::string("fig3_epochs_") + to_string(cat) + ".csv")).string(), epochs.str());
            }
            const auto ratio_pts = ratio_inputs(rs, p);
            std::optional<RatioPowerLawFit> ratio_fit;
            if (!ratio_pts.points.empty()) ratio_fit = fit_ratio_power_law(ratio_pts.points);
            std::ostringstream ratio;
            write_ratio_csv(ratio, ratio_pts, ratio_fit ? &*ratio_fit : nullptr);
            ctx.emit((dir / "fig4_ratio.csv").string(), ratio.str());
            if (summary) out << render_summary(rep);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_for(e);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kData;
    }
    return kOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("sweepplan");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace sweepplan::cli
