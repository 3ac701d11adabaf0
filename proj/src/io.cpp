// SPDX-License-Identifier: Apache-2.0
#include "sweepplan/io.hpp"

#include "sweepplan/error.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <system_error>

namespace sweepplan {

std::string format_double(double v) {
    std::array<char, 64> buf{};
    const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf.data(), ptr);
}

namespace {

void put_fraction(Json& j, const std::string& key, const Fraction& f) {
    j[key] = f.to_double();
    j[key + "_exact"] = f.str();
}

Json diagnostics(double rss, std::size_t n, const std::vector<std::string>& warnings) {
    Json d;
    d["rss"] = rss;
    d["n_points"] = n;
    d["warnings"] = warnings;
    return d;
}

Json opt_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json opt_int(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

std::string opt_cell(const std::optional<CategoryBest>& b) { return b ? format_double(b->loss) : ""; }

void expect_type(const nlohmann::json& j, const std::string& type) {
    if (!j.is_object() || j.value("model_type", std::string()) != type) {
        throw Error(ErrorCode::Parse, "expected a model of type '" + type + "'");
    }
}

} // namespace

Json setup_to_json(const SetupSpec& s) {
    Json j;
    j["id"] = s.id;
    j["approach"] = to_string(s.approach);
    j["f_r"] = s.factors.f_r;
    j["f_M"] = s.factors.f_M;
    j["f_k"] = s.factors.f_k;
    j["f_C"] = s.factors.f_C;
    j["f_D"] = s.factors.f_D();
    if (s.two_stage) {
        put_fraction(j, "r1", s.two_stage->r1);
        put_fraction(j, "r2", s.two_stage->r2);
    }
    Json d;
    put_fraction(d, "r", s.derived.ratio);
    d["M"] = s.derived.model_scale;
    d["k"] = s.derived.epochs;
    d["C"] = s.derived.compute;
    d["D_T"] = s.derived.target_tokens;
    d["D_total"] = s.derived.total_tokens;
    if (s.split) {
        put_fraction(d, "s1", s.split->s1);
        put_fraction(d, "s2", s.split->s2);
    }
    j["derived"] = std::move(d);
    return j;
}

Json plan_to_json(const TrainingPlan& p) {
    Json j;
    j["schema_version"] = kPlanSchemaVersion;
    j["setup_id"] = p.setup_id;
    j["model"] = {{"n_layers", p.shape.n_layers},
                  {"n_heads", p.shape.n_heads},
                  {"d_model", p.shape.d_model},
                  {"seq_len", p.shape.seq_len},
                  {"flops_per_token", p.shape.flops_per_token}};
    j["eta_max"] = p.eta_max;
    const auto& o = p.optimizer;
    j["optimizer"] = {{"name", "adam"},
                      {"beta1", o.adam_beta1},
                      {"beta2", o.adam_beta2},
                      {"epsilon", o.adam_epsilon},
                      {"weight_decay", o.weight_decay},
                      {"grad_clip_norm", o.grad_clip_norm},
                      {"init_std", o.init_std}};
    j["batch"] = {{"local_batch", p.batch.local_batch},
                  {"devices", p.batch.devices},
                  {"accumulation", p.batch.accumulation},
                  {"global_batch_seqs", p.batch.global_batch_seqs},
                  {"global_batch_tokens", p.batch.global_batch_tokens}};
    Json stages = Json::array();
    for (const auto& s : p.stages) {
        Json st;
        st["stage"] = s.budget.stage;
        st["ratio"] = s.budget.ratio.to_double();
        st["ratio_exact"] = s.budget.ratio.str();
        st["tokens_total"] = s.budget.total;
        st["tokens_target"] = s.budget.target;
        st["tokens_high"] = s.budget.high;
        st["steps"] = s.steps;
        Json ms = Json::array();
        for (const auto& m : s.schedule.milestones) ms.push_back({{"fraction", m.fraction}, {"multiplier", m.multiplier}});
        st["lr_schedule"] = {{"eta_max", s.schedule.eta_max},
                             {"warmup_steps", s.schedule.warmup_steps},
                             {"milestones", ms},
                             {"per_stage", s.schedule.per_stage}};
        st["warnings"] = s.warnings;
        stages.push_back(std::move(st));
    }
    j["stages"] = std::move(stages);
    return j;
}

Json schedule_to_json(const ScheduleSpec& s) {
    Json j;
    j["epochs"] = s.epochs;
    j["unique_target_tokens"] = s.unique_target_tokens;
    j["global_batch_tokens"] = s.global_batch_tokens;
    j["base_seed"] = s.base_seed;
    j["epoch_seeds"] = s.epoch_seeds;
    j["trailing_partial_epoch"] = s.trailing_partial_epoch;
    Json stages = Json::array();
    for (std::size_t i = 0; i < s.stages.size(); ++i) {
        const auto& b = s.stages[i];
        Json st;
        st["stage"] = b.stage;
        st["ratio_exact"] = b.ratio.str();
        st["tokens_total"] = b.total;
        st["tokens_target"] = b.target;
        st["tokens_high"] = b.high;
        if (i < s.patterns.size()) {
            st["interleave"] = {{"rule", "target batches in first n = floor(r*n + 1/2)"},
                                {"period", s.patterns[i].period()}};
        }
        stages.push_back(std::move(st));
    }
    j["stages"] = std::move(stages);
    return j;
}

// ---------------------------------------------------------------------------

Json surrogate_to_json(const SurrogateParams& p) {
    return Json{{"E", p.E},
                {"A", p.A},
                {"alpha_M", p.alpha_M},
                {"B", p.B},
                {"alpha_D", p.alpha_D},
                {"beta", p.beta},
                {"R_star", p.R_star},
                {"gamma", p.gamma},
                {"noise_sigma", p.noise_sigma},
                {"seed", p.seed}};
}

SurrogateParams surrogate_from_json(const nlohmann::json& j, SurrogateParams p) {
    if (!j.is_object()) throw Error(ErrorCode::Parse, "surrogate parameters must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "E") p.E = value.get<double>();
            else if (key == "A") p.A = value.get<double>();
            else if (key == "alpha_M") p.alpha_M = value.get<double>();
            else if (key == "B") p.B = value.get<double>();
            else if (key == "alpha_D") p.alpha_D = value.get<double>();
            else if (key == "beta") p.beta = value.get<double>();
            else if (key == "R_star") p.R_star = value.get<double>();
            else if (key == "gamma") p.gamma = value.get<double>();
            else if (key == "noise_sigma") p.noise_sigma = value.get<double>();
            else if (key == "seed") p.seed = value.get<std::uint64_t>();
            else throw Error(ErrorCode::Parse, "unknown surrogate parameter '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("surrogate parameters: ") + e.what());
    }
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------

Json epoch_fits_to_json(const EpochFitSummary& fits, const std::string& pair, Approach category) {
    Json rows = Json::array();
    double rss = 0.0;
    std::size_t n = 0;
    std::size_t extrapolated = 0;
    for (const auto& f : fits.fits) {
        rows.push_back({{"f_C", f.curve.f_C},
                        {"f_D", f.curve.f_D},
                        {"C", f.curve.compute},
                        {"D_T", f.curve.target_tokens},
                        {"a2", f.fit.a2},
                        {"a1", f.fit.a1},
                        {"a0", f.fit.a0},
                        {"f_k_star", f.fit.f_k_star},
                        {"k_star", f.fit.k_star},
                        {"convex", f.fit.convex},
                        {"extrapolated", f.fit.extrapolated},
                        {"rss", f.fit.rss},
                        {"n_points", f.fit.n_points}});
        rss += f.fit.rss;
        n += f.fit.n_points;
        if (f.fit.extrapolated) ++extrapolated;
    }
    std::vector<std::string> warnings;
    if (fits.underdetermined > 0) {
        warnings.push_back("underdetermined curves skipped: " + std::to_string(fits.underdetermined));
    }
    if (extrapolated > 0) warnings.push_back("extrapolated minimizers: " + std::to_string(extrapolated));
    Json j;
    j["model_type"] = "quadratic_epoch";
    j["parameters"] = {{"language_pair", pair}, {"category", to_string(category)}, {"fits", rows}};
    j["diagnostics"] = diagnostics(rss, n, warnings);
    return j;
}

Json kstar_to_json(const KStarModel& m, std::size_t skipped_extrapolated) {
    const auto& ref = reference_constants();
    Json knots = Json::array();
    for (const auto& k : m.knots) knots.push_back({{"h", k.h}, {"f_D", k.f_D}});
    Json j;
    j["model_type"] = "kstar";
    j["parameters"] = {{"a", m.a},
                       {"approach", to_string(m.approach)},
                       {"reference_compute", ref.compute},
                       {"reference_target_tokens", ref.target_tokens},
                       {"knots", knots}};
    auto warnings = m.warnings;
    if (skipped_extrapolated > 0) {
        warnings.push_back("extrapolated epoch fits skipped: " + std::to_string(skipped_extrapolated));
    }
    j["diagnostics"] = diagnostics(m.rss, m.n_points, warnings);
    return j;
}

KStarModel kstar_from_json(const nlohmann::json& j) {
    expect_type(j, "kstar");
    try {
        const auto& p = j.at("parameters");
        KStarModel m;
        m.a = p.at("a").get<double>();
        m.approach = parse_approach(p.at("approach").get<std::string>());
        for (const auto& k : p.at("knots")) m.knots.push_back({k.at("h").get<double>(), k.at("f_D").get<double>()});
        if (m.knots.size() < 2) throw Error(ErrorCode::Validation, "k* model needs at least 2 knots");
        for (std::size_t i = 1; i < m.knots.size(); ++i) {
            if (!(m.knots[i].f_D < m.knots[i - 1].f_D) || !(m.knots[i].h > m.knots[i - 1].h)) {
                throw Error(ErrorCode::Validation, "k* knots must be ordered with decreasing f_D");
            }
        }
        if (j.contains("diagnostics")) {
            const auto& d = j.at("diagnostics");
            m.rss = d.value("rss", 0.0);
            m.n_points = d.value("n_points", std::size_t{0});
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("k* model: ") + e.what());
    }
}

Json ratio_to_json(const RatioPowerLawFit& fit, std::size_t dropped_groups) {
    Json groups = Json::array();
    for (const auto& g : fit.groups) {
        groups.push_back({{"M", g.model_scale}, {"D", g.total_tokens}, {"L0", g.intercept}, {"n_points", g.n_points}});
    }
    std::vector<std::string> warnings;
    if (dropped_groups > 0) {
        warnings.push_back("groups with a single ratio dropped: " + std::to_string(dropped_groups));
    }
    Json j;
    j["model_type"] = "ratio_power_law";
    j["parameters"] = {{"beta", fit.beta}, {"group_count", fit.groups.size()}, {"groups", groups}};
    j["diagnostics"] = diagnostics(fit.rss, fit.residuals.size(), warnings);
    return j;
}

RatioPowerLawFit ratio_from_json(const nlohmann::json& j) {
    expect_type(j, "ratio_power_law");
    try {
        const auto& p = j.at("parameters");
        RatioPowerLawFit fit;
        fit.beta = p.at("beta").get<double>();
        for (const auto& g : p.at("groups")) {
            fit.groups.push_back({g.at("M").get<double>(), g.at("D").get<double>(), g.at("L0").get<double>(),
                                  g.value("n_points", std::size_t{0})});
        }
        fit.rss = j.at("diagnostics").value("rss", 0.0);
        return fit;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("ratio model: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

Json report_to_json(const AnalysisReport& report, const IngestReport& ingest) {
    Json j;
    j["schema_version"] = 1;
    j["epsilon"] = report.epsilon;
    Json rejected = Json::array();
    for (const auto& r : ingest.rejected) {
        rejected.push_back({{"line", r.line}, {"setup_id", r.setup_id}, {"reason", r.reason}});
    }
    j["ingest"] = {{"accepted", ingest.results.measurements.size()},
                   {"duplicates", ingest.duplicates},
                   {"rejected", rejected}};

    Json pairs = Json::array();
    for (const auto& pa : report.pairs) {
        Json p;
        p["language_pair"] = pa.language_pair;

        Json optimal = Json::array();
        for (const auto& e : pa.compute_optimal) {
            optimal.push_back({{"f_C", e.f_C}, {"C", e.compute}, {"D_star", e.d_star}, {"setup_id", e.setup_id}});
        }
        p["compute_optimal"] = std::move(optimal);

        Json thresholds = Json::array();
        for (const auto& t : pa.thresholds) {
            thresholds.push_back({{"f_C", t.f_C},
                                  {"C", t.compute},
                                  {"D_star", t.d_star},
                                  {"crossing", t.crossing},
                                  {"no_upper_crossing", t.no_upper_crossing},
                                  {"f_D_low", opt_int(t.f_D_low)},
                                  {"f_D_high", opt_int(t.f_D_high)},
                                  {"D_T_low", opt_number(t.target_tokens_low)},
                                  {"D_T_high", opt_number(t.target_tokens_high)},
                                  {"ratio_low", opt_number(t.ratio_low)},
                                  {"ratio_high", opt_number(t.ratio_high)}});
        }
        p["thresholds"] = std::move(thresholds);

        Json minima = Json::array();
        for (const auto& m : pa.minima) {
            Json row{{"f_C", m.f_C}, {"f_D", m.f_D}, {"C", m.compute}, {"D_T", m.target_tokens}};
            for (auto cat : {Approach::Mono1Stage, Approach::Multi1Stage, Approach::Multi2Stage}) {
                const auto& b = m.at(cat);
                row[to_string(cat)] = b ? Json{{"loss", b->loss}, {"setup_id", b->setup_id}} : Json(nullptr);
            }
            minima.push_back(std::move(row));
        }
        p["category_minima"] = std::move(minima);

        Json winners = Json::array();
        for (const auto& w : pa.scales.winners) {
            winners.push_back({{"f_C", w.f_C},
                               {"f_D", w.f_D},
                               {"f_M", w.f_M},
                               {"M", w.model_scale},
                               {"loss", w.loss},
                               {"setup_id", w.setup_id}});
        }
        Json folds = Json::array();
        for (const auto& f : pa.scales.fold_changes) {
            folds.push_back({{"f_C", f.f_C}, {"fold_change", f.fold_change}, {"f_M_min", f.f_M_min}, {"f_M_max", f.f_M_max}});
        }
        p["optimal_scale"] = {{"winners", winners}, {"fold_changes", folds}};
        pairs.push_back(std::move(p));
    }
    j["pairs"] = std::move(pairs);
    return j;
}

void write_minima_csv(std::ostream& out, const AnalysisReport& report) {
    out << "language_pair,f_C,f_D,C,D_T,mono_1stage,multi_1stage,multi_2stage\n";
    for (const auto& pa : report.pairs) {
        for (const auto& m : pa.minima) {
            out << pa.language_pair << ',' << m.f_C << ',' << m.f_D << ',' << format_double(m.compute) << ','
                << format_double(m.target_tokens) << ',' << opt_cell(m.mono) << ',' << opt_cell(m.multi1) << ','
                << opt_cell(m.multi2) << '\n';
        }
    }
}

void write_scale_csv(std::ostream& out, const AnalysisReport& report) {
    out << "language_pair,f_C,f_D,f_M,M,loss,setup_id,winner\n";
    for (const auto& pa : report.pairs) {
        std::set<std::string> winning;
        for (const auto& w : pa.scales.winners) winning.insert(w.setup_id);
        for (const auto& c : pa.scales.cells) {
            const double m = reference_constants().model_scale / std::exp2(c.f_M);
            out << pa.language_pair << ',' << c.f_C << ',' << c.f_D << ',' << c.f_M << ',' << format_double(m) << ','
                << format_double(c.loss) << ',' << c.setup_id << ',' << (winning.count(c.setup_id) ? 1 : 0) << '\n';
        }
    }
}

void write_epoch_csv(std::ostream& out, const EpochFitSummary& fits, const std::string& pair) {
    out << "language_pair,f_C,f_D,f_k,loss,fitted,f_k_star\n";
    for (const auto& f : fits.fits) {
        for (const auto& p : f.curve.points) {
            out << pair << ',' << f.curve.f_C << ',' << f.curve.f_D << ',' << format_double(p.f_k) << ','
                << format_double(p.loss) << ',' << format_double(f.fit.predict(p.f_k)) << ','
                << format_double(f.fit.f_k_star) << '\n';
        }
    }
}

void write_ratio_csv(std::ostream& out, const RatioInputs& inputs, const RatioPowerLawFit* fit) {
    out << "M,D,r,loss,predicted\n";
    for (const auto& p : inputs.points) {
        out << format_double(p.model_scale) << ',' << format_double(p.total_tokens) << ',' << format_double(p.ratio)
            << ',' << format_double(p.loss) << ',';
        if (fit) out << format_double(fit->predict(p.model_scale, p.total_tokens, p.ratio));
        out << '\n';
    }
}

std::string render_summary(const AnalysisReport& report) {
    std::ostringstream os;
    for (const auto& pa : report.pairs) {
        os << "pair " << pa.language_pair << '\n';
        for (std::size_t i = 0; i < pa.thresholds.size(); ++i) {
            const auto& t = pa.thresholds[i];
            os << "  f_C=" << t.f_C << "  C=" << format_double(t.compute) << "  D*=" << format_double(t.d_star);
            if (!t.crossing) {
                os << "  no crossing\n";
            } else if (t.no_upper_crossing) {
                os << "  multi-2stage wins up to D_T=" << format_double(*t.target_tokens_low)
                   << " (no upper crossing)\n";
            } else {
                os << "  switch between D_T=" << format_double(*t.target_tokens_low) << " and "
                   << format_double(*t.target_tokens_high) << " (D*/" << format_double(1.0 / *t.ratio_low) << " .. D*/"
                   << format_double(1.0 / *t.ratio_high) << ")\n";
            }
        }
        for (const auto& f : pa.scales.fold_changes) {
            os << "  f_C=" << f.f_C << "  winning-M fold change " << format_double(f.fold_change) << '\n';
        }
    }
    return os.str();
}

// ---------------------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::Validation, "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error(ErrorCode::Validation, "write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::Validation, "cannot move output into '" + path.string() + "'");
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Validation, "cannot read '" + path.string() + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

} // namespace sweepplan
